"""Self-hosted rendezvous: signaling registry plus a byte-agnostic relay.

Both endpoints dial out: the sender and receiver each register a channel id
with the signaling listener, get back a grant (relay port + 16-byte key),
then attach to the relay listener. Once both roles of a channel are
attached the relay splices the two connections byte-for-byte. All packet
logic stays in the transport layer; the relay never inspects stream bytes.

Wire surfaces:

* Signaling (TCP, UTF-8 lines, one request per connection):
  ``REG <sender|receiver> <channel_id>\\n`` ->
  ``OK <relay_port> <key_hex>\\n`` or ``ERR <code> <message>\\n``.
* Relay attach preamble (binary): magic ``3CPA``, role byte (0x01 sender,
  0x02 receiver), channel_id u64 BE, 16 key bytes. The relay answers one
  byte: 0x00 parked/paired, 0xFF rejected.
"""

from __future__ import annotations

import secrets
from collections import deque
import socket
import struct
import threading
import time
from dataclasses import dataclass, field

from .errors import RelayAuthError, SignalingError

ATTACH_MAGIC = b"3CPA"
ROLE_SENDER = 0x01
ROLE_RECEIVER = 0x02
_ROLE_BYTES = {"sender": ROLE_SENDER, "receiver": ROLE_RECEIVER}

_PREAMBLE = struct.Struct(">4sBQ16s")

ACCEPTED = b"\x00"
REJECTED = b"\xff"


def _quiet_close(sock: socket.socket):
    try:
        sock.close()
    except OSError:
        pass


@dataclass(frozen=True)
class ChannelGrant:
    channel_id: int
    relay_host: str
    relay_port: int
    key: bytes

    def __post_init__(self):
        if len(self.key) != 16:
            raise ValueError("channel key must be 16 bytes")


class _SpliceBuffer:
    """Bounded FIFO of byte chunks between the two halves of a splice."""

    def __init__(self, max_bytes: int = 128 * 1024 * 1024):
        self.max_bytes = max_bytes
        self._chunks: deque = deque()
        self._bytes = 0
        self._closed = False
        self._aborted = False
        self._cond = threading.Condition()

    def put(self, data: bytes):
        with self._cond:
            while self._bytes >= self.max_bytes and not self._aborted:
                self._cond.wait(0.2)
            if self._aborted:
                raise OSError("splice aborted")
            self._chunks.append(data)
            self._bytes += len(data)
            self._cond.notify_all()

    def get(self):
        with self._cond:
            while not self._chunks and not self._closed and not self._aborted:
                self._cond.wait(0.2)
            if self._chunks:
                data = self._chunks.popleft()
                self._bytes -= len(data)
                self._cond.notify_all()
                return data
            return None  # closed or aborted with nothing pending

    def close(self):
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def abort(self):
        with self._cond:
            self._aborted = True
            self._chunks.clear()
            self._bytes = 0
            self._cond.notify_all()


@dataclass
class _Channel:
    key: bytes
    created_at: float
    registered: set = field(default_factory=set)
    attached: dict = field(default_factory=dict)  # role -> socket
    paired: bool = False


class RelayServer:
    """Runs the signaling and relay listeners on background threads."""

    def __init__(
        self,
        host: str = "127.0.0.1",
        signal_port: int = 0,
        relay_port: int = 0,
        ttl_seconds: float = 120.0,
        max_channels: int = 256,
    ):
        self.host = host
        self.ttl = ttl_seconds
        self.max_channels = max_channels
        self._channels: dict[int, _Channel] = {}
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []

        self._signal_sock = self._listen(signal_port)
        self._relay_sock = self._listen(relay_port)
        self.signal_port = self._signal_sock.getsockname()[1]
        self.relay_port = self._relay_sock.getsockname()[1]

    def _listen(self, port: int) -> socket.socket:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            sock.bind((self.host, port))
        except OSError as exc:
            raise SignalingError(f"cannot bind {self.host}:{port}: {exc}") from exc
        sock.listen(64)
        sock.settimeout(0.2)
        return sock

    def start(self):
        for target in (self._serve_signaling, self._serve_relay, self._sweep_expired):
            t = threading.Thread(target=target, daemon=True)
            t.start()
            self._threads.append(t)
        return self

    def stop(self):
        self._stop.set()
        for t in self._threads:
            t.join(timeout=2)
        with self._lock:
            for chan in self._channels.values():
                for sock in chan.attached.values():
                    _quiet_close(sock)
            self._channels.clear()
        self._signal_sock.close()
        self._relay_sock.close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    # --- signaling ---

    def _serve_signaling(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._signal_sock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            threading.Thread(
                target=self._handle_signaling, args=(conn,), daemon=True
            ).start()

    def _handle_signaling(self, conn: socket.socket):
        with conn:
            conn.settimeout(5)
            try:
                line = _read_line(conn)
                reply = self._signaling_reply(line)
            except (OSError, ValueError) as exc:
                reply = f"ERR malformed {exc}\n"
            try:
                conn.sendall(reply.encode())
            except OSError:
                pass

    def _signaling_reply(self, line: str) -> str:
        parts = line.split()
        if len(parts) != 3 or parts[0] != "REG":
            return "ERR malformed expected 'REG <role> <channel_id>'\n"
        _, role, chan_str = parts
        if role not in _ROLE_BYTES:
            return f"ERR bad-role unknown role {role}\n"
        try:
            channel_id = int(chan_str)
        except ValueError:
            return f"ERR malformed channel id {chan_str!r}\n"
        if not 0 <= channel_id < 2**64:
            return "ERR malformed channel id out of u64 range\n"

        with self._lock:
            chan = self._channels.get(channel_id)
            if chan is None:
                if len(self._channels) >= self.max_channels:
                    return f"ERR capacity at max {self.max_channels} channels\n"
                chan = _Channel(key=secrets.token_bytes(16), created_at=time.monotonic())
                self._channels[channel_id] = chan
            if role in chan.attached:
                return f"ERR conflict {role} already attached on channel {channel_id}\n"
            chan.registered.add(role)
            return f"OK {self.relay_port} {chan.key.hex()}\n"

    # --- relay ---

    def _serve_relay(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._relay_sock.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            threading.Thread(target=self._handle_attach, args=(conn,), daemon=True).start()

    def _handle_attach(self, conn: socket.socket):
        conn.settimeout(10)
        try:
            raw = _read_exact(conn, _PREAMBLE.size)
            magic, role_byte, channel_id, key = _PREAMBLE.unpack(raw)
        except OSError:
            _quiet_close(conn)
            return
        role = {ROLE_SENDER: "sender", ROLE_RECEIVER: "receiver"}.get(role_byte)
        with self._lock:
            chan = self._channels.get(channel_id)
            ok = (
                magic == ATTACH_MAGIC
                and role is not None
                and chan is not None
                and secrets.compare_digest(key, chan.key)
                and role not in chan.attached
            )
            if ok:
                chan.attached[role] = conn
                counterpart = chan.attached.get(
                    "receiver" if role == "sender" else "sender"
                )
                pair = None
                if counterpart is not None:
                    chan.paired = True
                    pair = (chan.attached["sender"], chan.attached["receiver"])
        if not ok:
            try:
                conn.sendall(REJECTED)
            except OSError:
                pass
            _quiet_close(conn)
            return
        conn.settimeout(None)
        try:
            conn.sendall(ACCEPTED)
        except OSError:
            _quiet_close(conn)
            return
        if pair is not None:
            sender_sock, receiver_sock = pair
            for src, dst in ((sender_sock, receiver_sock), (receiver_sock, sender_sock)):
                buf = _SpliceBuffer()
                threading.Thread(
                    target=self._pump_in, args=(src, buf), daemon=True
                ).start()
                threading.Thread(
                    target=self._pump_out, args=(buf, dst), daemon=True
                ).start()

    # Each direction is spliced through an elastic in-memory buffer so a
    # slow reader doesn't immediately back-pressure the writer through raw
    # TCP buffers; the cap keeps relay memory bounded per direction.

    def _pump_in(self, src: socket.socket, buf: "_SpliceBuffer"):
        try:
            while not self._stop.is_set():
                data = src.recv(65536)
                if not data:
                    break
                buf.put(data)
        except OSError:
            pass
        finally:
            buf.close()

    def _pump_out(self, buf: "_SpliceBuffer", dst: socket.socket):
        try:
            while True:
                data = buf.get()
                if data is None:
                    break
                dst.sendall(data)
        except OSError:
            buf.abort()
        finally:
            try:
                dst.shutdown(socket.SHUT_WR)
            except OSError:
                pass

    # --- expiry ---

    def _sweep_expired(self):
        while not self._stop.wait(min(1.0, self.ttl / 4)):
            now = time.monotonic()
            with self._lock:
                expired = [
                    cid
                    for cid, chan in self._channels.items()
                    if not chan.paired and now - chan.created_at > self.ttl
                ]
                for cid in expired:
                    chan = self._channels.pop(cid)
                    for sock in chan.attached.values():
                        _quiet_close(sock)


# --- client side ---


def register_channel(
    signal_addr: tuple[str, int], role: str, channel_id: int, timeout: float = 5.0
) -> ChannelGrant:
    """Ask the signaling server for a grant on the given channel."""
    if role not in _ROLE_BYTES:
        raise ValueError(f"role must be sender or receiver, got {role!r}")
    try:
        with socket.create_connection(signal_addr, timeout=timeout) as conn:
            conn.sendall(f"REG {role} {channel_id}\n".encode())
            line = _read_line(conn)
    except OSError as exc:
        raise SignalingError(f"signaling at {signal_addr} unreachable: {exc}") from exc
    parts = line.split(maxsplit=2)
    if parts[0] == "OK" and len(parts) == 3:
        return ChannelGrant(
            channel_id=channel_id,
            relay_host=signal_addr[0],
            relay_port=int(parts[1]),
            key=bytes.fromhex(parts[2]),
        )
    raise SignalingError(f"registration refused: {line.strip()}")


def attach(grant: ChannelGrant, role: str, timeout: float = 10.0) -> socket.socket:
    """Dial the relay and attach; returns the spliced socket."""
    conn = socket.create_connection((grant.relay_host, grant.relay_port), timeout=timeout)
    try:
        conn.sendall(
            _PREAMBLE.pack(ATTACH_MAGIC, _ROLE_BYTES[role], grant.channel_id, grant.key)
        )
        verdict = _read_exact(conn, 1)
    except OSError as exc:
        conn.close()
        raise RelayAuthError(f"relay attach failed: {exc}") from exc
    if verdict != ACCEPTED:
        conn.close()
        raise RelayAuthError(f"relay rejected attach on channel {grant.channel_id}")
    conn.settimeout(None)
    return conn


def _read_exact(conn: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = conn.recv(n - len(buf))
        if not chunk:
            raise OSError(f"connection closed after {len(buf)}/{n} bytes")
        buf.extend(chunk)
    return bytes(buf)


def _read_line(conn: socket.socket, limit: int = 1024) -> str:
    buf = bytearray()
    while not buf.endswith(b"\n"):
        if len(buf) > limit:
            raise ValueError("line too long")
        chunk = conn.recv(1)
        if not chunk:
            break
        buf.extend(chunk)
    return buf.decode("utf-8", errors="replace")
