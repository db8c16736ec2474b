"""End-to-end loopback: relay, sender, and receiver in one process.

Starts the signaling + relay service on ephemeral ports, streams a short
synthetic container through it at 30 fps, and prints the sender and receiver
reports plus the latency summary. This is the same path the rgbz-send /
rgbz-recv / rgbz-relay executables take, minus the process boundaries. Run
with:

    python demos/loopback_stream.py
"""

import json
import tempfile
import threading
from pathlib import Path

from threecpt import cli, container
from threecpt.relay import RelayServer


def main():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "demo.rgbz"
        hdr, frames = container.gen_synthetic(640, 480, (30, 1), 45)
        container.write_container(path, hdr, frames)
        print(f"wrote {len(frames)} frames to {path.name} "
              f"({path.stat().st_size / 1e6:.1f} MB)")

        with RelayServer() as server:
            addr = (server.host, server.signal_port)
            print(f"relay up: signaling {addr[0]}:{addr[1]}, "
                  f"relay port {server.relay_port}")

            result = {}

            def receive():
                cfg = cli.ReceiverConfig(signal_addr=addr, channel_id=7)
                result["report"], result["latency"] = cli.run_receiver(cfg)

            rx = threading.Thread(target=receive)
            rx.start()
            send = cli.run_sender(
                cli.SenderConfig(source=str(path), signal_addr=addr, channel_id=7)
            )
            rx.join()

        print("\nsender:  ", json.dumps(send.to_dict()))
        print("receiver:", json.dumps(result["report"].to_dict()))
        print("latency: ", json.dumps(result["latency"].summary()))


if __name__ == "__main__":
    main()
