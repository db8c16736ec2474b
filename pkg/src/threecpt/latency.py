"""One-way latency accounting from embedded frame timestamps.

Each sample is the receiver's wall-clock completion time minus the sender's
embedded timestamp, in microseconds. Samples are only meaningful when both
sides share a clock (same host) or the caller corrects for a known offset;
cross-host reports carry that caveat. Summary statistics: min, median
(mean of the two middles for even counts, floored to the microsecond),
p95 by nearest rank (sorted[ceil(0.95 * n) - 1]), and max. Schema in docs/latency.md.
"""

from __future__ import annotations

import json
import math

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ThreecptError


class EmptyReportError(ThreecptError):
    """No latency samples were collected."""


@dataclass
class LatencyReport:
    samples_us: list = field(default_factory=list)
    clock_note: str = "same-host timestamps; no clock offset applied"

    def add(self, recv_wall_us: int, sender_timestamp_us: int) -> None:
        self.samples_us.append(recv_wall_us - sender_timestamp_us)

    @property
    def count(self) -> int:
        return len(self.samples_us)

    def _require_samples(self):
        if not self.samples_us:
            raise EmptyReportError("latency report has zero samples")

    @property
    def min_us(self) -> float:
        self._require_samples()
        return min(self.samples_us)

    @property
    def max_us(self) -> float:
        self._require_samples()
        return max(self.samples_us)

    @property
    def median_us(self) -> int:
        self._require_samples()
        ordered = sorted(self.samples_us)
        n = len(ordered)
        if n % 2:
            return ordered[n // 2]
        return (ordered[n // 2 - 1] + ordered[n // 2]) // 2

    @property
    def p95_us(self) -> float:
        self._require_samples()
        ordered = sorted(self.samples_us)
        return ordered[math.ceil(0.95 * len(ordered)) - 1]

    def summary(self) -> dict:
        self._require_samples()
        return {
            "count": self.count,
            "min_us": self.min_us,
            "median_us": self.median_us,
            "p95_us": self.p95_us,
            "max_us": self.max_us,
        }

    def to_json(self) -> str:
        return json.dumps(
            {"samples_us": self.samples_us, "clock_note": self.clock_note, **self.summary()},
            indent=2,
        )

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def from_json(cls, text: str) -> "LatencyReport":
        obj = json.loads(text)
        return cls(samples_us=list(obj["samples_us"]), clock_note=obj.get("clock_note", ""))
