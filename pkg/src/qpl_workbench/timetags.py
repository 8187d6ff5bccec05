"""Two-detector time-tag streams and simple histograms, with the CSV
formats shared between the stream simulator and the fitters.

Stream CSV: header ``channel,timestamp_ps``, one event per row, with
``# key=value`` comment lines carrying duration/mode metadata.
Histogram CSV: header ``bin_center_ps,counts``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

CW = "cw"
PULSED = "pulsed"


@dataclass
class TimeTagStream:
    """Ordered detection events on two detector channels.

    Timestamps are picoseconds from the acquisition start, globally
    sorted (hence nondecreasing per channel).
    """

    channels: np.ndarray
    timestamps_ps: np.ndarray
    duration_ps: float
    mode: str = CW
    rep_period_ps: float | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.uint8)
        self.timestamps_ps = np.asarray(self.timestamps_ps, dtype=float)
        if self.channels.shape != self.timestamps_ps.shape:
            raise DataError("channels and timestamps must have equal length")
        if self.timestamps_ps.size and np.any(np.diff(self.timestamps_ps) < 0):
            raise DataError("timestamps must be globally sorted")
        if self.timestamps_ps.size and self.duration_ps < self.timestamps_ps[-1]:
            raise DataError("duration shorter than the last timestamp")
        if self.mode == PULSED and not self.rep_period_ps:
            raise DataError("pulsed streams need a repetition period")

    @property
    def n_events(self) -> int:
        return int(self.timestamps_ps.size)

    def channel_times(self, channel: int) -> np.ndarray:
        return self.timestamps_ps[self.channels == channel]

    def rate_per_s(self, channel: int | None = None) -> float:
        n = self.n_events if channel is None else self.channel_times(channel).size
        return n / (self.duration_ps * 1e-12)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# duration_ps={self.duration_ps!r}\n")
        buf.write(f"# mode={self.mode}\n")
        if self.rep_period_ps:
            buf.write(f"# rep_period_ps={self.rep_period_ps!r}\n")
        for flag in self.flags:
            buf.write(f"# flag={flag}\n")
        buf.write("channel,timestamp_ps\n")
        for c, t in zip(self.channels, self.timestamps_ps):
            buf.write(f"{c},{t:.3f}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TimeTagStream":
        meta = {}
        flags = []
        chans = []
        times = []
        seen_header = False
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    if k.strip() == "flag":
                        flags.append(v.strip())
                    else:
                        meta[k.strip()] = v.strip()
                continue
            if not seen_header:
                if line.lower().replace(" ", "") != "channel,timestamp_ps":
                    raise DataError(f"unexpected stream header {line!r}")
                seen_header = True
                continue
            c, t = line.split(",")
            chans.append(int(c))
            times.append(float(t))
        times_arr = np.asarray(times, dtype=float)
        duration = float(meta.get("duration_ps", times_arr[-1] if times else 0.0))
        rep = meta.get("rep_period_ps")
        return cls(
            channels=np.asarray(chans, dtype=np.uint8),
            timestamps_ps=times_arr,
            duration_ps=duration,
            mode=meta.get("mode", CW),
            rep_period_ps=float(rep) if rep else None,
            flags=tuple(flags),
        )


@dataclass
class Histogram:
    """Uniformly binned counts, e.g. a fluorescence decay or an IRF."""

    bin_centers_ps: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.bin_centers_ps = np.asarray(self.bin_centers_ps, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.bin_centers_ps.size != self.counts.size:
            raise DataError("bin centers and counts must have equal length")
        if self.bin_centers_ps.size < 2:
            raise DataError("histogram needs at least two bins")
        steps = np.diff(self.bin_centers_ps)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9):
            raise DataError("bins must be uniform and increasing")

    @property
    def bin_width_ps(self) -> float:
        return float(self.bin_centers_ps[1] - self.bin_centers_ps[0])

    @property
    def span_ps(self) -> float:
        return self.bin_width_ps * self.bin_centers_ps.size

    def to_csv(self) -> str:
        lines = ["bin_center_ps,counts"]
        for c, n in zip(self.bin_centers_ps, self.counts):
            lines.append(f"{c:.6f},{n:.6f}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "Histogram":
        centers = []
        counts = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("bin_center"):
                continue
            c, n = line.split(",")
            centers.append(float(c))
            counts.append(float(n))
        return cls(np.asarray(centers), np.asarray(counts))
