"""Photon detection chain: HBT splitter, SPADs, time-tag digitization.

All timestamps are int64 picoseconds since acquisition start.  The SPAD
model is, in order: binomial thinning by quantum efficiency, Poisson dark
counts, Gaussian timing jitter (applied in continuous time, rounded to
the 1 ps grid with ties to even), and a non-paralyzable dead time that
drops any tag within ``dead_time`` of the previously kept one.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "SpadSpec",
    "TagStream",
    "TagStreamError",
    "split_hbt",
    "apply_detector",
    "write_tags",
    "read_tags",
    "write_tags_csv",
    "read_tags_csv",
]

PBTG_MAGIC = b"PBTG"
PBTG_VERSION = 1
PS_PER_NS = 1000.0
PS_PER_S = 1_000_000_000_000


class TagStreamError(ValueError):
    """Malformed timestamp stream or tag file."""


@dataclass(frozen=True)
class SpadSpec:
    """Single-photon avalanche diode parameters (typical actively quenched unit)."""

    efficiency: float = 0.6
    dead_time_ns: float = 45.0
    jitter_sigma_ps: float = 350.0
    dark_count_rate: float = 250.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in [0, 1], got {self.efficiency}")
        if self.dead_time_ns < 0 or self.jitter_sigma_ps < 0 or self.dark_count_rate < 0:
            raise ValueError("dead_time, jitter and dark rate must be >= 0")


@dataclass
class TagStream:
    """Ordered photon detection timestamps on one channel."""

    channel: int
    timestamps: np.ndarray      # int64 ps, non-decreasing, within [0, duration]
    duration_ps: int

    def __post_init__(self):
        self.timestamps = np.ascontiguousarray(np.asarray(self.timestamps, dtype=np.int64))
        if not 0 <= self.channel <= 0xFFFF:
            raise TagStreamError(f"channel must fit in u16, got {self.channel}")
        t = self.timestamps
        if t.size:
            if np.any(np.diff(t) < 0):
                raise TagStreamError("timestamps must be non-decreasing")
            if t[0] < 0 or t[-1] > self.duration_ps:
                raise TagStreamError("timestamps must lie within [0, duration]")

    @property
    def count(self) -> int:
        return int(self.timestamps.size)

    @property
    def rate_per_s(self) -> float:
        if self.duration_ps == 0:
            return 0.0
        return self.count * PS_PER_S / self.duration_ps


def split_hbt(photons, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Route each photon to one arm of the 50/50 beamsplitter independently.

    The union of the two arms is the input; both stay ordered.
    """
    t = np.asarray(photons, dtype=np.int64)
    if t.size > 1 and np.any(np.diff(t) < 0):
        raise TagStreamError("input photons must be time-ordered")
    to_a = rng.random(t.size) < 0.5
    return t[to_a], t[~to_a]


@njit(cache=True)
def _dead_time_filter(times, dead_ps):  # pragma: no cover - jitted
    keep = np.empty(times.size, dtype=np.bool_)
    last = -dead_ps - 1
    for i in range(times.size):
        if times[i] - last > dead_ps:
            keep[i] = True
            last = times[i]
        else:
            keep[i] = False
    return keep


def _detect_window(arm: np.ndarray, spad: SpadSpec, t0_ps: int, t1_ps: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Detector chain on one arm restricted to the window [t0, t1)."""
    t = np.asarray(arm, dtype=np.int64)
    # (1) quantum efficiency thinning
    if spad.efficiency < 1.0:
        t = t[rng.random(t.size) < spad.efficiency]
    # (2) Poisson dark counts, uniform over the window
    span_s = (t1_ps - t0_ps) / PS_PER_S
    n_dark = rng.poisson(spad.dark_count_rate * span_s)
    if n_dark:
        darks = np.rint(rng.uniform(float(t0_ps), float(t1_ps), n_dark)).astype(np.int64)
        # (3) merge and sort
        t = np.sort(np.concatenate([t, darks]))
    # (4) Gaussian timing jitter on the 1 ps grid, then re-sort
    if spad.jitter_sigma_ps > 0 and t.size:
        t = np.rint(t + rng.normal(0.0, spad.jitter_sigma_ps, t.size)).astype(np.int64)
        t = t[(t >= t0_ps) & (t < t1_ps)]
        t.sort()
    # (5) non-paralyzable dead time
    dead_ps = int(round(spad.dead_time_ns * PS_PER_NS))
    if dead_ps > 0 and t.size:
        t = t[_dead_time_filter(t, np.int64(dead_ps))]
    return t


def apply_detector(arm, spad: SpadSpec, duration_ps: int,
                   rng: np.random.Generator, channel: int = 0) -> TagStream:
    """Turn ideal photon arrival times on one arm into detector tags."""
    t = np.asarray(arm, dtype=np.int64)
    if t.size > 1 and np.any(np.diff(t) < 0):
        raise TagStreamError("arm photons must be time-ordered")
    if t.size and (t[0] < 0 or t[-1] > duration_ps):
        raise TagStreamError("arm photons must lie within [0, duration]")
    out = _detect_window(t, spad, 0, int(duration_ps), rng)
    return TagStream(channel=channel, timestamps=out, duration_ps=int(duration_ps))


# ---------------------------------------------------------------------------
# tag file formats

def write_tags(stream: TagStream, path) -> None:
    """Binary tag file: magic 'PBTG', u16 version, u16 channel, u64 count,
    then count little-endian u64 picosecond timestamps."""
    with open(path, "wb") as f:
        f.write(PBTG_MAGIC)
        f.write(struct.pack("<HHQ", PBTG_VERSION, stream.channel, stream.count))
        f.write(stream.timestamps.astype("<u8").tobytes())


def read_tags(path) -> TagStream:
    """Read a PBTG file.  The acquisition span is not stored in the format;
    it is reconstructed as the last timestamp (0 for an empty stream)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != PBTG_MAGIC:
            raise TagStreamError(f"{path}: not a PBTG tag file (magic {magic!r})")
        version, channel, count = struct.unpack("<HHQ", f.read(12))
        if version != PBTG_VERSION:
            raise TagStreamError(f"{path}: unsupported PBTG version {version}")
        raw = f.read(8 * count)
        if len(raw) != 8 * count:
            raise TagStreamError(f"{path}: truncated tag file")
    t = np.frombuffer(raw, dtype="<u8").astype(np.int64)
    duration = int(t[-1]) if t.size else 0
    return TagStream(channel=channel, timestamps=t, duration_ps=duration)


def write_tags_csv(stream: TagStream, path) -> None:
    with open(path, "w") as f:
        f.write("channel,timestamp_ps\n")
        for t in stream.timestamps:
            f.write(f"{stream.channel},{int(t)}\n")


def read_tags_csv(path) -> TagStream:
    with open(path) as f:
        header = f.readline().strip()
        if header != "channel,timestamp_ps":
            raise TagStreamError(f"{path}: expected header 'channel,timestamp_ps'")
        channels = []
        times = []
        for line in f:
            line = line.strip()
            if not line:
                continue
            c, t = line.split(",")
            channels.append(int(c))
            times.append(int(t))
    uniq = set(channels)
    if len(uniq) > 1:
        raise TagStreamError(f"{path}: mixed channels {sorted(uniq)} in one stream file")
    channel = uniq.pop() if uniq else 0
    t = np.asarray(times, dtype=np.int64)
    duration = int(t[-1]) if t.size else 0
    return TagStream(channel=channel, timestamps=t, duration_ps=duration)
