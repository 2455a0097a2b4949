"""Cross-correlation histogramming of photon timestamp channels.

Conventions (fixed here because hardware correlators disagree among each
other): delays are tau = t_b - t_a in picoseconds, bins are half-open,
and with the default 1000 bins of 200 ps, bin 500 covers [0, 200) ps.
Counts are int64 so that hour-long acquisitions at MHz rates cannot
overflow.  ``correlate`` is the production two-pointer implementation;
``correlate_bruteforce`` is the O(N^2) ground truth it is tested against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

__all__ = [
    "HistogramSpec",
    "CorrelationHistogram",
    "CorrelatorError",
    "correlate",
    "correlate_bruteforce",
    "autocorrelate",
    "Accumulator",
    "normalize",
    "histogram_to_json",
    "histogram_from_json",
    "histogram_to_csv",
    "histogram_from_csv",
]

HISTOGRAM_SCHEMA = "photonbench.histogram/1"


class CorrelatorError(ValueError):
    """Invalid input to a correlation operation."""


@dataclass(frozen=True)
class HistogramSpec:
    """Binning of the delay window.

    bin k covers [(k - bin_count/2) * bin_width_ps, (k+1 - bin_count/2) * bin_width_ps)
    """

    bin_width_ps: int = 200
    bin_count: int = 1000

    def __post_init__(self):
        if self.bin_width_ps <= 0:
            raise CorrelatorError(f"bin_width_ps must be > 0, got {self.bin_width_ps}")
        if self.bin_count < 2 or self.bin_count % 2 != 0:
            raise CorrelatorError(f"bin_count must be even and >= 2, got {self.bin_count}")

    @property
    def window_lo_ps(self) -> int:
        return -(self.bin_count // 2) * self.bin_width_ps

    @property
    def window_hi_ps(self) -> int:
        return (self.bin_count // 2) * self.bin_width_ps

    def bin_edges(self) -> np.ndarray:
        return self.window_lo_ps + np.arange(self.bin_count + 1, dtype=np.int64) * self.bin_width_ps

    def bin_centers(self) -> np.ndarray:
        return self.window_lo_ps + (np.arange(self.bin_count, dtype=np.float64) + 0.5) * self.bin_width_ps

    def bin_of(self, tau_ps: int) -> int:
        """Bin index for a delay, or -1 if outside the window."""
        if tau_ps < self.window_lo_ps or tau_ps >= self.window_hi_ps:
            return -1
        return int((tau_ps - self.window_lo_ps) // self.bin_width_ps)


@dataclass
class CorrelationHistogram:
    spec: HistogramSpec
    counts: np.ndarray            # int64, length spec.bin_count
    n_a: int
    n_b: int
    duration_ps: int
    normalized: np.ndarray | None = None   # g2 estimate per bin, if computed
    complete: bool = True

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (self.spec.bin_count,):
            raise CorrelatorError(
                f"counts has shape {self.counts.shape}, expected ({self.spec.bin_count},)"
            )


def _as_times(x) -> np.ndarray:
    if hasattr(x, "timestamps"):
        x = x.timestamps
    return np.ascontiguousarray(np.asarray(x, dtype=np.int64))


def _check_sorted(t: np.ndarray, name: str) -> None:
    if t.size > 1 and np.any(np.diff(t) < 0):
        raise CorrelatorError(f"channel {name} is not time-ordered; refusing to sort silently")


def _duration_of(x, fallback: int) -> int:
    if hasattr(x, "duration_ps"):
        return int(x.duration_ps)
    return fallback


@njit(cache=True)
def _pair_count_kernel(a, b, win_lo, win_hi, bin_width, counts):  # pragma: no cover - jitted
    lo = 0
    hi = 0
    n_b = b.size
    for i in range(a.size):
        tmin = a[i] + win_lo
        tmax = a[i] + win_hi
        while lo < n_b and b[lo] < tmin:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < n_b and b[hi] < tmax:
            hi += 1
        for j in range(lo, hi):
            counts[(b[j] - tmin) // bin_width] += 1


def _count_pairs(a: np.ndarray, b: np.ndarray, spec: HistogramSpec) -> np.ndarray:
    counts = np.zeros(spec.bin_count, dtype=np.int64)
    if a.size and b.size:
        _pair_count_kernel(
            a, b,
            np.int64(spec.window_lo_ps), np.int64(spec.window_hi_ps),
            np.int64(spec.bin_width_ps), counts,
        )
    return counts


def correlate(a, b, spec: HistogramSpec = HistogramSpec()) -> CorrelationHistogram:
    """Histogram every ordered pair delay tau = t_b - t_a inside the window.

    Accepts TagStreams or plain int64 picosecond arrays.  Linear-time
    two-pointer sweep; bit-identical to ``correlate_bruteforce``.
    """
    ta, tb = _as_times(a), _as_times(b)
    _check_sorted(ta, "a")
    _check_sorted(tb, "b")
    dur = max(_duration_of(a, int(ta[-1]) if ta.size else 0),
              _duration_of(b, int(tb[-1]) if tb.size else 0))
    counts = _count_pairs(ta, tb, spec)
    return CorrelationHistogram(spec=spec, counts=counts, n_a=ta.size, n_b=tb.size,
                                duration_ps=dur)


def correlate_bruteforce(a, b, spec: HistogramSpec = HistogramSpec()) -> CorrelationHistogram:
    """Literal all-pairs reference correlator.  Ground truth; use below ~1e5 tags."""
    ta, tb = _as_times(a), _as_times(b)
    _check_sorted(ta, "a")
    _check_sorted(tb, "b")
    dur = max(_duration_of(a, int(ta[-1]) if ta.size else 0),
              _duration_of(b, int(tb[-1]) if tb.size else 0))
    counts = np.zeros(spec.bin_count, dtype=np.int64)
    lo, hi, bw = spec.window_lo_ps, spec.window_hi_ps, spec.bin_width_ps
    chunk = max(1, int(2**22 // max(tb.size, 1)))
    for i in range(0, ta.size, chunk):
        tau = tb[np.newaxis, :] - ta[i:i + chunk, np.newaxis]
        sel = tau[(tau >= lo) & (tau < hi)]
        if sel.size:
            counts += np.bincount((sel - lo) // bw, minlength=spec.bin_count).astype(np.int64)
    return CorrelationHistogram(spec=spec, counts=counts, n_a=ta.size, n_b=tb.size,
                                duration_ps=dur)


def autocorrelate(a, spec: HistogramSpec = HistogramSpec()) -> CorrelationHistogram:
    """Correlation of a channel with itself, self-pairs (i == j) excluded."""
    h = correlate(a, a, spec)
    zero_bin = spec.bin_of(0)
    h.counts[zero_bin] -= h.n_a
    return h


class Accumulator:
    """Streaming correlator: feed tag chunks, read consistent snapshots.

    After any sequence of ``add`` calls, ``finalize`` equals ``correlate``
    over the concatenated streams.  Only tags that can still pair with
    future tags of the other channel are retained, so memory is bounded
    by rate * window, not by total acquisition length.
    """

    def __init__(self, spec: HistogramSpec = HistogramSpec()):
        self.spec = spec
        self.counts = np.zeros(spec.bin_count, dtype=np.int64)
        self.n_a = 0
        self.n_b = 0
        self._tail_a = np.empty(0, dtype=np.int64)
        self._tail_b = np.empty(0, dtype=np.int64)
        self._last_a: int | None = None
        self._last_b: int | None = None

    def _validate_append(self, new: np.ndarray, last: int | None, name: str) -> int | None:
        if new.size == 0:
            return last
        _check_sorted(new, name)
        if last is not None and new[0] < last:
            raise CorrelatorError(
                f"channel {name}: appended tag {new[0]} precedes previous tail {last}"
            )
        return int(new[-1])

    def add(self, new_a, new_b) -> None:
        na, nb = _as_times(new_a), _as_times(new_b)
        self._last_a = self._validate_append(na, self._last_a, "a")
        self._last_b = self._validate_append(nb, self._last_b, "b")
        self.n_a += na.size
        self.n_b += nb.size

        # pairs with at least one new member; old x old was counted earlier
        if na.size:
            self.counts += _count_pairs(na, np.concatenate([self._tail_b, nb]), self.spec)
        if nb.size:
            self.counts += _count_pairs(self._tail_a, nb, self.spec)

        # prune tags that can no longer pair with anything in the future
        self._tail_a = np.concatenate([self._tail_a, na])
        self._tail_b = np.concatenate([self._tail_b, nb])
        if self._last_b is not None:
            cut = self._last_b - self.spec.window_hi_ps
            self._tail_a = self._tail_a[self._tail_a >= cut]
        if self._last_a is not None:
            cut = self._last_a + self.spec.window_lo_ps
            self._tail_b = self._tail_b[self._tail_b >= cut]

    @property
    def tail_sizes(self) -> tuple[int, int]:
        return self._tail_a.size, self._tail_b.size

    def snapshot(self) -> CorrelationHistogram:
        """Consistent copy of the running histogram for live display."""
        dur = max(self._last_a or 0, self._last_b or 0)
        return CorrelationHistogram(spec=self.spec, counts=self.counts.copy(),
                                    n_a=self.n_a, n_b=self.n_b, duration_ps=dur,
                                    complete=False)

    def finalize(self, duration_ps: int | None = None, complete: bool = True) -> CorrelationHistogram:
        dur = duration_ps if duration_ps is not None else max(self._last_a or 0, self._last_b or 0)
        return CorrelationHistogram(spec=self.spec, counts=self.counts.copy(),
                                    n_a=self.n_a, n_b=self.n_b, duration_ps=int(dur),
                                    complete=complete)


def normalize(h: CorrelationHistogram) -> CorrelationHistogram:
    """Attach the ergodic g2 estimate counts * T / (n_a * n_b * bin_width).

    Uncorrelated Poissonian channels normalize to ~1.
    """
    for fieldname in ("duration_ps", "n_a", "n_b"):
        if getattr(h, fieldname) <= 0:
            raise CorrelatorError(f"cannot normalize: {fieldname} is {getattr(h, fieldname)}")
    scale = h.duration_ps / (h.n_a * h.n_b * h.spec.bin_width_ps)
    return replace(h, normalized=h.counts * scale)


# ---------------------------------------------------------------------------
# export / import

def histogram_to_json(h: CorrelationHistogram) -> str:
    doc = {
        "schema": HISTOGRAM_SCHEMA,
        "spec": {"bin_width_ps": h.spec.bin_width_ps, "bin_count": h.spec.bin_count},
        "n_a": h.n_a,
        "n_b": h.n_b,
        "duration_ps": h.duration_ps,
        "complete": h.complete,
        "counts": h.counts.tolist(),
        "g2": h.normalized.tolist() if h.normalized is not None else None,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def histogram_from_json(text: str) -> CorrelationHistogram:
    doc = json.loads(text)
    if doc.get("schema") != HISTOGRAM_SCHEMA:
        raise CorrelatorError(f"unexpected histogram schema: {doc.get('schema')!r}")
    spec = HistogramSpec(bin_width_ps=doc["spec"]["bin_width_ps"], bin_count=doc["spec"]["bin_count"])
    g2 = doc.get("g2")
    return CorrelationHistogram(
        spec=spec,
        counts=np.asarray(doc["counts"], dtype=np.int64),
        n_a=doc["n_a"], n_b=doc["n_b"], duration_ps=doc["duration_ps"],
        normalized=None if g2 is None else np.asarray(g2, dtype=np.float64),
        complete=doc.get("complete", True),
    )


def histogram_to_csv(h: CorrelationHistogram) -> str:
    lines = ["tau_ps,counts,g2"]
    centers = h.spec.bin_centers()
    g2 = h.normalized
    for k in range(h.spec.bin_count):
        g2s = "" if g2 is None else repr(float(g2[k]))
        lines.append(f"{repr(float(centers[k]))},{int(h.counts[k])},{g2s}")
    return "\n".join(lines) + "\n"


def histogram_from_csv(text: str) -> CorrelationHistogram:
    """Rebuild a histogram from the CSV export.

    The CSV carries no channel totals, so n_a/n_b/duration come back as 0
    and the g2 column (if present) is kept verbatim.
    """
    rows = [ln for ln in text.strip().splitlines() if ln]
    if not rows or rows[0] != "tau_ps,counts,g2":
        raise CorrelatorError("not a histogram CSV (missing 'tau_ps,counts,g2' header)")
    taus, counts, g2s = [], [], []
    for ln in rows[1:]:
        t, c, g = ln.split(",")
        taus.append(float(t))
        counts.append(int(c))
        g2s.append(float(g) if g else None)
    if len(taus) < 2:
        raise CorrelatorError("histogram CSV has fewer than 2 bins")
    bw = taus[1] - taus[0]
    if bw <= 0 or abs(bw - round(bw)) > 1e-9:
        raise CorrelatorError("histogram CSV bin width is not a positive integer")
    spec = HistogramSpec(bin_width_ps=int(round(bw)), bin_count=len(taus))
    have_g2 = all(g is not None for g in g2s)
    return CorrelationHistogram(
        spec=spec, counts=np.asarray(counts, dtype=np.int64),
        n_a=0, n_b=0, duration_ps=0,
        normalized=np.asarray(g2s, dtype=np.float64) if have_g2 else None,
    )
