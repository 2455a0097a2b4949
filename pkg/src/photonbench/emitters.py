"""Ground-truth nanodiamond samples and the raw photon emission process.

Each NV center is a two-level renewal emitter: an exponential wait for
excitation (rate k_exc set by the local pump intensity) followed by an
exponential radiative decay (rate k_dec = 1/lifetime).  That minimal
model yields the characteristic antibunched intensity correlation
g2(tau) = 1 - exp(-(k_exc + k_dec)|tau|) and a long-run emission rate of
k_exc*k_dec/(k_exc + k_dec).  There is no metastable shelving state, so
no bunching shoulder appears at long delays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

__all__ = [
    "NV_MINUS",
    "NV_ZERO",
    "EmitterSpec",
    "SampleSpec",
    "SampleField",
    "SampleInfeasibleError",
    "generate_sample",
    "next_emission_interval",
    "emission_times",
    "sample_wavelength",
    "sample_wavelengths",
    "decay_rate_per_s",
    "renewal_emission_rate",
    "excitation_for_emission_rate",
    "sample_to_json",
    "sample_from_json",
]

SAMPLE_SCHEMA = "photonbench.sample/1"

NV_MINUS = "NVminus"
NV_ZERO = "NVzero"

# charge state -> (lifetime ns, zero-phonon line nm)
CHARGE_STATE_DEFAULTS = {NV_MINUS: (12.0, 638.0), NV_ZERO: (21.0, 575.0)}

# Room-temperature spectral defaults.  The phonon sideband dominates; only a
# few percent of the emission sits in the zero-phonon line.  Width/center
# keep >= 95% of the sideband inside the 630-800 nm emission range.
DEFAULT_ZPL_WEIGHT = 0.04
DEFAULT_SIDEBAND_CENTER_NM = 700.0
DEFAULT_SIDEBAND_WIDTH_NM = 38.0
ZPL_SIGMA_NM = 1.0
WAVELENGTH_RANGE_NM = (550.0, 850.0)

# Saturated emission scale, counts/s.  Not a measured value: brightness of a
# single NV through a given collection chain varies by sample; treat this as
# a configurable assumption.
DEFAULT_SATURATION_RATE = 150e3

DART_THROW_RETRY_BUDGET = 10_000

NS_PER_S = 1e9
PS_PER_NS = 1000.0


class SampleInfeasibleError(RuntimeError):
    """min_spacing / density combination could not be realized."""


@dataclass(frozen=True)
class EmitterSpec:
    """One NV center: position, charge state, photophysics and spectrum."""

    position_um: tuple[float, float, float]
    charge_state: str = NV_MINUS
    lifetime_ns: float | None = None
    saturation_rate: float = DEFAULT_SATURATION_RATE
    zpl_wavelength_nm: float | None = None
    sideband_center_nm: float = DEFAULT_SIDEBAND_CENTER_NM
    sideband_width_nm: float = DEFAULT_SIDEBAND_WIDTH_NM
    zpl_weight: float = DEFAULT_ZPL_WEIGHT

    def __post_init__(self):
        if self.charge_state not in CHARGE_STATE_DEFAULTS:
            raise ValueError(f"unknown charge state {self.charge_state!r}")
        lifetime, zpl = CHARGE_STATE_DEFAULTS[self.charge_state]
        if self.lifetime_ns is None:
            object.__setattr__(self, "lifetime_ns", lifetime)
        if self.zpl_wavelength_nm is None:
            object.__setattr__(self, "zpl_wavelength_nm", zpl)
        if self.lifetime_ns <= 0:
            raise ValueError(f"lifetime must be positive, got {self.lifetime_ns}")
        if not 0.0 <= self.zpl_weight <= 1.0:
            raise ValueError(f"zpl_weight must be in [0, 1], got {self.zpl_weight}")
        if self.saturation_rate < 0:
            raise ValueError(f"saturation_rate must be >= 0, got {self.saturation_rate}")


@dataclass(frozen=True)
class SampleSpec:
    """Recipe for a spin-coated nanodiamond field."""

    field_size_um: tuple[float, float] = (20.0, 20.0)
    target_density_per_100um2: float = 3.0
    min_spacing_um: float = 3.32          # 2 * w0 of the low-cost excitation spot
    fraction_single: float = 0.8
    charge_state_mix: float = 0.7         # fraction NV-
    rng_seed: int = 0

    def __post_init__(self):
        fx, fy = self.field_size_um
        if fx <= 0 or fy <= 0:
            raise ValueError(f"field_size must be positive, got {self.field_size_um}")
        if self.min_spacing_um >= min(fx, fy) / 2:
            raise ValueError(
                f"min_spacing {self.min_spacing_um} um too large for field {self.field_size_um}"
            )
        if not 0.0 <= self.fraction_single <= 1.0:
            raise ValueError(f"fraction_single must be in [0, 1], got {self.fraction_single}")
        if not 0.0 <= self.charge_state_mix <= 1.0:
            raise ValueError(f"charge_state_mix must be in [0, 1], got {self.charge_state_mix}")
        if self.target_density_per_100um2 < 0:
            raise ValueError("target_density must be >= 0")


@dataclass(frozen=True)
class SampleField:
    """Generated ground truth: emitter list plus the spec it came from."""

    emitters: tuple[EmitterSpec, ...]
    spec: SampleSpec
    achieved_density_per_100um2: float = 0.0
    n_sites: int = 0

    def positions(self) -> np.ndarray:
        return np.asarray([e.position_um for e in self.emitters], dtype=np.float64).reshape(-1, 3)


def generate_sample(spec: SampleSpec) -> SampleField:
    """Dart-throw diamond sites on the coverslip, then populate NV centers.

    Sites are rejected until all pairwise XY distances exceed
    ``min_spacing_um`` (retry budget ``DART_THROW_RETRY_BUDGET`` per site).
    If fewer than 70% of the requested sites fit, the spec is declared
    infeasible.  Deterministic for a fixed ``rng_seed``.
    """
    rng = np.random.default_rng(spec.rng_seed)
    fx, fy = spec.field_size_um
    n_target = int(round(spec.target_density_per_100um2 * fx * fy / 100.0))
    if n_target == 0:
        return SampleField(emitters=(), spec=spec, achieved_density_per_100um2=0.0, n_sites=0)

    sites: list[tuple[float, float]] = []
    min_sq = spec.min_spacing_um ** 2
    for _ in range(n_target):
        placed = False
        for _ in range(DART_THROW_RETRY_BUDGET):
            # field is centered on the actuator origin
            x = rng.uniform(-fx / 2, fx / 2)
            y = rng.uniform(-fy / 2, fy / 2)
            if all((x - sx) ** 2 + (y - sy) ** 2 >= min_sq for sx, sy in sites):
                sites.append((x, y))
                placed = True
                break
        if not placed:
            break

    if len(sites) < math.ceil(0.7 * n_target):
        raise SampleInfeasibleError(
            f"placed {len(sites)}/{n_target} sites with min_spacing "
            f"{spec.min_spacing_um} um after {DART_THROW_RETRY_BUDGET} retries each"
        )

    emitters: list[EmitterSpec] = []
    for x, y in sites:
        single = rng.random() < spec.fraction_single
        count = 1 if single else int(rng.integers(1, 4))
        for _ in range(count):
            state = NV_MINUS if rng.random() < spec.charge_state_mix else NV_ZERO
            emitters.append(EmitterSpec(position_um=(x, y, 0.0), charge_state=state))

    achieved = len(sites) * 100.0 / (fx * fy)
    return SampleField(emitters=tuple(emitters), spec=spec,
                       achieved_density_per_100um2=achieved, n_sites=len(sites))


# ---------------------------------------------------------------------------
# emission dynamics

def decay_rate_per_s(emitter: EmitterSpec) -> float:
    return NS_PER_S / emitter.lifetime_ns


def renewal_emission_rate(excitation_rate_per_s: float, decay_rate: float) -> float:
    """Long-run photon rate of the excite-then-decay cycle, 1/s."""
    if excitation_rate_per_s <= 0:
        return 0.0
    return excitation_rate_per_s * decay_rate / (excitation_rate_per_s + decay_rate)


def excitation_for_emission_rate(target_rate_per_s: float, decay_rate: float) -> float:
    """Invert the renewal saturation curve: k_exc giving the target output rate."""
    if target_rate_per_s <= 0:
        return 0.0
    if target_rate_per_s >= decay_rate:
        raise ValueError(
            f"target emission rate {target_rate_per_s:.3g}/s exceeds the "
            f"radiative ceiling {decay_rate:.3g}/s"
        )
    return target_rate_per_s * decay_rate / (decay_rate - target_rate_per_s)


def next_emission_interval(emitter: EmitterSpec, excitation_rate_per_s: float,
                           rng: np.random.Generator) -> float:
    """Time to the next emitted photon in ns: Exp(k_exc) wait + Exp(k_dec) decay.

    excitation_rate = 0 never emits; that is reported as ``math.inf``.
    """
    if excitation_rate_per_s < 0:
        raise ValueError("excitation_rate must be >= 0")
    if excitation_rate_per_s == 0:
        return math.inf
    scale_exc_ns = NS_PER_S / excitation_rate_per_s
    return rng.exponential(scale_exc_ns) + rng.exponential(emitter.lifetime_ns)


def emission_times(emitter: EmitterSpec, excitation_rate_per_s: float,
                   duration_ps: int, rng: np.random.Generator) -> np.ndarray:
    """Batch renewal process: int64 emission timestamps (ps) in [0, duration_ps).

    Equivalent to cumulative ``next_emission_interval`` draws, generated in
    vectorized blocks for throughput.
    """
    if excitation_rate_per_s < 0:
        raise ValueError("excitation_rate must be >= 0")
    if excitation_rate_per_s == 0 or duration_ps <= 0:
        return np.empty(0, dtype=np.int64)
    scale_exc_ns = NS_PER_S / excitation_rate_per_s
    mean_interval_ns = scale_exc_ns + emitter.lifetime_ns
    duration_ns = duration_ps / PS_PER_NS

    blocks: list[np.ndarray] = []
    t_last = 0.0
    remaining = duration_ns
    while remaining > 0:
        n = int(remaining / mean_interval_ns * 1.05) + 64
        intervals = rng.exponential(scale_exc_ns, n) + rng.exponential(emitter.lifetime_ns, n)
        times = t_last + np.cumsum(intervals)
        blocks.append(times)
        t_last = times[-1]
        remaining = duration_ns - t_last
    t_ns = np.concatenate(blocks) if len(blocks) > 1 else blocks[0]
    t_ns = t_ns[t_ns < duration_ns]
    return np.rint(t_ns * PS_PER_NS).astype(np.int64)


# ---------------------------------------------------------------------------
# emission spectrum

def sample_wavelengths(emitter: EmitterSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n emission wavelengths (nm) from the ZPL + phonon-sideband mixture.

    The sideband Gaussian is truncated to WAVELENGTH_RANGE_NM by resampling.
    """
    out = np.empty(n, dtype=np.float64)
    is_zpl = rng.random(n) < emitter.zpl_weight
    n_zpl = int(np.count_nonzero(is_zpl))
    out[is_zpl] = rng.normal(emitter.zpl_wavelength_nm, ZPL_SIGMA_NM, n_zpl)
    idx = np.flatnonzero(~is_zpl)
    lo, hi = WAVELENGTH_RANGE_NM
    draws = rng.normal(emitter.sideband_center_nm, emitter.sideband_width_nm, idx.size)
    bad = (draws < lo) | (draws > hi)
    while np.any(bad):
        draws[bad] = rng.normal(emitter.sideband_center_nm, emitter.sideband_width_nm,
                                int(np.count_nonzero(bad)))
        bad = (draws < lo) | (draws > hi)
    out[idx] = draws
    return out


def sample_wavelength(emitter: EmitterSpec, rng: np.random.Generator) -> float:
    return float(sample_wavelengths(emitter, 1, rng)[0])


# ---------------------------------------------------------------------------
# serialization

def sample_to_json(fieldobj: SampleField) -> str:
    doc = {
        "schema": SAMPLE_SCHEMA,
        "spec": asdict(fieldobj.spec),
        "achieved_density_per_100um2": fieldobj.achieved_density_per_100um2,
        "n_sites": fieldobj.n_sites,
        "emitters": [asdict(e) for e in fieldobj.emitters],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def sample_from_json(text: str) -> SampleField:
    doc = json.loads(text)
    if doc.get("schema") != SAMPLE_SCHEMA:
        raise ValueError(f"unexpected sample schema: {doc.get('schema')!r}")
    spec_kw = dict(doc["spec"])
    spec_kw["field_size_um"] = tuple(spec_kw["field_size_um"])
    spec = SampleSpec(**spec_kw)
    emitters = []
    for e in doc["emitters"]:
        kw = dict(e)
        kw["position_um"] = tuple(kw["position_um"])
        emitters.append(EmitterSpec(**kw))
    return SampleField(emitters=tuple(emitters), spec=spec,
                       achieved_density_per_100um2=doc["achieved_density_per_100um2"],
                       n_sites=doc["n_sites"])
