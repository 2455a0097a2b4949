"""Acquisition orchestration: raster scans, HBT runs at a point, autofocus.

Two simulation fidelities coexist.  Imaging uses a Poisson fast path (the
expected detected rate at each pixel, one Poisson draw per dwell) because
per-photon simulation of 10^4 pixels would be prohibitive.  HBT
acquisitions run the full per-photon chain - renewal emission, collection
thinning, beamsplitter, SPADs - in chunks of at most one second of
simulated time, feeding a streaming correlator.  A consistency test pins
the fast path's expected rate to the per-photon path's empirical rate.

Positions are micrometres in stage coordinates (sample field centered on
the actuator origin).  Commands go through the actuator's *control*
calibration; the physics replays them through the *true* axes, so a gain
mismatch shows up in images exactly like it does on the real instrument.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field, replace

import numpy as np

from .actuation import ActuatorState, dac_quantize, deflection, voltage_for_position, ActuatorRangeError
from .correlator import Accumulator, CorrelationHistogram, CorrelatorError, HistogramSpec, normalize
from .detection import _detect_window
from .emitters import SampleField, emission_times
from .optics import (
    axial_acceptance,
    background_rate,
    beam_radius,
    nominal_excitation_rate,
    objective_transmission,
    spectral_collection_efficiency,
)
from .profiles import InstrumentProfile

__all__ = [
    "ScanConfig",
    "ScanImage",
    "Session",
    "SessionBusyError",
    "AutofocusError",
    "AutofocusResult",
    "RasterPlan",
    "make_session",
    "plan_raster",
    "acquire_pixel",
    "run_scan",
    "run_scan_reserved",
    "run_hbt",
    "run_hbt_reserved",
    "autofocus",
    "fit_log_peak",
    "save_scan",
    "load_scan",
    "expected_detected_rate",
]

SCAN_SCHEMA = "photonbench.scan/1"
PS_PER_S = 1_000_000_000_000


class SessionBusyError(RuntimeError):
    """The session already has an active acquisition."""


class AutofocusError(RuntimeError):
    """Autofocus could not find a signal to focus on."""


@dataclass(frozen=True)
class ScanConfig:
    """One 2D scan: field extent, resolution, dwell and excitation power."""

    extent_um: tuple[float, float] = (20.0, 20.0)
    resolution: tuple[int, int] = (100, 100)        # (nx, ny) pixels
    integration_time_ms: float = 40.0
    laser_power_mw: float | None = None             # None: profile default
    z_offset_um: float = 0.0
    rng_seed: int = 0
    profile_name: str = ""                          # provenance

    def __post_init__(self):
        nx, ny = self.resolution
        if nx < 2 or ny < 2:
            raise ValueError(f"resolution must be at least 2x2, got {self.resolution}")
        if self.integration_time_ms <= 0:
            raise ValueError("integration_time must be positive")
        ex, ey = self.extent_um
        if ex <= 0 or ey <= 0:
            raise ValueError("extent must be positive")

    @property
    def pixel_pitch_um(self) -> tuple[float, float]:
        return (self.extent_um[0] / self.resolution[0],
                self.extent_um[1] / self.resolution[1])


@dataclass
class ScanImage:
    """Count image plus the calibration needed to map pixels to positions."""

    counts: np.ndarray                  # int64, shape (ny, nx)
    config: ScanConfig
    profile_name: str
    sim_duration_s: float
    drift_log: tuple = ()               # (row, elapsed_s, dx_um, dy_um) per row
    complete: bool = True

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        nx, ny = self.config.resolution
        if self.counts.shape != (ny, nx):
            raise ValueError(f"counts shape {self.counts.shape} != resolution (ny={ny}, nx={nx})")

    @property
    def pixel_pitch_um(self) -> tuple[float, float]:
        return self.config.pixel_pitch_um

    def pixel_to_position(self, row: float, col: float) -> tuple[float, float]:
        """Center of pixel (row, col) in stage coordinates (um); fractional
        indices interpolate."""
        px, py = self.pixel_pitch_um
        ex, ey = self.config.extent_um
        return ((col + 0.5) * px - ex / 2.0, (row + 0.5) * py - ey / 2.0)

    def position_to_pixel(self, x_um: float, y_um: float) -> tuple[float, float]:
        px, py = self.pixel_pitch_um
        ex, ey = self.config.extent_um
        return ((y_um + ey / 2.0) / py - 0.5, (x_um + ex / 2.0) / px - 0.5)


@dataclass
class Session:
    """One virtual microscope bench: profile + sample + actuator + RNG streams."""

    id: str
    profile: InstrumentProfile
    sample: SampleField
    actuator: ActuatorState
    seed: int
    activity: str = "idle"              # idle | scanning | hbt
    progress: float = 0.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)
    _drift_rng: np.random.Generator | None = field(default=None, repr=False)

    def drift_rng(self) -> np.random.Generator:
        if self._drift_rng is None:
            self._drift_rng = np.random.default_rng(
                np.random.SeedSequence(entropy=self.seed, spawn_key=(0xD217,)))
        return self._drift_rng

    def begin(self, kind: str) -> None:
        with self._lock:
            if self.activity != "idle":
                raise SessionBusyError(
                    f"session {self.id} is busy ({self.activity}); one acquisition at a time")
            self.activity = kind
            self.progress = 0.0

    def end(self) -> None:
        with self._lock:
            self.activity = "idle"
            self.progress = 0.0


def make_session(profile: InstrumentProfile, sample: SampleField, seed: int = 0,
                 session_id: str | None = None) -> Session:
    return Session(
        id=session_id or uuid.uuid4().hex[:12],
        profile=profile,
        sample=sample,
        actuator=profile.actuator.initial_state(),
        seed=seed,
    )


# ---------------------------------------------------------------------------
# pixel physics (fast path)

class PixelPhysics:
    """Cached per-emitter constants for one (profile, sample, power, z) setting.

    Everything that does not depend on the lateral beam position is
    precomputed: excitation peak rates, beam radius at each emitter's
    axial offset, spectrally averaged collection efficiencies.
    """

    def __init__(self, profile: InstrumentProfile, sample: SampleField,
                 power_mw: float | None = None, z_offset_um: float = 0.0):
        self.profile = profile
        power = profile.beam.power_mw if power_mw is None else power_mw
        self.power_mw = power
        beam = replace(profile.beam, power_mw=power,
                       focus_z_um=profile.beam.focus_z_um + z_offset_um)
        self.beam = beam

        pos = sample.positions()
        self.x = pos[:, 0]
        self.y = pos[:, 1]
        t_pump = objective_transmission(profile.objective, beam.wavelength_nm)
        dz = pos[:, 2] - beam.focus_z_um
        w = beam_radius(beam, dz)
        self.w_sq = np.asarray(w, dtype=np.float64) ** 2
        k_nominal = np.array([nominal_excitation_rate(e) for e in sample.emitters])
        self.k_peak = (k_nominal * (power * t_pump) / beam.reference_power_mw
                       * (beam.w0_um ** 2 / self.w_sq))
        self.k_dec = np.array([1e9 / e.lifetime_ns for e in sample.emitters])
        spectral = np.array([
            spectral_collection_efficiency(profile.objective, profile.filters, e)
            for e in sample.emitters
        ])
        axial = np.array([axial_acceptance(float(d), profile.pinhole_axial_fwhm_um)
                          for d in dz]) if len(sample.emitters) else np.empty(0)
        self.eta = spectral * axial
        self.background_arrival = background_rate(profile.objective, power)

    def excitation_rates(self, bx_um: float, by_um: float) -> np.ndarray:
        """k_exc per emitter for a beam centered at (bx, by)."""
        if self.x.size == 0:
            return np.empty(0)
        r_sq = (self.x - bx_um) ** 2 + (self.y - by_um) ** 2
        return self.k_peak * np.exp(-2.0 * r_sq / self.w_sq)

    def arrival_rate(self, bx_um: float, by_um: float) -> float:
        """Photon rate reaching the beamsplitter (signal + autofluorescence)."""
        k_exc = self.excitation_rates(bx_um, by_um)
        emitted = np.where(k_exc > 0, k_exc * self.k_dec / (k_exc + self.k_dec), 0.0)
        return float(np.sum(emitted * self.eta)) + self.background_arrival

    def detected_rate(self, bx_um: float, by_um: float) -> float:
        """Expected tag rate summed over both detectors, dead time included."""
        arrival = self.arrival_rate(bx_um, by_um)
        total = 0.0
        for spad in (self.profile.detector_a, self.profile.detector_b):
            incident = arrival / 2.0 * spad.efficiency + spad.dark_count_rate
            dead_s = spad.dead_time_ns * 1e-9
            total += incident / (1.0 + incident * dead_s)
        return total


def expected_detected_rate(profile: InstrumentProfile, sample: SampleField,
                           beam_center_um, power_mw: float | None = None,
                           z_offset_um: float = 0.0) -> float:
    """Fast-path expected count rate (both detectors) at a beam position."""
    phys = PixelPhysics(profile, sample, power_mw, z_offset_um)
    return phys.detected_rate(beam_center_um[0], beam_center_um[1])


# ---------------------------------------------------------------------------
# raster planning

@dataclass(frozen=True)
class RasterPlan:
    """Row-major scan plan: pixel indices, target positions, DAC voltages."""

    rows: np.ndarray
    cols: np.ndarray
    x_um: np.ndarray
    y_um: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    dwell_ms: float

    def __len__(self) -> int:
        return self.rows.size

    @property
    def total_dwell_s(self) -> float:
        return len(self) * self.dwell_ms / 1e3


def plan_raster(config: ScanConfig, actuator) -> RasterPlan:
    """Row-major raster (left-to-right on every row, no serpentine: open-loop
    axes repeat better when each row approaches from the same side).

    Voltages come from the actuator's control calibration, then DAC
    quantization.  An extent beyond the axis range reports the limiting axis.
    """
    nx, ny = config.resolution
    ex, ey = config.extent_um
    control = actuator.control_axis
    for axis_name, half_extent in (("x", ex / 2.0), ("y", ey / 2.0)):
        if half_extent > control.max_deflection_um:
            raise ActuatorRangeError(
                f"{axis_name} extent +/-{half_extent} um exceeds the control range "
                f"+/-{control.max_deflection_um:.2f} um")

    px, py = config.pixel_pitch_um
    xs = (np.arange(nx) + 0.5) * px - ex / 2.0
    ys = (np.arange(ny) + 0.5) * py - ey / 2.0
    vx_row = np.array([dac_quantize(voltage_for_position(control, x), actuator.dac) for x in xs])
    vy_col = np.array([dac_quantize(voltage_for_position(control, y), actuator.dac) for y in ys])

    rows = np.repeat(np.arange(ny), nx)
    cols = np.tile(np.arange(nx), ny)
    return RasterPlan(
        rows=rows, cols=cols,
        x_um=xs[cols], y_um=ys[rows],
        vx=vx_row[cols], vy=vy_col[rows],
        dwell_ms=config.integration_time_ms,
    )


# ---------------------------------------------------------------------------
# acquisition

def _true_beam_position(session: Session, vx: float, vy: float) -> tuple[float, float]:
    st = session.actuator
    dx, dy = st.drift_offset_um
    return (deflection(st.x_axis, vx) + dx, deflection(st.y_axis, vy) + dy)


def _advance_drift(session: Session, dt_s: float) -> None:
    from .actuation import advance_drift
    session.actuator = advance_drift(session.actuator, dt_s, session.drift_rng())


def acquire_pixel(session: Session, command_v: tuple[float, float], dwell_ms: float,
                  physics: PixelPhysics | None = None,
                  rng: np.random.Generator | None = None) -> int:
    """Dwell at a voltage command and return the Poisson photon count.

    Advances stage drift by the dwell time.
    """
    if physics is None:
        physics = PixelPhysics(session.profile, session.sample)
    if rng is None:
        rng = np.random.default_rng()
    bx, by = _true_beam_position(session, command_v[0], command_v[1])
    rate = physics.detected_rate(bx, by)
    counts = int(rng.poisson(rate * dwell_ms / 1e3))
    _advance_drift(session, dwell_ms / 1e3)
    return counts


def _is_cancelled(cancel) -> bool:
    if cancel is None:
        return False
    if hasattr(cancel, "is_set"):
        return cancel.is_set()
    return bool(cancel())


def run_scan(session: Session, config: ScanConfig, progress=None, cancel=None) -> ScanImage:
    """Execute a raster scan on the session's sample.

    ``progress(row_index, row_counts, rows_done, total_rows)`` fires after
    every completed row; ``cancel`` (callable or Event) is checked between
    pixels and yields a partial image flagged incomplete.
    """
    session.begin("scanning")
    try:
        return run_scan_reserved(session, config, progress, cancel)
    finally:
        session.end()


def run_scan_reserved(session: Session, config: ScanConfig, progress=None,
                      cancel=None) -> ScanImage:
    """Scan body for callers that already reserved the session via ``begin``."""
    rng = np.random.default_rng(np.random.SeedSequence(config.rng_seed))
    physics = PixelPhysics(session.profile, session.sample,
                           config.laser_power_mw, config.z_offset_um)
    plan = plan_raster(config, session.profile.actuator)
    nx, ny = config.resolution
    counts = np.zeros((ny, nx), dtype=np.int64)
    drift_log = []
    cancelled = False
    sim_t = 0.0
    idx = 0
    for row in range(ny):
        if cancelled:
            break
        for col in range(nx):
            if _is_cancelled(cancel):
                cancelled = True
                break
            counts[row, col] = acquire_pixel(
                session, (plan.vx[idx], plan.vy[idx]), plan.dwell_ms,
                physics=physics, rng=rng)
            sim_t += plan.dwell_ms / 1e3
            idx += 1
        dx, dy = session.actuator.drift_offset_um
        drift_log.append((row, session.actuator.elapsed_s, dx, dy))
        session.progress = (row + 1) / ny
        if progress is not None and not cancelled:
            progress(row, counts[row].copy(), row + 1, ny)
    return ScanImage(counts=counts, config=config, profile_name=session.profile.name,
                     sim_duration_s=sim_t, drift_log=tuple(drift_log),
                     complete=not cancelled)


def run_hbt(session: Session, position_um: tuple[float, float], duration_s: float,
            spec: HistogramSpec = HistogramSpec(), power_mw: float | None = None,
            z_offset_um: float = 0.0, seed: int | None = None,
            progress=None, cancel=None, chunk_s: float = 1.0) -> CorrelationHistogram:
    """Full per-photon HBT acquisition at a fixed stage position.

    Emission of every emitter (weighted by its local excitation) plus
    autofluorescence background is split on the beamsplitter and pushed
    through both SPAD models into a streaming correlator, in chunks of at
    most ``chunk_s`` simulated seconds.  Drift advances per chunk and
    re-evaluates the excitation rates, so long acquisitions on a drifting
    stage wander off the emitter exactly like the real instrument.
    """
    session.begin("hbt")
    try:
        return run_hbt_reserved(session, position_um, duration_s, spec, power_mw,
                                z_offset_um, seed, progress, cancel, chunk_s)
    finally:
        session.end()


def run_hbt_reserved(session: Session, position_um, duration_s: float,
                     spec: HistogramSpec = HistogramSpec(), power_mw: float | None = None,
                     z_offset_um: float = 0.0, seed: int | None = None,
                     progress=None, cancel=None, chunk_s: float = 1.0) -> CorrelationHistogram:
    """HBT body for callers that already reserved the session via ``begin``."""
    if seed is None:
        seed = session.seed
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(0x4B7,))
    rng_em, rng_split, rng_a, rng_b, rng_bg = [
        np.random.default_rng(s) for s in seq.spawn(5)]

    physics = PixelPhysics(session.profile, session.sample, power_mw, z_offset_um)
    control = session.profile.actuator.control_axis
    dac = session.profile.actuator.dac
    vx = dac_quantize(voltage_for_position(control, position_um[0]), dac)
    vy = dac_quantize(voltage_for_position(control, position_um[1]), dac)

    acc = Accumulator(spec)
    total_ps = int(round(duration_s * PS_PER_S))
    chunk_ps = int(round(chunk_s * PS_PER_S))
    done_ps = 0
    cancelled = False
    while done_ps < total_ps:
        if _is_cancelled(cancel):
            cancelled = True
            break
        this_ps = min(chunk_ps, total_ps - done_ps)
        bx, by = _true_beam_position(session, vx, vy)
        k_exc = physics.excitation_rates(bx, by)

        arrivals = []
        for i, em in enumerate(session.sample.emitters):
            if k_exc[i] <= 0 or physics.eta[i] <= 0:
                continue
            t = emission_times(em, float(k_exc[i]), this_ps, rng_em)
            if t.size:
                t = t[rng_em.random(t.size) < physics.eta[i]]
            if t.size:
                arrivals.append(t + done_ps)
        if physics.background_arrival > 0:
            n_bg = rng_bg.poisson(physics.background_arrival * this_ps / PS_PER_S)
            if n_bg:
                bg = np.rint(rng_bg.uniform(float(done_ps), float(done_ps + this_ps),
                                            n_bg)).astype(np.int64)
                arrivals.append(bg)
        if arrivals:
            photons = np.sort(np.concatenate(arrivals))
        else:
            photons = np.empty(0, dtype=np.int64)

        to_a = rng_split.random(photons.size) < 0.5
        tags_a = _detect_window(photons[to_a], session.profile.detector_a,
                                done_ps, done_ps + this_ps, rng_a)
        tags_b = _detect_window(photons[~to_a], session.profile.detector_b,
                                done_ps, done_ps + this_ps, rng_b)
        acc.add(tags_a, tags_b)

        done_ps += this_ps
        _advance_drift(session, this_ps / PS_PER_S)
        session.progress = done_ps / total_ps
        if progress is not None:
            progress(done_ps / PS_PER_S, duration_s, acc.snapshot())

    hist = acc.finalize(duration_ps=done_ps, complete=not cancelled)
    try:
        hist = normalize(hist)
    except CorrelatorError:
        pass  # empty acquisition stays unnormalized
    return hist


# ---------------------------------------------------------------------------
# autofocus

@dataclass
class AutofocusResult:
    z_offset_um: float
    z_grid_um: np.ndarray
    counts: np.ndarray
    used_fallback: bool = False       # log-parabola was concave-up
    at_boundary: bool = False         # peak ran into the scan range edge


def fit_log_peak(z: np.ndarray, values: np.ndarray) -> tuple[float, bool]:
    """Vertex of a parabola fitted to log(values); (vertex, concave_down)."""
    coeff = np.polyfit(z, np.log(np.asarray(values, dtype=np.float64)), 2)
    if coeff[0] >= 0:
        return float(z[int(np.argmax(values))]), False
    return float(-coeff[1] / (2.0 * coeff[0])), True


def autofocus(session: Session, position_um: tuple[float, float],
              z_half_range_um: float = 5.0, steps: int = 11,
              dwell_ms: float = 40.0, power_mw: float | None = None,
              rng_seed: int | None = None) -> AutofocusResult:
    """Sample counts along z at a bright position and fit the focus peak.

    Fits a parabola to the log-counts and returns the maximizing z; falls
    back to the best sampled z if the fit is concave-up.  A peak on the
    range boundary is flagged.  All-dark signal raises AutofocusError.
    """
    if steps < 3:
        raise ValueError("autofocus needs at least 3 steps")
    rng = np.random.default_rng(np.random.SeedSequence(
        entropy=session.seed if rng_seed is None else rng_seed, spawn_key=(0xAF,)))
    control = session.profile.actuator.control_axis
    dac = session.profile.actuator.dac
    vx = dac_quantize(voltage_for_position(control, position_um[0]), dac)
    vy = dac_quantize(voltage_for_position(control, position_um[1]), dac)

    z_grid = np.linspace(-z_half_range_um, z_half_range_um, steps)
    counts = np.empty(steps, dtype=np.int64)
    for i, z in enumerate(z_grid):
        physics = PixelPhysics(session.profile, session.sample, power_mw, float(z))
        counts[i] = acquire_pixel(session, (vx, vy), dwell_ms, physics=physics, rng=rng)

    # flat counts mean there is nothing to focus on: the peak must clear the
    # position-independent floor (darks + autofluorescence) by > 5 sigma
    floor = float(np.median(counts))
    if counts.max() <= floor + 5.0 * np.sqrt(max(floor, 1.0)) + 1:
        raise AutofocusError("no fluorescence peak above the floor; select a bright spot first")

    vertex, concave_down = fit_log_peak(z_grid, counts + 1)
    if not concave_down:
        z_best = float(z_grid[int(np.argmax(counts))])
        return AutofocusResult(z_best, z_grid, counts, used_fallback=True,
                               at_boundary=z_best in (z_grid[0], z_grid[-1]))
    at_boundary = not (z_grid[0] <= vertex <= z_grid[-1])
    if at_boundary:
        vertex = float(np.clip(vertex, z_grid[0], z_grid[-1]))
    return AutofocusResult(float(vertex), z_grid, counts, at_boundary=at_boundary)


# ---------------------------------------------------------------------------
# scan export

def _config_to_dict(config: ScanConfig) -> dict:
    return {
        "extent_um": list(config.extent_um),
        "resolution": list(config.resolution),
        "integration_time_ms": config.integration_time_ms,
        "laser_power_mw": config.laser_power_mw,
        "z_offset_um": config.z_offset_um,
        "rng_seed": config.rng_seed,
        "profile_name": config.profile_name,
    }


def save_scan(img: ScanImage, base_path) -> tuple[str, str]:
    """Write {base}.csv (count matrix) and {base}.json (metadata sidecar).

    Only deterministic simulation metadata is persisted; wall-clock
    diagnostics stay in memory so identical seeds export identical bytes.
    """
    base = str(base_path)
    csv_path, json_path = base + ".csv", base + ".json"
    with open(csv_path, "w") as f:
        for row in img.counts:
            f.write(",".join(str(int(v)) for v in row))
            f.write("\n")
    meta = {
        "schema": SCAN_SCHEMA,
        "config": _config_to_dict(img.config),
        "profile_name": img.profile_name,
        "pixel_pitch_um": list(img.pixel_pitch_um),
        "sim_duration_s": img.sim_duration_s,
        "drift_log": [list(entry) for entry in img.drift_log],
        "complete": img.complete,
    }
    with open(json_path, "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path, json_path


def load_scan(base_path) -> ScanImage:
    base = str(base_path)
    with open(base + ".json") as f:
        meta = json.load(f)
    if meta.get("schema") != SCAN_SCHEMA:
        raise ValueError(f"unexpected scan schema: {meta.get('schema')!r}")
    counts = np.loadtxt(base + ".csv", delimiter=",", dtype=np.int64, ndmin=2)
    cfg = meta["config"]
    config = ScanConfig(
        extent_um=tuple(cfg["extent_um"]),
        resolution=tuple(cfg["resolution"]),
        integration_time_ms=cfg["integration_time_ms"],
        laser_power_mw=cfg["laser_power_mw"],
        z_offset_um=cfg["z_offset_um"],
        rng_seed=cfg["rng_seed"],
        profile_name=cfg["profile_name"],
    )
    return ScanImage(
        counts=counts, config=config, profile_name=meta["profile_name"],
        sim_duration_s=meta["sim_duration_s"],
        drift_log=tuple(tuple(e) for e in meta["drift_log"]),
        complete=meta["complete"],
    )
