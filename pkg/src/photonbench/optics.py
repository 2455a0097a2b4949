"""Gaussian excitation beam, collection chain and lens autofluorescence.

Maps emitter positions and instrument optics to excitation rates and
collection efficiencies.  Everything here is pure and immutable; profiles
can be shared freely between concurrent scans.

Unit conventions: positions and waists in um, wavelengths in nm, power in
mW, rates in 1/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .emitters import (
    EmitterSpec,
    ZPL_SIGMA_NM,
    WAVELENGTH_RANGE_NM,
    decay_rate_per_s,
    excitation_for_emission_rate,
)

__all__ = [
    "BeamProfile",
    "ObjectiveSpec",
    "FilterElement",
    "FilterStack",
    "beam_radius",
    "nominal_excitation_rate",
    "excitation_rate_at",
    "excitation_rate_gradient",
    "collection_efficiency",
    "spectral_collection_efficiency",
    "axial_acceptance",
    "solid_angle_fraction",
    "objective_transmission",
    "filter_transmission",
    "background_rate",
]

NM_PER_UM = 1000.0

LONGPASS = "longpass"
SHORTPASS = "shortpass"
DICHROIC_REFLECTBAND = "dichroic_reflectband"


@dataclass(frozen=True)
class BeamProfile:
    """Focused Gaussian excitation beam.

    ``reference_power_mw`` anchors the brightness calibration: an emitter
    sitting exactly in the focus at that power runs at its nominal
    saturation-adjusted rate (see ``excitation_rate_at``).
    """

    w0_um: float
    wavelength_nm: float = 532.0
    m_squared: float = 1.0
    power_mw: float = 10.0
    focus_z_um: float = 0.0
    reference_power_mw: float = 10.0

    def __post_init__(self):
        if self.w0_um <= 0:
            raise ValueError(f"w0 must be positive, got {self.w0_um}")
        if self.m_squared < 1.0:
            raise ValueError(f"M^2 must be >= 1, got {self.m_squared}")
        if self.power_mw < 0 or self.reference_power_mw <= 0:
            raise ValueError("powers must be non-negative (reference power positive)")

    @property
    def rayleigh_range_um(self) -> float:
        return math.pi * self.w0_um ** 2 / (self.wavelength_nm / NM_PER_UM * self.m_squared)


@dataclass(frozen=True)
class ObjectiveSpec:
    """Collection optic: NA, spectral transmission, pump-induced autofluorescence.

    ``transmission_curve`` is a piecewise-linear map wavelength (nm) ->
    fraction, given as sorted (nm, fraction) breakpoints and clamped at the
    ends.  ``autofluorescence_rate_per_mw`` is the photon rate per mW of
    pump that the lens itself contributes at the detection plane (after
    the filter stack, before detector efficiency).
    """

    numerical_aperture: float
    transmission_curve: tuple[tuple[float, float], ...]
    autofluorescence_rate_per_mw: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.numerical_aperture < 1.0:
            raise ValueError(f"NA must be in (0, 1), got {self.numerical_aperture}")
        if self.autofluorescence_rate_per_mw < 0:
            raise ValueError("autofluorescence_rate_per_mw must be >= 0")
        lams = [p[0] for p in self.transmission_curve]
        if sorted(lams) != lams or len(lams) < 1:
            raise ValueError("transmission_curve breakpoints must be sorted by wavelength")
        if any(not 0.0 <= p[1] <= 1.0 for p in self.transmission_curve):
            raise ValueError("transmission values must be in [0, 1]")


@dataclass(frozen=True)
class FilterElement:
    kind: str                      # longpass | shortpass | dichroic_reflectband
    edge_nm: float | None = None   # for long/shortpass
    band_nm: tuple[float, float] | None = None   # for dichroic_reflectband
    transmission_pass: float = 0.98
    transmission_stop: float = 0.98e-4

    def __post_init__(self):
        if self.kind in (LONGPASS, SHORTPASS):
            if self.edge_nm is None:
                raise ValueError(f"{self.kind} filter needs edge_nm")
        elif self.kind == DICHROIC_REFLECTBAND:
            if self.band_nm is None:
                raise ValueError("dichroic_reflectband filter needs band_nm")
        else:
            raise ValueError(f"unknown filter kind {self.kind!r}")


@dataclass(frozen=True)
class FilterStack:
    elements: tuple[FilterElement, ...] = ()


# ---------------------------------------------------------------------------
# beam geometry

def beam_radius(beam: BeamProfile, z_um):
    """1/e^2 beam radius at axial offset z from the focus:

        w(z) = w0 * sqrt(1 + (z * M^2 * lambda / (pi * w0^2))^2)

    Even in z, minimal (= w0) at z = 0.  Accepts scalars or arrays.
    """
    lam_um = beam.wavelength_nm / NM_PER_UM
    u = np.asarray(z_um, dtype=np.float64) * beam.m_squared * lam_um / (math.pi * beam.w0_um ** 2)
    out = beam.w0_um * np.sqrt(1.0 + u * u)
    return float(out) if np.isscalar(z_um) else out


# ---------------------------------------------------------------------------
# excitation

def nominal_excitation_rate(emitter: EmitterSpec) -> float:
    """k_exc that makes the renewal process emit at the emitter's nominal rate.

    Inverts the renewal saturation curve (hence "saturation-adjusted"): the
    returned excitation compensates for the dead fraction of each cycle
    spent in the excited state.
    """
    return excitation_for_emission_rate(emitter.saturation_rate, decay_rate_per_s(emitter))


def excitation_rate_at(beam: BeamProfile, objective: ObjectiveSpec,
                       emitter_position_um, beam_center_xy_um,
                       emitter: EmitterSpec) -> float:
    """Excitation rate k_exc (1/s) for an emitter in the focused Gaussian spot.

    Linear (non-saturated) pumping:

        k_exc = C * (P * T_pump) * (w0 / w(dz))^2 * exp(-2 r^2 / w(dz)^2)

    C is calibrated per emitter so that on focus, at the beam's reference
    power through a lossless pump path (T_pump = 1), the renewal process
    emits at the emitter's nominal rate.  An objective with lower pump
    transmission therefore needs proportionally more power for the same
    rate.  Monotonically decreasing in the radial offset r and in |dz|.
    """
    ex, ey, ez = emitter_position_um
    bx, by = beam_center_xy_um
    dz = ez - beam.focus_z_um
    w = beam_radius(beam, dz)
    r_sq = (ex - bx) ** 2 + (ey - by) ** 2
    t_pump = objective_transmission(objective, beam.wavelength_nm)
    k_ref = nominal_excitation_rate(emitter)
    return (k_ref * (beam.power_mw * t_pump) / beam.reference_power_mw
            * (beam.w0_um / w) ** 2 * math.exp(-2.0 * r_sq / w ** 2))


def excitation_rate_gradient(beam: BeamProfile, objective: ObjectiveSpec,
                             emitter_position_um, beam_center_xy_um,
                             emitter: EmitterSpec) -> np.ndarray:
    """Analytic d k_exc / d (x, y, z) of ``excitation_rate_at``."""
    ex, ey, ez = emitter_position_um
    bx, by = beam_center_xy_um
    dz = ez - beam.focus_z_um
    lam_um = beam.wavelength_nm / NM_PER_UM
    a = beam.m_squared * lam_um / (math.pi * beam.w0_um ** 2)
    w_sq = beam.w0_um ** 2 * (1.0 + (a * dz) ** 2)
    r_sq = (ex - bx) ** 2 + (ey - by) ** 2
    k = excitation_rate_at(beam, objective, emitter_position_um, beam_center_xy_um, emitter)
    dk_dx = k * (-4.0 * (ex - bx) / w_sq)
    dk_dy = k * (-4.0 * (ey - by) / w_sq)
    dwsq_dz = 2.0 * beam.w0_um ** 2 * a * a * dz
    dk_dz = k * (2.0 * r_sq / w_sq ** 2 - 1.0 / w_sq) * dwsq_dz
    return np.array([dk_dx, dk_dy, dk_dz])


# ---------------------------------------------------------------------------
# collection

def solid_angle_fraction(numerical_aperture: float) -> float:
    """Fraction of emission captured by the objective's acceptance cone."""
    return (1.0 - math.sqrt(1.0 - numerical_aperture ** 2)) / 2.0


def objective_transmission(objective: ObjectiveSpec, wavelength_nm):
    pts = objective.transmission_curve
    lams = np.asarray([p[0] for p in pts])
    vals = np.asarray([p[1] for p in pts])
    out = np.interp(np.asarray(wavelength_nm, dtype=np.float64), lams, vals)
    return float(out) if np.isscalar(wavelength_nm) else out


def filter_transmission(filters: FilterStack, wavelength_nm):
    lam = np.asarray(wavelength_nm, dtype=np.float64)
    out = np.ones_like(lam)
    for el in filters.elements:
        if el.kind == LONGPASS:
            in_pass = lam > el.edge_nm
        elif el.kind == SHORTPASS:
            in_pass = lam < el.edge_nm
        else:  # dichroic reflect band blocks inside the band
            lo, hi = el.band_nm
            in_pass = (lam < lo) | (lam > hi)
        out = out * np.where(in_pass, el.transmission_pass, el.transmission_stop)
    return float(out) if np.isscalar(wavelength_nm) else out


def axial_acceptance(axial_offset_um: float, pinhole_axial_fwhm_um: float) -> float:
    """Confocal sectioning modeled as a Gaussian axial acceptance."""
    if pinhole_axial_fwhm_um <= 0:
        raise ValueError("pinhole_axial_fwhm must be positive")
    return math.exp(-4.0 * math.log(2.0) * axial_offset_um ** 2 / pinhole_axial_fwhm_um ** 2)


def collection_efficiency(objective: ObjectiveSpec, filters: FilterStack,
                          wavelength_nm: float, axial_offset_um: float,
                          pinhole_axial_fwhm_um: float) -> float:
    """Probability that an emitted photon of this wavelength reaches a detector.

    Product of solid-angle capture, objective transmission, filter stack
    transmission and the confocal axial acceptance; always in [0, 1].
    """
    return (
        solid_angle_fraction(objective.numerical_aperture)
        * float(objective_transmission(objective, wavelength_nm))
        * float(filter_transmission(filters, wavelength_nm))
        * axial_acceptance(axial_offset_um, pinhole_axial_fwhm_um)
    )


def _gauss_legendre_mean(fn, center: float, sigma: float, lo: float, hi: float,
                         n_points: int) -> float:
    """Mean of fn under a truncated Gaussian via Gauss-Legendre quadrature."""
    lo = max(lo, center - 6.0 * sigma)
    hi = min(hi, center + 6.0 * sigma)
    x, w = np.polynomial.legendre.leggauss(n_points)
    lam = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    pdf = np.exp(-0.5 * ((lam - center) / sigma) ** 2)
    vals = fn(lam)
    num = float(np.sum(w * pdf * vals))
    den = float(np.sum(w * pdf))
    return num / den


_SPECTRAL_CACHE: dict[tuple, float] = {}


def spectral_collection_efficiency(objective: ObjectiveSpec, filters: FilterStack,
                                   emitter: EmitterSpec,
                                   quadrature_points: int = 64) -> float:
    """Collection efficiency averaged over the emitter's emission spectrum.

    64-point quadrature over the ZPL + sideband mixture (axial acceptance is
    wavelength-independent and therefore not part of this average).  Cached
    per (emitter spectrum, objective, filters).
    """
    key = (
        emitter.zpl_wavelength_nm, emitter.sideband_center_nm,
        emitter.sideband_width_nm, emitter.zpl_weight,
        objective, filters, quadrature_points,
    )
    hit = _SPECTRAL_CACHE.get(key)
    if hit is not None:
        return hit

    def eff(lams):
        return (objective_transmission(objective, lams)
                * filter_transmission(filters, lams))

    lo, hi = WAVELENGTH_RANGE_NM
    zpl_mean = _gauss_legendre_mean(eff, emitter.zpl_wavelength_nm, ZPL_SIGMA_NM,
                                    lo, hi, quadrature_points)
    sideband_mean = _gauss_legendre_mean(eff, emitter.sideband_center_nm,
                                         emitter.sideband_width_nm, lo, hi,
                                         quadrature_points)
    spectral = emitter.zpl_weight * zpl_mean + (1.0 - emitter.zpl_weight) * sideband_mean
    result = solid_angle_fraction(objective.numerical_aperture) * spectral
    _SPECTRAL_CACHE[key] = result
    return result


# ---------------------------------------------------------------------------
# background

def background_rate(objective: ObjectiveSpec, power_mw: float) -> float:
    """Pump-induced autofluorescence photon rate at the detection plane (1/s).

    Linear in power and independent of the scan position.
    """
    if power_mw < 0:
        raise ValueError("power must be >= 0")
    return objective.autofluorescence_rate_per_mw * power_mw
