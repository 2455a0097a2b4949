"""Reproducible measurement scenarios built from the bundled presets.

These helpers assemble a profile + sample + session for the canonical
experiments (antibunching of one NV- on each setup, the two-emitter
limit) with the background calibrated to a requested signal fraction
rho = S / (S + B).  For a Poissonian background under an otherwise ideal
single emitter the measured dip is g2(0) = 1 - rho^2, so rho = 0.927
yields 0.14 and rho = 0.762 yields 0.42.

``demo_fast`` scales emitter brightness so that minutes of simulated
acquisition carry the statistics of the hour-scale original experiment.
That scaling is *not physical*; it exists to keep demonstrations and the
acceptance suite fast.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .analysis import G2Fit, fit_g2
from .correlator import CorrelationHistogram, HistogramSpec
from .emitters import EmitterSpec, SampleField, SampleSpec, NV_MINUS
from .profiles import InstrumentProfile, load_profile
from .scanning import PixelPhysics, Session, make_session, run_hbt

__all__ = [
    "DEMO_FAST_BRIGHTNESS",
    "REFERENCE_SIGNAL_FRACTION",
    "LOWCOST_SIGNAL_FRACTION",
    "brighten_sample",
    "single_emitter_sample",
    "calibrate_background",
    "signal_fraction",
    "antibunching_session",
    "antibunching_run",
    "two_emitter_run",
]

DEMO_FAST_BRIGHTNESS = 20.0

# Signal fractions that reproduce the two published dips: 1 - rho^2 = g2(0)
REFERENCE_SIGNAL_FRACTION = 0.927   # -> g2(0) = 0.141
LOWCOST_SIGNAL_FRACTION = 0.762    # -> g2(0) = 0.419


def brighten_sample(sample: SampleField, factor: float) -> SampleField:
    """Scale every emitter's nominal brightness (demo-fast; not physical)."""
    ems = tuple(replace(e, saturation_rate=e.saturation_rate * factor)
                for e in sample.emitters)
    return replace(sample, emitters=ems)


def single_emitter_sample(charge_state: str = NV_MINUS,
                          brightness_factor: float = 1.0,
                          n_emitters: int = 1) -> SampleField:
    """One or more identical co-located emitters at the stage origin."""
    em = EmitterSpec(position_um=(0.0, 0.0, 0.0), charge_state=charge_state)
    sample = SampleField(emitters=(em,) * n_emitters,
                         spec=SampleSpec(rng_seed=0), n_sites=1)
    if brightness_factor != 1.0:
        sample = brighten_sample(sample, brightness_factor)
    return sample


def signal_fraction(profile: InstrumentProfile, sample: SampleField,
                    beam_center_um=(0.0, 0.0)) -> float:
    """rho = detected signal / detected total at a beam position."""
    phys = PixelPhysics(profile, sample)
    k_exc = phys.excitation_rates(*beam_center_um)
    emitted = np.where(k_exc > 0, k_exc * phys.k_dec / (k_exc + phys.k_dec), 0.0)
    s_arr = float(np.sum(emitted * phys.eta))
    eta_det = (profile.detector_a.efficiency + profile.detector_b.efficiency) / 2.0
    s_det = s_arr * eta_det
    b_det = phys.background_arrival * eta_det
    darks = profile.detector_a.dark_count_rate + profile.detector_b.dark_count_rate
    return s_det / (s_det + b_det + darks)


def calibrate_background(profile: InstrumentProfile, sample: SampleField,
                         rho: float, beam_center_um=(0.0, 0.0)) -> InstrumentProfile:
    """Set the objective's autofluorescence so the on-spot signal fraction is rho.

    Dark counts are part of the background budget; if they alone exceed the
    target, the autofluorescence floor is clamped at zero (rho then ends up
    below the request).
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must be in (0, 1], got {rho}")
    phys = PixelPhysics(profile, sample)
    k_exc = phys.excitation_rates(*beam_center_um)
    emitted = np.where(k_exc > 0, k_exc * phys.k_dec / (k_exc + phys.k_dec), 0.0)
    s_arr = float(np.sum(emitted * phys.eta))
    eta_det = (profile.detector_a.efficiency + profile.detector_b.efficiency) / 2.0
    s_det = s_arr * eta_det
    darks = profile.detector_a.dark_count_rate + profile.detector_b.dark_count_rate
    b_det_needed = s_det * (1.0 - rho) / rho - darks
    b_arr = max(b_det_needed, 0.0) / eta_det
    objective = replace(profile.objective,
                        autofluorescence_rate_per_mw=b_arr / profile.beam.power_mw)
    return replace(profile, objective=objective)


def antibunching_session(profile_name: str, rho: float, seed: int,
                         brightness_factor: float = DEMO_FAST_BRIGHTNESS,
                         n_emitters: int = 1,
                         background: bool = True) -> Session:
    """Session with a single bright NV- on focus and a rho-calibrated background."""
    profile = load_profile(profile_name)
    sample = single_emitter_sample(brightness_factor=brightness_factor,
                                   n_emitters=n_emitters)
    if background:
        profile = calibrate_background(profile, sample, rho)
    else:
        objective = replace(profile.objective, autofluorescence_rate_per_mw=0.0)
        det_a = replace(profile.detector_a, dark_count_rate=0.0)
        det_b = replace(profile.detector_b, dark_count_rate=0.0)
        profile = replace(profile, objective=objective, detector_a=det_a, detector_b=det_b)
    return make_session(profile, sample, seed=seed)


def antibunching_run(profile_name: str, rho: float, seed: int,
                     duration_s: float, spec: HistogramSpec = HistogramSpec(),
                     brightness_factor: float = DEMO_FAST_BRIGHTNESS,
                     ) -> tuple[CorrelationHistogram, G2Fit]:
    """End-to-end HBT measurement on one emitter: histogram plus dip fit."""
    session = antibunching_session(profile_name, rho, seed,
                                   brightness_factor=brightness_factor)
    hist = run_hbt(session, (0.0, 0.0), duration_s, spec=spec, seed=seed)
    return hist, fit_g2(hist)


def two_emitter_run(seed: int, n_detected_target: float = 1e6,
                    profile_name: str = "reference",
                    spec: HistogramSpec = HistogramSpec(),
                    brightness_factor: float = 100.0,
                    ) -> tuple[CorrelationHistogram, G2Fit]:
    """Two co-located equal emitters, no background: the g2(0) = 1/2 limit.

    Duration is chosen so roughly ``n_detected_target`` photons are tagged.
    The high default brightness packs the photon budget into fewer seconds,
    which raises the pairs-per-bin statistics of the dip fit.
    """
    session = antibunching_session(profile_name, rho=1.0, seed=seed,
                                   brightness_factor=brightness_factor,
                                   n_emitters=2, background=False)
    phys = PixelPhysics(session.profile, session.sample)
    duration_s = n_detected_target / phys.detected_rate(0.0, 0.0)
    hist = run_hbt(session, (0.0, 0.0), duration_s, spec=spec, seed=seed)
    return hist, fit_g2(hist)
