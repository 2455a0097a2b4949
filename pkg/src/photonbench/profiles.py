"""Instrument profiles: the full parameter set of one microscope setup.

Two presets ship with the package.  ``reference`` is a conventional
confocal microscope (NA 0.95 objective, open-loop piezo stage);
``lowcost`` replaces objective and stage with Blu-ray optical pickup
units (NA 0.6 aspheric lens, voice-coil scanning, more pump
autofluorescence, less drift).  Profiles load from TOML files; see the
bundled presets for the documented key set.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .actuation import DacSpec, VoiceCoilAxis, ActuatorState
from .detection import SpadSpec
from .optics import BeamProfile, FilterElement, FilterStack, ObjectiveSpec

__all__ = ["ActuatorConfig", "InstrumentProfile", "load_profile", "preset_names"]

PRESETS = ("reference", "lowcost")

KIND_PIEZO = "piezo"
KIND_VOICECOIL = "voicecoil"


@dataclass(frozen=True)
class ActuatorConfig:
    """Positioning backend: what the controller believes plus what is real.

    ``control_axis`` is the calibration the scan software plans voltages
    with; ``x_axis``/``y_axis`` are the physical axes.  For the voice-coil
    preset the true Y gain differs from the assumed one (coil resistance
    spread), which is what stretches scan spots into ovals.
    """

    kind: str
    control_axis: VoiceCoilAxis
    x_axis: VoiceCoilAxis
    y_axis: VoiceCoilAxis
    drift_rate_rms_um_per_sqrt_hour: float
    dac: DacSpec

    def initial_state(self) -> ActuatorState:
        return ActuatorState(
            x_axis=self.x_axis,
            y_axis=self.y_axis,
            drift_rate_rms_um_per_sqrt_hour=self.drift_rate_rms_um_per_sqrt_hour,
        )


@dataclass(frozen=True)
class InstrumentProfile:
    name: str
    beam: BeamProfile
    objective: ObjectiveSpec
    filters: FilterStack
    pinhole_axial_fwhm_um: float
    detector_a: SpadSpec
    detector_b: SpadSpec
    actuator: ActuatorConfig
    notes: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.pinhole_axial_fwhm_um <= 0:
            raise ValueError("pinhole_axial_fwhm must be positive")


def _axis_from(d: dict) -> VoiceCoilAxis:
    return VoiceCoilAxis(
        virtual_ground_v=d.get("virtual_ground_v", 2.0),
        gain_um_per_v=d["gain_um_per_v"],
        cubic_nonlinearity=d.get("cubic_nonlinearity", 0.0),
        max_coil_voltage_v=d.get("max_coil_voltage_v", 1.0),
        max_coil_current_ma=d.get("max_coil_current_ma", 200.0),
    )


def _spad_from(d: dict) -> SpadSpec:
    return SpadSpec(
        efficiency=d.get("efficiency", 0.6),
        dead_time_ns=d.get("dead_time_ns", 45.0),
        jitter_sigma_ps=d.get("jitter_sigma_ps", 350.0),
        dark_count_rate=d.get("dark_count_rate", 250.0),
    )


def _filter_from(d: dict) -> FilterElement:
    band = d.get("band_nm")
    return FilterElement(
        kind=d["kind"],
        edge_nm=d.get("edge_nm"),
        band_nm=tuple(band) if band else None,
        transmission_pass=d.get("transmission_pass", 0.98),
        transmission_stop=d.get("transmission_stop", 0.98e-4),
    )


def _profile_from_dict(doc: dict) -> InstrumentProfile:
    beam = doc["beam"]
    obj = doc["objective"]
    act = doc["actuator"]
    return InstrumentProfile(
        name=doc["name"],
        beam=BeamProfile(
            w0_um=beam["w0_um"],
            wavelength_nm=beam.get("wavelength_nm", 532.0),
            m_squared=beam.get("m_squared", 1.0),
            power_mw=beam.get("power_mw", 10.0),
            focus_z_um=beam.get("focus_z_um", 0.0),
            reference_power_mw=beam.get("reference_power_mw", 10.0),
        ),
        objective=ObjectiveSpec(
            numerical_aperture=obj["numerical_aperture"],
            transmission_curve=tuple((float(l), float(t)) for l, t in obj["transmission_curve"]),
            autofluorescence_rate_per_mw=obj.get("autofluorescence_rate_per_mw", 0.0),
        ),
        filters=FilterStack(elements=tuple(_filter_from(f) for f in doc.get("filters", []))),
        pinhole_axial_fwhm_um=doc["pinhole_axial_fwhm_um"],
        detector_a=_spad_from(doc.get("detector_a", {})),
        detector_b=_spad_from(doc.get("detector_b", {})),
        actuator=ActuatorConfig(
            kind=act["kind"],
            control_axis=_axis_from(act["control"]),
            x_axis=_axis_from(act["x"]),
            y_axis=_axis_from(act["y"]),
            drift_rate_rms_um_per_sqrt_hour=act.get("drift_rate_rms_um_per_sqrt_hour", 0.0),
            dac=DacSpec(
                bits=act.get("dac_bits", 16),
                v_min=act.get("dac_v_min", 0.0),
                v_max=act.get("dac_v_max", 10.0),
            ),
        ),
        notes=tuple(sorted(doc.get("notes", {}).items())),
    )


def preset_names() -> tuple[str, ...]:
    return PRESETS


def load_profile(name_or_path: str | Path) -> InstrumentProfile:
    """Load a bundled preset by name ("reference", "lowcost") or a TOML file."""
    name = str(name_or_path)
    if name in PRESETS:
        data = resources.files("photonbench").joinpath(f"presets/{name}.toml").read_bytes()
        doc = tomllib.loads(data.decode())
    else:
        p = Path(name_or_path)
        if not p.exists():
            raise FileNotFoundError(
                f"profile {name!r} is neither a preset {PRESETS} nor an existing file"
            )
        with open(p, "rb") as f:
            doc = tomllib.load(f)
    return _profile_from_dict(doc)
