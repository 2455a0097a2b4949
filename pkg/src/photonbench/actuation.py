"""Positioning backends: voice-coil lens actuators and open-loop piezo stage.

Both backends share one axis model.  A control voltage in [1, 3] V around
the 2 V virtual ground produces a coil voltage in [-1, 1] V and a
deflection gain * v_coil * (1 + nl * (v_coil / v_max)^2): linear to first
order with a small odd cubic term.  The piezo preset uses zero
nonlinearity and matched axis gains but drifts faster; the voice-coil
preset carries an X/Y gain mismatch, which is what makes scan spots look
oval.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "DacSpec",
    "VoiceCoilAxis",
    "ActuatorState",
    "DacRangeWarning",
    "ActuatorRangeError",
    "dac_quantize",
    "dac_step",
    "deflection",
    "voltage_for_position",
    "advance_drift",
]

SECONDS_PER_HOUR = 3600.0


class DacRangeWarning(UserWarning):
    """Requested voltage outside the DAC range; the value was clamped."""


class ActuatorRangeError(ValueError):
    """Requested position or voltage beyond what the axis can reach."""


@dataclass(frozen=True)
class DacSpec:
    bits: int = 16
    v_min: float = 0.0
    v_max: float = 10.0

    def __post_init__(self):
        if not 8 <= self.bits <= 24:
            raise ValueError(f"DAC bits must be in [8, 24], got {self.bits}")
        if self.v_max <= self.v_min:
            raise ValueError("DAC range must satisfy v_max > v_min")


def dac_step(dac: DacSpec) -> float:
    """Voltage spacing between adjacent DAC codes."""
    return (dac.v_max - dac.v_min) / (2 ** dac.bits - 1)


def dac_quantize(v: float, dac: DacSpec = DacSpec()) -> float:
    """Round to the nearest of the 2^bits uniformly spaced output codes.

    Idempotent.  Out-of-range inputs are clamped to the end codes and
    flagged with a DacRangeWarning.
    """
    if v < dac.v_min or v > dac.v_max:
        warnings.warn(
            f"voltage {v} V outside DAC range [{dac.v_min}, {dac.v_max}] V; clamping",
            DacRangeWarning,
            stacklevel=2,
        )
        v = min(max(v, dac.v_min), dac.v_max)
    step = dac_step(dac)
    code = round((v - dac.v_min) / step)
    return dac.v_min + code * step


@dataclass(frozen=True)
class VoiceCoilAxis:
    """One deflection axis of the lens holder (or the equivalent piezo axis)."""

    virtual_ground_v: float = 2.0
    gain_um_per_v: float = 15.0
    cubic_nonlinearity: float = 0.02
    max_coil_voltage_v: float = 1.0
    max_coil_current_ma: float = 200.0

    def __post_init__(self):
        if self.max_coil_voltage_v <= 0:
            raise ValueError("max_coil_voltage must be positive")

    @property
    def control_range_v(self) -> tuple[float, float]:
        return (self.virtual_ground_v - self.max_coil_voltage_v,
                self.virtual_ground_v + self.max_coil_voltage_v)

    @property
    def max_deflection_um(self) -> float:
        return abs(deflection(self, self.virtual_ground_v + self.max_coil_voltage_v))


def deflection(axis: VoiceCoilAxis, control_v: float) -> float:
    """Displacement (um) for a control voltage in the [1, 3] V window.

    Exactly zero at the virtual ground and odd-symmetric around it.
    """
    lo, hi = axis.control_range_v
    if not lo <= control_v <= hi:
        raise ActuatorRangeError(
            f"control voltage {control_v} V outside [{lo}, {hi}] V"
        )
    v_coil = control_v - axis.virtual_ground_v
    rel = v_coil / axis.max_coil_voltage_v
    return axis.gain_um_per_v * v_coil * (1.0 + axis.cubic_nonlinearity * rel * rel)


def voltage_for_position(axis: VoiceCoilAxis, target_um: float) -> float:
    """Inverse of ``deflection``: control voltage reaching the target (um).

    Closed form for a linear axis; bracketed root finding on the monotone
    cubic otherwise.
    """
    if abs(target_um) > axis.max_deflection_um * (1 + 1e-12):
        raise ActuatorRangeError(
            f"target {target_um} um beyond reach +/-{axis.max_deflection_um:.3f} um"
        )
    if axis.cubic_nonlinearity == 0.0:
        return axis.virtual_ground_v + target_um / axis.gain_um_per_v
    lo, hi = axis.control_range_v
    f = lambda v: deflection(axis, v) - target_um
    if f(lo) == 0.0:
        return lo
    if f(hi) == 0.0:
        return hi
    return float(brentq(f, lo, hi, xtol=1e-12))


@dataclass(frozen=True)
class ActuatorState:
    """Mutable-by-replacement positioning state owned by one scan session."""

    x_axis: VoiceCoilAxis
    y_axis: VoiceCoilAxis
    drift_rate_rms_um_per_sqrt_hour: float = 0.0
    drift_offset_um: tuple[float, float] = (0.0, 0.0)
    elapsed_s: float = 0.0


def advance_drift(state: ActuatorState, dt_s: float,
                  rng: np.random.Generator) -> ActuatorState:
    """Gaussian random walk of the stage offset over dt seconds.

    Per-axis step sigma = drift_rate_rms * sqrt(dt / 1 hour);  dt = 0
    returns the state unchanged without consuming random numbers.
    """
    if dt_s < 0:
        raise ValueError("dt must be >= 0")
    if dt_s == 0.0:
        return state
    if state.drift_rate_rms_um_per_sqrt_hour == 0.0:
        return replace(state, elapsed_s=state.elapsed_s + dt_s)
    sigma = state.drift_rate_rms_um_per_sqrt_hour * np.sqrt(dt_s / SECONDS_PER_HOUR)
    step = rng.normal(0.0, sigma, 2)
    ox, oy = state.drift_offset_um
    return replace(
        state,
        drift_offset_um=(ox + float(step[0]), oy + float(step[1])),
        elapsed_s=state.elapsed_s + dt_s,
    )
