"""DAC quantization, voice-coil deflection, drift random walk."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photonbench.actuation import (
    ActuatorRangeError,
    ActuatorState,
    DacRangeWarning,
    DacSpec,
    VoiceCoilAxis,
    advance_drift,
    dac_quantize,
    dac_step,
    deflection,
    voltage_for_position,
)
from photonbench.analysis import fit_linear

DAC = DacSpec(bits=16, v_min=0.0, v_max=10.0)


class TestDac:
    def test_step_size_16bit_over_10v(self):
        assert dac_step(DAC) == pytest.approx(10.0 / 65535, rel=1e-12)
        assert dac_step(DAC) == pytest.approx(152.59e-6, rel=1e-3)

    def test_quantization_error_bounded_by_half_step(self):
        rng = np.random.default_rng(1)
        for v in rng.uniform(0, 10, 1000):
            q = dac_quantize(v, DAC)
            assert abs(v - q) <= dac_step(DAC) / 2 * (1 + 1e-12)

    @settings(max_examples=300)
    @given(v=st.floats(0.0, 10.0))
    def test_idempotent(self, v):
        q = dac_quantize(v, DAC)
        assert dac_quantize(q, DAC) == q

    def test_endpoints_exact(self):
        assert dac_quantize(0.0, DAC) == 0.0
        assert dac_quantize(10.0, DAC) == 10.0

    def test_out_of_range_clamps_with_warning(self):
        with pytest.warns(DacRangeWarning):
            assert dac_quantize(-1.0, DAC) == 0.0
        with pytest.warns(DacRangeWarning):
            assert dac_quantize(11.0, DAC) == 10.0

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            DacSpec(bits=4)
        with pytest.raises(ValueError):
            DacSpec(v_min=5.0, v_max=5.0)


class TestDeflection:
    AXIS = VoiceCoilAxis(gain_um_per_v=15.0, cubic_nonlinearity=0.02)

    def test_virtual_ground_is_exact_zero(self):
        assert deflection(self.AXIS, 2.0) == 0.0

    def test_odd_symmetry_to_machine_precision(self):
        # dyadic deltas make 2.0 +/- delta exactly representable, so the
        # coil voltages are exactly opposite and the outputs must be too
        for k in range(1, 1025):
            delta = k / 1024.0
            assert deflection(self.AXIS, 2.0 + delta) == -deflection(self.AXIS, 2.0 - delta)

    def test_odd_symmetry_arbitrary_delta_within_ulp(self):
        for delta in np.linspace(1e-6, 1.0, 500):
            plus = deflection(self.AXIS, 2.0 + delta)
            minus = deflection(self.AXIS, 2.0 - delta)
            assert plus == pytest.approx(-minus, rel=1e-14, abs=1e-12)

    def test_out_of_range_control_rejected(self):
        with pytest.raises(ActuatorRangeError):
            deflection(self.AXIS, 0.99)
        with pytest.raises(ActuatorRangeError):
            deflection(self.AXIS, 3.01)

    def test_linear_fit_residual_within_two_percent(self):
        v = np.linspace(1.0, 3.0, 201)
        d = np.array([deflection(self.AXIS, vi) for vi in v])
        fit = fit_linear(np.column_stack([v, d]))
        full_scale = d.max() - d.min()
        assert fit.max_abs_residual <= 0.02 * full_scale

    @settings(max_examples=200)
    @given(gain=st.floats(1.0, 50.0), nl=st.floats(-0.32, 0.32))
    def test_monotone_for_small_nonlinearity(self, gain, nl):
        axis = VoiceCoilAxis(gain_um_per_v=gain, cubic_nonlinearity=nl)
        v = np.linspace(1.0, 3.0, 101)
        d = np.array([deflection(axis, vi) for vi in v])
        assert np.all(np.diff(d) > 0)


class TestInverse:
    def test_center(self):
        axis = VoiceCoilAxis(gain_um_per_v=15.0, cubic_nonlinearity=0.02)
        assert voltage_for_position(axis, 0.0) == 2.0

    def test_linear_closed_form(self):
        axis = VoiceCoilAxis(gain_um_per_v=15.0, cubic_nonlinearity=0.0)
        assert voltage_for_position(axis, 7.5) == pytest.approx(2.5, rel=1e-12)

    def test_round_trip_within_dac_step(self):
        axis = VoiceCoilAxis(gain_um_per_v=15.0, cubic_nonlinearity=0.02)
        rng = np.random.default_rng(2)
        tol = dac_step(DAC) * axis.gain_um_per_v
        for target in rng.uniform(-14, 14, 300):
            v = dac_quantize(voltage_for_position(axis, target), DAC)
            assert abs(deflection(axis, v) - target) <= tol

    def test_unreachable_target_rejected(self):
        axis = VoiceCoilAxis(gain_um_per_v=15.0, cubic_nonlinearity=0.02)
        with pytest.raises(ActuatorRangeError, match="beyond reach"):
            voltage_for_position(axis, 20.0)


class TestDrift:
    def make_state(self, rate):
        axis = VoiceCoilAxis(gain_um_per_v=15.0, cubic_nonlinearity=0.0)
        return ActuatorState(x_axis=axis, y_axis=axis,
                             drift_rate_rms_um_per_sqrt_hour=rate)

    def test_zero_dt_is_identity_and_consumes_no_rng(self):
        rng = np.random.default_rng(0)
        before = rng.bit_generator.state["state"]["state"]
        state = self.make_state(0.5)
        assert advance_drift(state, 0.0, rng) == state
        assert rng.bit_generator.state["state"]["state"] == before

    def test_zero_rate_still_advances_clock(self):
        state = self.make_state(0.0)
        rng = np.random.default_rng(0)
        out = advance_drift(state, 10.0, rng)
        assert out.drift_offset_um == (0.0, 0.0)
        assert out.elapsed_s == 10.0

    def test_piezo_vs_voicecoil_mean_drift_ratio_5_to_1(self):
        # 40 minutes, 1000 trials per backend
        dt = 40 * 60.0
        ratios = []
        for rate in (0.5, 0.1):
            rng = np.random.default_rng(999)
            mags = []
            for _ in range(1000):
                st_ = advance_drift(self.make_state(rate), dt, rng)
                mags.append(np.hypot(*st_.drift_offset_um))
            ratios.append(np.mean(mags))
        ratio = ratios[0] / ratios[1]
        assert 4.0 <= ratio <= 6.0

    def test_variance_grows_linearly_with_slope_rate_squared(self):
        rate = 0.5
        rng = np.random.default_rng(123)
        dts = np.array([600.0, 1200.0, 2400.0, 4800.0])
        variances = []
        for dt in dts:
            offs = []
            for _ in range(4000):
                st_ = advance_drift(self.make_state(rate), dt, rng)
                offs.append(st_.drift_offset_um[0])
            variances.append(np.var(offs))
        slope = np.polyfit(dts / 3600.0, variances, 1)[0]
        assert abs(slope - rate**2) / rate**2 < 0.1

    def test_multi_step_walk_accumulates(self):
        state = self.make_state(0.5)
        rng = np.random.default_rng(7)
        for _ in range(100):
            state = advance_drift(state, 60.0, rng)
        assert state.elapsed_s == pytest.approx(6000.0)
        assert state.drift_offset_um != (0.0, 0.0)

    def test_negative_dt_rejected(self):
        with pytest.raises(ValueError):
            advance_drift(self.make_state(0.1), -1.0, np.random.default_rng(0))
