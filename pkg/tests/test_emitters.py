"""Emitter samples and the renewal emission process."""

import math

import numpy as np
import pytest
from scipy import stats

from photonbench.correlator import HistogramSpec, autocorrelate, correlate_bruteforce
from photonbench.emitters import (
    NV_MINUS,
    NV_ZERO,
    EmitterSpec,
    SampleInfeasibleError,
    SampleSpec,
    emission_times,
    excitation_for_emission_rate,
    generate_sample,
    next_emission_interval,
    renewal_emission_rate,
    sample_from_json,
    sample_to_json,
    sample_wavelength,
    sample_wavelengths,
)


class TestEmitterSpec:
    def test_charge_state_defaults(self):
        minus = EmitterSpec(position_um=(0, 0, 0), charge_state=NV_MINUS)
        zero = EmitterSpec(position_um=(0, 0, 0), charge_state=NV_ZERO)
        assert minus.lifetime_ns == 12.0 and minus.zpl_wavelength_nm == 638.0
        assert zero.lifetime_ns == 21.0 and zero.zpl_wavelength_nm == 575.0

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError):
            EmitterSpec(position_um=(0, 0, 0), lifetime_ns=-1.0)
        with pytest.raises(ValueError):
            EmitterSpec(position_um=(0, 0, 0), zpl_weight=1.5)
        with pytest.raises(ValueError):
            EmitterSpec(position_um=(0, 0, 0), charge_state="NVplus")


class TestGenerateSample:
    def test_deterministic_for_fixed_seed(self):
        spec = SampleSpec(rng_seed=42)
        assert generate_sample(spec) == generate_sample(spec)
        assert sample_to_json(generate_sample(spec)) == sample_to_json(generate_sample(spec))

    def test_min_spacing_two_waists(self):
        spec = SampleSpec(field_size_um=(40.0, 40.0), target_density_per_100um2=3.0,
                          min_spacing_um=3.32, rng_seed=7)
        field = generate_sample(spec)
        pos = field.positions()
        assert len(field.emitters) > 0
        for i in range(pos.shape[0]):
            for j in range(i + 1, pos.shape[0]):
                d = math.hypot(pos[i, 0] - pos[j, 0], pos[i, 1] - pos[j, 1])
                same_site = d == 0.0  # co-located multi-NV diamonds
                assert same_site or d >= 3.32

    def test_zero_density_gives_empty_field(self):
        field = generate_sample(SampleSpec(target_density_per_100um2=0.0))
        assert field.emitters == ()

    def test_positions_inside_centered_field(self):
        spec = SampleSpec(field_size_um=(20.0, 20.0), rng_seed=3)
        pos = generate_sample(spec).positions()
        assert np.all(np.abs(pos[:, 0]) <= 10.0)
        assert np.all(np.abs(pos[:, 1]) <= 10.0)

    def test_density_within_30_percent(self):
        spec = SampleSpec(field_size_um=(50.0, 50.0), target_density_per_100um2=4.0,
                          min_spacing_um=2.0, rng_seed=5)
        field = generate_sample(spec)
        assert 0.7 * 4.0 <= field.achieved_density_per_100um2 <= 1.3 * 4.0

    def test_infeasible_spec_raises(self):
        # ~56 sites demanded but a 7 um exclusion disk allows far fewer
        spec = SampleSpec(field_size_um=(15.0, 15.0), target_density_per_100um2=25.0,
                          min_spacing_um=7.0, rng_seed=1)
        with pytest.raises(SampleInfeasibleError, match="min_spacing"):
            generate_sample(spec)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SampleSpec(field_size_um=(0.0, 10.0))
        with pytest.raises(ValueError):
            SampleSpec(min_spacing_um=12.0, field_size_um=(20.0, 20.0))
        with pytest.raises(ValueError):
            SampleSpec(fraction_single=1.5)


class TestEmissionProcess:
    def test_interval_mean_is_sum_of_exponential_means(self):
        # k_exc = k_dec = 1/12 ns: mean interval 24 ns
        em = EmitterSpec(position_um=(0, 0, 0), charge_state=NV_MINUS)
        k = 1e9 / 12.0
        rng = np.random.default_rng(123)
        t = emission_times(em, k, int(3e10), rng)  # 30 ms: ~1.25e6 photons
        intervals = np.diff(t) / 1e3  # ns
        assert intervals.size > 1_000_000
        assert abs(intervals.mean() - 24.0) / 24.0 < 1e-3

    def test_scalar_interval_draws_match_batch_mean(self):
        em = EmitterSpec(position_um=(0, 0, 0))
        k = 1e9 / 12.0
        rng = np.random.default_rng(5)
        draws = np.array([next_emission_interval(em, k, rng) for _ in range(20_000)])
        assert abs(draws.mean() - 24.0) / 24.0 < 0.02

    def test_zero_excitation_is_infinite_interval(self):
        em = EmitterSpec(position_um=(0, 0, 0))
        rng = np.random.default_rng(0)
        assert next_emission_interval(em, 0.0, rng) == math.inf
        assert emission_times(em, 0.0, 10**12, rng).size == 0

    def test_negative_excitation_rejected(self):
        em = EmitterSpec(position_um=(0, 0, 0))
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            next_emission_interval(em, -1.0, rng)

    def test_long_run_rate_matches_renewal_formula(self):
        em = EmitterSpec(position_um=(0, 0, 0))
        k_exc = 2e7
        rng = np.random.default_rng(77)
        duration_ps = int(1e6 / renewal_emission_rate(k_exc, 1e9 / 12.0) * 1e12)
        t = emission_times(em, k_exc, duration_ps, rng)
        rate = t.size / (duration_ps / 1e12)
        expected = renewal_emission_rate(k_exc, 1e9 / 12.0)
        assert abs(rate - expected) / expected < 0.01

    def test_excitation_inversion_round_trip(self):
        k_dec = 1e9 / 12.0
        for target in (1e3, 1e5, 1e7):
            k_exc = excitation_for_emission_rate(target, k_dec)
            assert renewal_emission_rate(k_exc, k_dec) == pytest.approx(target, rel=1e-12)
        with pytest.raises(ValueError, match="ceiling"):
            excitation_for_emission_rate(k_dec, k_dec)

    def test_antibunching_by_construction(self):
        # k_exc << k_dec: the 200 ps bin next to zero delay is nearly empty
        em = EmitterSpec(position_um=(0, 0, 0))
        k_exc = 1e6
        rng = np.random.default_rng(2024)
        t = emission_times(em, k_exc, int(1.0e12), rng)  # ~1e6 photons in 1 s
        h = autocorrelate(t, HistogramSpec())
        expected_flat = t.size**2 * 200e-12 / 1.0
        first_bin = h.counts[h.spec.bin_of(0)]
        assert first_bin / expected_flat < 0.1

    def test_autocorrelation_shape_chi2_against_oracle(self):
        # renewal theory: g2(tau) = 1 - exp(-(k_exc + k_dec) |tau|)
        em = EmitterSpec(position_um=(0, 0, 0))
        k_exc = 1e9 / 12.0
        k_dec = 1e9 / 12.0
        rng = np.random.default_rng(314)
        n_target = 30_000
        duration_ps = int(n_target / renewal_emission_rate(k_exc, k_dec) * 1e12)
        t = emission_times(em, k_exc, duration_ps, rng)

        spec = HistogramSpec()
        h = correlate_bruteforce(t, t, spec)
        h.counts[spec.bin_of(0)] -= t.size  # drop self-pairs

        k_tot_per_ps = (k_exc + k_dec) / 1e12
        edges = spec.bin_edges().astype(np.float64)
        lo, hi = edges[:-1], edges[1:]
        # exact mean of 1 - exp(-k|tau|) over each bin
        def seg(a, b):
            return (b - a) + (np.exp(-k_tot_per_ps * b) - np.exp(-k_tot_per_ps * a)) / k_tot_per_ps
        pos = np.maximum(lo, 0.0), np.maximum(hi, 0.0)
        neg = np.minimum(hi, 0.0), np.minimum(lo, 0.0)
        mean_g2 = (seg(pos[0], pos[1]) + seg(-neg[1], -neg[0])) / spec.bin_width_ps

        density = t.size**2 * spec.bin_width_ps / duration_ps
        expected = density * mean_g2
        chi2 = float(np.sum((h.counts - expected) ** 2 / expected))
        assert chi2 < stats.chi2.ppf(0.99, spec.bin_count)


class TestWavelengths:
    def test_pure_zpl_nv_minus_stays_within_4nm(self):
        em = EmitterSpec(position_um=(0, 0, 0), charge_state=NV_MINUS, zpl_weight=1.0)
        rng = np.random.default_rng(8)
        lams = sample_wavelengths(em, 1000, rng)
        assert np.all(np.abs(lams - 638.0) <= 4.0)

    def test_pure_sideband_mostly_inside_630_800(self):
        em = EmitterSpec(position_um=(0, 0, 0), zpl_weight=0.0)
        rng = np.random.default_rng(9)
        lams = sample_wavelengths(em, 20_000, rng)
        frac = np.mean((lams >= 630.0) & (lams <= 800.0))
        assert frac >= 0.95
        assert np.all((lams >= 550.0) & (lams <= 850.0))  # truncation

    def test_fixed_seed_reproducible(self):
        em = EmitterSpec(position_um=(0, 0, 0))
        a = sample_wavelengths(em, 100, np.random.default_rng(4))
        b = sample_wavelengths(em, 100, np.random.default_rng(4))
        np.testing.assert_array_equal(a, b)
        assert (sample_wavelength(em, np.random.default_rng(4))
                == sample_wavelength(em, np.random.default_rng(4)))


class TestSerialization:
    def test_json_round_trip_byte_identical(self):
        field = generate_sample(SampleSpec(rng_seed=11))
        text = sample_to_json(field)
        again = sample_to_json(sample_from_json(text))
        assert text == again

    def test_round_trip_preserves_field(self):
        field = generate_sample(SampleSpec(rng_seed=12))
        assert sample_from_json(sample_to_json(field)) == field

    def test_schema_guard(self):
        with pytest.raises(ValueError, match="schema"):
            sample_from_json('{"schema": "bogus/1"}')
