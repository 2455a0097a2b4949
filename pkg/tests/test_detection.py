"""HBT splitter, SPAD chain, tag stream formats."""

import numpy as np
import pytest
from scipy import stats

from photonbench.correlator import HistogramSpec, correlate, normalize
from photonbench.detection import (
    SpadSpec,
    TagStream,
    TagStreamError,
    apply_detector,
    read_tags,
    read_tags_csv,
    split_hbt,
    write_tags,
    write_tags_csv,
)
from photonbench.emitters import EmitterSpec, emission_times

IDEAL = SpadSpec(efficiency=1.0, dead_time_ns=0.0, jitter_sigma_ps=0.0, dark_count_rate=0.0)


class TestTagStream:
    def test_invariants_enforced(self):
        with pytest.raises(TagStreamError):
            TagStream(channel=0, timestamps=np.array([5, 1]), duration_ps=10)
        with pytest.raises(TagStreamError):
            TagStream(channel=0, timestamps=np.array([1, 20]), duration_ps=10)
        with pytest.raises(TagStreamError):
            TagStream(channel=70000, timestamps=np.array([1]), duration_ps=10)

    def test_rate(self):
        s = TagStream(channel=0, timestamps=np.arange(1000), duration_ps=10**12)
        assert s.rate_per_s == pytest.approx(1000.0)


class TestSplit:
    def test_fair_binomial_split(self):
        rng = np.random.default_rng(0)
        photons = np.sort(rng.integers(0, 10**12, 10**6))
        a, b = split_hbt(photons, rng)
        # union is the input, both ordered
        assert a.size + b.size == photons.size
        np.testing.assert_array_equal(np.sort(np.concatenate([a, b])), photons)
        assert np.all(np.diff(a) >= 0) and np.all(np.diff(b) >= 0)
        sigma = 0.5 * np.sqrt(10**6)
        assert abs(a.size - 5e5) < 3 * sigma

    def test_empty_input(self):
        a, b = split_hbt(np.array([], dtype=np.int64), np.random.default_rng(0))
        assert a.size == 0 and b.size == 0

    def test_reproducible_for_fixed_seed(self):
        photons = np.arange(1000, dtype=np.int64) * 1000
        a1, b1 = split_hbt(photons, np.random.default_rng(5))
        a2, b2 = split_hbt(photons, np.random.default_rng(5))
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(b1, b2)


class TestDetector:
    def test_efficiency_zero_no_darks_empty(self):
        spad = SpadSpec(efficiency=0.0, dark_count_rate=0.0)
        out = apply_detector(np.arange(100) * 10**6, spad, 10**9, np.random.default_rng(0))
        assert out.count == 0

    def test_dead_time_drops_close_pair(self):
        spad = SpadSpec(efficiency=1.0, dead_time_ns=45.0, jitter_sigma_ps=0.0,
                        dark_count_rate=0.0)
        out = apply_detector(np.array([0, 10_000]), spad, 10**6, np.random.default_rng(0))
        np.testing.assert_array_equal(out.timestamps, [0])

    def test_dead_time_gap_invariant(self):
        em = EmitterSpec(position_um=(0, 0, 0))
        rng = np.random.default_rng(3)
        photons = emission_times(em, 5e7, 10**10, rng)
        spad = SpadSpec(efficiency=0.8, dead_time_ns=45.0, jitter_sigma_ps=350.0,
                        dark_count_rate=1000.0)
        out = apply_detector(photons, spad, 10**10, rng)
        assert np.all(np.diff(out.timestamps) > 45_000)

    def test_dark_counts_poisson(self):
        spad = SpadSpec(efficiency=0.0, dead_time_ns=0.0, jitter_sigma_ps=0.0,
                        dark_count_rate=250.0)
        out = apply_detector(np.array([], dtype=np.int64), spad, int(10e12),
                             np.random.default_rng(11))
        assert abs(out.count - 2500) < 3 * np.sqrt(2500)

    def test_dark_interarrivals_exponential_ks(self):
        spad = SpadSpec(efficiency=0.0, dead_time_ns=0.0, jitter_sigma_ps=0.0,
                        dark_count_rate=10_000.0)
        out = apply_detector(np.array([], dtype=np.int64), spad, int(10e12),
                             np.random.default_rng(12))
        gaps = np.diff(out.timestamps) / 1e12
        res = stats.kstest(gaps, "expon", args=(0, gaps.mean()))
        assert res.pvalue > 0.01

    def test_output_bounded_by_thinned_plus_darks(self):
        rng = np.random.default_rng(4)
        photons = np.sort(rng.integers(0, 10**10, 50_000))
        spad = SpadSpec(efficiency=0.5, dead_time_ns=45.0, jitter_sigma_ps=350.0,
                        dark_count_rate=5000.0)
        out = apply_detector(photons, spad, 10**10, rng)
        # generous bound: every photon plus 5 sigma of darks
        darks_max = 5000 * 0.01 + 5 * np.sqrt(50)
        assert out.count <= photons.size + darks_max

    def test_ideal_detector_preserves_stream(self):
        photons = np.sort(np.random.default_rng(5).integers(0, 10**9, 1000))
        out = apply_detector(photons, IDEAL, 10**9, np.random.default_rng(0))
        np.testing.assert_array_equal(out.timestamps, photons)

    def test_unordered_or_out_of_range_rejected(self):
        with pytest.raises(TagStreamError):
            apply_detector(np.array([5, 1]), IDEAL, 10**9, np.random.default_rng(0))
        with pytest.raises(TagStreamError):
            apply_detector(np.array([10**10]), IDEAL, 10**9, np.random.default_rng(0))

    def test_full_chain_antibunching_first_bin(self):
        # one ideal emitter through splitter and two realistic SPADs
        em = EmitterSpec(position_um=(0, 0, 0))
        rng = np.random.default_rng(21)
        duration = int(2e12)
        photons = emission_times(em, 2e6, duration, rng)  # k_exc << k_dec
        arm_a, arm_b = split_hbt(photons, rng)
        spad = SpadSpec()
        tags_a = apply_detector(arm_a, spad, duration, np.random.default_rng(22))
        tags_b = apply_detector(arm_b, spad, duration, np.random.default_rng(23))
        h = normalize(correlate(tags_a, tags_b, HistogramSpec()))
        assert h.normalized[h.spec.bin_of(0)] < 0.1


class TestTagFiles:
    def make_stream(self, seed=0, n=5000):
        rng = np.random.default_rng(seed)
        t = np.sort(rng.integers(0, 10**12, n))
        return TagStream(channel=3, timestamps=t, duration_ps=int(t[-1]))

    def test_pbtg_round_trip_byte_identical(self, tmp_path):
        s = self.make_stream()
        p1 = tmp_path / "a.pbtg"
        p2 = tmp_path / "b.pbtg"
        write_tags(s, p1)
        write_tags(read_tags(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_pbtg_preserves_stream(self, tmp_path):
        s = self.make_stream(seed=1)
        path = tmp_path / "s.pbtg"
        write_tags(s, path)
        back = read_tags(path)
        assert back.channel == 3
        np.testing.assert_array_equal(back.timestamps, s.timestamps)

    def test_pbtg_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "bad.pbtg"
        path.write_bytes(b"NOPE" + b"\x00" * 12)
        with pytest.raises(TagStreamError, match="magic"):
            read_tags(path)

    def test_pbtg_rejects_truncation(self, tmp_path):
        s = self.make_stream(seed=2, n=100)
        path = tmp_path / "t.pbtg"
        write_tags(s, path)
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(TagStreamError, match="truncated"):
            read_tags(path)

    def test_csv_round_trip_byte_identical(self, tmp_path):
        s = self.make_stream(seed=3, n=500)
        p1 = tmp_path / "a.csv"
        p2 = tmp_path / "b.csv"
        write_tags_csv(s, p1)
        write_tags_csv(read_tags_csv(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_csv_rejects_mixed_channels(self, tmp_path):
        path = tmp_path / "mixed.csv"
        path.write_text("channel,timestamp_ps\n0,100\n1,200\n")
        with pytest.raises(TagStreamError, match="mixed"):
            read_tags_csv(path)
