"""Correlator: oracle equivalence, binning conventions, streaming accumulation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from photonbench.correlator import (
    Accumulator,
    CorrelatorError,
    HistogramSpec,
    autocorrelate,
    correlate,
    correlate_bruteforce,
    histogram_from_csv,
    histogram_from_json,
    histogram_to_csv,
    histogram_to_json,
    normalize,
)

DEFAULT = HistogramSpec()


def poisson_stream(rate_per_s, duration_s, rng):
    n = rng.poisson(rate_per_s * duration_s)
    return np.sort(rng.integers(0, int(duration_s * 1e12), n))


class TestBinning:
    def test_single_pair_positive_delay_lands_in_bin_500(self):
        h = correlate(np.array([0]), np.array([100]), DEFAULT)
        assert h.counts[500] == 1
        assert h.counts.sum() == 1

    def test_single_pair_negative_delay_lands_in_bin_499(self):
        h = correlate(np.array([1000]), np.array([900]), DEFAULT)
        assert h.counts[499] == 1
        assert h.counts.sum() == 1

    def test_bin_edges_are_half_open(self):
        # tau exactly +200 ps is outside bin 500, inside bin 501
        h = correlate(np.array([0]), np.array([200]), DEFAULT)
        assert h.counts[501] == 1
        # tau exactly at the upper window edge is excluded
        edge = DEFAULT.window_hi_ps
        h = correlate(np.array([0]), np.array([edge]), DEFAULT)
        assert h.counts.sum() == 0
        # tau exactly at the lower edge is included
        h = correlate(np.array([0]), np.array([DEFAULT.window_lo_ps]), DEFAULT)
        assert h.counts[0] == 1

    def test_spec_validation(self):
        with pytest.raises(CorrelatorError):
            HistogramSpec(bin_width_ps=0)
        with pytest.raises(CorrelatorError):
            HistogramSpec(bin_count=3)
        with pytest.raises(CorrelatorError):
            HistogramSpec(bin_count=0)

    def test_unordered_input_rejected(self):
        with pytest.raises(CorrelatorError, match="not time-ordered"):
            correlate(np.array([5, 1]), np.array([0, 1]), DEFAULT)
        with pytest.raises(CorrelatorError, match="not time-ordered"):
            correlate_bruteforce(np.array([0, 1]), np.array([5, 1]), DEFAULT)


class TestBruteforce:
    def test_empty_channel_gives_all_zero(self):
        h = correlate_bruteforce(np.array([], dtype=np.int64), np.array([1, 2, 3]), DEFAULT)
        assert h.counts.sum() == 0

    def test_four_pair_enumeration(self):
        # a = b = [0, 1 us]; window +/-100 ns: only the two tau=0 pairs fall in
        spec = HistogramSpec(bin_width_ps=200, bin_count=1000)
        t = np.array([0, 1_000_000])
        h = correlate_bruteforce(t, t, spec)
        assert h.counts.sum() == 2
        assert h.counts[spec.bin_of(0)] == 2


def random_instance(rng):
    """Randomized adversarial instance: bursts, ties, offsets, odd windows."""
    kind = rng.integers(0, 4)
    n_a = int(rng.integers(100, 10_000))
    n_b = int(rng.integers(100, 10_000))
    span = int(10 ** rng.uniform(5, 9))
    a = rng.integers(0, span, n_a)
    b = rng.integers(0, span, n_b)
    if kind == 1:  # bursts: many tags in a tight cluster
        centers = rng.integers(0, span, 10)
        a = centers[rng.integers(0, 10, n_a)] + rng.integers(0, 500, n_a)
        b = centers[rng.integers(0, 10, n_b)] + rng.integers(0, 500, n_b)
    elif kind == 2:  # heavy ties incl. cross-channel equal timestamps
        a = rng.integers(0, 50, n_a) * 200
        b = rng.integers(0, 50, n_b) * 200
    elif kind == 3:  # everything in one bin
        a = rng.integers(0, 50, n_a)
        b = rng.integers(0, 50, n_b)
    spec = HistogramSpec(
        bin_width_ps=int(rng.choice([1, 7, 200, 1000])),
        bin_count=int(rng.choice([2, 10, 100, 1000])),
    )
    return np.sort(a), np.sort(b), spec


class TestOracleEquivalence:
    def test_matches_bruteforce_on_randomized_instances(self):
        rng = np.random.default_rng(20240811)
        for _ in range(60):
            a, b, spec = random_instance(rng)
            fast = correlate(a, b, spec)
            slow = correlate_bruteforce(a, b, spec)
            np.testing.assert_array_equal(fast.counts, slow.counts)

    @settings(max_examples=50, deadline=None)
    @given(
        a=st.lists(st.integers(0, 10**6), min_size=0, max_size=60),
        b=st.lists(st.integers(0, 10**6), min_size=0, max_size=60),
        bw=st.sampled_from([1, 3, 200]),
        nbins=st.sampled_from([2, 8, 100]),
    )
    def test_matches_bruteforce_property(self, a, b, bw, nbins):
        a = np.sort(np.asarray(a, dtype=np.int64))
        b = np.sort(np.asarray(b, dtype=np.int64))
        spec = HistogramSpec(bin_width_ps=bw, bin_count=nbins)
        np.testing.assert_array_equal(
            correlate(a, b, spec).counts, correlate_bruteforce(a, b, spec).counts
        )

    def test_time_reversal(self):
        # choose timestamps so no delay lands exactly on a bin edge
        rng = np.random.default_rng(7)
        a = np.sort(rng.integers(0, 10**7, 2000)) * 200
        b = np.sort(rng.integers(0, 10**7, 2000)) * 200 + 77
        fwd = correlate(a, b, DEFAULT).counts
        rev = correlate(b, a, DEFAULT).counts
        np.testing.assert_array_equal(fwd, rev[::-1])

    def test_time_reversal_boundary_pairs_shift_bins(self):
        # a delay exactly on a bin edge does NOT obey the mirror map k -> n-1-k:
        # +200 ps sits at the left edge of bin 501, -200 ps at the left edge of
        # bin 499, but the mirror of 501 would be 498
        a = np.array([0])
        b = np.array([200])
        fwd = correlate(a, b, DEFAULT).counts
        rev = correlate(b, a, DEFAULT).counts
        assert fwd[501] == 1
        assert rev[499] == 1 and rev[498] == 0


class TestAccumulator:
    def test_single_chunk_equals_correlate(self):
        rng = np.random.default_rng(3)
        a = poisson_stream(1e5, 0.01, rng)
        b = poisson_stream(1e5, 0.01, rng)
        acc = Accumulator(DEFAULT)
        acc.add(a, b)
        np.testing.assert_array_equal(acc.finalize().counts, correlate(a, b, DEFAULT).counts)

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_random_chunk_split_equals_unsplit(self, seed):
        rng = np.random.default_rng(seed)
        a = poisson_stream(2e5, 0.01, rng)
        b = poisson_stream(2e5, 0.01, rng)
        acc = Accumulator(DEFAULT)
        cuts_a = np.sort(rng.integers(0, a.size, 99))
        cuts_b = np.sort(rng.integers(0, b.size, 99))
        for ca, cb in zip(np.split(a, cuts_a), np.split(b, cuts_b)):
            acc.add(ca, cb)
        np.testing.assert_array_equal(acc.finalize().counts, correlate(a, b, DEFAULT).counts)

    def test_non_monotone_append_rejected(self):
        acc = Accumulator(DEFAULT)
        acc.add(np.array([1000]), np.array([1000]))
        with pytest.raises(CorrelatorError, match="precedes"):
            acc.add(np.array([500]), np.array([2000]))

    def test_tail_memory_bounded(self):
        # tails stay O(rate * window) regardless of total stream length
        rng = np.random.default_rng(11)
        acc = Accumulator(DEFAULT)
        highwater = 0
        t0 = 0
        chunk_ps = 10**9
        for _ in range(50):
            a = np.sort(rng.integers(t0, t0 + chunk_ps, 2000))
            b = np.sort(rng.integers(t0, t0 + chunk_ps, 2000))
            acc.add(a, b)
            highwater = max(highwater, sum(acc.tail_sizes))
            t0 += chunk_ps
        # window is 200 ns of a 1 ms chunk: expected tail ~ 2000 * 2e-4 << 100
        assert highwater < 200

    def test_snapshot_monotone_totals(self):
        rng = np.random.default_rng(5)
        acc = Accumulator(DEFAULT)
        prev = 0
        t0 = 0
        for _ in range(10):
            a = np.sort(rng.integers(t0, t0 + 10**8, 300))
            b = np.sort(rng.integers(t0, t0 + 10**8, 300))
            acc.add(a, b)
            snap = acc.snapshot()
            total = int(snap.counts.sum())
            assert total >= prev
            prev = total
            t0 += 10**8


class TestNormalize:
    def test_uncorrelated_poisson_normalizes_to_one(self):
        rng = np.random.default_rng(42)
        dur = int(10e12)
        a = np.sort(rng.integers(0, dur, 10**6))  # 1e5 counts/s for 10 s
        b = np.sort(rng.integers(0, dur, 10**6))
        h = correlate(a, b, DEFAULT)
        h.duration_ps = dur
        g2 = normalize(h).normalized
        assert 0.97 <= g2.mean() <= 1.03

    def test_doubling_duration_same_rate_keeps_mean(self):
        rng = np.random.default_rng(43)
        means = []
        for t_s in (5, 10):
            dur = int(t_s * 1e12)
            a = np.sort(rng.integers(0, dur, 10**5 * t_s))
            b = np.sort(rng.integers(0, dur, 10**5 * t_s))
            h = correlate(a, b, DEFAULT)
            h.duration_ps = dur
            means.append(normalize(h).normalized.mean())
        assert abs(means[0] - means[1]) < 0.05

    def test_all_zero_counts_stay_zero(self):
        h = correlate(np.array([0]), np.array([10**12]), DEFAULT)
        h.duration_ps = 10**12
        assert np.all(normalize(h).normalized == 0.0)

    def test_zero_fields_raise_named_error(self):
        h = correlate(np.array([], dtype=np.int64), np.array([1, 2]), DEFAULT)
        with pytest.raises(CorrelatorError, match="n_a"):
            normalize(h)
        h2 = correlate(np.array([0]), np.array([0]), DEFAULT)
        h2.duration_ps = 0
        with pytest.raises(CorrelatorError, match="duration_ps"):
            normalize(h2)


class TestAutocorrelate:
    def test_self_pairs_excluded(self):
        t = np.array([0, 10**6, 2 * 10**6])  # pairwise delays outside window
        h = autocorrelate(t, DEFAULT)
        assert h.counts.sum() == 0

    def test_equal_timestamps_cross_pairs_kept(self):
        t = np.array([500, 500])
        h = autocorrelate(t, DEFAULT)
        assert h.counts[DEFAULT.bin_of(0)] == 2  # (i,j) and (j,i), i != j


class TestRoundTrip:
    def test_json_round_trip_byte_identical(self):
        rng = np.random.default_rng(9)
        a = poisson_stream(1e5, 0.01, rng)
        b = poisson_stream(1e5, 0.01, rng)
        h = normalize(correlate(a, b, DEFAULT))
        text = histogram_to_json(h)
        again = histogram_to_json(histogram_from_json(text))
        assert text == again

    def test_csv_round_trip_byte_identical(self):
        rng = np.random.default_rng(10)
        a = poisson_stream(1e5, 0.01, rng)
        b = poisson_stream(1e5, 0.01, rng)
        h = normalize(correlate(a, b, DEFAULT))
        text = histogram_to_csv(h)
        again = histogram_to_csv(histogram_from_csv(text))
        assert text == again

    def test_json_schema_guard(self):
        with pytest.raises(CorrelatorError, match="schema"):
            histogram_from_json('{"schema": "something/9"}')
