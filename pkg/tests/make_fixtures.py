"""Regenerate the committed test fixtures in tests/data/.

The golden histogram is computed with the brute-force all-pairs oracle,
never with the production correlator, so CLI golden-file tests are an
independent check.  Run from the repository root:

    python tests/make_fixtures.py
"""

from pathlib import Path

import numpy as np

from photonbench.correlator import HistogramSpec, correlate_bruteforce, histogram_to_csv, \
    histogram_to_json, normalize
from photonbench.detection import TagStream, split_hbt, write_tags
from photonbench.emitters import EmitterSpec, emission_times, excitation_for_emission_rate
from photonbench.optics import BeamProfile, beam_radius

DATA = Path(__file__).parent / "data"
DURATION_PS = int(5e10)   # 50 ms

# Fixture provenance: one NV- renewal emitter (12 ns lifetime) emitting at
# 2e6 photons/s, split on an ideal 50/50 beamsplitter, no detector effects.
# Expected dip: g2(0) ~ 0 with recovery time 1/(k_exc + k_dec) ~ 11.7 ns.
# Recorded fit tolerances (see test_cli): g2_zero in [-0.15, 0.20],
# tau_anti within [8, 16] ns.
EMITTED_RATE =  2e6


def tag_fixture():
    rng = np.random.default_rng(0xF1D0)
    em = EmitterSpec(position_um=(0.0, 0.0, 0.0))
    k_exc = excitation_for_emission_rate(EMITTED_RATE, 1e9 / em.lifetime_ns)
    photons = emission_times(em, k_exc, DURATION_PS, rng)
    a, b = split_hbt(photons, rng)
    write_tags(TagStream(channel=0, timestamps=a, duration_ps=DURATION_PS), DATA / "tags_a.pbtg")
    write_tags(TagStream(channel=1, timestamps=b, duration_ps=DURATION_PS), DATA / "tags_b.pbtg")
    return a, b


def golden_histogram(a, b):
    # durations on import come back as the last tag; reproduce that here
    duration = int(max(a[-1], b[-1]))
    sa = TagStream(channel=0, timestamps=a, duration_ps=duration)
    sb = TagStream(channel=1, timestamps=b, duration_ps=duration)
    hist = normalize(correlate_bruteforce(sa, sb, HistogramSpec()))
    (DATA / "golden_hist.json").write_text(histogram_to_json(hist))
    (DATA / "golden_hist.csv").write_text(histogram_to_csv(hist))


def zscan_fixture():
    beam = BeamProfile(w0_um=1.66, wavelength_nm=532.0)
    rng = np.random.default_rng(0xBEA3)
    z = np.linspace(-40.0, 40.0, 9)
    w = beam_radius(beam, z) * (1.0 + rng.normal(0.0, 0.05, z.size))
    lines = ["z_um,radius_um"] + [f"{zi},{wi}" for zi, wi in zip(z, w)]
    (DATA / "zscan.csv").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    DATA.mkdir(exist_ok=True)
    a, b = tag_fixture()
    golden_histogram(a, b)
    zscan_fixture()
    print(f"fixtures written to {DATA}")
