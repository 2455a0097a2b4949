"""Curve fits and image analysis: antibunching dip, beam waist, Gaussian
cross-sections, deflection linearity, scan-image spot detection, and the
single-emitter verdict.

All fits run on the shared damped least-squares core (``fitting``) and
report parameter covariances.  The antibunching model

    g2(tau) = baseline - amplitude * exp(-|tau - tau0| / tau_anti)

includes a fitted dip-center shift tau0 to absorb channel delay mismatch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter

from . import fitting
from .correlator import CorrelationHistogram

__all__ = [
    "FitError",
    "G2Fit",
    "BeamWaistFit",
    "CrossSectionFit",
    "LinearFit",
    "Spot",
    "SpotList",
    "fit_g2",
    "fit_beam_waist",
    "fit_gaussian_cross_section",
    "fit_linear",
    "find_spots",
    "classify_single_emitter",
    "SINGLE",
    "NOT_SINGLE",
    "INCONCLUSIVE",
]

SINGLE = "single"
NOT_SINGLE = "not_single"
INCONCLUSIVE = "inconclusive"

SINGLE_EMITTER_THRESHOLD = 0.5
PS_PER_NS = 1000.0
NM_PER_UM = 1000.0


class FitError(ValueError):
    """Fit input rejected (too few points, degenerate data, non-finite values)."""


# ---------------------------------------------------------------------------
# antibunching dip

@dataclass
class G2Fit:
    """Antibunching fit result.

    ``covariance`` rows/columns are ordered (baseline, amplitude, tau0_ns,
    tau_anti_ns).  ``g2_zero`` is the model value at the fitted dip center,
    baseline - amplitude; ``g2_zero_raw_bin`` is the measured value of the
    bin containing tau = 0, reported alongside for comparison.
    """

    g2_zero: float
    tau_anti_ns: float
    amplitude: float
    baseline: float
    tau0_ns: float
    covariance: np.ndarray
    converged: bool
    g2_zero_raw_bin: float
    n_iterations: int = 0

    @property
    def g2_zero_sigma(self) -> float:
        c = self.covariance
        var = c[0, 0] + c[1, 1] - 2.0 * c[0, 1]
        return math.sqrt(max(var, 0.0))

    def to_dict(self) -> dict:
        return {
            "g2_zero": self.g2_zero,
            "g2_zero_sigma": self.g2_zero_sigma,
            "g2_zero_raw_bin": self.g2_zero_raw_bin,
            "tau_anti_ns": self.tau_anti_ns,
            "amplitude": self.amplitude,
            "baseline": self.baseline,
            "tau0_ns": self.tau0_ns,
            "converged": self.converged,
            "n_iterations": self.n_iterations,
            "covariance": self.covariance.tolist(),
            "verdict": classify_single_emitter(self),
        }


def _g2_model(tau_ns: np.ndarray, p: np.ndarray) -> np.ndarray:
    baseline, amplitude, tau0, tau_anti = p
    # clipped exponent: keeps trial steps with tiny or wrong-sign tau_anti
    # finite so the damping logic can reject them gracefully
    exponent = np.clip(-np.abs(tau_ns - tau0) / tau_anti, -745.0, 60.0)
    return baseline - amplitude * np.exp(exponent)


def _g2_jacobian(tau_ns: np.ndarray, p: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    baseline, amplitude, tau0, tau_anti = p
    d = tau_ns - tau0
    e = np.exp(-np.abs(d) / tau_anti)
    jac = np.empty((tau_ns.size, 4))
    jac[:, 0] = 1.0
    jac[:, 1] = -e
    jac[:, 2] = -amplitude * e * np.sign(d) / tau_anti
    jac[:, 3] = -amplitude * e * np.abs(d) / tau_anti ** 2
    return jac / sigma[:, None]


def fit_g2(h: CorrelationHistogram) -> G2Fit:
    """Weighted least-squares antibunching fit on a normalized histogram.

    Weights are Poissonian, sigma_k^2 proportional to the raw bin counts
    with a floor of one count.  The fit is flagged unconverged when the
    iteration budget runs out or the dip amplitude is below 2 sigma.
    """
    if h.normalized is None:
        raise FitError("histogram is not normalized; call correlator.normalize first")
    if h.spec.bin_count < 20:
        raise FitError(f"need >= 20 bins to fit, got {h.spec.bin_count}")

    tau_ns = h.spec.bin_centers() / PS_PER_NS
    y = np.asarray(h.normalized, dtype=np.float64)
    # Poisson error on counts propagated through the normalization scale,
    # which is identical for every bin
    counts = np.asarray(h.counts, dtype=np.float64)
    nonzero = counts > 0
    if np.any(nonzero):
        y0_scale = float(np.median(y[nonzero] / counts[nonzero]))
    else:
        y0_scale = 1.0
    sigma = y0_scale * np.sqrt(np.maximum(counts, 1.0))

    n_outer = max(int(0.1 * h.spec.bin_count), 1)
    outer = np.concatenate([y[:n_outer], y[-n_outer:]])
    baseline0 = float(np.median(outer))
    # initialize the dip position on a smoothed curve so a single empty
    # outer bin cannot hijack the center estimate
    kernel = np.ones(5) / 5.0
    y_smooth = np.convolve(y, kernel, mode="same")
    amplitude0 = max(baseline0 - float(np.min(y_smooth)), 1e-6)
    tau0_0 = float(tau_ns[int(np.argmin(y_smooth))])

    raw_zero = float(y[h.spec.bin_of(0)])

    if np.allclose(y, y[0]):
        # degenerate: flat histogram, baseline-only description
        cov = np.zeros((4, 4))
        return G2Fit(g2_zero=float(y[0]), tau_anti_ns=0.0, amplitude=0.0,
                     baseline=float(y[0]), tau0_ns=0.0, covariance=cov,
                     converged=False, g2_zero_raw_bin=raw_zero)

    residual = lambda p: (_g2_model(tau_ns, p) - y) / sigma
    jacobian = lambda p: _g2_jacobian(tau_ns, p, sigma)
    res = fitting.least_squares(residual, np.array([baseline0, amplitude0, tau0_0, 10.0]),
                                jacobian=jacobian)
    if not res.converged or res.params[3] < 0:
        # second start with the dip centered at zero delay
        retry = fitting.least_squares(residual, np.array([baseline0, amplitude0, 0.0, 10.0]),
                                      jacobian=jacobian)
        if retry.cost < res.cost:
            res = retry

    baseline, amplitude, tau0, tau_anti = res.params
    # mirror the sign ambiguity of the exponential's time constant
    tau_anti = abs(tau_anti)
    sigma_amp = math.sqrt(max(res.covariance[1, 1], 0.0))
    significant = amplitude > 2.0 * sigma_amp
    return G2Fit(
        g2_zero=float(baseline - amplitude),
        tau_anti_ns=float(tau_anti),
        amplitude=float(amplitude),
        baseline=float(baseline),
        tau0_ns=float(tau0),
        covariance=res.covariance,
        converged=bool(res.converged and significant and tau_anti > 0),
        g2_zero_raw_bin=raw_zero,
        n_iterations=res.n_iter,
    )


def classify_single_emitter(fit: G2Fit) -> str:
    """Single-photon verdict from the fitted dip: below 0.5 means single.

    Uses a 2 sigma guard band on g2(0); unconverged fits are inconclusive.
    """
    if not fit.converged:
        return INCONCLUSIVE
    s = fit.g2_zero_sigma
    if fit.g2_zero + 2.0 * s < SINGLE_EMITTER_THRESHOLD:
        return SINGLE
    if fit.g2_zero - 2.0 * s >= SINGLE_EMITTER_THRESHOLD:
        return NOT_SINGLE
    return INCONCLUSIVE


# ---------------------------------------------------------------------------
# beam waist

@dataclass
class BeamWaistFit:
    w0_um: float
    z_focus_um: float
    w0_uncertainty_um: float
    residual_rms_um: float
    converged: bool


def fit_beam_waist(samples, wavelength_nm: float = 532.0,
                   m_squared: float = 1.0) -> BeamWaistFit:
    """Fit w(z) = w0 sqrt(1 + ((z - z0) M^2 lambda / (pi w0^2))^2) to
    (z, radius) measurements, solving for (w0, z0).

    Needs at least 3 distinct z positions.  The w0 uncertainty comes from
    the parameter covariance scaled by the residual variance.
    """
    pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise FitError("samples must be a list of (z, radius) pairs")
    if not np.all(np.isfinite(pts)):
        raise FitError("samples contain non-finite values")
    z, w = pts[:, 0], pts[:, 1]
    if np.unique(z).size < 3:
        raise FitError(f"need >= 3 distinct z positions, got {np.unique(z).size}")
    if np.any(w <= 0):
        raise FitError("radii must be positive")
    if np.allclose(w, w[0]):
        raise FitError("degenerate data: all radii equal, waist is unconstrained")

    lam_um = wavelength_nm / NM_PER_UM

    def model(p):
        w0, z0 = p
        u = (z - z0) * m_squared * lam_um / (math.pi * w0 ** 2)
        return w0 * np.sqrt(1.0 + u * u)

    def jac(p):
        w0, z0 = p
        u = (z - z0) * m_squared * lam_um / (math.pi * w0 ** 2)
        root = np.sqrt(1.0 + u * u)
        out = np.empty((z.size, 2))
        out[:, 0] = (1.0 - u * u) / root
        out[:, 1] = -w0 * u * (m_squared * lam_um / (math.pi * w0 ** 2)) / root
        return out

    # w^2(z) is a parabola: a z^2 + b z + c with z0 = -b/2a, w0^2 = c - b^2/4a.
    # Its closed-form fit makes a divergence-proof starting point; the
    # constrained nonlinear fit then ties the curvature to w0 via lambda.
    w0_0 = float(np.min(w))
    z0_0 = float(z[np.argmin(w)])
    pa, pb, pc = np.polyfit(z, w * w, 2)
    if pa > 0 and pc - pb * pb / (4 * pa) > 0:
        z0_0 = float(-pb / (2 * pa))
        w0_0 = float(math.sqrt(pc - pb * pb / (4 * pa)))
    res = fitting.least_squares(lambda p: model(p) - w, np.array([w0_0, z0_0]), jacobian=jac)
    w0, z0 = res.params
    stderr = res.stderr(scale_by_residual=True, n_data=z.size)
    return BeamWaistFit(
        w0_um=float(abs(w0)),
        z_focus_um=float(z0),
        w0_uncertainty_um=float(stderr[0]),
        residual_rms_um=float(np.sqrt(res.cost / z.size)),
        converged=bool(res.converged and w0 > 0),
    )


# ---------------------------------------------------------------------------
# 1D Gaussian cross-section (beam profiling of mode images)

@dataclass
class CrossSectionFit:
    center_um: float
    sigma_um: float
    amplitude: float
    offset: float
    degenerate: bool = False

    @property
    def radius_1e2_um(self) -> float:
        """1/e^2 intensity radius, 2 sigma."""
        return 2.0 * self.sigma_um


def fit_gaussian_cross_section(row, pixel_pitch_um: float) -> CrossSectionFit:
    """Least-squares 1D Gaussian + constant offset through an intensity row."""
    y = np.asarray(row, dtype=np.float64)
    if y.ndim != 1 or y.size < 5:
        raise FitError(f"need a 1D row of >= 5 samples, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise FitError("row contains non-finite values")
    x = np.arange(y.size, dtype=np.float64) * pixel_pitch_um

    # peak-anchored initialization: a narrow line on a long noisy row would
    # swamp whole-row moments with background, so locate the peak on a
    # smoothed copy and size sigma from its half-maximum span
    k = min(5, y.size)
    smooth = np.convolve(y, np.ones(k) / k, mode="same")
    offset0 = float(np.median(y))
    amp0 = float(np.max(smooth) - offset0)
    if amp0 <= 0 or np.allclose(y, y[0]):
        return CrossSectionFit(center_um=float(x[y.size // 2]), sigma_um=0.0,
                               amplitude=0.0, offset=float(np.mean(y)), degenerate=True)
    center0 = float(x[int(np.argmax(smooth))])
    above_half = np.flatnonzero(smooth - offset0 > amp0 / 2.0)
    fwhm0 = (above_half.size if above_half.size else 1) * pixel_pitch_um
    sigma0 = max(fwhm0 / 2.355, pixel_pitch_um / 2.0)

    def model(p):
        a, c, s, o = p
        return a * np.exp(-0.5 * ((x - c) / s) ** 2) + o

    res = fitting.least_squares(lambda p: model(p) - y,
                                np.array([amp0, center0, sigma0, offset0]))
    a, c, s, o = res.params
    return CrossSectionFit(center_um=float(c), sigma_um=float(abs(s)),
                           amplitude=float(a), offset=float(o),
                           degenerate=not res.converged)


# ---------------------------------------------------------------------------
# ordinary least squares line

@dataclass
class LinearFit:
    slope: float
    intercept: float
    max_abs_residual: float
    residual_rms: float


def fit_linear(samples) -> LinearFit:
    """Ordinary least-squares line with residual diagnostics."""
    pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise FitError("need >= 2 (x, y) samples")
    x, y = pts[:, 0], pts[:, 1]
    if np.unique(x).size < 2:
        raise FitError("need >= 2 distinct x values")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return LinearFit(slope=float(slope), intercept=float(intercept),
                     max_abs_residual=float(np.max(np.abs(resid))),
                     residual_rms=float(np.sqrt(np.mean(resid ** 2))))


# ---------------------------------------------------------------------------
# spot detection on scan images

@dataclass
class Spot:
    center_um: tuple[float, float]
    peak_counts: float
    ellipticity: float            # major / minor fitted width, >= 1
    width_um: float               # geometric mean of the fitted sigmas


@dataclass
class SpotList:
    spots: list[Spot]

    def __len__(self) -> int:
        return len(self.spots)

    def __iter__(self):
        return iter(self.spots)


def _fit_patch(values: np.ndarray, rr: np.ndarray, cc: np.ndarray, s0: float):
    """2D elliptical Gaussian + offset on flattened neighborhood pixels.

    Returns (row_c, col_c, sigma_r, sigma_c, amplitude, offset) in pixels.
    """
    offset0 = float(np.min(values))
    amp0 = float(np.max(values) - offset0)
    peak = int(np.argmax(values))
    r0, c0 = float(rr[peak]), float(cc[peak])

    def model(p):
        a, rc, cc_, sr, sc, o = p
        return a * np.exp(-0.5 * (((rr - rc) / sr) ** 2 + ((cc - cc_) / sc) ** 2)) + o

    res = fitting.least_squares(
        lambda p: model(p) - values,
        np.array([amp0, r0, c0, s0, s0, offset0]),
        max_iter=100,
    )
    a, rc, cc_, sr, sc, o = res.params
    return float(rc), float(cc_), float(abs(sr)), float(abs(sc)), float(a), float(o)


def find_spots(img, min_snr: float = 5.0) -> SpotList:
    """Locate bright emitters in a scan image.

    Candidates are local maxima above median + min_snr * robust sigma;
    each is refined by a 2D Gaussian fit in a 7x7 px neighborhood.  When
    the first fit reports a spot wider than that neighborhood can
    constrain, the fit is repeated on an enlarged window (a 7x7 dome top
    of a 4 px sigma spot pins neither width nor ellipticity).  Spots
    closer than one fitted width are merged (brightest wins).  Verdicts
    are unchanged by adding a constant offset to the image.
    """
    counts = np.asarray(img.counts, dtype=np.float64)
    if counts.size == 0:
        raise FitError("image is empty")
    ny, nx = counts.shape

    background = float(np.median(counts))
    mad = float(np.median(np.abs(counts - background)))
    robust_sigma = 1.4826 * mad
    if robust_sigma == 0.0:
        robust_sigma = max(float(np.std(counts)), 1.0)
    threshold = background + min_snr * robust_sigma

    local_max = (counts == maximum_filter(counts, size=3)) & (counts > threshold)
    cand = np.argwhere(local_max)
    order = np.argsort(counts[local_max])[::-1]
    cand = cand[order]
    # non-maximum suppression: a noisy dome produces several 3x3 maxima;
    # keep only the brightest within a suppression radius
    kept: list[np.ndarray] = []
    for rc_ in cand:
        if all(np.hypot(rc_[0] - k[0], rc_[1] - k[1]) > 8.0 for k in kept):
            kept.append(rc_)
    cand = np.asarray(kept).reshape(-1, 2)

    def fit_window(i, row, col, half):
        r_lo, r_hi = max(row - half, 0), min(row + half + 1, ny)
        c_lo, c_hi = max(col - half, 0), min(col + half + 1, nx)
        rows, cols = np.mgrid[r_lo:r_hi, c_lo:c_hi].astype(np.float64)
        rr, cc = rows.ravel(), cols.ravel()
        values = counts[r_lo:r_hi, c_lo:c_hi].ravel()
        if len(cand) > 1 and half > 3:
            # keep only this candidate's territory: pixels nearer to some
            # other candidate would stretch the single-Gaussian model
            others = np.delete(cand, i, axis=0)
            d_self = np.hypot(rr - row, cc - col)
            d_other = np.min(np.hypot(rr[:, None] - others[None, :, 0],
                                      cc[:, None] - others[None, :, 1]), axis=1)
            keep = d_self <= d_other
            rr, cc, values = rr[keep], cc[keep], values[keep]
        rc, cc_, sr, sc, amp, off = _fit_patch(values, rr, cc, s0=max(half / 4.0, 0.7))
        in_bounds = (r_lo - 1 <= rc <= r_hi) and (c_lo - 1 <= cc_ <= c_hi)
        return rc, cc_, sr, sc, amp, in_bounds

    spots: list[Spot] = []
    for i, (row, col) in enumerate(cand):
        try:
            rc, cc_, sr, sc, amp, ok = fit_window(i, row, col, half=3)
            sigma_px = max(sr, sc)
            if ok and sigma_px > 1.2:
                half = int(min(12, max(8, math.ceil(3.0 * sigma_px))))
                rc, cc_, sr, sc, amp, ok = fit_window(i, row, col, half=half)
        except (ValueError, np.linalg.LinAlgError):
            continue
        if amp <= 0 or not ok:
            continue
        x_um, y_um = img.pixel_to_position(rc, cc_)
        pitch_x, pitch_y = img.pixel_pitch_um
        sigma_x_um, sigma_y_um = sc * pitch_x, sr * pitch_y
        major, minor = max(sigma_x_um, sigma_y_um), min(sigma_x_um, sigma_y_um)
        if minor <= 0:
            continue
        spots.append(Spot(center_um=(x_um, y_um),
                          peak_counts=float(counts[row, col]),
                          ellipticity=major / minor,
                          width_um=math.sqrt(major * minor)))

    # merge neighbors closer than one fitted width; candidates are ordered
    # brightest-first, so the survivor is always the brighter spot
    merged: list[Spot] = []
    for s in spots:
        dup = False
        for kept in merged:
            d = math.hypot(s.center_um[0] - kept.center_um[0],
                           s.center_um[1] - kept.center_um[1])
            if d < max(s.width_um, kept.width_um):
                dup = True
                break
        if not dup:
            merged.append(s)
    return SpotList(spots=merged)
