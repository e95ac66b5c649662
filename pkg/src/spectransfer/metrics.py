"""Spectrum- and signal-quality metrics for generated-versus-truth comparison.

Spectrum-based: mean peak height, mean FWHM (half-max crossing widths) and
SNR. Signal-quality: SSIM over 1-D sliding windows, RMSE, PSNR (MAX = 1)
and Pearson correlation, plus trapezoidal area under each curve. Peak
statistic distributions of two spectrum sets are compared with a
histogram Jensen-Shannon divergence (natural log, so the range is
[0, ln 2]).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .fitting import FitConfig, detect_peaks, half_max_crossing_width
from .spectra import Spectrum

SSIM_WINDOW = 11
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

SNR_WINDOW = 9


@dataclass(frozen=True)
class SpectrumStats:
    mean_peak_height: float
    mean_fwhm: float
    snr: float
    n_peaks: int

    @property
    def has_peaks(self) -> bool:
        return self.n_peaks > 0


@dataclass(frozen=True)
class PairMetrics:
    ssim: float
    rmse: float
    psnr: float
    correlation: float
    auc_generated: float
    auc_truth: float


def _moving_average(y: np.ndarray, window: int) -> np.ndarray:
    return np.convolve(y, np.ones(window) / window, mode="same")


def estimate_noise_sigma(y: np.ndarray, window: int = SNR_WINDOW) -> float:
    """Noise standard deviation from the high-pass residual y - movavg(y).

    The spectrum is cut into contiguous windows and only the quietest
    quarter (ranked by the variance of the smoothed signal, i.e. the
    flattest baseline stretches, which keeps the ranking independent of
    the residual itself) contributes to the estimate. Returns 0 for a
    noiseless signal.
    """
    smooth = _moving_average(y, window)
    residual = y - smooth
    n = y.size - (y.size % window)
    if n < window:
        return float(residual.std())
    residual_windows = residual[:n].reshape(-1, window)
    smooth_windows = smooth[:n].reshape(-1, window)
    flatness = smooth_windows.var(axis=1)
    keep = flatness <= np.quantile(flatness, 0.25)
    return float(residual_windows[keep].std())


def measure_stats(s: Spectrum, cfg: FitConfig) -> SpectrumStats:
    """Peak-statistics summary of one normalized spectrum.

    SNR is max intensity over the estimated noise sigma (inf when the
    signal is noiseless). With no detectable peaks the height/FWHM fields
    are NaN and `has_peaks` is False.
    """
    peaks = detect_peaks(s, cfg)
    sigma = estimate_noise_sigma(s.intensity)
    snr = float(s.intensity.max() / sigma) if sigma > 0 else np.inf
    if not peaks:
        return SpectrumStats(np.nan, np.nan, snr, 0)
    heights = [h for _, h, _ in peaks]
    widths = [w for _, _, w in peaks]
    return SpectrumStats(float(np.mean(heights)), float(np.mean(widths)), snr, len(peaks))


def ssim_1d(x: np.ndarray, y: np.ndarray, window: int = SSIM_WINDOW) -> float:
    """Mean local SSIM over uniform sliding windows of a 1-D signal."""
    if x.size < window:
        window = x.size
    kernel = np.ones(window) / window

    def local_mean(v):
        return np.convolve(v, kernel, mode="valid")

    mx, my = local_mean(x), local_mean(y)
    mxx, myy, mxy = local_mean(x * x), local_mean(y * y), local_mean(x * y)
    vx = mxx - mx**2
    vy = myy - my**2
    cov = mxy - mx * my
    ssim_map = ((2 * mx * my + SSIM_C1) * (2 * cov + SSIM_C2)) / (
        (mx**2 + my**2 + SSIM_C1) * (vx + vy + SSIM_C2)
    )
    return float(ssim_map.mean())


def pair_metrics(gen: Spectrum, truth: Spectrum) -> PairMetrics:
    """Quality metrics between a generated spectrum and its ground truth.

    Both inputs must share one grid and be normalized to [0, 1]; PSNR uses
    MAX = 1, so psnr = -20 log10(rmse) (infinite for identical spectra).
    """
    if gen.axis.shape != truth.axis.shape or not np.array_equal(gen.axis, truth.axis):
        raise InputError("generated and truth spectra are on different grids")
    a, b = gen.intensity, truth.intensity
    mse = float(np.mean((a - b) ** 2))
    rmse = float(np.sqrt(mse))
    psnr = np.inf if mse == 0 else float(-10.0 * np.log10(mse))
    if a.std() == 0 or b.std() == 0:
        raise InputError("correlation undefined for a zero-variance spectrum")
    correlation = float(np.corrcoef(a, b)[0, 1])
    return PairMetrics(
        ssim=ssim_1d(a, b),
        rmse=rmse,
        psnr=psnr,
        correlation=correlation,
        auc_generated=float(np.trapezoid(a, gen.axis)),
        auc_truth=float(np.trapezoid(b, truth.axis)),
    )


def js_divergence(samples_a, samples_b, n_bins: int = 20) -> float:
    """Jensen-Shannon divergence between two scalar sample sets.

    Both sets are histogrammed on their shared min-max range, smoothed by
    1e-12 per bin and normalized; the divergence uses natural log, so
    identical sets give 0 and disjoint supports ln 2.
    """
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise InputError("js_divergence needs non-empty sample sets")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi == lo:
        hi = lo + 1.0  # all samples identical: both histograms share one bin
    edges = np.linspace(lo, hi, n_bins + 1)
    p, _ = np.histogram(a, bins=edges)
    q, _ = np.histogram(b, bins=edges)
    p = p + 1e-12
    q = q + 1e-12
    p = p / p.sum()
    q = q / q.sum()
    m = 0.5 * (p + q)

    def kl(u, v):
        return float(np.sum(u * np.log(u / v)))

    return 0.5 * kl(p, m) + 0.5 * kl(q, m)


__all__ = [
    "PairMetrics",
    "SpectrumStats",
    "estimate_noise_sigma",
    "half_max_crossing_width",
    "js_divergence",
    "measure_stats",
    "pair_metrics",
    "ssim_1d",
]
