import numpy as np
import pytest

from spectransfer import (
    Deconstruction,
    FitConfig,
    GridSpec,
    PeakKind,
    PeakModel,
    deconstruction_features,
    detect_peaks,
    fit_deconstruction,
    sum_model,
)
from spectransfer.dataset import SynthSpec, generate_synthetic_pairs
from spectransfer.errors import ConfigError
from spectransfer.rng import stream

GRID = GridSpec(0, 1000, 1024)
SPAN = 1000.0


def synth_gaussians(params, noise_std=0.0, seed=0):
    peaks = [PeakModel(PeakKind.GAUSSIAN, c, a, sigma=s) for c, a, s in params]
    spectrum = sum_model(peaks, GRID)
    if noise_std > 0:
        rng = stream(seed, "test-noise")
        spectrum = spectrum.with_intensity(
            spectrum.intensity + rng.normal(0, noise_std, len(spectrum))
        )
    return peaks, spectrum


def strongest(d: Deconstruction, n: int):
    top = sorted(d.peaks, key=lambda p: -p.amplitude)[:n]
    return sorted(top, key=lambda p: p.center)


def test_fitconfig_validation():
    with pytest.raises(ConfigError):
        FitConfig(prominence_threshold=0.0)
    with pytest.raises(ConfigError):
        FitConfig(max_peaks=0)
    with pytest.raises(ConfigError):
        FitConfig(width_bounds=(2.0, 1.0))


def test_detect_peaks_empty_on_flat():
    _, s = synth_gaussians([])
    assert detect_peaks(s, FitConfig()) == []


def test_detect_peaks_single_gaussian():
    _, s = synth_gaussians([(500, 1.0, 10)])
    found = detect_peaks(s, FitConfig())
    assert len(found) == 1
    center, height, width = found[0]
    assert abs(center - 500) <= GRID.step
    assert height == pytest.approx(1.0, rel=0.01)
    assert width == pytest.approx(23.548, rel=0.10)


def test_detect_peaks_two_gaussians_ordered():
    _, s = synth_gaussians([(300, 1.0, 10), (700, 0.5, 10)])
    found = detect_peaks(s, FitConfig())
    assert len(found) == 2
    assert found[0][1] == pytest.approx(1.0, rel=0.05)
    assert found[1][1] == pytest.approx(0.5, rel=0.05)


def test_fit_noiseless_three_gaussians():
    truth, s = synth_gaussians([(250, 1.0, 12), (520, 0.6, 8), (780, 0.4, 20)])
    d = fit_deconstruction(s, PeakKind.GAUSSIAN, FitConfig())
    assert d.rmse_fit < 1e-4
    fitted = strongest(d, 3)
    for p_true, p_fit in zip(truth, fitted):
        assert abs(p_fit.center - p_true.center) / SPAN < 1e-3
        assert p_fit.amplitude == pytest.approx(p_true.amplitude, rel=0.01)
        assert p_fit.sigma == pytest.approx(p_true.sigma, rel=0.01)


def test_fit_noisy_three_gaussians():
    truth, s = synth_gaussians(
        [(250, 1.0, 12), (520, 0.6, 8), (780, 0.4, 20)], noise_std=0.01, seed=3
    )
    d = fit_deconstruction(s, PeakKind.GAUSSIAN, FitConfig())
    assert d.rmse_fit <= 0.02
    fitted = strongest(d, 3)
    for p_true, p_fit in zip(truth, fitted):
        assert abs(p_fit.center - p_true.center) / SPAN < 5e-3


def test_misprior_fits_worse():
    _, s = synth_gaussians([(250, 1.0, 12), (520, 0.6, 8), (780, 0.4, 20)])
    good = fit_deconstruction(s, PeakKind.GAUSSIAN, FitConfig())
    bad = fit_deconstruction(s, PeakKind.LORENTZIAN, FitConfig())
    assert good.rmse_fit < bad.rmse_fit


def test_empty_spectrum_gives_zero_peak_deconstruction():
    _, s = synth_gaussians([])
    d = fit_deconstruction(s, PeakKind.GAUSSIAN, FitConfig())
    assert d.peaks == []
    assert np.array_equal(d.residual.intensity, s.intensity)
    assert d.converged


def test_reconstruction_identity():
    _, s = synth_gaussians([(300, 0.9, 15), (600, 0.5, 25)], noise_std=0.02, seed=9)
    d = fit_deconstruction(s, PeakKind.GAUSSIAN, FitConfig())
    assert np.abs(d.reconstruct() - s.intensity).max() < 1e-12


def test_fit_never_worse_than_detection_seed():
    _, s = synth_gaussians([(300, 0.9, 15), (600, 0.5, 25)], noise_std=0.02, seed=4)
    cfg = FitConfig()
    d = fit_deconstruction(s, PeakKind.GAUSSIAN, cfg)
    seeds = detect_peaks(s, cfg)
    seed_peaks = [
        PeakModel(PeakKind.GAUSSIAN, c, h, sigma=max(w / 2.3548, GRID.step / 2))
        for c, h, w in seeds
    ]
    seed_rmse = np.sqrt(np.mean((sum_model(seed_peaks, GRID).intensity - s.intensity) ** 2))
    assert d.rmse_fit <= seed_rmse + 1e-15


def test_peaks_sorted_by_center():
    _, s = synth_gaussians([(700, 0.6, 10), (200, 1.0, 10)])
    d = fit_deconstruction(s, PeakKind.GAUSSIAN, FitConfig())
    centers = [p.center for p in d.peaks]
    assert centers == sorted(centers)


@pytest.mark.parametrize("prior", list(PeakKind))
def test_generate_then_fit_recovers_parameters(prior):
    for seed in range(20):
        spec = SynthSpec(
            n_pairs=1,
            prior_kind=prior,
            peak_count_range=(1, 5),
            fwhm_range=(20, 60),
            amp_range=(0.3, 1.0),
            noise_std=0.0,
            seed=seed,
        )
        pair = generate_synthetic_pairs(spec)[0]
        d = fit_deconstruction(pair.spectrum_a, prior, FitConfig())
        fitted = strongest(d, len(pair.peaks_a))
        assert len(fitted) == len(pair.peaks_a)
        for p_true, p_fit in zip(pair.peaks_a, fitted):
            assert abs(p_fit.center - p_true.center) / SPAN < 1e-3
            assert p_fit.amplitude == pytest.approx(p_true.amplitude, rel=0.01)
            if prior != PeakKind.LORENTZIAN:
                assert p_fit.sigma == pytest.approx(p_true.sigma, rel=0.01)
            if prior != PeakKind.GAUSSIAN:
                assert p_fit.gamma == pytest.approx(p_true.gamma, rel=0.01)


def test_misprior_monotonicity_over_seeds():
    wins = 0
    for seed in range(20):
        spec = SynthSpec(
            n_pairs=1,
            prior_kind=PeakKind.GAUSSIAN,
            peak_count_range=(1, 4),
            fwhm_range=(20, 60),
            noise_std=0.0,
            seed=100 + seed,
        )
        pair = generate_synthetic_pairs(spec)[0]
        good = fit_deconstruction(pair.spectrum_a, PeakKind.GAUSSIAN, FitConfig())
        bad = fit_deconstruction(pair.spectrum_a, PeakKind.LORENTZIAN, FitConfig())
        if good.rmse_fit <= bad.rmse_fit:
            wins += 1
    assert wins >= 19


def test_features_zero_padding():
    _, s = synth_gaussians([])
    d = fit_deconstruction(s, PeakKind.GAUSSIAN, FitConfig())
    features = deconstruction_features(d, k_max=2)
    assert features.shape == (9,)
    assert np.allclose(features[:8], 0.0)
    assert features[-1] == d.rmse_fit


def test_features_single_peak_normalization():
    p = PeakModel(PeakKind.GAUSSIAN, 500, 1.0, sigma=10)
    s = sum_model([p], GRID)
    d = Deconstruction(PeakKind.GAUSSIAN, [p], s.with_intensity(np.zeros(len(s))), 0.0, 0, True)
    features = deconstruction_features(d, k_max=1)
    assert features[0] == pytest.approx(0.5)
    assert features[1] == pytest.approx(1.0)
    assert features[2] == pytest.approx(0.01)
    assert features[3] == 0.0
    assert features[4] == 0.0


def test_features_order_invariant():
    peaks = [
        PeakModel(PeakKind.GAUSSIAN, 200, 0.5, sigma=10),
        PeakModel(PeakKind.GAUSSIAN, 600, 1.0, sigma=12),
    ]
    s = sum_model(peaks, GRID)
    residual = s.with_intensity(np.zeros(len(s)))
    d1 = Deconstruction(PeakKind.GAUSSIAN, peaks, residual, 0.1, 0, True)
    d2 = Deconstruction(PeakKind.GAUSSIAN, peaks[::-1], residual, 0.1, 0, True)
    assert np.array_equal(
        deconstruction_features(d1, 4), deconstruction_features(d2, 4)
    )


def test_merged_peaks_collapse_to_one():
    # two detections forced onto nearly the same center collapse during LM
    p = PeakModel(PeakKind.GAUSSIAN, 500, 1.0, sigma=15)
    s = sum_model([p], GRID)
    cfg = FitConfig(prominence_threshold=0.01)
    d = fit_deconstruction(s, PeakKind.GAUSSIAN, cfg)
    assert len(d.peaks) == 1
    assert d.rmse_fit < 1e-6
