import math

import numpy as np
import pytest

from spectransfer import FitConfig, GridSpec, PeakKind, PeakModel, sum_model
from spectransfer.errors import ConfigError
from spectransfer.report import (
    build_dataset_report,
    compute_aggregates,
    load_report_dict,
    serialize_report,
)
from spectransfer.rng import stream

GRID = GridSpec(0, 1000, 512)


def noisy_peak(center, seed, noise=0.02):
    s = sum_model([PeakModel(PeakKind.GAUSSIAN, center, 1.0, sigma=20)], GRID)
    rng = stream(seed, "report-noise")
    y = np.clip(s.intensity + rng.normal(0, noise, len(s)), 0, None)
    y = (y - y.min()) / (y.max() - y.min())
    return s.with_intensity(y)


def test_identical_pair_report():
    s = noisy_peak(400, 1)
    report = build_dataset_report([(s, s, "only")], FitConfig())
    assert report.aggregates["ssim"] == (pytest.approx(1.0), pytest.approx(0.0))
    assert report.aggregates["rmse"] == (0.0, 0.0)
    assert report.js_height == pytest.approx(0.0, abs=1e-9)
    assert report.js_fwhm == pytest.approx(0.0, abs=1e-9)


def test_aggregates_recomputable():
    pairs = [
        (noisy_peak(300, 1), noisy_peak(310, 2), "a"),
        (noisy_peak(500, 3), noisy_peak(505, 4), "b"),
        (noisy_peak(700, 5), noisy_peak(690, 6), "c"),
    ]
    report = build_dataset_report(pairs, FitConfig())
    assert report.aggregates == compute_aggregates(report.pairs)
    rmses = [p.metrics.rmse for p in report.pairs]
    assert report.aggregates["rmse"][0] == pytest.approx(np.mean(rmses))
    assert report.aggregates["rmse"][1] == pytest.approx(np.std(rmses))


def test_failed_pair_recorded_not_raised():
    s = noisy_peak(400, 1)
    flat = s.with_intensity(np.zeros(len(s)))
    report = build_dataset_report([(s, s, "ok"), (flat, s, "broken")], FitConfig())
    assert report.pairs[0].error is None
    assert report.pairs[1].error is not None
    assert report.aggregates["ssim"][0] == pytest.approx(1.0)


def test_empty_pairs_rejected():
    with pytest.raises(ConfigError):
        build_dataset_report([], FitConfig())


def test_serialization_deterministic_and_loadable():
    pairs = [(noisy_peak(300, 1), noisy_peak(310, 2), "a")]
    report1 = build_dataset_report(pairs, FitConfig())
    report2 = build_dataset_report(pairs, FitConfig())
    text1 = serialize_report(report1)
    text2 = serialize_report(report2)
    assert text1 == text2
    doc = load_report_dict(text1)
    assert doc["schema_version"] == 1
    assert doc["pairs"][0]["label"] == "a"


def test_non_finite_values_survive_serialization():
    s = noisy_peak(400, 1)
    report = build_dataset_report([(s, s, "identity")], FitConfig())
    text = serialize_report(report)
    doc = load_report_dict(text)
    assert math.isinf(doc["pairs"][0]["metrics"]["psnr"])
    assert math.isinf(doc["aggregates"]["psnr"]["mean"])
