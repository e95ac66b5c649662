"""Dataset-level evaluation report: per-pair metrics, aggregates, JS divergences.

The report is serialized as schema-versioned JSON. Serialization is fully
deterministic (sorted keys, no timestamps), so identical inputs and seeds
reproduce byte-identical documents.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .classify import ClassificationResult
from .errors import ConfigError
from .fitting import FitConfig
from .metrics import PairMetrics, SpectrumStats, js_divergence, measure_stats, pair_metrics
from .spectra import Spectrum

SCHEMA_VERSION = 1

_PAIR_FIELDS = ("ssim", "rmse", "psnr", "correlation", "auc_generated", "auc_truth")
_STAT_FIELDS = ("mean_peak_height", "mean_fwhm", "snr")


@dataclass(frozen=True)
class PairRecord:
    label: str
    metrics: PairMetrics | None
    gen_stats: SpectrumStats | None
    truth_stats: SpectrumStats | None
    error: str | None = None


@dataclass(frozen=True)
class DatasetReport:
    pairs: list[PairRecord]
    aggregates: dict[str, tuple[float, float]]
    js_height: float
    js_fwhm: float
    classification: ClassificationResult | None = None


def _aggregate(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return (math.nan, math.nan)
    if not np.all(np.isfinite(arr)):
        # infinite entries (e.g. PSNR of an exact match) make the spread undefined
        return (float(arr.mean()), math.nan)
    return (float(arr.mean()), float(arr.std()))


def compute_aggregates(pairs: list[PairRecord]) -> dict[str, tuple[float, float]]:
    """Mean +- std per metric over the successful pairs."""
    out: dict[str, tuple[float, float]] = {}
    ok = [p for p in pairs if p.error is None]
    for name in _PAIR_FIELDS:
        out[name] = _aggregate([getattr(p.metrics, name) for p in ok])
    for side in ("gen", "truth"):
        for name in _STAT_FIELDS:
            values = [
                getattr(getattr(p, f"{side}_stats"), name)
                for p in ok
                if getattr(p, f"{side}_stats").has_peaks
            ]
            out[f"{side}_{name}"] = _aggregate(values)
    return out


def _stat_distribution(pairs: list[PairRecord], side: str, name: str) -> list[float]:
    values = []
    for p in pairs:
        if p.error is not None:
            continue
        stats = getattr(p, f"{side}_stats")
        value = getattr(stats, name)
        if stats.has_peaks and math.isfinite(value):
            values.append(value)
    return values


def build_dataset_report(
    pairs: list[tuple[Spectrum, Spectrum, str]],
    cfg: FitConfig,
    classification: ClassificationResult | None = None,
) -> DatasetReport:
    """Evaluate every (generated, truth, label) pair and aggregate.

    Per-pair failures are recorded on the pair record instead of aborting
    the batch.
    """
    if not pairs:
        raise ConfigError("no pairs to evaluate")
    records: list[PairRecord] = []
    for gen, truth, label in pairs:
        try:
            records.append(
                PairRecord(
                    label=label,
                    metrics=pair_metrics(gen, truth),
                    gen_stats=measure_stats(gen, cfg),
                    truth_stats=measure_stats(truth, cfg),
                )
            )
        except Exception as exc:  # recorded per pair, batch continues
            records.append(PairRecord(label, None, None, None, error=str(exc)))

    def js_for(name: str) -> float:
        gen_values = _stat_distribution(records, "gen", name)
        truth_values = _stat_distribution(records, "truth", name)
        if not gen_values or not truth_values:
            return math.nan
        return js_divergence(gen_values, truth_values)

    return DatasetReport(
        pairs=records,
        aggregates=compute_aggregates(records),
        js_height=js_for("mean_peak_height"),
        js_fwhm=js_for("mean_fwhm"),
        classification=classification,
    )


def _encode_float(x: float) -> float | str:
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)  # 'inf', '-inf', 'nan'
    return x


def _decode_float(x) -> float:
    return float(x) if isinstance(x, str) else x


def report_to_dict(report: DatasetReport) -> dict:
    doc: dict = {"schema_version": SCHEMA_VERSION, "pairs": [], "aggregates": {}}
    for p in report.pairs:
        entry: dict = {"label": p.label}
        if p.error is not None:
            entry["error"] = p.error
        else:
            entry["metrics"] = {
                name: _encode_float(getattr(p.metrics, name)) for name in _PAIR_FIELDS
            }
            for side in ("gen", "truth"):
                stats = getattr(p, f"{side}_stats")
                entry[f"{side}_stats"] = {
                    "n_peaks": stats.n_peaks,
                    **{
                        name: _encode_float(getattr(stats, name))
                        for name in _STAT_FIELDS
                    },
                }
        doc["pairs"].append(entry)
    doc["aggregates"] = {
        name: {"mean": _encode_float(m), "std": _encode_float(s)}
        for name, (m, s) in report.aggregates.items()
    }
    doc["js_height"] = _encode_float(report.js_height)
    doc["js_fwhm"] = _encode_float(report.js_fwhm)
    if report.classification is not None:
        c = report.classification
        doc["classification"] = {
            "class_names": c.class_names,
            "mean_train_accuracy": _encode_float(c.mean_train_accuracy),
            "mean_test_accuracy": _encode_float(c.mean_test_accuracy),
            "rounds": [
                {
                    "train_accuracy": _encode_float(r.train_accuracy),
                    "test_accuracy": _encode_float(r.test_accuracy),
                    "confusion": r.confusion.tolist(),
                }
                for r in c.rounds
            ],
        }
    return doc


def serialize_report(report: DatasetReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"


def load_report_dict(text: str) -> dict:
    """Parse a serialized report back to a dict (floats decoded)."""

    def walk(node):
        if isinstance(node, dict):
            return {k: walk(v) for k, v in node.items()}
        if isinstance(node, list):
            return [walk(v) for v in node]
        if isinstance(node, str) and node in ("inf", "-inf", "nan"):
            return _decode_float(node)
        return node

    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported report schema: {doc.get('schema_version')}")
    return walk(doc)
