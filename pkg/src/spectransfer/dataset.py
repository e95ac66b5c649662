"""Modality pairing manifests and the synthetic paired-spectrum generator.

The synthetic generator is the verification oracle for the whole
pipeline: modality-A spectra are drawn from a chosen line-shape prior,
modality-B spectra follow by a fixed invertible mapping rule, and the
ground-truth peak lists come back alongside, so fits and transfers can be
checked against known answers.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .lineshapes import GAUSSIAN_FWHM_FACTOR, PeakKind, PeakModel, sum_model
from .rng import stream
from .spectra import GridSpec, Modality, Spectrum
from .io_rruff import load_rruff_file

logger = logging.getLogger(__name__)

MANIFEST_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    path_a: str
    modality_a: Modality
    path_b: str
    modality_b: Modality
    split: str  # "train" | "test"


@dataclass(frozen=True)
class PairManifest:
    entries: list[ManifestEntry]

    def side(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]


def _scan_names(directory: Path, modality: Modality) -> dict[str, Path]:
    """Map normalized sample name -> file path; duplicates keep the first."""
    found: dict[str, Path] = {}
    for path in sorted(directory.glob("*.txt")):
        try:
            record = load_rruff_file(path, modality)
        except Exception as exc:
            logger.warning("skipping unreadable file %s: %s", path, exc)
            continue
        name = record.name
        if not name:
            logger.warning("skipping %s: no %s header", path, "NAMES")
            continue
        key = name.casefold()
        if key in found:
            logger.warning("duplicate sample name %r: keeping %s", name, found[key])
            continue
        found[key] = path
    return found


def build_manifest(
    dir_a,
    dir_b,
    modality_a: Modality,
    modality_b: Modality,
    test_fraction: float,
    seed: int,
) -> PairManifest:
    """Pair files across two directories by sample name; seeded split.

    Files whose names appear on only one side are logged and skipped.
    Raises ConfigError when nothing matches.
    """
    if not 0.0 <= test_fraction <= 1.0:
        raise ConfigError("test_fraction must lie in [0, 1]")
    names_a = _scan_names(Path(dir_a), modality_a)
    names_b = _scan_names(Path(dir_b), modality_b)
    matched = sorted(set(names_a) & set(names_b))
    for missing in sorted(set(names_a) ^ set(names_b)):
        logger.info("unpaired sample %r skipped", missing)
    if not matched:
        raise ConfigError("no samples matched between the two directories")

    order = stream(seed, "manifest-split").permutation(len(matched))
    n_test = int(round(test_fraction * len(matched)))
    test_keys = {matched[i] for i in order[:n_test]}
    entries = [
        ManifestEntry(
            name=key,
            path_a=str(names_a[key]),
            modality_a=modality_a,
            path_b=str(names_b[key]),
            modality_b=modality_b,
            split="test" if key in test_keys else "train",
        )
        for key in matched
    ]
    return PairManifest(entries)


def save_manifest(manifest: PairManifest, path) -> None:
    doc = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "entries": [
            {
                "name": e.name,
                "path_a": e.path_a,
                "modality_a": e.modality_a.value,
                "path_b": e.path_b,
                "modality_b": e.modality_b.value,
                "split": e.split,
            }
            for e in manifest.entries
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> PairManifest:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise ConfigError(f"unsupported manifest schema: {doc.get('schema_version')}")
    entries = [
        ManifestEntry(
            name=e["name"],
            path_a=e["path_a"],
            modality_a=Modality(e["modality_a"]),
            path_b=e["path_b"],
            modality_b=Modality(e["modality_b"]),
            split=e["split"],
        )
        for e in doc["entries"]
    ]
    return PairManifest(entries)


@dataclass(frozen=True)
class MappingRule:
    """Invertible peak-list transform from modality A to modality B."""

    shift_fraction: float = 0.1  # of the grid span, added to centers
    amplitude_scale: float = 0.8
    width_scale: float = 1.2


MAPPING_RULES = {1: MappingRule()}


@dataclass(frozen=True)
class SynthSpec:
    n_pairs: int = 200
    prior_kind: PeakKind = PeakKind.GAUSSIAN
    peak_count_range: tuple[int, int] = (1, 2)
    fwhm_range: tuple[float, float] = (60.0, 140.0)
    amp_range: tuple[float, float] = (0.6, 1.0)
    noise_std: float = 0.005
    rule_id: int = 1
    seed: int = 0
    grid: GridSpec = field(default_factory=lambda: GridSpec(0.0, 1000.0, 1024))
    min_separation_fwhm: float = 3.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "prior_kind", PeakKind(self.prior_kind))
        lo, hi = self.peak_count_range
        if not (1 <= lo <= hi):
            raise ConfigError("peak_count_range must satisfy 1 <= min <= max")
        if not (0 < self.fwhm_range[0] <= self.fwhm_range[1]):
            raise ConfigError("fwhm_range must be positive and ordered")
        if not (0 < self.amp_range[0] <= self.amp_range[1] <= 1.0):
            raise ConfigError("amp_range must be ordered within (0, 1]")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if self.rule_id not in MAPPING_RULES:
            raise ConfigError(f"unknown mapping rule id {self.rule_id}")
        if self.n_pairs < 1:
            raise ConfigError("n_pairs must be positive")

    @property
    def rule(self) -> MappingRule:
        return MAPPING_RULES[self.rule_id]


def _peak_from_fwhm(kind: PeakKind, center: float, amp: float, fwhm: float) -> PeakModel:
    if kind is PeakKind.GAUSSIAN:
        return PeakModel(kind, center, amp, sigma=fwhm / GAUSSIAN_FWHM_FACTOR)
    if kind is PeakKind.LORENTZIAN:
        return PeakModel(kind, center, amp, gamma=fwhm / 2.0)
    # share the width evenly between components (f_G = f_L under
    # Olivero-Longbothum gives total 1.6376 f_L)
    part = fwhm / 1.6376
    return PeakModel(
        kind, center, amp, sigma=part / GAUSSIAN_FWHM_FACTOR, gamma=part / 2.0
    )


def _draw_peaks(
    spec: SynthSpec, rng: np.random.Generator, shift: float
) -> list[PeakModel]:
    """Draw a separation-constrained peak list that stays on-grid after shifting.

    Separation is width-aware: two centers must differ by at least
    `min_separation_fwhm` times the wider peak's FWHM. Requested peaks
    that cannot be placed are dropped (at least one always fits).
    """
    lo_n, hi_n = spec.peak_count_range
    n_peaks = int(rng.integers(lo_n, hi_n + 1))
    fwhm_lo, fwhm_hi = spec.fwhm_range
    pad = 2.0 * fwhm_hi
    c_lo = spec.grid.start + pad
    c_hi = spec.grid.end - pad - max(shift, 0.0)
    if c_hi <= c_lo:
        raise ConfigError("grid too narrow for the requested widths and shift")
    placed: list[tuple[float, float, float]] = []  # (center, amp, fwhm)
    for _ in range(200 * n_peaks):
        fwhm = float(rng.uniform(fwhm_lo, fwhm_hi))
        amp = float(rng.uniform(*spec.amp_range))
        c = float(rng.uniform(c_lo, c_hi))
        gap_ok = all(
            abs(c - other_c) >= spec.min_separation_fwhm * max(fwhm, other_f)
            for other_c, _, other_f in placed
        )
        if gap_ok:
            placed.append((c, amp, fwhm))
        if len(placed) == n_peaks:
            break
    return [
        _peak_from_fwhm(spec.prior_kind, c, amp, fwhm)
        for c, amp, fwhm in sorted(placed)
    ]


def apply_mapping_rule(
    peaks: list[PeakModel], rule: MappingRule, span: float
) -> list[PeakModel]:
    return [
        PeakModel(
            p.kind,
            p.center + rule.shift_fraction * span,
            p.amplitude * rule.amplitude_scale,
            sigma=p.sigma * rule.width_scale,
            gamma=p.gamma * rule.width_scale,
        )
        for p in peaks
    ]


@dataclass(frozen=True)
class SyntheticPair:
    spectrum_a: Spectrum
    spectrum_b: Spectrum
    peaks_a: list[PeakModel]
    peaks_b: list[PeakModel]


def generate_synthetic_pairs(spec: SynthSpec) -> list[SyntheticPair]:
    """Render n_pairs (A, B) spectra with ground-truth peak lists.

    Everything (peak draws and noise) derives from spec.seed, so the same
    spec reproduces the dataset bit for bit.
    """
    rng = stream(spec.seed, "synthetic-pairs")
    span = spec.grid.span
    shift = spec.rule.shift_fraction * span
    pairs = []
    for _ in range(spec.n_pairs):
        peaks_a = _draw_peaks(spec, rng, shift)
        peaks_b = apply_mapping_rule(peaks_a, spec.rule, span)
        spectrum_a = sum_model(peaks_a, spec.grid)
        spectrum_b = sum_model(peaks_b, spec.grid)
        if spec.noise_std > 0:
            spectrum_a = spectrum_a.with_intensity(
                spectrum_a.intensity + rng.normal(0.0, spec.noise_std, len(spectrum_a))
            )
            spectrum_b = spectrum_b.with_intensity(
                spectrum_b.intensity + rng.normal(0.0, spec.noise_std, len(spectrum_b))
            )
        pairs.append(SyntheticPair(spectrum_a, spectrum_b, peaks_a, peaks_b))
    return pairs
