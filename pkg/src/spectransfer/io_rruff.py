"""RRUFF-style spectrum text files.

Format: header lines `##KEY=VALUE`, then one `x, y` pair per line,
optionally terminated by `##END=`. Serialization uses Python's shortest
round-trip float repr, so parse -> serialize -> parse preserves every bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError
from .spectra import Modality, Spectrum

NAME_KEY = "NAMES"

_MODALITY_HINTS = {
    "infrared": Modality.IR,
    "ir": Modality.IR,
    "raman": Modality.RAMAN,
    "xrd": Modality.XRD,
    "powder": Modality.XRD,
}


@dataclass(frozen=True)
class RruffRecord:
    metadata: dict[str, str]
    spectrum: Spectrum
    source_path: str | None = None

    @property
    def name(self) -> str | None:
        value = self.metadata.get(NAME_KEY)
        return value.strip() if value else None


def parse_rruff(
    text: str, modality: Modality = Modality.OTHER, source_path: str | None = None
) -> RruffRecord:
    """Parse one RRUFF text document.

    Data rows in descending axis order are stably re-sorted ascending.
    Raises ParseError (with line number) on malformed numeric rows or when
    no data rows exist.
    """
    if not text.strip():
        raise ParseError("empty document")
    metadata: dict[str, str] = {}
    xs: list[float] = []
    ys: list[float] = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("##"):
            key, _, value = line[2:].partition("=")
            key = key.strip().upper()
            if key == "END":
                break
            metadata[key] = value.strip()
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 'x, y', got {line!r}", line_number)
        try:
            xs.append(float(parts[0]))
            ys.append(float(parts[1]))
        except ValueError:
            raise ParseError(f"malformed number in {line!r}", line_number) from None
    if not xs:
        raise ParseError("no data lines found")
    axis = np.asarray(xs)
    intensity = np.asarray(ys)
    order = np.argsort(axis, kind="stable")
    if not np.array_equal(order, np.arange(axis.size)):
        axis, intensity = axis[order], intensity[order]
    label = metadata.get(NAME_KEY)
    spectrum = Spectrum(axis, intensity, modality, label)
    return RruffRecord(metadata, spectrum, source_path)


def serialize_rruff(record: RruffRecord) -> str:
    lines = [f"##{key}={value}" for key, value in record.metadata.items()]
    lines += [
        f"{repr(float(x))}, {repr(float(y))}"
        for x, y in zip(record.spectrum.axis, record.spectrum.intensity)
    ]
    lines.append("##END=")
    return "\n".join(lines) + "\n"


def guess_modality(metadata: dict[str, str], fallback: Modality = Modality.OTHER) -> Modality:
    """Infer the modality from header text (RRUFF files name the technique)."""
    blob = " ".join(f"{k} {v}" for k, v in metadata.items()).lower()
    for hint, modality in _MODALITY_HINTS.items():
        if hint in blob:
            return modality
    return fallback


def load_rruff_file(path, modality: Modality = Modality.OTHER) -> RruffRecord:
    path = Path(path)
    try:
        record = parse_rruff(path.read_text(), modality, str(path))
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return record


def save_rruff_file(record: RruffRecord, path) -> None:
    Path(path).write_text(serialize_rruff(record))
