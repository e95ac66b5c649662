"""Spectrum data model and grid operations.

A Spectrum is an immutable sampled 1-D signal: a strictly increasing axis
(wavenumber in cm^-1 for IR/Raman, degrees two-theta for XRD) with one
intensity per axis point. All downstream modeling works on spectra that
have been resampled to a fixed-length uniform grid and min-max normalized
to [0, 1].
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateInputError, InputError


class Modality(str, enum.Enum):
    IR = "ir"
    RAMAN = "raman"
    XRD = "xrd"
    OTHER = "other"


@dataclass(frozen=True)
class Spectrum:
    """Sampled spectrum with a strictly increasing axis.

    Arrays are copied and frozen at construction; instances are safe to
    share across threads.
    """

    axis: np.ndarray
    intensity: np.ndarray
    modality: Modality = Modality.OTHER
    label: str | None = None

    def __post_init__(self) -> None:
        axis = np.array(self.axis, dtype=float)
        intensity = np.array(self.intensity, dtype=float)
        if axis.ndim != 1 or intensity.ndim != 1:
            raise InputError("axis and intensity must be 1-D")
        if axis.size < 2:
            raise InputError("spectrum needs at least 2 points")
        if axis.size != intensity.size:
            raise InputError(
                f"axis ({axis.size}) and intensity ({intensity.size}) lengths differ"
            )
        if not np.all(np.isfinite(axis)) or not np.all(np.isfinite(intensity)):
            raise InputError("axis and intensity must be finite")
        if np.any(np.diff(axis) <= 0):
            raise InputError("axis must be strictly increasing")
        axis.flags.writeable = False
        intensity.flags.writeable = False
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "intensity", intensity)
        object.__setattr__(self, "modality", Modality(self.modality))

    def __len__(self) -> int:
        return self.axis.size

    @property
    def span(self) -> float:
        return float(self.axis[-1] - self.axis[0])

    def with_intensity(self, intensity: np.ndarray) -> "Spectrum":
        return Spectrum(self.axis, intensity, self.modality, self.label)


@dataclass(frozen=True)
class GridSpec:
    """Uniform sampling grid: `n_points` points from `start` to `end` inclusive."""

    start: float
    end: float
    n_points: int = 1024
    step: float = field(init=False)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.start) and np.isfinite(self.end)):
            raise ConfigError("grid bounds must be finite")
        if self.end <= self.start:
            raise ConfigError(f"grid end ({self.end}) must exceed start ({self.start})")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ConfigError(f"n_points must be an integer >= 2, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(
            self, "step", (self.end - self.start) / (self.n_points - 1)
        )

    def axis(self) -> np.ndarray:
        return np.linspace(self.start, self.end, self.n_points)

    @property
    def span(self) -> float:
        return float(self.end - self.start)


def resample(s: Spectrum, g: GridSpec) -> Spectrum:
    """Resample a spectrum onto a uniform grid by linear interpolation.

    Grid points outside the source axis range are filled with zero; spectra
    are baseline-subtracted and near zero off-support, so extrapolation
    would only invent structure.
    """
    grid = g.axis()
    intensity = np.interp(grid, s.axis, s.intensity, left=0.0, right=0.0)
    return Spectrum(grid, intensity, s.modality, s.label)


def normalize_minmax(s: Spectrum) -> Spectrum:
    """Map intensities affinely so min = 0 and max = 1 exactly.

    Raises DegenerateInputError for constant spectra, where the map is
    undefined.
    """
    lo = float(s.intensity.min())
    hi = float(s.intensity.max())
    if hi == lo:
        raise DegenerateInputError("cannot normalize a constant spectrum")
    return s.with_intensity((s.intensity - lo) / (hi - lo))
