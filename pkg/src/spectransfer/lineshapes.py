"""Analytic line-shape primitives with exact derivatives.

All three shapes are amplitude-normalized: the value at the center equals
the amplitude A. The Voigt profile is the Gaussian (x) Lorentzian
convolution evaluated through the real part of the Faddeeva function
w(z) = exp(-z^2) erfc(-iz), divided by its value at the center.

    gaussian(x)   = A exp(-(x-mu)^2 / (2 sigma^2))
    lorentzian(x) = A gamma^2 / ((x-mu)^2 + gamma^2)
    voigt(x)      = A Re w(z(x)) / Re w(z(mu)),  z = ((x-mu) + i gamma) / (sigma sqrt 2)

FWHM identities: gaussian 2 sqrt(2 ln 2) sigma, lorentzian 2 gamma.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import wofz

from .errors import InputError
from .spectra import GridSpec, Spectrum

_SQRT2 = np.sqrt(2.0)
_TWO_I_SQRTPI = 2j / np.sqrt(np.pi)

GAUSSIAN_FWHM_FACTOR = 2.0 * np.sqrt(2.0 * np.log(2.0))


class PeakKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    LORENTZIAN = "lorentzian"
    VOIGT = "voigt"


@dataclass(frozen=True)
class PeakModel:
    """One line-shape component.

    sigma is the Gaussian width parameter, gamma the Lorentzian HWHM.
    A Gaussian peak has gamma = 0, a Lorentzian sigma = 0, a Voigt both > 0.
    """

    kind: PeakKind
    center: float
    amplitude: float
    sigma: float = 0.0
    gamma: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PeakKind(self.kind))
        if not all(
            np.isfinite(v) for v in (self.center, self.amplitude, self.sigma, self.gamma)
        ):
            raise InputError("peak parameters must be finite")
        if self.amplitude <= 0:
            raise InputError(f"amplitude must be positive, got {self.amplitude}")
        if self.kind is PeakKind.GAUSSIAN and not (self.sigma > 0 and self.gamma == 0):
            raise InputError("gaussian peak requires sigma > 0 and gamma = 0")
        if self.kind is PeakKind.LORENTZIAN and not (self.gamma > 0 and self.sigma == 0):
            raise InputError("lorentzian peak requires gamma > 0 and sigma = 0")
        if self.kind is PeakKind.VOIGT and not (self.sigma > 0 and self.gamma > 0):
            raise InputError("voigt peak requires sigma > 0 and gamma > 0")

    @property
    def fwhm(self) -> float:
        """Full width at half maximum (Olivero-Longbothum approximation for Voigt)."""
        f_g = GAUSSIAN_FWHM_FACTOR * self.sigma
        f_l = 2.0 * self.gamma
        if self.kind is PeakKind.GAUSSIAN:
            return f_g
        if self.kind is PeakKind.LORENTZIAN:
            return f_l
        return 0.5346 * f_l + np.sqrt(0.2166 * f_l**2 + f_g**2)


def _voigt_z(x: np.ndarray, mu: float, sigma: float, gamma: float) -> np.ndarray:
    return ((x - mu) + 1j * gamma) / (sigma * _SQRT2)


def eval_lineshape(p: PeakModel, x) -> np.ndarray | float:
    """Evaluate a peak at scalar or array x; peak value at x = center is A."""
    scalar = np.isscalar(x)
    x = np.asarray(x, dtype=float)
    dx = x - p.center
    if p.kind is PeakKind.GAUSSIAN:
        y = p.amplitude * np.exp(-(dx**2) / (2.0 * p.sigma**2))
    elif p.kind is PeakKind.LORENTZIAN:
        y = p.amplitude * p.gamma**2 / (dx**2 + p.gamma**2)
    else:
        norm = wofz(_voigt_z(np.array(p.center), p.center, p.sigma, p.gamma)).real
        y = p.amplitude * wofz(_voigt_z(x, p.center, p.sigma, p.gamma)).real / norm
    return float(y) if scalar else y


def _wofz_prime(z: np.ndarray) -> np.ndarray:
    # d/dz [exp(-z^2) erfc(-iz)] = 2i/sqrt(pi) - 2 z w(z)
    return _TWO_I_SQRTPI - 2.0 * z * wofz(z)


def lineshape_gradient(p: PeakModel, x) -> np.ndarray:
    """Partial derivatives of eval_lineshape over (center, amplitude, sigma, gamma).

    Returns shape (4,) for scalar x, else (n, 4). Derivatives with respect
    to a parameter that is fixed by the peak kind (gamma for Gaussian,
    sigma for Lorentzian) are zero.
    """
    scalar = np.isscalar(x)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mu, amp, sig, gam = p.center, p.amplitude, p.sigma, p.gamma
    dx = x - mu
    grad = np.zeros((x.size, 4))
    if p.kind is PeakKind.GAUSSIAN:
        g = np.exp(-(dx**2) / (2.0 * sig**2))
        grad[:, 0] = amp * g * dx / sig**2
        grad[:, 1] = g
        grad[:, 2] = amp * g * dx**2 / sig**3
    elif p.kind is PeakKind.LORENTZIAN:
        denom = dx**2 + gam**2
        grad[:, 0] = amp * gam**2 * 2.0 * dx / denom**2
        grad[:, 1] = gam**2 / denom
        grad[:, 3] = 2.0 * amp * gam * dx**2 / denom**2
    else:
        z = _voigt_z(x, mu, sig, gam)
        z0 = _voigt_z(np.array(mu), mu, sig, gam)
        v = wofz(z).real
        norm = wofz(z0).real
        wp = _wofz_prime(z)
        wp0 = _wofz_prime(z0)
        s = sig * _SQRT2
        dv_dmu = (wp * (-1.0 / s)).real
        dv_dsig = (wp * (-z / sig)).real
        dv_dgam = (wp * (1j / s)).real
        dnorm_dsig = (wp0 * (-z0 / sig)).real
        dnorm_dgam = (wp0 * (1j / s)).real
        grad[:, 0] = amp * dv_dmu / norm
        grad[:, 1] = v / norm
        grad[:, 2] = amp * (dv_dsig * norm - v * dnorm_dsig) / norm**2
        grad[:, 3] = amp * (dv_dgam * norm - v * dnorm_dgam) / norm**2
    return grad[0] if scalar else grad


def sum_model(peaks: list[PeakModel], g: GridSpec) -> Spectrum:
    """Superposition of peaks sampled on a grid; empty list gives all zeros."""
    grid = g.axis()
    total = np.zeros(g.n_points)
    for p in peaks:
        total += eval_lineshape(p, grid)
    return Spectrum(grid, total)
