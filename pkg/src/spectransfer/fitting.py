"""Deconstruction of a spectrum into prior line shapes plus a residual.

Peaks are seeded by prominence-based detection and refined jointly with a
damped (Levenberg-Marquardt) least-squares loop using the analytic
Jacobians from `lineshapes`. The residual carries whatever the prior
cannot express (environmental broadening, baseline imperfections), so the
input is always exactly `sum_model(peaks) + residual`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .errors import ConfigError
from .lineshapes import (
    GAUSSIAN_FWHM_FACTOR,
    PeakKind,
    PeakModel,
    eval_lineshape,
    lineshape_gradient,
)
from .spectra import Spectrum

# column indices into the (mu, A, sigma, gamma) gradient used per prior
_PARAM_COLUMNS = {
    PeakKind.GAUSSIAN: (0, 1, 2),
    PeakKind.LORENTZIAN: (0, 1, 3),
    PeakKind.VOIGT: (0, 1, 2, 3),
}

_AMPLITUDE_FLOOR = 1e-10


@dataclass(frozen=True)
class FitConfig:
    """Knobs for peak detection and LM refinement."""

    max_peaks: int = 32
    prominence_threshold: float = 0.02
    max_iterations: int = 200
    lm_lambda0: float = 1e-3
    convergence_tol: float = 1e-8
    width_bounds: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.max_peaks < 1 or self.max_iterations < 1:
            raise ConfigError("max_peaks and max_iterations must be positive")
        if not 0.0 < self.prominence_threshold < 1.0:
            raise ConfigError("prominence_threshold must lie in (0, 1)")
        if self.lm_lambda0 <= 0 or self.convergence_tol <= 0:
            raise ConfigError("lm_lambda0 and convergence_tol must be positive")
        if self.width_bounds is not None:
            lo, hi = self.width_bounds
            if not 0 < lo < hi:
                raise ConfigError("width_bounds must satisfy 0 < min < max")

    def resolved_width_bounds(self, axis: np.ndarray) -> tuple[float, float]:
        if self.width_bounds is not None:
            return self.width_bounds
        step = float(axis[1] - axis[0])
        span = float(axis[-1] - axis[0])
        return (0.5 * step, span / 3.0)


@dataclass(frozen=True)
class Deconstruction:
    """Fitted peak list plus the residual the prior could not capture."""

    prior_kind: PeakKind
    peaks: list[PeakModel]
    residual: Spectrum
    rmse_fit: float
    n_iterations: int
    converged: bool

    def reconstruct(self) -> np.ndarray:
        """Model + residual, identical to the fitted input."""
        model = np.zeros(len(self.residual))
        for p in self.peaks:
            model += eval_lineshape(p, self.residual.axis)
        return model + self.residual.intensity


def half_max_crossing_width(axis: np.ndarray, y: np.ndarray, index: int) -> float:
    """Width of the peak at `index` where y first crosses half its height.

    Crossings are linearly interpolated between grid points; a side that
    never crosses (peak running off the spectrum edge) is mirrored from the
    other side, or falls back to one grid step when neither side crosses.
    """
    height = y[index]
    half = 0.5 * height
    x_peak = axis[index]

    def crossing(direction: int) -> float | None:
        j = index
        while 0 <= j + direction < y.size and y[j + direction] > half:
            j += direction
        k = j + direction
        if k < 0 or k >= y.size:
            return None
        # interpolate between the last point above half and the first below
        frac = (y[j] - half) / (y[j] - y[k])
        return float(axis[j] + frac * (axis[k] - axis[j]))

    left = crossing(-1)
    right = crossing(+1)
    if left is not None and right is not None:
        return right - left
    if right is not None:
        return 2.0 * (right - x_peak)
    if left is not None:
        return 2.0 * (x_peak - left)
    return float(axis[1] - axis[0])


def detect_peaks(s: Spectrum, cfg: FitConfig) -> list[tuple[float, float, float]]:
    """Locate seed peaks: (center, height, half-max width estimate).

    Local maxima with prominence below `prominence_threshold` (as a
    fraction of the intensity maximum) are ignored; at most `max_peaks`
    survive, keeping the most prominent. Results are ordered by center.
    """
    y = s.intensity
    peak_scale = float(y.max())
    if peak_scale <= 0:
        return []
    indices, props = find_peaks(y, prominence=cfg.prominence_threshold * peak_scale)
    if indices.size == 0:
        return []
    if indices.size > cfg.max_peaks:
        keep = np.argsort(props["prominences"])[::-1][: cfg.max_peaks]
        indices = np.sort(indices[keep])
    return [
        (float(s.axis[i]), float(y[i]), half_max_crossing_width(s.axis, y, i))
        for i in indices
    ]


def _initial_params(
    seeds: list[tuple[float, float, float]],
    prior: PeakKind,
    width_bounds: tuple[float, float],
) -> np.ndarray:
    """Pack detection seeds into the flat LM parameter vector."""
    w_lo, w_hi = width_bounds
    rows = []
    for center, height, width in seeds:
        width = min(max(width, 2.0 * w_lo), 2.0 * w_hi)
        if prior is PeakKind.GAUSSIAN:
            rows.append([center, height, width / GAUSSIAN_FWHM_FACTOR])
        elif prior is PeakKind.LORENTZIAN:
            rows.append([center, height, width / 2.0])
        else:
            # split the estimated FWHM evenly between both components
            # (Olivero-Longbothum with f_G = f_L gives f = 1.6376 f_L)
            part = width / 1.6376
            rows.append([center, height, part / GAUSSIAN_FWHM_FACTOR, part / 2.0])
    return np.asarray(rows, dtype=float).ravel()


class _PeakSystem:
    """Flat-vector view of an active peak set for one prior kind."""

    def __init__(self, prior: PeakKind, axis: np.ndarray, bounds: tuple[float, float]):
        self.prior = prior
        self.axis = axis
        self.k = len(_PARAM_COLUMNS[prior])
        self.w_lo, self.w_hi = bounds

    def n_peaks(self, params: np.ndarray) -> int:
        return params.size // self.k

    def to_peak(self, row: np.ndarray) -> PeakModel:
        if self.prior is PeakKind.GAUSSIAN:
            return PeakModel(self.prior, row[0], row[1], sigma=row[2])
        if self.prior is PeakKind.LORENTZIAN:
            return PeakModel(self.prior, row[0], row[1], gamma=row[2])
        return PeakModel(self.prior, row[0], row[1], sigma=row[2], gamma=row[3])

    def model(self, params: np.ndarray) -> np.ndarray:
        total = np.zeros(self.axis.size)
        for row in params.reshape(-1, self.k):
            total += eval_lineshape(self.to_peak(row), self.axis)
        return total

    def jacobian(self, params: np.ndarray) -> np.ndarray:
        cols = _PARAM_COLUMNS[self.prior]
        jac = np.empty((self.axis.size, params.size))
        for j, row in enumerate(params.reshape(-1, self.k)):
            grad = lineshape_gradient(self.to_peak(row), self.axis)
            jac[:, j * self.k : (j + 1) * self.k] = grad[:, cols]
        return jac

    def project(self, params: np.ndarray) -> np.ndarray:
        """Clamp parameters into their boxes (in place on a copy)."""
        p = params.reshape(-1, self.k).copy()
        p[:, 0] = np.clip(p[:, 0], self.axis[0], self.axis[-1])
        p[:, 1] = np.maximum(p[:, 1], _AMPLITUDE_FLOOR)
        p[:, 2:] = np.clip(p[:, 2:], self.w_lo, self.w_hi)
        return p.ravel()

    def merge_collided(self, params: np.ndarray) -> tuple[np.ndarray, bool]:
        """Drop the weaker of two peaks whose centers collide within one grid step.

        Collided peaks make the Jacobian degenerate; the survivor keeps
        fitting the shared mass.
        """
        p = params.reshape(-1, self.k)
        step = float(self.axis[1] - self.axis[0])
        alive = np.ones(p.shape[0], dtype=bool)
        order = np.argsort(p[:, 0])
        for a, b in zip(order[:-1], order[1:]):
            if not (alive[a] and alive[b]):
                continue
            if abs(p[b, 0] - p[a, 0]) < step:
                loser = a if p[a, 1] < p[b, 1] else b
                alive[loser] = False
        return p[alive].ravel(), bool(not alive.all())


def fit_deconstruction(s: Spectrum, prior: PeakKind, cfg: FitConfig) -> Deconstruction:
    """Fit a sum of `prior` line shapes to a normalized spectrum.

    Joint Levenberg-Marquardt over all peak parameters, analytic Jacobian,
    box constraints applied by projection after each trial step. Damping
    is multiplied by 10 on a rejected step and divided by 10 on an
    accepted one. Returns the best parameters seen even without
    convergence, flagged through `converged`.
    """
    prior = PeakKind(prior)
    y = s.intensity
    bounds = cfg.resolved_width_bounds(s.axis)
    system = _PeakSystem(prior, s.axis, bounds)

    seeds = detect_peaks(s, cfg)
    if not seeds:
        rmse = float(np.sqrt(np.mean(y**2)))
        return Deconstruction(prior, [], s, rmse, 0, True)

    params = system.project(_initial_params(seeds, prior, bounds))
    residual = system.model(params) - y
    cost = float(residual @ residual)
    lam = cfg.lm_lambda0
    converged = False
    iterations = 0

    for iterations in range(1, cfg.max_iterations + 1):
        if cost <= 1e-30:
            converged = True
            break
        jac = system.jacobian(params)
        grad = jac.T @ residual
        hessian = jac.T @ jac
        if np.max(np.abs(grad)) < 1e-14:
            converged = True
            break
        diag = np.diag(hessian).copy()
        diag[diag < 1e-12] = 1e-12

        accepted = False
        for _ in range(20):
            try:
                step = np.linalg.solve(hessian + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = system.project(params + step)
            trial, merged = system.merge_collided(trial)
            trial_residual = system.model(trial) - y
            trial_cost = float(trial_residual @ trial_residual)
            if trial_cost < cost:
                params, residual = trial, trial_residual
                previous_cost, cost = cost, trial_cost
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                if merged:
                    # peak count changed; rebuild the system next iteration
                    previous_cost = np.inf
                break
            lam *= 10.0
        if not accepted:
            break
        if abs(previous_cost - cost) <= cfg.convergence_tol * max(previous_cost, 1e-30):
            converged = True
            break

    peaks = sorted(
        (system.to_peak(row) for row in params.reshape(-1, system.k)),
        key=lambda p: p.center,
    )
    model = system.model(params)
    residual_spectrum = s.with_intensity(y - model)
    rmse = float(np.sqrt(np.mean((y - model) ** 2)))
    return Deconstruction(prior, peaks, residual_spectrum, rmse, iterations, converged)


def deconstruction_features(d: Deconstruction, k_max: int) -> np.ndarray:
    """Fixed-length conditioning vector for the generative model.

    The k_max strongest peaks contribute (center scaled to [0,1] over the
    grid, amplitude, sigma/span, gamma/span) in descending-amplitude
    order; unused slots stay zero and the fit RMSE is appended, so the
    vector has length 4 * k_max + 1.
    """
    axis = d.residual.axis
    start, span = float(axis[0]), float(axis[-1] - axis[0])
    features = np.zeros(4 * k_max + 1)
    strongest = sorted(d.peaks, key=lambda p: (-p.amplitude, p.center))[:k_max]
    for i, p in enumerate(strongest):
        features[4 * i : 4 * i + 4] = (
            (p.center - start) / span,
            p.amplitude,
            p.sigma / span,
            p.gamma / span,
        )
    features[-1] = d.rmse_fit
    return features
