"""Cross-modality spectral transfer toolkit.

Deconvolves spectra into physical-prior line shapes (Gaussian, Lorentzian,
Voigt), trains a prior-conditioned variational generative model that maps
a measured spectrum of one modality to a generated spectrum of another,
and evaluates the result with spectrum- and signal-quality metrics.
"""

from .errors import (
    ConfigError,
    DegenerateInputError,
    InputError,
    NumericalError,
    ParseError,
    SpectransferError,
)
from .fitting import Deconstruction, FitConfig, deconstruction_features, detect_peaks, fit_deconstruction
from .lineshapes import PeakKind, PeakModel, eval_lineshape, lineshape_gradient, sum_model
from .metrics import PairMetrics, SpectrumStats, js_divergence, measure_stats, pair_metrics
from .spectra import GridSpec, Modality, Spectrum, normalize_minmax, resample
from .vae import (
    GenerativeModel,
    LatentSample,
    ModelConfig,
    decode,
    encode,
    generate,
    kl_divergence,
    load_model,
    loss,
    reparameterize,
    save_model,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Deconstruction",
    "DegenerateInputError",
    "FitConfig",
    "GenerativeModel",
    "GridSpec",
    "InputError",
    "LatentSample",
    "Modality",
    "ModelConfig",
    "NumericalError",
    "PairMetrics",
    "ParseError",
    "PeakKind",
    "PeakModel",
    "SpectransferError",
    "Spectrum",
    "SpectrumStats",
    "decode",
    "deconstruction_features",
    "detect_peaks",
    "encode",
    "eval_lineshape",
    "fit_deconstruction",
    "generate",
    "js_divergence",
    "kl_divergence",
    "lineshape_gradient",
    "load_model",
    "loss",
    "measure_stats",
    "normalize_minmax",
    "pair_metrics",
    "reparameterize",
    "resample",
    "save_model",
    "sum_model",
    "train",
]
