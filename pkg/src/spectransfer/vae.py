"""Prior-conditioned variational encoder/decoder for spectrum transfer.

The encoder consumes a resampled modality-A spectrum concatenated with its
deconstruction features and produces a Gaussian posterior over a
low-dimensional latent vector; the mirrored decoder maps a latent vector
to the modality-B spectrum. Training minimizes

    total = mse(decoded, target) + beta_kl * KL(q(z|x) || N(0, I))

with adaptive-moment gradient descent. Everything is seeded and
single-threaded, so runs are reproducible bit for bit.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError, InputError
from .fitting import Deconstruction, deconstruction_features
from .nn import Adam, Dense, init_dense, linear, sigmoid, stack_backward, stack_forward
from .rng import stream
from .spectra import GridSpec, Spectrum, normalize_minmax

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    input_len: int = 1024
    feature_len: int = 65  # 4 * k_max + 1 with k_max = 16
    latent_dim: int = 32
    hidden_dims: tuple[int, ...] = (512, 128)
    beta_kl: float = 1e-3
    learning_rate: float = 1e-3
    epochs: int = 120
    batch_size: int = 16
    seed: int = 0
    activation: str = "tanh"

    def __post_init__(self) -> None:
        dims = (self.input_len, self.feature_len, self.latent_dim, self.batch_size)
        if any(int(d) != d or d < 1 for d in dims):
            raise ConfigError("model dimensions must be positive integers")
        if any(d < 1 for d in self.hidden_dims):
            raise ConfigError("hidden_dims must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.activation not in ("tanh", "sin", "relu"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))

    @property
    def encoder_input_len(self) -> int:
        return self.input_len + self.feature_len

    @property
    def k_max(self) -> int:
        return (self.feature_len - 1) // 4


@dataclass
class EncoderParams:
    layers: list[Dense]
    mu_head: Dense
    log_var_head: Dense

    @property
    def arrays(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.arrays)
        return out + self.mu_head.arrays + self.log_var_head.arrays


@dataclass
class DecoderParams:
    layers: list[Dense]
    out_head: Dense

    @property
    def arrays(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.arrays)
        return out + self.out_head.arrays


@dataclass
class GenerativeModel:
    phi: EncoderParams
    theta: DecoderParams
    config: ModelConfig

    @property
    def arrays(self) -> list[np.ndarray]:
        return self.phi.arrays + self.theta.arrays


@dataclass(frozen=True)
class LatentSample:
    mu: np.ndarray
    log_var: np.ndarray
    eps: np.ndarray
    z: np.ndarray


def initialize_model(cfg: ModelConfig) -> GenerativeModel:
    """Fresh model with seeded uniform fan-in weights."""
    rng = stream(cfg.seed, "model-init")
    enc_dims = [cfg.encoder_input_len, *cfg.hidden_dims]
    enc_layers = [init_dense(rng, a, b) for a, b in zip(enc_dims[:-1], enc_dims[1:])]
    mu_head = init_dense(rng, enc_dims[-1], cfg.latent_dim)
    log_var_head = init_dense(rng, enc_dims[-1], cfg.latent_dim)
    dec_dims = [cfg.latent_dim, *reversed(cfg.hidden_dims)]
    dec_layers = [init_dense(rng, a, b) for a, b in zip(dec_dims[:-1], dec_dims[1:])]
    out_head = init_dense(rng, dec_dims[-1], cfg.input_len)
    return GenerativeModel(
        EncoderParams(enc_layers, mu_head, log_var_head),
        DecoderParams(dec_layers, out_head),
        cfg,
    )


def _check_finite(name: str, x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise InputError(f"{name} contains non-finite values")


def encode(m: GenerativeModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Posterior parameters (mu, log_var) for one input vector or a batch."""
    x = np.asarray(x, dtype=float)
    _check_finite("encoder input", x)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != m.config.encoder_input_len:
        raise InputError(
            f"encoder input length {x.shape[1]} != "
            f"input_len + feature_len = {m.config.encoder_input_len}"
        )
    h, _ = stack_forward(m.phi.layers, x, m.config.activation)
    mu = linear(m.phi.mu_head, h)
    log_var = linear(m.phi.log_var_head, h)
    if single:
        return mu[0], log_var[0]
    return mu, log_var


def reparameterize(
    mu: np.ndarray, log_var: np.ndarray, rng: np.random.Generator
) -> LatentSample:
    """Draw z = mu + exp(log_var / 2) * eps with eps ~ N(0, I)."""
    mu = np.asarray(mu, dtype=float)
    log_var = np.asarray(log_var, dtype=float)
    if mu.shape != log_var.shape:
        raise InputError("mu and log_var shapes differ")
    eps = rng.standard_normal(mu.shape)
    z = mu + np.exp(0.5 * log_var) * eps
    return LatentSample(mu, log_var, eps, z)


def decode(m: GenerativeModel, z: np.ndarray) -> np.ndarray:
    """Generated spectrum intensities in [0, 1] for a latent vector or batch."""
    z = np.asarray(z, dtype=float)
    _check_finite("latent input", z)
    single = z.ndim == 1
    z = np.atleast_2d(z)
    if z.shape[1] != m.config.latent_dim:
        raise InputError(f"latent length {z.shape[1]} != latent_dim {m.config.latent_dim}")
    h, _ = stack_forward(m.theta.layers, z, m.config.activation)
    y = sigmoid(linear(m.theta.out_head, h))
    return y[0] if single else y


def kl_divergence(mu: np.ndarray, log_var: np.ndarray) -> float:
    """KL(N(mu, diag exp(log_var)) || N(0, I)), summed over dimensions.

    Written as mu^2 + (expm1(log_var) - log_var) so each term is
    non-negative even in floating point.
    """
    mu = np.asarray(mu, dtype=float)
    log_var = np.asarray(log_var, dtype=float)
    if mu.shape != log_var.shape:
        raise InputError("mu and log_var shapes differ")
    return float(0.5 * np.sum(mu**2 + np.expm1(log_var) - log_var))


def _forward_backward(
    m: GenerativeModel, x: np.ndarray, y: np.ndarray, eps: np.ndarray
) -> tuple[float, float, float, list[np.ndarray]]:
    """Loss terms and gradients (aligned with model.arrays) for one batch."""
    cfg = m.config
    batch = x.shape[0]

    h, enc_cache = stack_forward(m.phi.layers, x, cfg.activation)
    mu = linear(m.phi.mu_head, h)
    log_var = linear(m.phi.log_var_head, h)
    std = np.exp(0.5 * log_var)
    z = mu + std * eps
    g, dec_cache = stack_forward(m.theta.layers, z, cfg.activation)
    pre_out = linear(m.theta.out_head, g)
    y_hat = sigmoid(pre_out)

    recon = float(np.mean((y_hat - y) ** 2))
    kl_per_sample = 0.5 * np.sum(mu**2 + np.expm1(log_var) - log_var, axis=1)
    kl = float(np.mean(kl_per_sample))
    total = recon + cfg.beta_kl * kl

    # decoder backward
    d_y_hat = 2.0 * (y_hat - y) / y_hat.size
    d_pre_out = d_y_hat * y_hat * (1.0 - y_hat)
    d_out_head = [g.T @ d_pre_out, d_pre_out.sum(axis=0)]
    d_g = d_pre_out @ m.theta.out_head.W.T
    d_z, dec_grads = stack_backward(m.theta.layers, dec_cache, d_g, cfg.activation)

    # latent and KL backward
    d_mu = d_z + cfg.beta_kl * mu / batch
    d_log_var = d_z * eps * 0.5 * std + cfg.beta_kl * 0.5 * (np.exp(log_var) - 1.0) / batch

    # encoder backward
    d_mu_head = [h.T @ d_mu, d_mu.sum(axis=0)]
    d_lv_head = [h.T @ d_log_var, d_log_var.sum(axis=0)]
    d_h = d_mu @ m.phi.mu_head.W.T + d_log_var @ m.phi.log_var_head.W.T
    _, enc_grads = stack_backward(m.phi.layers, enc_cache, d_h, cfg.activation)

    grads = enc_grads + d_mu_head + d_lv_head + dec_grads + d_out_head
    return total, recon, kl, grads


def loss(
    m: GenerativeModel,
    x: np.ndarray,
    y: np.ndarray,
    eps: np.ndarray | None = None,
) -> tuple[float, float, float]:
    """(total, reconstruction, kl) for one pair or a batch.

    Passing eps pins the reparameterization noise (eps = 0 scores the
    posterior mean, which is also what inference uses).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    _check_finite("input", x)
    _check_finite("target", y)
    if eps is None:
        eps = np.zeros((x.shape[0], m.config.latent_dim))
    else:
        eps = np.atleast_2d(np.asarray(eps, dtype=float))
    total, recon, kl, _ = _forward_backward(m, x, y, eps)
    return total, recon, kl


def loss_gradients(
    m: GenerativeModel, x: np.ndarray, y: np.ndarray, eps: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """Total loss and its gradient per parameter array, for a fixed noise draw."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    total, _, _, grads = _forward_backward(m, x, y, eps)
    return total, grads


def train(
    dataset: list[tuple[np.ndarray, np.ndarray]],
    cfg: ModelConfig,
    on_epoch=None,
) -> tuple[GenerativeModel, np.ndarray]:
    """Train a fresh model; returns it with the (epochs, 3) loss history.

    History columns are (total, recon, kl), each the sample-weighted mean
    over the epoch's batches. Shuffling and noise draws come from named
    streams of cfg.seed, so identical seeds give bitwise-identical
    histories. `on_epoch(epoch_index, model)` runs after each epoch when
    provided (latent tracing hooks in here).
    """
    if not dataset:
        raise ConfigError("training dataset is empty")
    x_all = np.asarray([np.asarray(x, dtype=float) for x, _ in dataset])
    y_all = np.asarray([np.asarray(y, dtype=float) for _, y in dataset])
    _check_finite("inputs", x_all)
    _check_finite("targets", y_all)
    if x_all.shape[1] != cfg.encoder_input_len or y_all.shape[1] != cfg.input_len:
        raise ConfigError(
            f"dataset shapes {x_all.shape[1]}/{y_all.shape[1]} do not match config "
            f"{cfg.encoder_input_len}/{cfg.input_len}"
        )

    model = initialize_model(cfg)
    optimizer = Adam(model.arrays, cfg.learning_rate)
    shuffle_rng = stream(cfg.seed, "train-shuffle")
    noise_rng = stream(cfg.seed, "train-noise")
    n = x_all.shape[0]
    history = np.zeros((cfg.epochs, 3))

    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        sums = np.zeros(3)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            eps = noise_rng.standard_normal((idx.size, cfg.latent_dim))
            total, recon, kl, grads = _forward_backward(
                model, x_all[idx], y_all[idx], eps
            )
            optimizer.step(grads)
            sums += np.array([total, recon, kl]) * idx.size
        history[epoch] = sums / n
        if on_epoch is not None:
            on_epoch(epoch, model)
    return model, history


def build_input(m: GenerativeModel, s_a: Spectrum, d: Deconstruction) -> np.ndarray:
    """Concatenate a resampled spectrum with its deconstruction features."""
    if len(s_a) != m.config.input_len:
        raise ConfigError(
            f"input spectrum length {len(s_a)} != configured input_len {m.config.input_len}"
        )
    return np.concatenate([s_a.intensity, deconstruction_features(d, m.config.k_max)])


def generate(
    m: GenerativeModel, s_a: Spectrum, d: Deconstruction, grid_b: GridSpec
) -> Spectrum:
    """Deterministic inference: decode the posterior mean onto the target grid."""
    if grid_b.n_points != m.config.input_len:
        raise ConfigError(
            f"target grid has {grid_b.n_points} points, model produces {m.config.input_len}"
        )
    mu, _ = encode(m, build_input(m, s_a, d))
    intensity = decode(m, mu)
    out = Spectrum(grid_b.axis(), intensity, label=s_a.label)
    if intensity.max() > intensity.min():
        out = normalize_minmax(out)
    return out


def _named_arrays(m: GenerativeModel) -> dict[str, np.ndarray]:
    named: dict[str, np.ndarray] = {}
    for i, layer in enumerate(m.phi.layers):
        named[f"enc_{i}_W"], named[f"enc_{i}_b"] = layer.W, layer.b
    named["enc_mu_W"], named["enc_mu_b"] = m.phi.mu_head.W, m.phi.mu_head.b
    named["enc_lv_W"], named["enc_lv_b"] = m.phi.log_var_head.W, m.phi.log_var_head.b
    for i, layer in enumerate(m.theta.layers):
        named[f"dec_{i}_W"], named[f"dec_{i}_b"] = layer.W, layer.b
    named["dec_out_W"], named["dec_out_b"] = m.theta.out_head.W, m.theta.out_head.b
    return named


def save_model(m: GenerativeModel, path) -> None:
    """Write a versioned checkpoint; loading reproduces outputs bit for bit."""
    meta = {"format_version": CHECKPOINT_FORMAT_VERSION, "config": asdict(m.config)}
    buffer = io.BytesIO()
    np.savez(buffer, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **_named_arrays(m))
    with open(path, "wb") as fh:
        fh.write(buffer.getvalue())


def load_model(path) -> GenerativeModel:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]))
        if meta.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise ConfigError(
                f"unsupported checkpoint format: {meta.get('format_version')}"
            )
        cfg_dict = meta["config"]
        cfg_dict["hidden_dims"] = tuple(cfg_dict["hidden_dims"])
        cfg = ModelConfig(**cfg_dict)
        model = initialize_model(cfg)
        named = _named_arrays(model)
        for key, array in named.items():
            array[...] = data[key]
    return model
