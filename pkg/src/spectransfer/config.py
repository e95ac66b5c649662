"""Run configuration: canonical grids per modality plus component settings.

One INI-style document (key = value lines, a section per modality plus
[fit], [model] and [synth] sections) makes a run self-describing; the CLI
records its SHA-256 hash in the run manifest for reproducibility.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass

from .dataset import SynthSpec
from .errors import ConfigError
from .fitting import FitConfig
from .lineshapes import PeakKind
from .spectra import GridSpec, Modality
from .vae import ModelConfig

DEFAULT_CONFIG_TEXT = """\
[ir]
start = 400
end = 4000
n_points = 1024

[raman]
start = 100
end = 1400
n_points = 1024

[xrd]
start = 5
end = 90
n_points = 1024

[other]
start = 0
end = 1000
n_points = 1024

[fit]
max_peaks = 32
prominence_threshold = 0.02
max_iterations = 200
lm_lambda0 = 1e-3
convergence_tol = 1e-8

[model]
latent_dim = 32
hidden_dims = 512, 128
k_max = 16
beta_kl = 1e-3
learning_rate = 1e-3
epochs = 120
batch_size = 16

[synth]
n_pairs = 200
prior = gaussian
peak_count_min = 1
peak_count_max = 2
fwhm_min = 60
fwhm_max = 140
noise_std = 0.005
rule_id = 1
"""


@dataclass(frozen=True)
class RunConfig:
    grids: dict[Modality, GridSpec]
    fit: FitConfig
    model_template: dict
    synth_template: dict
    text: str

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def grid_for(self, modality: Modality) -> GridSpec:
        try:
            return self.grids[Modality(modality)]
        except KeyError:
            raise ConfigError(f"no grid configured for modality {modality}") from None

    def model_config(self, seed: int, epochs: int | None = None) -> ModelConfig:
        params = dict(self.model_template)
        k_max = params.pop("k_max")
        grid_points = next(iter(self.grids.values())).n_points
        return ModelConfig(
            input_len=grid_points,
            feature_len=4 * k_max + 1,
            seed=seed,
            epochs=epochs if epochs is not None else params.pop("epochs"),
            **{k: v for k, v in params.items() if k != "epochs"},
        )

    def synth_spec(self, seed: int, prior: PeakKind | None = None) -> SynthSpec:
        params = dict(self.synth_template)
        if prior is not None:
            params["prior_kind"] = PeakKind(prior)
        return SynthSpec(seed=seed, grid=self.grid_for(Modality.OTHER), **params)


def _parse_grid(section: configparser.SectionProxy) -> GridSpec:
    return GridSpec(
        start=section.getfloat("start"),
        end=section.getfloat("end"),
        n_points=section.getint("n_points"),
    )


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad config document: {exc}") from None

    grids = {}
    for modality in Modality:
        if parser.has_section(modality.value):
            grids[modality] = _parse_grid(parser[modality.value])
    if not grids:
        raise ConfigError("config defines no modality grid sections")
    lengths = {g.n_points for g in grids.values()}
    if len(lengths) != 1:
        raise ConfigError("all modality grids must share n_points (fixed model size)")

    fit_section = parser["fit"] if parser.has_section("fit") else {}
    fit = FitConfig(
        max_peaks=int(fit_section.get("max_peaks", 32)),
        prominence_threshold=float(fit_section.get("prominence_threshold", 0.02)),
        max_iterations=int(fit_section.get("max_iterations", 200)),
        lm_lambda0=float(fit_section.get("lm_lambda0", 1e-3)),
        convergence_tol=float(fit_section.get("convergence_tol", 1e-8)),
    )

    model_section = parser["model"] if parser.has_section("model") else {}
    model_template = {
        "latent_dim": int(model_section.get("latent_dim", 32)),
        "hidden_dims": tuple(
            int(v) for v in str(model_section.get("hidden_dims", "512, 128")).split(",")
        ),
        "k_max": int(model_section.get("k_max", 16)),
        "beta_kl": float(model_section.get("beta_kl", 1e-3)),
        "learning_rate": float(model_section.get("learning_rate", 1e-3)),
        "epochs": int(model_section.get("epochs", 120)),
        "batch_size": int(model_section.get("batch_size", 16)),
    }

    synth_section = parser["synth"] if parser.has_section("synth") else {}
    synth_template = {
        "n_pairs": int(synth_section.get("n_pairs", 200)),
        "prior_kind": PeakKind(str(synth_section.get("prior", "gaussian"))),
        "peak_count_range": (
            int(synth_section.get("peak_count_min", 1)),
            int(synth_section.get("peak_count_max", 2)),
        ),
        "fwhm_range": (
            float(synth_section.get("fwhm_min", 60)),
            float(synth_section.get("fwhm_max", 140)),
        ),
        "noise_std": float(synth_section.get("noise_std", 0.005)),
        "rule_id": int(synth_section.get("rule_id", 1)),
    }

    return RunConfig(grids, fit, model_template, synth_template, text)


def load_config(path=None) -> RunConfig:
    """Load a config file, or the built-in defaults when path is None."""
    if path is None:
        return parse_config(DEFAULT_CONFIG_TEXT)
    try:
        text = open(path).read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    return parse_config(text)
