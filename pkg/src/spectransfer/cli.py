"""Command-line pipeline: synth, fit, train, generate, evaluate, analyze.

Exit codes: 0 success, 1 usage error, 2 data or configuration error,
3 numerical failure. Every subcommand writes a `run.json` manifest with
its arguments, seed and config hash so runs are self-describing and
reruns are byte-reproducible.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .classify import classify_information_transfer
from .config import RunConfig, load_config
from .dataset import (
    ManifestEntry,
    PairManifest,
    build_manifest,
    generate_synthetic_pairs,
    load_manifest,
    save_manifest,
)
from .errors import ConfigError, NumericalError, ParseError, SpectransferError
from .fitting import Deconstruction, deconstruction_features, fit_deconstruction
from .io_rruff import NAME_KEY, RruffRecord, load_rruff_file, save_rruff_file
from .latent import (
    capture_latents,
    centroid_separation_test,
    cosine_similarity_profile,
    load_trace,
    pca_project,
    save_trace,
)
from .lineshapes import PeakKind
from .report import build_dataset_report, serialize_report
from .spectra import Modality, Spectrum, normalize_minmax, resample
from .vae import generate, load_model, save_model, train

logger = logging.getLogger(__name__)

FIT_RECORD_SCHEMA_VERSION = 1


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage problems; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _sanitize(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name) or "unnamed"


def _write_run_manifest(out_dir: Path, command: str, args: argparse.Namespace, cfg: RunConfig) -> None:
    doc = {
        "command": command,
        "seed": getattr(args, "seed", None),
        "config_hash": cfg.config_hash,
        "arguments": {
            k: v for k, v in sorted(vars(args).items()) if k != "func" and v is not None
        },
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _prepare(entry_path: str, modality: Modality, cfg: RunConfig) -> Spectrum:
    """Load one spectrum file onto its canonical grid, normalized."""
    record = load_rruff_file(entry_path, modality)
    return normalize_minmax(resample(record.spectrum, cfg.grid_for(modality)))


def _peak_dict(p) -> dict:
    return {
        "kind": p.kind.value,
        "center": p.center,
        "amplitude": p.amplitude,
        "sigma": p.sigma,
        "gamma": p.gamma,
    }


def _fit_record(name: str, d: Deconstruction) -> dict:
    return {
        "name": name,
        "prior": d.prior_kind.value,
        "peaks": [_peak_dict(p) for p in d.peaks],
        "rmse_fit": d.rmse_fit,
        "n_iterations": d.n_iterations,
        "converged": d.converged,
    }


# ---------------------------------------------------------------- synth


def _cmd_synth(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out_dir)
    spec = cfg.synth_spec(seed=args.seed, prior=args.prior)
    pairs = generate_synthetic_pairs(spec)
    dir_a, dir_b = out_dir / "a", out_dir / "b"
    dir_a.mkdir(parents=True, exist_ok=True)
    dir_b.mkdir(parents=True, exist_ok=True)
    entries = []
    truth = []
    for i, pair in enumerate(pairs):
        name = f"synth-{i:04d}"
        for sub_dir, spectrum in ((dir_a, pair.spectrum_a), (dir_b, pair.spectrum_b)):
            record = RruffRecord({NAME_KEY: name}, spectrum)
            save_rruff_file(record, sub_dir / f"{name}.txt")
        truth.append(
            {
                "name": name,
                "peaks_a": [_peak_dict(p) for p in pair.peaks_a],
                "peaks_b": [_peak_dict(p) for p in pair.peaks_b],
            }
        )
        entries.append(
            ManifestEntry(
                name=name,
                path_a=str(dir_a / f"{name}.txt"),
                modality_a=Modality.OTHER,
                path_b=str(dir_b / f"{name}.txt"),
                modality_b=Modality.OTHER,
                split="test" if i < round(args.test_fraction * len(pairs)) else "train",
            )
        )
    save_manifest(PairManifest(entries), out_dir / "manifest.json")
    (out_dir / "truth.json").write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")
    _write_run_manifest(out_dir, "synth", args, cfg)
    print(f"wrote {len(pairs)} synthetic pairs to {out_dir}")
    return 0


# ---------------------------------------------------------------- pair


def _cmd_pair(args, cfg: RunConfig) -> int:
    manifest = build_manifest(
        args.dir_a,
        args.dir_b,
        Modality(args.modality_a),
        Modality(args.modality_b),
        args.test_fraction,
        args.seed,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_manifest(manifest, out_dir / "manifest.json")
    _write_run_manifest(out_dir, "pair", args, cfg)
    print(f"matched {len(manifest.entries)} pairs -> {out_dir / 'manifest.json'}")
    return 0


# ---------------------------------------------------------------- fit


def _cmd_fit(args, cfg: RunConfig) -> int:
    prior = PeakKind(args.prior)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    if args.input:
        modality = Modality(args.modality)
        spectrum = _prepare(args.input, modality, cfg)
        d = fit_deconstruction(spectrum, prior, cfg.fit)
        records.append(_fit_record(Path(args.input).stem, d))
    else:
        manifest = load_manifest(args.manifest)
        side = args.side
        for entry in manifest.entries:
            path = entry.path_a if side == "a" else entry.path_b
            modality = entry.modality_a if side == "a" else entry.modality_b
            d = fit_deconstruction(_prepare(path, modality, cfg), prior, cfg.fit)
            records.append(_fit_record(entry.name, d))
    doc = {
        "schema_version": FIT_RECORD_SCHEMA_VERSION,
        "prior": prior.value,
        "records": records,
    }
    (out_dir / "fits.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _write_run_manifest(out_dir, "fit", args, cfg)
    n_converged = sum(r["converged"] for r in records)
    print(f"fit {len(records)} spectra ({n_converged} converged) -> {out_dir / 'fits.json'}")
    return 0


# ---------------------------------------------------------------- train


def _training_pairs(
    manifest: PairManifest, prior: PeakKind, cfg: RunConfig, split: str
) -> tuple[list, list]:
    """(encoder input, target) arrays plus per-entry deconstructions."""
    dataset = []
    deconstructions = []
    entries = manifest.side(split)
    if not entries:
        raise ConfigError(f"manifest has no '{split}' entries")
    model_cfg = cfg.model_config(seed=0)
    for entry in entries:
        s_a = _prepare(entry.path_a, entry.modality_a, cfg)
        s_b = _prepare(entry.path_b, entry.modality_b, cfg)
        d = fit_deconstruction(s_a, prior, cfg.fit)
        x = np.concatenate([s_a.intensity, deconstruction_features(d, model_cfg.k_max)])
        dataset.append((x, s_b.intensity))
        deconstructions.append((entry, s_a, d))
    return dataset, deconstructions


def _cmd_train(args, cfg: RunConfig) -> int:
    prior = PeakKind(args.prior)
    out_dir = Path(args.out_dir)
    manifest = load_manifest(args.manifest)
    dataset, deconstructions = _training_pairs(manifest, prior, cfg, "train")
    model_cfg = cfg.model_config(seed=args.seed, epochs=args.epochs)
    model, history = train(dataset, model_cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_model(model, out_dir / "model.npz")
    history_doc = {
        "columns": ["total", "recon", "kl"],
        "epochs": [[float(v) for v in row] for row in history],
    }
    (out_dir / "history.json").write_text(
        json.dumps(history_doc, indent=2, sort_keys=True) + "\n"
    )
    trace = capture_latents(
        model,
        np.asarray([x for x, _ in dataset]),
        epoch=model_cfg.epochs - 1,
        run_id=args.run_id,
        prior_kind=prior.value,
    )
    save_trace(trace, out_dir / "latents.json")
    _write_run_manifest(out_dir, "train", args, cfg)
    print(
        f"trained {model_cfg.epochs} epochs on {len(dataset)} pairs; "
        f"final total loss {history[-1][0]:.6g} -> {out_dir / 'model.npz'}"
    )
    return 0


# ---------------------------------------------------------------- generate


def _cmd_generate(args, cfg: RunConfig) -> int:
    prior = PeakKind(args.prior)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = load_model(args.checkpoint)
    manifest = load_manifest(args.manifest)
    entries = manifest.entries if args.split == "all" else manifest.side(args.split)
    if not entries:
        raise ConfigError(f"manifest has no '{args.split}' entries")
    for entry in entries:
        s_a = _prepare(entry.path_a, entry.modality_a, cfg)
        d = fit_deconstruction(s_a, prior, cfg.fit)
        generated = generate(model, s_a, d, cfg.grid_for(entry.modality_b))
        record = RruffRecord(
            {NAME_KEY: entry.name, "GENERATED": "true", "PRIOR": prior.value},
            generated,
        )
        save_rruff_file(record, out_dir / f"{_sanitize(entry.name)}.txt")
    _write_run_manifest(out_dir, "generate", args, cfg)
    print(f"generated {len(entries)} spectra -> {out_dir}")
    return 0


# ---------------------------------------------------------------- evaluate


def _cmd_evaluate(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = load_manifest(args.manifest)
    generated_dir = Path(args.generated_dir)
    entries = manifest.entries if args.split == "all" else manifest.side(args.split)
    if not entries:
        raise ConfigError(f"manifest has no '{args.split}' entries")
    pairs = []
    for entry in entries:
        generated_path = generated_dir / f"{_sanitize(entry.name)}.txt"
        if not generated_path.exists():
            raise ConfigError(
                f"no generated spectrum for {entry.name!r} in {generated_dir} "
                "(mismatched manifest?)"
            )
        generated = load_rruff_file(generated_path, entry.modality_b).spectrum
        truth = _prepare(entry.path_b, entry.modality_b, cfg)
        if len(generated) != len(truth):
            raise ConfigError(
                f"generated spectrum for {entry.name!r} is not on the canonical grid"
            )
        pairs.append((generated, truth, entry.name))

    classification = None
    if args.classify:
        labelled = []
        for generated, _, name in pairs:
            cls = name.split(args.class_delimiter)[0]
            labelled.append((generated, cls))
        classification = classify_information_transfer(
            labelled, rounds=args.rounds, split_seed=args.seed
        )

    report = build_dataset_report(pairs, cfg.fit, classification)
    (out_dir / "report.json").write_text(serialize_report(report))
    _plot_overlays(pairs[: args.plots], out_dir)
    if classification is not None:
        _plot_confusion(classification, out_dir)
    _write_run_manifest(out_dir, "evaluate", args, cfg)
    agg = report.aggregates
    print(
        f"evaluated {len(pairs)} pairs: "
        f"correlation {agg['correlation'][0]:.4f} +- {agg['correlation'][1]:.4f}, "
        f"rmse {agg['rmse'][0]:.4f} +- {agg['rmse'][1]:.4f} -> {out_dir / 'report.json'}"
    )
    return 0


def _plot_overlays(pairs, out_dir: Path) -> None:
    for generated, truth, name in pairs:
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.plot(truth.axis, truth.intensity, label="truth", color="tab:green", lw=1)
        ax.plot(generated.axis, generated.intensity, label="generated", color="tab:orange", lw=1)
        ax.set_title(name)
        ax.set_xlabel("axis")
        ax.set_ylabel("intensity")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out_dir / f"overlay_{_sanitize(name)}.png", dpi=120)
        plt.close(fig)


def _plot_confusion(classification, out_dir: Path) -> None:
    confusion = sum(r.confusion for r in classification.rounds)
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(confusion, cmap="viridis")
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_xticks(range(len(classification.class_names)))
    ax.set_xticklabels(classification.class_names, rotation=90, fontsize=6)
    ax.set_yticks(range(len(classification.class_names)))
    ax.set_yticklabels(classification.class_names, fontsize=6)
    fig.colorbar(im)
    fig.tight_layout()
    fig.savefig(out_dir / "confusion.png", dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------- analyze


def _cmd_analyze(args, cfg: RunConfig) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_a = load_trace(args.trace_a)
    trace_b = load_trace(args.trace_b)
    if trace_a.mu_vectors.shape != trace_b.mu_vectors.shape:
        raise ConfigError("latent traces have different shapes")
    pooled = np.vstack([trace_a.mu_vectors, trace_b.mu_vectors])
    projections, ratios = pca_project(pooled, n_components=2)
    n_a = trace_a.mu_vectors.shape[0]
    proj_a, proj_b = projections[:n_a], projections[n_a:]
    distance, p_value = centroid_separation_test(
        proj_a, proj_b, n_shuffles=args.shuffles, seed=args.seed
    )
    cosine = cosine_similarity_profile(trace_a, trace_b)
    finite_cosine = cosine[np.isfinite(cosine)]
    doc = {
        "runs": [
            {"run_id": trace_a.run_id, "prior_kind": trace_a.prior_kind},
            {"run_id": trace_b.run_id, "prior_kind": trace_b.prior_kind},
        ],
        "explained_variance_ratios": [float(r) for r in ratios],
        "centroid_distance": distance,
        "permutation_p_value": p_value,
        "cosine_similarity": [
            None if not np.isfinite(c) else float(c) for c in cosine
        ],
        "cosine_range": (
            [float(finite_cosine.min()), float(finite_cosine.max())]
            if finite_cosine.size
            else None
        ),
    }
    (out_dir / "analysis.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].scatter(proj_a[:, 0], proj_a[:, 1], s=12, label=trace_a.prior_kind or "run A")
    axes[0].scatter(proj_b[:, 0], proj_b[:, 1], s=12, label=trace_b.prior_kind or "run B")
    axes[0].set_xlabel("PC 1")
    axes[0].set_ylabel("PC 2")
    axes[0].legend()
    axes[0].set_title(f"centroid distance {distance:.3f}, p = {p_value:.4f}")
    if finite_cosine.size:
        lo, hi = float(finite_cosine.min()), float(finite_cosine.max())
        if hi - lo < 1e-6:
            lo, hi = lo - 0.05, hi + 0.05
        axes[1].hist(finite_cosine, bins=30, range=(lo, hi))
    axes[1].set_xlabel("cosine similarity")
    axes[1].set_ylabel("count")
    fig.tight_layout()
    fig.savefig(out_dir / "latent_analysis.png", dpi=120)
    plt.close(fig)
    _write_run_manifest(out_dir, "analyze", args, cfg)
    print(
        f"latent separation {distance:.4f} (p = {p_value:.4f}), "
        f"cosine range {doc['cosine_range']} -> {out_dir / 'analysis.json'}"
    )
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spectransfer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file (defaults built in)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", required=True)

    p = sub.add_parser("synth", help="write a synthetic paired dataset")
    common(p)
    p.add_argument("--prior", choices=[k.value for k in PeakKind])
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("pair", help="build a pairing manifest from two directories")
    common(p)
    p.add_argument("--dir-a", required=True)
    p.add_argument("--dir-b", required=True)
    p.add_argument("--modality-a", required=True, choices=[m.value for m in Modality])
    p.add_argument("--modality-b", required=True, choices=[m.value for m in Modality])
    p.add_argument("--test-fraction", type=float, default=0.3)
    p.set_defaults(func=_cmd_pair)

    p = sub.add_parser("fit", help="deconstruct spectra under a line-shape prior")
    common(p)
    p.add_argument("--prior", required=True, choices=[k.value for k in PeakKind])
    p.add_argument("--manifest")
    p.add_argument("--side", choices=["a", "b"], default="a")
    p.add_argument("--input", help="fit a single spectrum file instead of a manifest")
    p.add_argument("--modality", default="other", choices=[m.value for m in Modality])
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("train", help="train the generative model from a manifest")
    common(p)
    p.add_argument("--prior", required=True, choices=[k.value for k in PeakKind])
    p.add_argument("--manifest", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--run-id", default="run")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("generate", help="generate modality-B spectra from a checkpoint")
    common(p)
    p.add_argument("--prior", required=True, choices=[k.value for k in PeakKind])
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=["train", "test", "all"], default="test")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("evaluate", help="score generated spectra against ground truth")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--generated-dir", required=True)
    p.add_argument("--split", choices=["train", "test", "all"], default="test")
    p.add_argument("--plots", type=int, default=4, help="number of overlay plots")
    p.add_argument("--classify", action="store_true")
    p.add_argument("--class-delimiter", default="__")
    p.add_argument("--rounds", type=int, default=10)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("analyze", help="compare latent traces of two runs")
    common(p)
    p.add_argument("--trace-a", required=True)
    p.add_argument("--trace-b", required=True)
    p.add_argument("--shuffles", type=int, default=1000)
    p.set_defaults(func=_cmd_analyze)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "fit" and not (args.manifest or args.input):
        parser.print_usage(sys.stderr)
        print("fit requires --manifest or --input", file=sys.stderr)
        return 1
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ParseError, SpectransferError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
