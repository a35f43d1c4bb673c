"""Command-line surface: reproducible experiments from a JSON config.

Subcommands:

    simulate      build the synthetic corpus described by the config
    demo-fractal  emit the watermark replication grid (no config needed)
    spectrum      average-spectrum figures for a manifest
    features      per-image self-similarity statistics / learned vectors
    train         fit a detector on the corpus train manifest
    eval          accuracy grid (pipelines x distortions) on the test manifest
    ablate        one model per fractal-unit count, same data and seed

Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import (
    ConfigError,
    DataError,
    DimensionError,
    FormatError,
    FsfError,
    NumericError,
    ParameterError,
)
from .figures import average_spectrum_report, features_export, formation_grid
from .fileio import read_manifest, write_table
from .forensics import AugmentPolicy, DistortionConfig
from .model import ModelConfig
from .simulate import CorpusSpec, PipelineConfig, build_corpus
from .training import EpochStats, TrainConfig, ablate, ablation_table, evaluate, train


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------

_TOP_KEYS = {"seed", "out_dir", "corpus", "model", "train", "distortions", "ablate_n"}
_CORPUS_KEYS = {
    "dir", "size", "spectral_exponent", "sensor_noise", "pipelines", "holdout",
    "n_train_real", "n_train_fake", "n_test_real", "n_test_fake",
}
_PIPELINE_KEYS = {"kind", "depth", "seed", "base_size", "nonlinearity", "kernel_scope", "name"}
_MODEL_KEYS = {
    "in_channels", "channels", "n_units", "input_size", "leaky_slope",
    "head_hidden", "norm_eps", "mag_eps", "dtype",
}
_TRAIN_KEYS = {
    "lr", "beta1", "beta2", "adam_eps", "batch_size", "max_epochs",
    "val_fraction", "patience", "seed", "residual_kernel", "augment",
}


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


@dataclass
class ExperimentConfig:
    seed: int
    out_dir: str
    corpus_dir: str
    corpus: CorpusSpec | None
    model: ModelConfig
    train: TrainConfig
    distortions: list
    ablate_n: list
    digest: str


def parse_distortion(label: str) -> DistortionConfig:
    if label == "none":
        return DistortionConfig("none")
    if label.startswith("jpeg"):
        return DistortionConfig("jpeg", jpeg_quality=int(label[4:]))
    if label.startswith("down"):
        return DistortionConfig("downsample", down_ratio=float(label[4:]))
    if label.startswith("blur"):
        return DistortionConfig("gaussian_blur", blur_sigma=float(label[4:]))
    raise ConfigError(f"cannot parse distortion {label!r}")


def load_config(path: str, seed_override=None, out_override=None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
        data = json.loads(raw)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(data, _TOP_KEYS, "config root")

    for key in ("seed", "out_dir"):
        if key not in data:
            raise ConfigError(f"config is missing required key {key!r}")
    seed = int(seed_override if seed_override is not None else data["seed"])
    out_dir = str(out_override if out_override is not None else data["out_dir"])

    corpus = None
    corpus_dir = os.path.join(out_dir, "corpus")
    if "corpus" in data:
        section = data["corpus"]
        _check_keys(section, _CORPUS_KEYS, "corpus")
        corpus_dir = section.get("dir", corpus_dir)
        pipelines = []
        for i, p in enumerate(section.get("pipelines", [])):
            _check_keys(p, _PIPELINE_KEYS, f"corpus.pipelines[{i}]")
            if "seed" not in p:
                raise ConfigError(f"corpus.pipelines[{i}] is missing an explicit seed")
            try:
                pipelines.append(PipelineConfig(**p))
            except (ParameterError, TypeError) as exc:
                raise ConfigError(f"corpus.pipelines[{i}]: {exc}") from exc
        exponent = section.get("spectral_exponent", 1.0)
        if isinstance(exponent, list):
            exponent = tuple(exponent)
        try:
            corpus = CorpusSpec(
                size=section["size"],
                seed=seed,
                pipelines=pipelines,
                n_train_real=section.get("n_train_real", 0),
                n_train_fake=section.get("n_train_fake", 0),
                n_test_real=section.get("n_test_real", 0),
                n_test_fake=section.get("n_test_fake", 0),
                holdout=tuple(section.get("holdout", ())),
                spectral_exponent=exponent,
                sensor_noise=section.get("sensor_noise", 0.0),
            )
        except (KeyError, ParameterError) as exc:
            raise ConfigError(f"corpus section: {exc}") from exc

    model_section = dict(data.get("model", {}))
    _check_keys(model_section, _MODEL_KEYS, "model")
    try:
        model = ModelConfig(**model_section)
    except ParameterError as exc:
        raise ConfigError(f"model section: {exc}") from exc

    train_section = dict(data.get("train", {}))
    _check_keys(train_section, _TRAIN_KEYS, "train")
    if "train" in data and "seed" not in train_section:
        raise ConfigError("train section is missing an explicit seed")
    augment = train_section.pop("augment", False)
    try:
        train_cfg = TrainConfig(**train_section)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"train section: {exc}") from exc
    if augment:
        train_cfg.augment = AugmentPolicy(crop=model.input_size)

    distortions = [parse_distortion(d) for d in data.get("distortions", ["none"])]
    ablate_n = list(data.get("ablate_n", [0, 1, 2, 3, 4]))
    for n in ablate_n:
        if not 0 <= int(n) <= 4:
            raise ConfigError(f"ablate_n entries must be in 0..4, got {n}")

    digest = hashlib.sha256(raw.encode("utf-8")).hexdigest()
    return ExperimentConfig(
        seed=seed,
        out_dir=out_dir,
        corpus_dir=corpus_dir,
        corpus=corpus,
        model=model,
        train=train_cfg,
        distortions=distortions,
        ablate_n=ablate_n,
        digest=digest,
    )


def write_run_meta(out_dir: str, command: str, seed, digest: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    meta = {
        "command": command,
        "config_sha256": digest,
        "seed": seed,
        "versions": {"fsf": __version__, "numpy": np.__version__},
    }
    with open(os.path.join(out_dir, "run_meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.seed, None)
    if cfg.corpus is None:
        raise ConfigError("simulate needs a corpus section in the config")
    corpus_dir = args.out or cfg.corpus_dir
    manifests = build_corpus(cfg.corpus, corpus_dir)
    write_run_meta(corpus_dir, "simulate", cfg.seed, cfg.digest)
    for split, manifest in manifests.items():
        counts: dict = {}
        for entry in manifest.entries:
            counts[entry.pipeline] = counts.get(entry.pipeline, 0) + 1
        listing = ", ".join(f"{k}={v}" for k, v in sorted(counts.items()))
        print(f"{split}: {len(manifest)} images ({listing})")
    return 0


def cmd_demo_fractal(args) -> int:
    out_dir = args.out or "formation_grid"
    rows = formation_grid(out_dir, args.seed if args.seed is not None else 0,
                          base_size=args.base_size, stages=args.stages)
    write_run_meta(out_dir, "demo-fractal", args.seed or 0, "none")
    for row in rows:
        print(",".join(str(c) for c in row))
    return 0


def cmd_spectrum(args) -> int:
    manifest = read_manifest(args.manifest)
    out_dir = args.out or "spectra"
    rows = average_spectrum_report(manifest, out_dir, residual=args.residual)
    write_run_meta(out_dir, "spectrum", None, "none")
    for row in rows:
        print(",".join(str(c) for c in row))
    return 0


def cmd_features(args) -> int:
    manifest = read_manifest(args.manifest)
    checkpoint = load_checkpoint(args.checkpoint) if args.checkpoint else None
    count = features_export(
        manifest,
        args.out or "features.csv",
        levels=args.levels,
        measure=args.measure,
        residual=args.residual,
        checkpoint=checkpoint,
    )
    print(f"wrote {count} feature rows")
    return 0


def _manifest_path(cfg: ExperimentConfig, split: str) -> str:
    return os.path.join(cfg.corpus_dir, f"manifest_{split}.csv")


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.seed, args.out)
    manifest = read_manifest(_manifest_path(cfg, "train"))
    checkpoint, history = train(manifest, cfg.model, cfg.train)
    os.makedirs(cfg.out_dir, exist_ok=True)
    ckpt_path = os.path.join(cfg.out_dir, "checkpoint.ckpt")
    save_checkpoint(ckpt_path, checkpoint)
    write_table(
        os.path.join(cfg.out_dir, "history.csv"),
        EpochStats.header(),
        [s.row() for s in history],
    )
    write_run_meta(cfg.out_dir, "train", cfg.train.seed, cfg.digest)
    print(
        f"trained {len(history)} epochs; best epoch {checkpoint.metadata['epoch']} "
        f"(val_loss {checkpoint.metadata['val_loss']:.6f}); saved {ckpt_path}"
    )
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config, args.seed, args.out)
    manifest = read_manifest(_manifest_path(cfg, "test"))
    ckpt_path = args.checkpoint or os.path.join(cfg.out_dir, "checkpoint.ckpt")
    checkpoint = load_checkpoint(ckpt_path)
    results = [evaluate(checkpoint, manifest, d) for d in cfg.distortions]

    pipelines = sorted({p for r in results for p in r.per_pipeline})
    header = ["pipeline"] + [r.distortion for r in results]
    rows = [
        [pipe] + [f"{r.per_pipeline[pipe]:.4f}" for r in results] for pipe in pipelines
    ]
    rows.append(["overall"] + [f"{r.overall:.4f}" for r in results])
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_table(os.path.join(cfg.out_dir, "eval_grid.csv"), header, rows)
    write_run_meta(cfg.out_dir, "eval", cfg.seed, cfg.digest)
    from .fileio import format_table

    print(format_table(header, rows), end="")
    return 0


def cmd_ablate(args) -> int:
    cfg = load_config(args.config, args.seed, args.out)
    train_manifest = read_manifest(_manifest_path(cfg, "train"))
    test_manifest = read_manifest(_manifest_path(cfg, "test"))
    results, checkpoints = ablate(
        train_manifest, test_manifest, cfg.model, cfg.train, n_list=cfg.ablate_n
    )
    header, rows = ablation_table(results)
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_table(os.path.join(cfg.out_dir, "ablation.csv"), header, rows)
    for n, ckpt in checkpoints.items():
        save_checkpoint(os.path.join(cfg.out_dir, f"checkpoint_n{n}.ckpt"), ckpt)
    write_run_meta(cfg.out_dir, "ablate", cfg.train.seed, cfg.digest)
    from .fileio import format_table

    print(format_table(header, rows), end="")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsf",
        description="Spectral self-similarity forensics: simulate, analyze, train, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="experiment config (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")

    p = sub.add_parser("simulate", help="build the synthetic corpus")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("demo-fractal", help="emit the spectrum replication grid")
    common(p, config_required=False)
    p.add_argument("--base-size", type=int, default=28)
    p.add_argument("--stages", type=int, default=3)
    p.set_defaults(func=cmd_demo_fractal)

    p = sub.add_parser("spectrum", help="average-spectrum figures for a manifest")
    common(p, config_required=False)
    p.add_argument("--manifest", required=True)
    p.add_argument("--residual", action="store_true", help="average residual spectra")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("features", help="export self-similarity features as CSV")
    common(p, config_required=False)
    p.add_argument("--manifest", required=True)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--measure", choices=("mean", "logmean"), default="logmean")
    p.add_argument("--residual", action="store_true")
    p.add_argument("--checkpoint", default=None, help="also export learned level vectors")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="train the detector")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy grid on the test manifest")
    common(p)
    p.add_argument("--checkpoint", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="sweep the fractal-unit count")
    common(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError, DimensionError) as exc:
        print(f"fsf: config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FormatError, OSError) as exc:
        print(f"fsf: data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"fsf: numeric error: {exc}", file=sys.stderr)
        return 4
    except FsfError as exc:  # any future toolkit error defaults to config-ish
        print(f"fsf: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
