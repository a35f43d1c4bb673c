"""Adam training loop, evaluation tables, and the unit-count sweep.

Training is fully deterministic for a fixed seed: the validation split, the
per-epoch shuffle, the augmentation draws, and the parameter init all come
from generators derived from ``TrainConfig.seed``.  Early stopping keeps the
epoch with the lowest validation loss and halts after ``patience`` epochs
without improvement.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .checkpoint import ModelCheckpoint
from .errors import DataError, NumericError, ParameterError
from .fileio import Manifest, read_image
from .forensics import AugmentPolicy, DistortionConfig, center_crop_pad, draw_augment_plan, apply_augment_plan, noise_residual
from .model import FractalCNN, ModelConfig, bce_with_logits
from .parallel import parallel_map


@dataclass
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 50
    val_fraction: float = 0.1
    patience: int = 2
    seed: int = 0
    residual_kernel: int = 7
    augment: AugmentPolicy | None = None

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise ParameterError(f"val_fraction must be in (0, 1), got {self.val_fraction}")
        if self.patience < 1:
            raise ParameterError(f"patience must be >= 1, got {self.patience}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ParameterError("batch_size and max_epochs must be positive")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float

    @staticmethod
    def header():
        return ["epoch", "train_loss", "train_acc", "val_loss", "val_acc"]

    def row(self):
        return [
            self.epoch,
            f"{self.train_loss:.6f}",
            f"{self.train_acc:.4f}",
            f"{self.val_loss:.6f}",
            f"{self.val_acc:.4f}",
        ]


# ---------------------------------------------------------------------------
# Dataset plumbing
# ---------------------------------------------------------------------------

def _load_raw(manifest: Manifest):
    """Read every manifest image; label 1 = generated."""
    if len(manifest) == 0:
        raise DataError("manifest is empty")
    images = parallel_map(lambda e: read_image(manifest.resolve(e)), manifest.entries)
    labels = np.array([1.0 if e.label == "generated" else 0.0 for e in manifest.entries])
    return images, labels


def _prepare(image, input_size, residual_kernel):
    """Shared eval/val preprocessing: crop/pad then noise residual."""
    return noise_residual(center_crop_pad(image, input_size), residual_kernel)


def train(
    manifest: Manifest,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
):
    """Fit a detector on a manifest. Returns (ModelCheckpoint, history)."""
    images, labels = _load_raw(manifest)
    if len(set(labels.tolist())) < 2:
        raise DataError("training manifest needs both real and generated images")
    if train_cfg.augment is not None and train_cfg.augment.crop != model_cfg.input_size:
        raise ParameterError(
            f"augment crop {train_cfg.augment.crop} != model input {model_cfg.input_size}"
        )

    split_rng = np.random.default_rng((train_cfg.seed, 0x5711))
    order = split_rng.permutation(len(images))
    n_val = max(1, int(round(train_cfg.val_fraction * len(images))))
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise DataError("validation split consumed every image")

    size = model_cfg.input_size
    kernel = train_cfg.residual_kernel
    val_x = np.stack([_prepare(images[i], size, kernel) for i in val_idx])[..., None]
    val_y = labels[val_idx]

    model = FractalCNN(model_cfg, seed=train_cfg.seed)
    adam_m = {k: np.zeros_like(v) for k, v in model.params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in model.params.items()}
    steps = 0

    epoch_rng = np.random.default_rng((train_cfg.seed, 0xE90C))
    history: list = []
    best_loss = np.inf
    best_params = model.copy_params()
    best_epoch = 0
    stale = 0

    for epoch in range(1, train_cfg.max_epochs + 1):
        perm = epoch_rng.permutation(train_idx)
        epoch_loss = 0.0
        epoch_hits = 0
        for start in range(0, len(perm), train_cfg.batch_size):
            batch_idx = perm[start:start + train_cfg.batch_size]
            batch = []
            for i in batch_idx:
                img = images[i]
                if train_cfg.augment is not None:
                    plan = draw_augment_plan(train_cfg.augment, epoch_rng)
                    img = apply_augment_plan(img, plan, train_cfg.augment)
                    img = noise_residual(img, kernel)
                else:
                    img = _prepare(img, size, kernel)
                batch.append(img)
            x = np.stack(batch)[..., None]
            y = labels[batch_idx]

            logits, cache = model.forward(x)
            loss, dlogits = bce_with_logits(logits, y)
            if not np.isfinite(loss):
                raise NumericError(f"training loss diverged at epoch {epoch}")
            grads = model.backward(cache, dlogits)

            steps += 1
            lr_t = train_cfg.lr * (
                np.sqrt(1.0 - train_cfg.beta2 ** steps) / (1.0 - train_cfg.beta1 ** steps)
            )
            for name, g in grads.items():
                adam_m[name] = train_cfg.beta1 * adam_m[name] + (1 - train_cfg.beta1) * g
                adam_v[name] = train_cfg.beta2 * adam_v[name] + (1 - train_cfg.beta2) * g * g
                model.params[name] -= (
                    lr_t * adam_m[name] / (np.sqrt(adam_v[name]) + train_cfg.adam_eps)
                ).astype(model.params[name].dtype)

            epoch_loss += loss * len(batch_idx)
            epoch_hits += int(np.sum((logits > 0) == (y > 0.5)))

        val_logits = _predict_batched(model, val_x, train_cfg.batch_size)
        val_loss, _ = bce_with_logits(val_logits, val_y)
        if not np.isfinite(val_loss):
            raise NumericError(f"validation loss diverged at epoch {epoch}")
        stats = EpochStats(
            epoch=epoch,
            train_loss=epoch_loss / len(perm),
            train_acc=epoch_hits / len(perm),
            val_loss=val_loss,
            val_acc=float(np.mean((val_logits > 0) == (val_y > 0.5))),
        )
        history.append(stats)

        if val_loss < best_loss:
            best_loss = val_loss
            best_params = model.copy_params()
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= train_cfg.patience:
                break

    model.load_params(best_params)
    checkpoint = ModelCheckpoint(
        config=model_cfg,
        params=model.copy_params(),
        metadata={
            "epoch": best_epoch,
            "seed": train_cfg.seed,
            "val_loss": float(best_loss),
            "epochs_run": len(history),
            "residual_kernel": train_cfg.residual_kernel,
        },
    )
    return checkpoint, history


def _predict_batched(model: FractalCNN, x: np.ndarray, batch_size: int) -> np.ndarray:
    out = []
    for start in range(0, len(x), batch_size):
        out.append(model.predict(x[start:start + batch_size]))
    return np.concatenate(out) if out else np.zeros(0)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalResult:
    distortion: str
    per_pipeline: dict
    overall: float
    n_images: int

    def rows(self):
        rows = [[name, f"{acc:.4f}"] for name, acc in self.per_pipeline.items()]
        rows.append(["overall", f"{self.overall:.4f}"])
        return rows


def evaluate(
    checkpoint: ModelCheckpoint,
    manifest: Manifest,
    distortion: DistortionConfig | None = None,
    batch_size: int = 32,
) -> EvalResult:
    """Accuracy at threshold 0.5, per generator pipeline and overall.

    A pipeline's accuracy is measured over its generated images plus every
    real image in the manifest.  Entries are processed in path order, so the
    result is independent of manifest ordering.  The distortion (if any) is
    applied before crop/pad and residual extraction.
    """
    if len(manifest) == 0:
        raise DataError("evaluation manifest is empty")
    distortion = distortion or DistortionConfig("none")
    model = checkpoint.build_model()
    size = checkpoint.config.input_size
    kernel = checkpoint.metadata.get("residual_kernel", 7)

    entries = sorted(manifest.entries, key=lambda e: e.path)

    def prep(entry):
        img = read_image(manifest.resolve(entry))
        img = distortion.apply(img)
        return _prepare(img, size, kernel)

    prepped = parallel_map(prep, entries)
    x = np.stack(prepped)[..., None]
    logits = _predict_batched(model, x, batch_size)
    predicted = logits > 0
    actual = np.array([e.label == "generated" for e in entries])
    correct = predicted == actual

    real_mask = ~actual
    per_pipeline = {}
    for pipe in sorted({e.pipeline for e in entries if e.label == "generated"}):
        pipe_mask = np.array([e.pipeline == pipe and e.label == "generated" for e in entries])
        sel = pipe_mask | real_mask
        per_pipeline[pipe] = float(np.mean(correct[sel]))
    return EvalResult(
        distortion=distortion.label,
        per_pipeline=per_pipeline,
        overall=float(np.mean(correct)),
        n_images=len(entries),
    )


def evaluate_grid(checkpoint, manifest, distortions) -> list:
    """One EvalResult per distortion configuration."""
    return [evaluate(checkpoint, manifest, d) for d in distortions]


def ablate(
    train_manifest: Manifest,
    test_manifest: Manifest,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    n_list=(0, 1, 2, 3, 4),
    distortion: DistortionConfig | None = None,
):
    """Train one model per unit count on identical data and seed.

    Returns (results, checkpoints): ``results`` maps n -> EvalResult on the
    test manifest, so accuracy differences are attributable to the
    architecture alone.
    """
    results = {}
    checkpoints = {}
    for n in n_list:
        cfg_n = replace(model_cfg, n_units=n)
        ckpt, _history = train(train_manifest, cfg_n, train_cfg)
        results[n] = evaluate(ckpt, test_manifest, distortion)
        checkpoints[n] = ckpt
    return results, checkpoints


def ablation_table(results: dict):
    """Rows of pipeline x N accuracy, mirroring the unit-count sweep grid."""
    n_values = sorted(results)
    pipelines = sorted({p for r in results.values() for p in r.per_pipeline})
    header = ["pipeline"] + [("N=0*" if n == 0 else f"N={n}") for n in n_values]
    rows = []
    for pipe in pipelines:
        rows.append([pipe] + [f"{results[n].per_pipeline.get(pipe, float('nan')):.4f}" for n in n_values])
    rows.append(["overall"] + [f"{results[n].overall:.4f}" for n in n_values])
    return header, rows


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def auc_score(positive_scores, negative_scores) -> float:
    """Rank-based AUC: probability a positive outranks a negative (ties 0.5)."""
    pos = np.asarray(positive_scores, dtype=np.float64)
    neg = np.asarray(negative_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise DataError("AUC needs both positive and negative scores")
    pooled = np.concatenate([pos, neg])
    order = np.argsort(pooled, kind="mergesort")
    ranks = np.empty_like(pooled)
    ranks[order] = np.arange(1, pooled.size + 1)
    # average ranks over ties
    sorted_vals = pooled[order]
    i = 0
    while i < pooled.size:
        j = i
        while j + 1 < pooled.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        if j > i:
            ranks[order[i:j + 1]] = (i + 1 + j + 1) / 2.0
        i = j + 1
    r_pos = ranks[: pos.size].sum()
    return float((r_pos - pos.size * (pos.size + 1) / 2.0) / (pos.size * neg.size))
