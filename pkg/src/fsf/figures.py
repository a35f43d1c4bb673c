"""Figure and report emission: formation grids, average spectra, feature dumps.

Everything here writes deterministic artifacts (16-bit graymaps for spectrum
views, CSV tables with aligned-text mirrors) so repeated runs with the same
seed produce identical trees.
"""

from __future__ import annotations

import csv
import os

import numpy as np

from .checkpoint import ModelCheckpoint
from .errors import DataError
from .fileio import Manifest, read_image, write_pgm, write_table
from .forensics import center_crop_pad, noise_residual
from .parallel import parallel_map
from .simulate import (
    PipelineConfig,
    embed_spectral_watermark,
    letter_a_glyph,
    synth_real,
    upsample_nearest,
    upsample_tconv,
    upsample_zero,
)
from .spectral import (
    average_spectrum,
    export_view,
    quadrant_correlation,
    self_similarity_features,
    spectrum_of,
)

FORMATION_KINDS = ("zero_insert", "nearest", "tconv_conv")


def formation_grid(out_dir, seed: int, base_size: int = 28, stages: int = 3) -> list:
    """Emit the spectrum-replication grid: one row per upsampling kind,
    columns are the origin spectrum plus each upsampling stage.

    The origin image carries a letter-'A' watermark in its spectrum; the
    glyph replicates with every 2x stage.  Returns the caption rows
    (file, pipeline, stage, quadrant_correlation).
    """
    os.makedirs(out_dir, exist_ok=True)
    base = synth_real(seed, base_size)
    glyph = letter_a_glyph(base_size, base_size // 2 + 1)
    marked = embed_spectral_watermark(base, glyph)

    rows = []
    for kind in FORMATION_KINDS:
        pipe = PipelineConfig(kind, stages, seed, base_size)
        image = marked
        for stage in range(stages + 1):
            if stage > 0:
                if kind == "zero_insert":
                    image = upsample_zero(image)
                elif kind == "nearest":
                    image = upsample_nearest(image)
                else:
                    image = upsample_tconv(image, pipe.stage(stage - 1), pipe.nonlinearity)
            spectrum = spectrum_of(image)
            corr = quadrant_correlation(spectrum) if stage > 0 else float("nan")
            filename = f"{kind}_stage{stage}.pgm"
            write_pgm(os.path.join(out_dir, filename), export_view(spectrum), bits=16)
            rows.append([filename, kind, stage, "" if stage == 0 else f"{corr:.4f}"])
    write_table(os.path.join(out_dir, "captions.csv"),
                ["file", "pipeline", "stage", "quadrant_correlation"], rows)
    return rows


def average_spectrum_report(manifest: Manifest, out_dir, residual: bool = False) -> list:
    """Per-group (label, pipeline) average spectra as 16-bit graymaps.

    Returns report rows (group, images, quadrant_correlation); also written
    as report.csv in ``out_dir``.
    """
    if len(manifest) == 0:
        raise DataError("manifest is empty")
    os.makedirs(out_dir, exist_ok=True)
    groups: dict = {}
    for entry in manifest.entries:
        groups.setdefault(entry.pipeline, []).append(entry)

    residual_fn = noise_residual if residual else None
    rows = []
    for name in sorted(groups):
        entries = groups[name]
        images = parallel_map(lambda e: read_image(manifest.resolve(e)), entries)
        avg = average_spectrum(images, residual_fn=residual_fn)
        tag = "residual" if residual else "raw"
        filename = f"avg_{tag}_{name}.pgm"
        write_pgm(os.path.join(out_dir, filename), export_view(avg), bits=16)
        rows.append([name, len(entries), f"{quadrant_correlation(avg):.4f}", filename])
    write_table(os.path.join(out_dir, "report.csv"),
                ["group", "images", "quadrant_correlation", "file"], rows)
    return rows


def features_export(
    manifest: Manifest,
    out_path,
    levels: int = 2,
    measure: str = "logmean",
    residual: bool = False,
    checkpoint: ModelCheckpoint | None = None,
) -> int:
    """Per-image self-similarity statistics (and learned vectors) as CSV.

    Hand-crafted columns are the per-level fused-quadrant statistics of the
    image spectrum (of the noise residual when ``residual`` is set).  With a
    checkpoint, the model's concatenated level vectors are appended.
    Returns the number of rows written.
    """
    if len(manifest) == 0:
        raise DataError("manifest is empty")
    model = checkpoint.build_model() if checkpoint is not None else None

    header = ["path", "label", "pipeline"]
    header += [f"selfsim_l{i}" for i in range(levels + 1)]
    if model is not None:
        header += [f"svec_{i}" for i in range(checkpoint.config.feature_width)]

    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        count = 0
        for entry in manifest.entries:
            image = read_image(manifest.resolve(entry))
            target = noise_residual(image) if residual else image
            stats = self_similarity_features(spectrum_of(target), levels, measure)
            row = [entry.path, entry.label, entry.pipeline]
            row += [f"{s:.8g}" for s in stats]
            if model is not None:
                prepped = noise_residual(
                    center_crop_pad(image, checkpoint.config.input_size),
                    checkpoint.metadata.get("residual_kernel", 7),
                )
                vec = model.features(prepped[None, :, :, None])[0]
                row += [f"{v:.8g}" for v in vec]
            writer.writerow(row)
            count += 1
    return count
