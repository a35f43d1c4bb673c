"""Recursive spectrum detector with per-layer analytic gradients.

Architecture (per image):

1. high-pass block: two spatial 3x3 convolutions (instance norm + leaky
   ReLU after each), then a per-channel magnitude spectrum, normalized as
   log(1 + m) followed by per-channel standardization, then two spectral
   3x3 convolutions (same norm/activation pattern);
2. a stack of fractal units: the feature spectrum is split into its four
   quadrants, each passes through its own 3x3 convolution, the four branch
   maps are fused by elementwise multiplication, a final convolution plus
   global average pooling turns the fused map into a level vector, and the
   *pre-convolution* quadrants are averaged into the next-level spectrum;
3. head: level vectors from every unit plus the pooled final spectrum are
   concatenated and passed through one hidden linear layer to a scalar logit.

With ``n_units = 0`` the pooled feature spectrum feeds the head directly,
which is the direct-spectrum baseline the fractal variants are compared
against.

Activations are kept channel-last (B, H, W, C) so convolution im2col
matrices stay contiguous; the spectrum stage transposes to channel-first
for the trailing-axes transform and back.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .fft import dft2
from .ops import (
    conv3x3_nhwc,
    conv3x3_nhwc_backward,
    instance_norm_nhwc,
    instance_norm_nhwc_backward,
    leaky_relu,
    leaky_relu_backward,
)

BRANCH_NAMES = ("q00", "q01", "q10", "q11")


@dataclass
class ModelConfig:
    """Detector hyperparameters (defaults match the reference setup)."""

    in_channels: int = 1
    channels: int = 32
    n_units: int = 2
    input_size: int = 64
    leaky_slope: float = 0.2
    head_hidden: int = 64
    norm_eps: float = 1e-5
    mag_eps: float = 1e-12
    dtype: str = "float32"

    def __post_init__(self):
        if not 0 <= self.n_units <= 4:
            raise ParameterError(f"n_units must be in 0..4, got {self.n_units}")
        if self.input_size % (1 << self.n_units):
            raise ParameterError(
                f"input_size {self.input_size} not divisible by 2^{self.n_units}"
            )
        if self.dtype not in ("float32", "float64"):
            raise ParameterError(f"dtype must be float32 or float64, got {self.dtype}")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    @property
    def feature_width(self) -> int:
        return self.channels * (self.n_units + 1)

    def to_dict(self) -> dict:
        return {
            "in_channels": self.in_channels,
            "channels": self.channels,
            "n_units": self.n_units,
            "input_size": self.input_size,
            "leaky_slope": self.leaky_slope,
            "head_hidden": self.head_hidden,
            "norm_eps": self.norm_eps,
            "mag_eps": self.mag_eps,
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(**data)


def _split_quadrants_nhwc(x: np.ndarray):
    h, w = x.shape[1:3]
    if h % 2 or w % 2:
        raise DimensionError(f"cannot split odd spatial extents {h}x{w}")
    hh, hw = h // 2, w // 2
    return (
        np.ascontiguousarray(x[:, :hh, :hw]),
        np.ascontiguousarray(x[:, :hh, hw:]),
        np.ascontiguousarray(x[:, hh:, :hw]),
        np.ascontiguousarray(x[:, hh:, hw:]),
    )


def _merge_quadrants_nhwc(blocks, shape):
    out = np.zeros(shape, dtype=blocks[0].dtype)
    hh, hw = shape[1] // 2, shape[2] // 2
    out[:, :hh, :hw] = blocks[0]
    out[:, :hh, hw:] = blocks[1]
    out[:, hh:, :hw] = blocks[2]
    out[:, hh:, hw:] = blocks[3]
    return out


class FractalCNN:
    """Parameter container plus hand-written forward/backward passes."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.params: dict = {}
        self._init_params(np.random.default_rng(seed))

    # -- construction -----------------------------------------------------

    def _conv_block_names(self):
        names = ["sp1", "sp2", "fq1", "fq2"]
        for n in range(self.config.n_units):
            names += [f"u{n}_{q}" for q in BRANCH_NAMES] + [f"u{n}_fuse"]
        return names

    def _init_params(self, rng: np.random.Generator):
        cfg = self.config
        gain = np.sqrt(2.0 / (1.0 + cfg.leaky_slope ** 2))
        dt = cfg.np_dtype

        def kaiming(shape, fan_in):
            bound = gain * np.sqrt(6.0 / fan_in)
            return rng.uniform(-bound, bound, size=shape).astype(dt)

        def add_conv(name, c_in, c_out, with_norm):
            self.params[f"{name}_w"] = kaiming((3, 3, c_in, c_out), 9 * c_in)
            if with_norm:
                # no conv bias: the following instance norm would cancel it
                self.params[f"{name}_g"] = np.ones(c_out, dtype=dt)
                self.params[f"{name}_beta"] = np.zeros(c_out, dtype=dt)
            else:
                self.params[f"{name}_b"] = np.zeros(c_out, dtype=dt)

        add_conv("sp1", cfg.in_channels, cfg.channels, True)
        add_conv("sp2", cfg.channels, cfg.channels, True)
        add_conv("fq1", cfg.channels, cfg.channels, True)
        add_conv("fq2", cfg.channels, cfg.channels, True)
        for n in range(cfg.n_units):
            for q in BRANCH_NAMES:
                add_conv(f"u{n}_{q}", cfg.channels, cfg.channels, False)
            add_conv(f"u{n}_fuse", cfg.channels, cfg.channels, False)
        self.params["head1_w"] = kaiming((cfg.feature_width, cfg.head_hidden), cfg.feature_width)
        self.params["head1_b"] = np.zeros(cfg.head_hidden, dtype=dt)
        self.params["head2_w"] = kaiming((cfg.head_hidden, 1), cfg.head_hidden)
        self.params["head2_b"] = np.zeros(1, dtype=dt)

    def param_names(self):
        return sorted(self.params)

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy_params(self) -> dict:
        return {k: v.copy() for k, v in self.params.items()}

    def load_params(self, params: dict) -> None:
        if sorted(params) != self.param_names():
            raise DimensionError("parameter sets do not match model configuration")
        for name, value in params.items():
            if value.shape != self.params[name].shape:
                raise DimensionError(f"parameter {name} shape {value.shape} unexpected")
            self.params[name] = np.asarray(value, dtype=self.config.np_dtype)

    # -- layer helpers ----------------------------------------------------

    def _conv_norm_act(self, x, name, cache, keep):
        """conv -> instance norm -> leaky ReLU.

        The activation comes last so pooled statistics of the block output
        stay input-dependent (a pooled normalized map would be constant).
        """
        p = self.params
        z, col = conv3x3_nhwc(x, p[f"{name}_w"], None)
        n, norm_cache = instance_norm_nhwc(z, p[f"{name}_g"], p[f"{name}_beta"], self.config.norm_eps)
        y = leaky_relu(n, self.config.leaky_slope)
        if keep:
            cache[name] = (col, n, norm_cache)
        return y

    def _conv_norm_act_backward(self, upstream, name, cache, grads, need_input=True):
        col, n, norm_cache = cache[name]
        dn = leaky_relu_backward(n, upstream, self.config.leaky_slope)
        dz, dg, dbeta = instance_norm_nhwc_backward(norm_cache, dn)
        dx, dw, _ = conv3x3_nhwc_backward(
            col, self.params[f"{name}_w"], dz, need_input_grad=need_input
        )
        grads[f"{name}_w"] = dw
        grads[f"{name}_g"] = dg
        grads[f"{name}_beta"] = dbeta
        return dx

    def _plain_conv(self, x, name, cache, keep):
        z, col = conv3x3_nhwc(x, self.params[f"{name}_w"], self.params[f"{name}_b"])
        if keep:
            cache[name] = col
        return z

    def _plain_conv_backward(self, upstream, name, cache, grads):
        dx, dw, db = conv3x3_nhwc_backward(cache[name], self.params[f"{name}_w"], upstream)
        grads[f"{name}_w"] = dw
        grads[f"{name}_b"] = db
        return dx

    # -- spectrum stage ---------------------------------------------------

    def _spectrum_normalize(self, x, cache, keep):
        """Channel-wise |DFT|, log scaling, and standardization.

        Input and output are channel-last; the transform itself runs on a
        channel-first copy.
        """
        eps = self.config.norm_eps
        t = np.ascontiguousarray(x.transpose(0, 3, 1, 2))  # (B,C,H,W)
        z = dft2(t)
        mag = np.abs(z)
        lg = np.log1p(mag)
        mu = lg.mean(axis=(2, 3), keepdims=True)
        var = lg.var(axis=(2, 3), keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        shat = (lg - mu) * inv
        out = np.ascontiguousarray(shat.transpose(0, 2, 3, 1)).astype(x.dtype, copy=False)
        if keep:
            cache["spectrum"] = (z, mag, shat, inv)
        return out

    def _spectrum_normalize_backward(self, upstream, cache):
        z, mag, shat, inv = cache["spectrum"]
        ds = np.ascontiguousarray(upstream.transpose(0, 3, 1, 2))
        mean_d = ds.mean(axis=(2, 3), keepdims=True)
        mean_ds = (ds * shat).mean(axis=(2, 3), keepdims=True)
        dlg = inv * (ds - mean_d - shat * mean_ds)
        dmag = dlg / (1.0 + mag)
        ratio = np.where(
            mag > self.config.mag_eps, np.conj(z) / np.maximum(mag, self.config.mag_eps), 0.0
        )
        dt = dft2(dmag * ratio).real
        return np.ascontiguousarray(dt.transpose(0, 2, 3, 1)).astype(upstream.dtype, copy=False)

    # -- full passes ------------------------------------------------------

    def forward(self, x: np.ndarray, keep_cache: bool = True):
        """Batched forward pass (B, H, W, C) -> logits (B,) plus cache."""
        cfg = self.config
        x = np.asarray(x, dtype=cfg.np_dtype)
        if x.ndim != 4 or x.shape[3] != cfg.in_channels:
            raise DimensionError(
                f"expected (B, H, W, {cfg.in_channels}) input, got {x.shape}"
            )
        if x.shape[1] != cfg.input_size or x.shape[2] != cfg.input_size:
            raise DimensionError(
                f"model wants {cfg.input_size}x{cfg.input_size} input, got "
                f"{x.shape[1]}x{x.shape[2]}"
            )
        cache: dict = {}

        h = self._conv_norm_act(x, "sp1", cache, keep_cache)
        h = self._conv_norm_act(h, "sp2", cache, keep_cache)
        h = self._spectrum_normalize(h, cache, keep_cache)
        h = self._conv_norm_act(h, "fq1", cache, keep_cache)
        h = self._conv_norm_act(h, "fq2", cache, keep_cache)

        level_vectors = []
        unit_caches = []
        for n in range(cfg.n_units):
            blocks = _split_quadrants_nhwc(h)
            branches = [
                self._plain_conv(blocks[i], f"u{n}_{BRANCH_NAMES[i]}", cache, keep_cache)
                for i in range(4)
            ]
            fused = (branches[0] * branches[1]) * (branches[2] * branches[3])
            fc = self._plain_conv(fused, f"u{n}_fuse", cache, keep_cache)
            level_vectors.append(fc.mean(axis=(1, 2)))
            h_next = ((blocks[0] + blocks[1]) + (blocks[2] + blocks[3])) / 4.0
            if keep_cache:
                unit_caches.append((h.shape, branches, fc.shape))
            h = h_next
        level_vectors.append(h.mean(axis=(1, 2)))

        feats = np.concatenate(level_vectors, axis=1)
        pre = feats @ self.params["head1_w"] + self.params["head1_b"]
        act = leaky_relu(pre, cfg.leaky_slope)
        logits = (act @ self.params["head2_w"] + self.params["head2_b"])[:, 0]
        if keep_cache:
            cache["units"] = unit_caches
            cache["final_shape"] = h.shape
            cache["head"] = (feats, pre, act)
        cache["features"] = feats
        return logits, cache

    def features(self, x: np.ndarray) -> np.ndarray:
        """Concatenated level vectors (B, channels * (n_units + 1)), no caching."""
        _, cache = self.forward(x, keep_cache=False)
        return cache["features"]

    def highpass_forward(self, x: np.ndarray) -> np.ndarray:
        """The artifact-strengthening front end alone: (B, H, W, C_in) ->
        level-zero feature spectrum (B, H, W, channels)."""
        x = np.asarray(x, dtype=self.config.np_dtype)
        cache: dict = {}
        h = self._conv_norm_act(x, "sp1", cache, False)
        h = self._conv_norm_act(h, "sp2", cache, False)
        h = self._spectrum_normalize(h, cache, False)
        h = self._conv_norm_act(h, "fq1", cache, False)
        return self._conv_norm_act(h, "fq2", cache, False)

    def fractal_unit_forward(self, h: np.ndarray, n: int):
        """One recursion step: level spectrum -> (level vector, next level).

        ``h`` is (B, H, W, channels); returns the pooled fused-branch vector
        (B, channels) and the quadrant average (B, H/2, W/2, channels).
        """
        if not 0 <= n < self.config.n_units:
            raise ParameterError(f"model has units 0..{self.config.n_units - 1}, got {n}")
        cache: dict = {}
        blocks = _split_quadrants_nhwc(np.asarray(h, dtype=self.config.np_dtype))
        branches = [
            self._plain_conv(blocks[i], f"u{n}_{BRANCH_NAMES[i]}", cache, False)
            for i in range(4)
        ]
        fused = (branches[0] * branches[1]) * (branches[2] * branches[3])
        fc = self._plain_conv(fused, f"u{n}_fuse", cache, False)
        level_vector = fc.mean(axis=(1, 2))
        h_next = ((blocks[0] + blocks[1]) + (blocks[2] + blocks[3])) / 4.0
        return level_vector, h_next

    def backward(self, cache: dict, dlogits: np.ndarray) -> dict:
        """Parameter gradients for the cached forward pass."""
        cfg = self.config
        grads: dict = {}
        feats, pre, act = cache["head"]

        dact = dlogits[:, None] @ self.params["head2_w"].T
        grads["head2_w"] = act.T @ dlogits[:, None]
        grads["head2_b"] = np.array([dlogits.sum()], dtype=cfg.np_dtype)
        dpre = leaky_relu_backward(pre, dact, cfg.leaky_slope)
        grads["head1_w"] = feats.T @ dpre
        grads["head1_b"] = dpre.sum(axis=0)
        dfeats = dpre @ self.params["head1_w"].T

        c = cfg.channels
        dvectors = [
            dfeats[:, i * c:(i + 1) * c] for i in range(cfg.n_units + 1)
        ]

        # pooled final level
        bsz, fh, fw, _ = cache["final_shape"]
        dh = np.broadcast_to(
            dvectors[-1][:, None, None, :] / (fh * fw), cache["final_shape"]
        ).astype(cfg.np_dtype)

        for n in range(cfg.n_units - 1, -1, -1):
            h_shape, branches, fc_shape = cache["units"][n]
            dfc = np.broadcast_to(
                dvectors[n][:, None, None, :] / (fc_shape[1] * fc_shape[2]), fc_shape
            ).astype(cfg.np_dtype)
            dfused = self._plain_conv_backward(dfc, f"u{n}_fuse", cache, grads)
            b0, b1, b2, b3 = branches
            dbranches = [
                dfused * (b1 * (b2 * b3)),
                dfused * (b0 * (b2 * b3)),
                dfused * ((b0 * b1) * b3),
                dfused * ((b0 * b1) * b2),
            ]
            dblocks = [
                self._plain_conv_backward(dbranches[i], f"u{n}_{BRANCH_NAMES[i]}", cache, grads)
                for i in range(4)
            ]
            # next-level average routes dh/4 back into each pre-conv quadrant
            dblocks = [dblocks[i] + dh / 4.0 for i in range(4)]
            dh = _merge_quadrants_nhwc(dblocks, h_shape)

        dh = self._conv_norm_act_backward(dh, "fq2", cache, grads)
        dh = self._conv_norm_act_backward(dh, "fq1", cache, grads)
        dh = self._spectrum_normalize_backward(dh, cache)
        dh = self._conv_norm_act_backward(dh, "sp2", cache, grads)
        self._conv_norm_act_backward(dh, "sp1", cache, grads, need_input=False)
        return grads

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Logits without gradient bookkeeping."""
        logits, _ = self.forward(x, keep_cache=False)
        return logits


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------

def bce_with_logits(logits: np.ndarray, labels: np.ndarray):
    """Numerically stable binary cross-entropy on sigmoid logits.

    Returns (mean loss, dloss/dlogits).
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    sig = 1.0 / (1.0 + np.exp(-z))
    grad = (sig - y) / z.size
    return float(loss.mean()), grad.astype(logits.dtype, copy=False)
