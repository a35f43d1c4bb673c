"""Deterministic numeric kernels: convolution, filtering, activations, norms.

Two styles of entry point live here:

* channel-first functions (``conv2d``, ``instance_norm``, ...) that follow the
  single-image C x H x W contracts used by the simulator and feature code;
* channel-last ``*_nhwc`` cores operating on batches (B, H, W, C), which the
  detector uses directly because the 9*C im2col matrix stays contiguous in
  that layout.

All backward functions return analytic gradients; there is no autodiff graph.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, ParameterError


# ---------------------------------------------------------------------------
# 3x3 convolution (stride 1, zero padding 1)
# ---------------------------------------------------------------------------

def conv3x3_nhwc(x: np.ndarray, weights: np.ndarray, bias=None):
    """Batched 3x3 cross-correlation.

    x: (B, H, W, C); weights: (3, 3, C, O); bias: (O,) or None.
    Returns (out, col) where ``col`` is the (B*H*W, 9*C) im2col matrix kept
    for the backward pass.
    """
    b, h, w, c = x.shape
    o = weights.shape[3]
    if weights.shape[:3] != (3, 3, c):
        raise DimensionError(
            f"kernel shape {weights.shape} does not match {c} input channels"
        )
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))  # (B,H,W,C,3,3)
    col = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(b * h * w, 9 * c)
    out = col @ weights.reshape(9 * c, o)
    if bias is not None:
        out += bias
    return out.reshape(b, h, w, o), col


def conv3x3_nhwc_backward(col: np.ndarray, weights: np.ndarray, upstream: np.ndarray,
                          need_input_grad: bool = True):
    """Gradients of conv3x3_nhwc. Returns (grad_input, grad_weights, grad_bias).

    ``need_input_grad=False`` skips the input gradient (first-layer case)
    and returns None in its place.
    """
    b, h, w, o = upstream.shape
    c = weights.shape[2]
    dflat = upstream.reshape(b * h * w, o)
    grad_w = (col.T @ dflat).reshape(3, 3, c, o)
    grad_b = dflat.sum(axis=0)
    if not need_input_grad:
        return None, grad_w, grad_b
    # grad wrt input = correlation of upstream with spatially flipped,
    # channel-swapped kernels; same padding geometry.
    wflip = np.ascontiguousarray(weights[::-1, ::-1].transpose(0, 1, 3, 2))
    grad_x, _ = conv3x3_nhwc(upstream, wflip, None)
    return grad_x, grad_w, grad_b


def conv2d(x: np.ndarray, kernels: np.ndarray, bias=None) -> np.ndarray:
    """3x3 cross-correlation on a C x H x W image, zero padding 1, stride 1.

    kernels: (O, C, 3, 3); bias: (O,) or None.  Output is O x H x W.
    """
    x = np.asarray(x)
    kernels = np.asarray(kernels)
    if x.ndim != 3:
        raise DimensionError(f"conv2d expects C x H x W input, got {x.shape}")
    if kernels.ndim != 4 or kernels.shape[2:] != (3, 3):
        raise DimensionError(f"conv2d expects O x C x 3 x 3 kernels, got {kernels.shape}")
    if kernels.shape[1] != x.shape[0]:
        raise DimensionError(
            f"kernel channels {kernels.shape[1]} != input channels {x.shape[0]}"
        )
    xh = np.ascontiguousarray(x.transpose(1, 2, 0))[None]
    wh = np.ascontiguousarray(kernels.transpose(2, 3, 1, 0))
    out, _ = conv3x3_nhwc(xh, wh, None if bias is None else np.asarray(bias))
    return np.ascontiguousarray(out[0].transpose(2, 0, 1))


def conv2d_backward(x: np.ndarray, kernels: np.ndarray, upstream: np.ndarray):
    """Gradients of the conv2d contract: (grad_input, grad_kernels, grad_bias)."""
    x = np.asarray(x)
    kernels = np.asarray(kernels)
    upstream = np.asarray(upstream)
    if upstream.shape != (kernels.shape[0],) + x.shape[1:]:
        raise DimensionError(
            f"upstream shape {upstream.shape} does not match output "
            f"({kernels.shape[0]},{x.shape[1]},{x.shape[2]})"
        )
    xh = np.ascontiguousarray(x.transpose(1, 2, 0))[None]
    wh = np.ascontiguousarray(kernels.transpose(2, 3, 1, 0))
    _, col = conv3x3_nhwc(xh, wh, None)
    uh = np.ascontiguousarray(upstream.transpose(1, 2, 0))[None]
    gx, gw, gb = conv3x3_nhwc_backward(col, wh, uh)
    return (
        np.ascontiguousarray(gx[0].transpose(2, 0, 1)),
        np.ascontiguousarray(gw.transpose(3, 2, 0, 1)),
        gb,
    )


# ---------------------------------------------------------------------------
# 4x4 stride-2 transposed convolution (simulator use; no gradient needed)
# ---------------------------------------------------------------------------

def transposed_conv2d(x: np.ndarray, kernels: np.ndarray, stride: int = 2) -> np.ndarray:
    """Fractionally strided convolution: (C, H, W) -> (O, 2H, 2W).

    kernels: (C, O, 4, 4).  Padding is fixed at 1 so the output is exactly
    twice the input extent.
    """
    x = np.asarray(x)
    kernels = np.asarray(kernels)
    if stride != 2:
        raise ParameterError(f"only stride 2 is supported, got {stride}")
    if x.ndim != 3:
        raise DimensionError(f"expected C x H x W input, got {x.shape}")
    if kernels.ndim != 4 or kernels.shape[2:] != (4, 4):
        raise DimensionError(f"expected C x O x 4 x 4 kernels, got {kernels.shape}")
    if kernels.shape[0] != x.shape[0]:
        raise DimensionError(
            f"kernel channels {kernels.shape[0]} != input channels {x.shape[0]}"
        )
    c, h, w = x.shape
    o = kernels.shape[1]
    full = np.zeros((o, 2 * h + 2, 2 * w + 2), dtype=np.result_type(x, kernels))
    flat = x.reshape(c, h * w)
    for ky in range(4):
        for kx in range(4):
            tap = kernels[:, :, ky, kx]  # (C, O)
            stamped = (tap.T @ flat).reshape(o, h, w)
            full[:, ky:ky + 2 * h:2, kx:kx + 2 * w:2] += stamped
    return full[:, 1:2 * h + 1, 1:2 * w + 1]


# ---------------------------------------------------------------------------
# Median filter
# ---------------------------------------------------------------------------

def median_filter(image: np.ndarray, k: int) -> np.ndarray:
    """k x k median with reflect borders on an H x W image."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise DimensionError(f"median_filter expects H x W input, got {image.shape}")
    if k < 1 or k % 2 == 0:
        raise ParameterError(f"window size must be odd and positive, got {k}")
    if k == 1:
        return image.copy()
    pad = k // 2
    xp = np.pad(image, pad, mode="reflect")
    win = sliding_window_view(xp, (k, k))
    return np.median(win.reshape(image.shape + (k * k,)), axis=-1)


# ---------------------------------------------------------------------------
# Activations
# ---------------------------------------------------------------------------

def leaky_relu(x: np.ndarray, slope: float = 0.2) -> np.ndarray:
    if not 0.0 < slope < 1.0:
        raise ParameterError(f"slope must lie in (0, 1), got {slope}")
    x = np.asarray(x)
    return np.where(x >= 0, x, x * x.dtype.type(slope))


def leaky_relu_backward(x: np.ndarray, upstream: np.ndarray, slope: float = 0.2) -> np.ndarray:
    x = np.asarray(x)
    upstream = np.asarray(upstream)
    return np.where(x >= 0, upstream, upstream * upstream.dtype.type(slope))


# ---------------------------------------------------------------------------
# Instance normalization
# ---------------------------------------------------------------------------

def instance_norm_nhwc(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-5):
    """Per-sample, per-channel standardization over the spatial axes of (B,H,W,C).

    Returns (y, cache) with the cache consumed by the backward pass.
    """
    if x.shape[1] * x.shape[2] < 2:
        raise ParameterError(f"spatial extent {x.shape[1:3]} too small to normalize")
    mu = x.mean(axis=(1, 2), keepdims=True)
    var = x.var(axis=(1, 2), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    y = xhat * gain + bias
    return y, (xhat, inv, gain)


def instance_norm_nhwc_backward(cache, upstream: np.ndarray):
    """Gradients of instance_norm_nhwc: (grad_x, grad_gain, grad_bias)."""
    xhat, inv, gain = cache
    grad_gain = (upstream * xhat).sum(axis=(0, 1, 2))
    grad_bias = upstream.sum(axis=(0, 1, 2))
    dxhat = upstream * gain
    mean_d = dxhat.mean(axis=(1, 2), keepdims=True)
    mean_dx = (dxhat * xhat).mean(axis=(1, 2), keepdims=True)
    grad_x = inv * (dxhat - mean_d - xhat * mean_dx)
    return grad_x, grad_gain, grad_bias


def instance_norm(feature: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-5):
    """C x H x W instance normalization with per-channel affine parameters."""
    feature = np.asarray(feature)
    if feature.ndim != 3:
        raise DimensionError(f"expected C x H x W input, got {feature.shape}")
    xh = np.ascontiguousarray(feature.transpose(1, 2, 0))[None]
    y, _ = instance_norm_nhwc(xh, np.asarray(gain), np.asarray(bias), eps)
    return np.ascontiguousarray(y[0].transpose(2, 0, 1))


def instance_norm_backward(feature, gain, bias, upstream, eps: float = 1e-5):
    """Gradients of the instance_norm contract: (grad_x, grad_gain, grad_bias)."""
    feature = np.asarray(feature)
    xh = np.ascontiguousarray(feature.transpose(1, 2, 0))[None]
    _, cache = instance_norm_nhwc(xh, np.asarray(gain), np.asarray(bias), eps)
    uh = np.ascontiguousarray(np.asarray(upstream).transpose(1, 2, 0))[None]
    gx, ggain, gbias = instance_norm_nhwc_backward(cache, uh)
    return np.ascontiguousarray(gx[0].transpose(2, 0, 1)), ggain, gbias


# ---------------------------------------------------------------------------
# Variadic elementwise product
# ---------------------------------------------------------------------------

def elementwise_mul(*arrays: np.ndarray) -> np.ndarray:
    """Hadamard product of all arguments (at least one, equal shapes)."""
    if not arrays:
        raise ParameterError("elementwise_mul needs at least one argument")
    arrays = [np.asarray(a) for a in arrays]
    shape = arrays[0].shape
    for a in arrays[1:]:
        if a.shape != shape:
            raise DimensionError(f"shape mismatch: {a.shape} vs {shape}")
    out = arrays[0].copy()
    for a in arrays[1:]:
        out *= a
    return out


def elementwise_mul_backward(arrays, upstream: np.ndarray):
    """Per-argument gradients of the variadic product.

    Uses prefix/suffix partial products so zeros in any factor are handled
    without division.
    """
    arrays = [np.asarray(a) for a in arrays]
    n = len(arrays)
    prefix = [None] * n
    suffix = [None] * n
    acc = np.ones_like(arrays[0])
    for i in range(n):
        prefix[i] = acc
        acc = acc * arrays[i]
    acc = np.ones_like(arrays[0])
    for i in range(n - 1, -1, -1):
        suffix[i] = acc
        acc = acc * arrays[i]
    return [upstream * prefix[i] * suffix[i] for i in range(n)]
