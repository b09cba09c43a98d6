"""Dense CPU kernels for the generator forward pass.

Conventions, fixed as part of the public contract:

* values are numpy arrays, float32 in storage, C-contiguous row-major;
* conv2d is cross-correlation (no kernel flip), zero padding, stride 1;
* reductions (conv, linear, attention, norms) accumulate in float64 and the
  result is cast back to the input activation dtype;
* every kernel is a pure function of its inputs, so results do not depend on
  call order or on any thread pool driving them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ShapeError(msg)


def conv2d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, padding: int = 0) -> np.ndarray:
    """2-D cross-correlation over a (C_in, H, W) input with a (C_out, C_in, kH, kW) kernel.

    Output spatial size is H + 2*padding - kH + 1 (same for W). kH and kW must
    be odd; padding is zero-fill.
    """
    _check(x.ndim == 3, f"conv2d input must be (C,H,W), got {x.shape}")
    _check(kernel.ndim == 4, f"conv2d kernel must be (C_out,C_in,kH,kW), got {kernel.shape}")
    c_out, c_in, kh, kw = kernel.shape
    _check(kh % 2 == 1 and kw % 2 == 1, f"kernel spatial dims must be odd, got {kh}x{kw}")
    _check(padding >= 0, f"padding must be >= 0, got {padding}")
    _check(
        x.shape[0] == c_in,
        f"input channels {x.shape[0]} do not match kernel C_in {c_in}",
    )
    _check(bias.shape == (c_out,), f"bias must be ({c_out},), got {bias.shape}")
    h, w = x.shape[1], x.shape[2]
    oh = h + 2 * padding - kh + 1
    ow = w + 2 * padding - kw + 1
    _check(oh >= 1 and ow >= 1, f"kernel {kh}x{kw} larger than padded input {h}x{w}")

    xp = x.astype(np.float64, copy=False)
    if padding:
        xp = np.pad(xp, ((0, 0), (padding, padding), (padding, padding)))
    # (C_in, oh, ow, kh, kw) sliding windows -> rows of the im2col matrix.
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    cols = win.transpose(1, 2, 0, 3, 4).reshape(oh * ow, c_in * kh * kw)
    wmat = kernel.astype(np.float64, copy=False).reshape(c_out, c_in * kh * kw)
    out = wmat @ cols.T + bias.astype(np.float64, copy=False)[:, None]
    return np.ascontiguousarray(out.reshape(c_out, oh, ow)).astype(x.dtype)


def linear(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """out[m] = sum_n weight[m, n] * x[n] + bias[m]."""
    _check(x.ndim == 1, f"linear input must be 1-D, got {x.shape}")
    _check(weight.ndim == 2, f"linear weight must be 2-D, got {weight.shape}")
    m, n = weight.shape
    _check(x.shape[0] == n, f"input length {x.shape[0]} does not match weight columns {n}")
    _check(bias.shape == (m,), f"bias must be ({m},), got {bias.shape}")
    out = weight.astype(np.float64, copy=False) @ x.astype(np.float64, copy=False)
    out += bias.astype(np.float64, copy=False)
    return out.astype(x.dtype)


def batch_norm_inference(
    x: np.ndarray,
    mean: np.ndarray,
    var: np.ndarray,
    gain: np.ndarray,
    bias: np.ndarray,
    epsilon: float = 1e-5,
) -> np.ndarray:
    """Per-channel normalization with stored statistics: gain*(x-mean)/sqrt(var+eps)+bias."""
    _check(x.ndim == 3, f"batch norm input must be (C,H,W), got {x.shape}")
    c = x.shape[0]
    for name, arr in (("mean", mean), ("var", var), ("gain", gain), ("bias", bias)):
        _check(arr.shape == (c,), f"{name} must be ({c},), got {arr.shape}")
    if epsilon <= 0:
        raise ShapeError(f"epsilon must be > 0, got {epsilon}")
    if np.any(var < 0):
        raise ShapeError("variance has negative entries")
    x64 = x.astype(np.float64, copy=False)
    scale = gain.astype(np.float64) / np.sqrt(var.astype(np.float64) + epsilon)
    out = scale[:, None, None] * (x64 - mean.astype(np.float64)[:, None, None])
    out += bias.astype(np.float64)[:, None, None]
    return out.astype(x.dtype)


def upsample_nearest_2x(x: np.ndarray) -> np.ndarray:
    """Replicate every pixel of a (C,H,W) input into a 2x2 block."""
    _check(x.ndim == 3, f"upsample input must be (C,H,W), got {x.shape}")
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def softmax(x: np.ndarray) -> np.ndarray:
    """Stable softmax of a 1-D vector; output sums to 1."""
    _check(x.ndim == 1, f"softmax input must be 1-D, got {x.shape}")
    return _softmax_rows(x.astype(np.float64, copy=False)[None, :])[0].astype(x.dtype)


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    # float64 in, float64 out; max-subtraction keeps exp finite even for
    # badly scaled activations.
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class AttentionParams:
    """Projection kernels (1x1 convs, stored 4-D) plus the residual scale gamma."""

    query_kernel: np.ndarray
    query_bias: np.ndarray
    key_kernel: np.ndarray
    key_bias: np.ndarray
    value_kernel: np.ndarray
    value_bias: np.ndarray
    out_kernel: np.ndarray
    out_bias: np.ndarray
    gamma: float


def self_attention(x: np.ndarray, params: AttentionParams) -> np.ndarray:
    """Residual dot-product attention over the H*W positions of a (C,H,W) map.

    out = x + gamma * Wo(value-average weighted by softmax(q . k)) with the
    softmax taken over key positions for each query position. No temperature
    scaling is applied. gamma == 0 returns the input unchanged.
    """
    _check(x.ndim == 3, f"attention input must be (C,H,W), got {x.shape}")
    if params.gamma == 0.0:
        return x.copy()
    c, h, w = x.shape
    n = h * w

    def proj(kernel: np.ndarray, bias: np.ndarray, inp: np.ndarray) -> np.ndarray:
        kc_out, kc_in = kernel.shape[0], kernel.shape[1]
        _check(
            kc_in == inp.shape[0],
            f"attention projection expects {kc_in} channels, got {inp.shape[0]}",
        )
        wmat = kernel.astype(np.float64, copy=False).reshape(kc_out, kc_in)
        return wmat @ inp + bias.astype(np.float64, copy=False)[:, None]

    flat = x.astype(np.float64, copy=False).reshape(c, n)
    q = proj(params.query_kernel, params.query_bias, flat)
    k = proj(params.key_kernel, params.key_bias, flat)
    v = proj(params.value_kernel, params.value_bias, flat)
    att = _softmax_rows(q.T @ k)          # (n, n), rows are query positions
    mixed = v @ att.T                     # (C_v, n)
    y = proj(params.out_kernel, params.out_bias, mixed)
    out = flat + float(params.gamma) * y
    return out.reshape(c, h, w).astype(x.dtype)
