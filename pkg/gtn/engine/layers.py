# gtn/engine/layers.py

"""Forward and backward passes of the layer types a GTN is built from.

Every `*_forward` returns its output together with a cache; the matching
`*_backward` takes the upstream derivative and that cache and returns the
derivatives with respect to the inputs and parameters. All arrays are
unbatched: a convolution input is [C, H, W], vectors are 1-D.
"""

import math
from typing import Any, List, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from gtn.core.domain import LstmState
from gtn.core.exceptions import ConfigurationError

Cache = Any


def same_padding(size: int, kernel: int, stride: int) -> Tuple[int, int, int]:
    """Output size and (before, after) padding for "same"-style convolution.

    The output is ceil(size / stride); any odd padding goes after.
    """
    out = math.ceil(size / stride)
    total = max((out - 1) * stride + kernel - size, 0)
    before = total // 2
    return out, before, total - before


def conv_output_side(side: int, stride: int = 2) -> int:
    return math.ceil(side / stride)


def conv2d_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int
) -> Tuple[np.ndarray, Cache]:
    """Computes a strided "same" convolution (cross-correlation).

    Args:
        x: Input of shape [C_in, H, W]
        w: Kernels of shape [C_out, C_in, k, k]
        b: Biases of shape [C_out]
        stride: Step between receptive fields

    Returns:
        Output of shape [C_out, ceil(H/stride), ceil(W/stride)] and the cache

    Raises:
        ConfigurationError: If the input channels do not match the kernels.
    """
    if x.ndim != 3 or w.ndim != 4 or x.shape[0] != w.shape[1]:
        raise ConfigurationError(
            f"conv2d shape mismatch: input {x.shape} vs weights {w.shape}"
        )
    if b.shape != (w.shape[0],):
        raise ConfigurationError(f"conv2d bias shape {b.shape} vs {w.shape[0]} kernels")
    _, height, width = x.shape
    kh, kw = w.shape[2], w.shape[3]
    h_out, top, bottom = same_padding(height, kh, stride)
    w_out, left, right = same_padding(width, kw, stride)

    padded = np.pad(x, ((0, 0), (top, bottom), (left, right)))
    # [C_in, H_out, W_out, kh, kw] view, no copy
    windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))[
        :, ::stride, ::stride
    ][:, :h_out, :w_out]
    out = np.tensordot(w, windows, axes=([1, 2, 3], [0, 3, 4]))
    out += b[:, None, None]

    cache = (x.shape, padded.shape, windows, w, stride, (top, left))
    return out, cache


def conv2d_backward(
    dout: np.ndarray, cache: Cache
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backward pass of `conv2d_forward`.

    Returns:
        (dx, dw, db)
    """
    x_shape, padded_shape, windows, w, stride, (top, left) = cache
    _, h_out, w_out = dout.shape
    kh, kw = w.shape[2], w.shape[3]

    db = dout.sum(axis=(1, 2))
    dw = np.tensordot(dout, windows, axes=([1, 2], [1, 2]))

    dpadded = np.zeros(padded_shape, dtype=dout.dtype)
    for i in range(kh):
        for j in range(kw):
            # [C_in, H_out, W_out] contribution of kernel tap (i, j)
            contrib = np.tensordot(w[:, :, i, j], dout, axes=([0], [0]))
            dpadded[
                :,
                i : i + stride * h_out : stride,
                j : j + stride * w_out : stride,
            ] += contrib
    dx = dpadded[:, top : top + x_shape[1], left : left + x_shape[2]]
    return np.ascontiguousarray(dx), dw, db


def linear_forward(
    x: np.ndarray, w: np.ndarray, b: np.ndarray
) -> Tuple[np.ndarray, Cache]:
    """y = xW + b for a vector x of length D and W of shape [D, A]."""
    if x.ndim != 1 or w.ndim != 2 or x.shape[0] != w.shape[0] or b.shape != (w.shape[1],):
        raise ConfigurationError(
            f"linear shape mismatch: x {x.shape}, W {w.shape}, b {b.shape}"
        )
    return x @ w + b, (x, w)


def linear_backward(
    dout: np.ndarray, cache: Cache
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    x, w = cache
    return w @ dout, np.outer(x, dout), dout.copy()


def relu_forward(x: np.ndarray) -> Tuple[np.ndarray, Cache]:
    return np.maximum(x, 0.0), x


def relu_backward(dout: np.ndarray, cache: Cache) -> np.ndarray:
    return dout * (cache > 0)


def softmax(x: np.ndarray) -> np.ndarray:
    """Numerically stable softmax of a vector."""
    shifted = x - np.max(x)
    e = np.exp(shifted)
    return e / e.sum()


def log_softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - np.max(x)
    return shifted - np.log(np.exp(shifted).sum())


def softmax_forward(x: np.ndarray) -> Tuple[np.ndarray, Cache]:
    p = softmax(x)
    return p, p


def softmax_backward(dout: np.ndarray, cache: Cache) -> np.ndarray:
    p = cache
    return p * (dout - np.dot(dout, p))


def lstm_forward(
    x: np.ndarray,
    h: np.ndarray,
    c: np.ndarray,
    w_x: np.ndarray,
    w_h: np.ndarray,
    b: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, Cache]:
    """One standard LSTM cell update.

    Gate blocks in the 4S pre-activation are ordered input, forget, output,
    candidate.

    Args:
        x: Input vector of length D
        h: Previous hidden state of length S
        c: Previous cell state of length S
        w_x: [D, 4S] input weights
        w_h: [S, 4S] recurrent weights
        b: [4S] biases

    Returns:
        (new hidden, new cell, cache)

    Raises:
        ConfigurationError: If any width disagrees with the weights.
    """
    size = h.shape[0]
    if (
        w_x.shape != (x.shape[0], 4 * size)
        or w_h.shape != (size, 4 * size)
        or b.shape != (4 * size,)
        or c.shape != (size,)
    ):
        raise ConfigurationError(
            f"lstm width mismatch: x {x.shape}, h {h.shape}, w_x {w_x.shape}, "
            f"w_h {w_h.shape}, b {b.shape}"
        )
    z = x @ w_x + h @ w_h + b
    i = expit(z[:size])
    f = expit(z[size : 2 * size])
    o = expit(z[2 * size : 3 * size])
    g = np.tanh(z[3 * size :])
    c_new = f * c + i * g
    t = np.tanh(c_new)
    h_new = o * t
    cache = (x, h, c, w_x, w_h, i, f, o, g, t)
    return h_new, c_new, cache


def lstm_backward(
    dh_new: np.ndarray, dc_new: np.ndarray, cache: Cache
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Backward pass of `lstm_forward`.

    Returns:
        (dx, dh, dc, dw_x, dw_h, db)
    """
    x, h, c, w_x, w_h, i, f, o, g, t = cache
    dc_total = dc_new + dh_new * o * (1.0 - t * t)
    dz = np.concatenate(
        [
            dc_total * g * i * (1.0 - i),
            dc_total * c * f * (1.0 - f),
            dh_new * t * o * (1.0 - o),
            dc_total * i * (1.0 - g * g),
        ]
    )
    dx = w_x @ dz
    dh = w_h @ dz
    dc = dc_total * f
    return dx, dh, dc, np.outer(x, dz), np.outer(h, dz), dz


def lstm_step(
    x: np.ndarray,
    state: LstmState,
    w_x: np.ndarray,
    w_h: np.ndarray,
    b: np.ndarray,
) -> Tuple[np.ndarray, LstmState]:
    """Convenience wrapper returning (output, new_state); output is the new hidden."""
    h_new, c_new, _ = lstm_forward(x.ravel(), state.hidden, state.cell, w_x, w_h, b)
    return h_new, LstmState(hidden=h_new, cell=c_new)


def concat_forward(
    activations: Sequence[np.ndarray], towers: Sequence[np.ndarray], bias: np.ndarray
) -> Tuple[np.ndarray, Cache]:
    """Pre-activation of the concatenation layer: sum_m a_m T_m + bias."""
    if len(activations) != len(towers):
        raise ConfigurationError(
            f"{len(activations)} level activations for {len(towers)} T matrices"
        )
    pre = bias.copy()
    for a, t in zip(activations, towers):
        if t.shape != (a.shape[0], bias.shape[0]):
            raise ConfigurationError(f"T shape {t.shape} vs activation {a.shape}")
        pre += a @ t
    return pre, (list(activations), list(towers))


def concat_backward(
    dout: np.ndarray, cache: Cache
) -> Tuple[List[np.ndarray], List[np.ndarray], np.ndarray]:
    """Returns (d activations, d T matrices, d bias)."""
    activations, towers = cache
    d_act = [t @ dout for t in towers]
    d_towers = [np.outer(a, dout) for a in activations]
    return d_act, d_towers, dout.copy()
