"""Forward and backward passes for the supported layer kinds.

Every function is dtype-preserving: float32 arrays in, float32 out (training),
float64 in, float64 out (gradient checks). Activations are batched,
``(N, C, H, W)`` for images and ``(N, F)`` for vectors.
"""

from __future__ import annotations

import numpy as np


def _as_batch(x):
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim != 4:
        raise ValueError(f"expected (C,H,W) or (N,C,H,W) input, got shape {x.shape}")
    return x, False


def im2col(x: np.ndarray, k: int) -> np.ndarray:
    """``(N, C, H, W)`` to ``(N, C*k*k, Ho*Wo)`` patches for a stride-1 valid window."""
    n, c, h, w = x.shape
    ho, wo = h - k + 1, w - k + 1
    cols = np.empty((n, c, k, k, ho, wo), dtype=x.dtype)
    for i in range(k):
        for j in range(k):
            cols[:, :, i, j] = x[:, :, i : i + ho, j : j + wo]
    return cols.reshape(n, c * k * k, ho * wo)


def col2im(dcols: np.ndarray, x_shape, k: int) -> np.ndarray:
    n, c, h, w = x_shape
    ho, wo = h - k + 1, w - k + 1
    d = dcols.reshape(n, c, k, k, ho, wo)
    dx = np.zeros(x_shape, dtype=dcols.dtype)
    for i in range(k):
        for j in range(k):
            dx[:, :, i : i + ho, j : j + wo] += d[:, :, i, j]
    return dx


def conv2d_forward(x, weight, bias, cols=None):
    """Valid, stride-1 cross-correlation plus bias.

    ``x`` is ``(C, H, W)`` or ``(N, C, H, W)``; ``weight`` is ``(F, C, k, k)``.
    """
    xb, single = _as_batch(x)
    f, c, k, k2 = weight.shape
    n, cx, h, w = xb.shape
    if k != k2:
        raise ValueError("only square kernels are supported")
    if cx != c:
        raise ValueError(f"input has {cx} channels, kernel expects {c}")
    if h < k or w < k:
        raise ValueError(f"input {h}x{w} smaller than kernel {k}x{k}")
    if bias.shape != (f,):
        raise ValueError(f"bias shape {bias.shape} does not match {f} filters")
    ho, wo = h - k + 1, w - k + 1
    if cols is None:
        cols = im2col(xb, k)
    out = np.matmul(weight.reshape(f, -1), cols)
    out += bias[:, None]
    out = out.reshape(n, f, ho, wo)
    return out[0] if single else out


def conv2d_backward(dout, x, weight, cols=None):
    """Returns ``(dx, dweight, dbias)``."""
    xb, single = _as_batch(x)
    db, _ = _as_batch(dout)
    f, c, k, _ = weight.shape
    n, _, h, w = xb.shape
    ho, wo = h - k + 1, w - k + 1
    if db.shape != (n, f, ho, wo):
        raise ValueError(f"upstream gradient shape {db.shape} != expected {(n, f, ho, wo)}")
    if cols is None:
        cols = im2col(xb, k)
    d2 = db.reshape(n, f, ho * wo)
    dweight = np.matmul(d2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape)
    dbias = d2.sum(axis=(0, 2))
    dx = col2im(np.matmul(weight.reshape(f, -1).T, d2), xb.shape, k)
    return (dx[0] if single else dx), dweight, dbias


def _pool_views(x):
    ho, wo = x.shape[2] // 2, x.shape[3] // 2
    if ho == 0 or wo == 0:
        raise ValueError(f"cannot 2x2-pool a {x.shape[2]}x{x.shape[3]} map")
    h2, w2 = 2 * ho, 2 * wo
    return (
        x[:, :, 0:h2:2, 0:w2:2],
        x[:, :, 0:h2:2, 1:w2:2],
        x[:, :, 1:h2:2, 0:w2:2],
        x[:, :, 1:h2:2, 1:w2:2],
    )


def maxpool2d_forward(x, return_argmax: bool = True):
    """2x2 window, stride 2. Odd trailing rows/columns are dropped.

    Returns ``(out, argmax)``; ``argmax`` holds the position 0..3 of the
    winner inside each window (row-major, first maximum wins) and feeds the
    backward pass. With ``return_argmax=False`` only ``out`` is returned.
    """
    a, b, c, d = _pool_views(x)
    out = np.maximum(np.maximum(a, b), np.maximum(c, d))
    if not return_argmax:
        return out
    arg = np.where(a == out, 0, np.where(b == out, 1, np.where(c == out, 2, 3))).astype(np.int8)
    return out, arg


def maxpool2d_backward(dout, argmax, x_shape):
    n, c, h, w = x_shape
    ho, wo = h // 2, w // 2
    if dout.shape != (n, c, ho, wo):
        raise ValueError(f"upstream gradient shape {dout.shape} != expected {(n, c, ho, wo)}")
    dx = np.zeros(x_shape, dtype=dout.dtype)
    zero = np.zeros((), dtype=dout.dtype)
    for pos, view in enumerate(_pool_views(dx)):
        view[...] = np.where(argmax == pos, dout, zero)
    return dx


def relu_forward(x):
    return np.maximum(x, 0)


def relu_backward(dout, x):
    if dout.shape != x.shape:
        raise ValueError("gradient and activation shapes differ")
    return np.where(x > 0, dout, 0).astype(dout.dtype, copy=False)


def dense_forward(x, weight, bias):
    """``x @ weight + bias`` with ``weight`` shaped ``(in_features, out_features)``."""
    if x.shape[-1] != weight.shape[0]:
        raise ValueError(f"dense layer expects {weight.shape[0]} features, got {x.shape[-1]}")
    return x @ weight + bias


def dense_backward(dout, x, weight):
    if dout.shape[-1] != weight.shape[1] or dout.shape[0] != x.shape[0]:
        raise ValueError("gradient shape does not match the dense layer")
    return dout @ weight.T, x.T @ dout, dout.sum(axis=0)


def softmax(logits, axis: int = -1):
    z = np.asarray(logits)
    if z.shape[axis] < 2:
        raise ValueError("softmax needs at least two classes")
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


PROB_FLOOR = 1e-12


def cross_entropy(probs, labels):
    """Mean negative log-likelihood; a single distribution with an int label gives a scalar."""
    p = np.asarray(probs)
    single = p.ndim == 1
    if single:
        p = p[None]
    lab = np.atleast_1d(np.asarray(labels, dtype=np.intp))
    n, k = p.shape
    if lab.shape != (n,):
        raise ValueError("one label per distribution required")
    if np.any(lab < 0) or np.any(lab >= k):
        raise ValueError(f"label out of range 0..{k - 1}")
    picked = np.maximum(p[np.arange(n), lab], PROB_FLOOR)
    return float(-np.log(picked).mean())


def softmax_cross_entropy_grad(probs, labels, scale: float | None = None):
    """Gradient of the mean loss w.r.t. the logits: ``(p - onehot) / N``."""
    n = probs.shape[0]
    g = probs.copy()
    g[np.arange(n), labels] -= 1
    return g / (n if scale is None else scale)
