"""Central finite-difference gradient checking (float64 only)."""

import numpy as np

import vibimg.nn.functional as F
from vibimg.nn import backward, forward

H = 1e-5
TOL = 1e-4


def rel_error(analytic, numeric):
    """Largest elementwise ``|a - n| / max(|a| + |n|, floor)``.

    The floor keeps entries whose true gradient is ~0 from turning round-off
    into huge ratios; it is far below the size of any gradient that matters.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.abs(a) + np.abs(n), 1e-7)
    return float((np.abs(a - n) / denom).max())


def numeric_grad(f, x, h=H):
    """d f / d x by central differences, perturbing ``x`` in place."""
    assert x.dtype == np.float64
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def network_loss(model, x, y):
    return F.cross_entropy(F.softmax(forward(model, x)), y)


def check_network(model, x, y, max_entries=None, rng=None):
    """Return the worst relative error over all parameters and the input.

    With ``max_entries`` only that many randomly chosen entries per tensor
    are perturbed (the analytic gradient is still computed in full).
    """
    model = model.astype(np.float64)
    x = np.array(x, dtype=np.float64)
    logits, caches = forward(model, x, keep=True)
    probs = F.softmax(logits)
    dx, grads = backward(model, caches, F.softmax_cross_entropy_grad(probs, y))
    worst = 0.0
    rng = rng or np.random.default_rng(0)
    for tensor, grad in list(zip(model.parameters(), grads)) + [(x, dx)]:
        flat = tensor.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = rng.choice(flat.size, max_entries, replace=False)
        num = np.empty(idx.size)
        for j, k in enumerate(idx):
            old = flat[k]
            flat[k] = old + H
            fp = network_loss(model, x, y)
            flat[k] = old - H
            fm = network_loss(model, x, y)
            flat[k] = old
            num[j] = (fp - fm) / (2 * H)
        worst = max(worst, rel_error(grad.reshape(-1)[idx], num))
    return worst
