"""Naive reference implementations used as test oracles.

Plain Python loops and the ``math`` module only; nothing here imports the
package under test.
"""

import math


def minmax(xs, lo, hi):
    a, b = min(xs), max(xs)
    if a == b:
        return [float(lo)] * len(xs)
    return [lo + (x - a) * (hi - lo) / (b - a) for x in xs]


def pixel_strength(xs, side):
    v = minmax(list(xs[: side * side]), 0.0, 1.0)
    return [[v[r * side + c] for c in range(side)] for r in range(side)]


def gasf(xs):
    u = [max(-1.0, min(1.0, v)) for v in minmax(list(xs), -1.0, 1.0)]
    phi = [math.acos(v) for v in u]
    n = len(phi)
    return [[math.cos(phi[i] + phi[j]) for j in range(n)] for i in range(n)]


def quantile(sorted_xs, q):
    # linear interpolation between order statistics
    n = len(sorted_xs)
    h = (n - 1) * q
    lo = int(math.floor(h))
    hi = min(lo + 1, n - 1)
    return sorted_xs[lo] + (h - lo) * (sorted_xs[hi] - sorted_xs[lo])


def mtf_states(xs, bins):
    s = sorted(xs)
    edges = [quantile(s, k / bins) for k in range(1, bins)]
    return [sum(1 for e in edges if e < x) for x in xs]


def mtf_transitions(states, bins):
    counts = [[0] * bins for _ in range(bins)]
    for a, b in zip(states[:-1], states[1:]):
        counts[a][b] += 1
    w = []
    for row in counts:
        tot = sum(row)
        w.append([c / tot for c in row] if tot else [1.0 / bins] * bins)
    return w


def mtf(xs, bins):
    xs = list(xs)
    q = mtf_states(xs, bins)
    w = mtf_transitions(q, bins)
    n = len(xs)
    return [[w[q[i]][q[j]] for j in range(n)] for i in range(n)]


def recurrence(xs):
    xs = list(xs)
    n = len(xs)
    r = [[abs(xs[i] - xs[j]) for j in range(n)] for i in range(n)]
    peak = max(max(row) for row in r)
    if peak == 0:
        return r
    return [[v / peak for v in row] for row in r]


def conv2d(x, w, b):
    """x[c][i][j], w[f][c][ki][kj], b[f] -> out[f][i][j] (valid, stride 1)."""
    C = len(x)
    H, W = len(x[0]), len(x[0][0])
    F = len(w)
    k = len(w[0][0])
    out = []
    for f in range(F):
        plane = []
        for i in range(H - k + 1):
            row = []
            for j in range(W - k + 1):
                acc = b[f]
                for c in range(C):
                    for di in range(k):
                        for dj in range(k):
                            acc += x[c][i + di][j + dj] * w[f][c][di][dj]
                row.append(acc)
            plane.append(row)
        out.append(plane)
    return out


def rqa(binary, l_min):
    """Exhaustive line scan over a boolean matrix with the main diagonal ignored.

    Returns dict with RR, DET, LAM, Lmax, ENT.
    """
    m = len(binary)

    def rec(i, j):
        return 0 <= i < m and 0 <= j < m and i != j and binary[i][j]

    points = sum(1 for i in range(m) for j in range(m) if rec(i, j))
    diag = []
    for i in range(m):
        for j in range(m):
            if rec(i, j) and not rec(i - 1, j - 1):
                n = 0
                while rec(i + n, j + n):
                    n += 1
                diag.append(n)
    vert = []
    for j in range(m):
        for i in range(m):
            if rec(i, j) and not rec(i - 1, j):
                n = 0
                while rec(i + n, j):
                    n += 1
                vert.append(n)
    long_d = [n for n in diag if n >= l_min]
    long_v = [n for n in vert if n >= l_min]
    hist = {}
    for n in long_d:
        hist[n] = hist.get(n, 0) + 1
    total = len(long_d)
    ent = -sum((c / total) * math.log(c / total) for c in hist.values()) if total else 0.0
    return {
        "RR": points / (m * m - m),
        "DET": sum(long_d) / points if points else 0.0,
        "LAM": sum(long_v) / points if points else 0.0,
        "Lmax": max(diag) if diag else 0,
        "ENT": ent,
    }


def max_abs_diff(a, b):
    """Largest elementwise difference between two nested lists / arrays of equal shape."""
    if hasattr(a, "tolist"):
        a = a.tolist()
    if hasattr(b, "tolist"):
        b = b.tolist()
    if isinstance(a, list):
        assert len(a) == len(b)
        return max((max_abs_diff(x, y) for x, y in zip(a, b)), default=0.0)
    return abs(a - b)
