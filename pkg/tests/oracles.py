"""Slow, obviously-correct reference implementations used only by tests."""

import math
from collections import Counter

import numpy as np


def brute_entropy_map(gray, window):
    """Double loop over pixels; window indices clamped to the image."""
    gray = np.asarray(gray)
    h, w = gray.shape
    r = window // 2
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            vals = [
                int(gray[min(max(i + di, 0), h - 1), min(max(j + dj, 0), w - 1)])
                for di in range(-r, r + 1)
                for dj in range(-r, r + 1)
            ]
            n = len(vals)
            out[i, j] = -sum((c / n) * math.log2(c / n) for c in Counter(vals).values())
    return out


def weighted_centroid(emap):
    h, w = len(emap), len(emap[0])
    total = sx = sy = 0.0
    for y in range(h):
        for x in range(w):
            e = float(emap[y][x])
            total += e
            sx += e * x
            sy += e * y
    return sx / total, sy / total


def lloyd_reference(points, centers, max_iter=100, tol=1e-6):
    """Plain-Python Lloyd iterations; returns (centers, sse)."""
    pts = [tuple(p) for p in np.asarray(points).tolist()]
    cs = [list(c) for c in np.asarray(centers).tolist()]

    def assign():
        labels, sse = [], 0.0
        for p in pts:
            d = [sum((a - b) ** 2 for a, b in zip(p, c)) for c in cs]
            k = min(range(len(cs)), key=lambda j: (d[j], j))
            labels.append(k)
            sse += d[k]
        return labels, sse

    labels, sse = assign()
    for _ in range(max_iter):
        new = []
        for j, c in enumerate(cs):
            mem = [p for p, lab in zip(pts, labels) if lab == j]
            new.append([sum(col) / len(mem) for col in zip(*mem)] if mem else c)
        shift = max(math.sqrt(sum((a - b) ** 2 for a, b in zip(u, v))) for u, v in zip(new, cs))
        cs = new
        labels, sse = assign()
        if shift < tol:
            break
    return np.array(cs), sse


def power_iteration_pca(X, k, iters=200000, tol=1e-15):
    """Leading eigenpairs of the sample covariance by power iteration with deflation."""
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / (len(X) - 1)
    total = np.trace(C)
    vecs, vals = [], []
    rng = np.random.default_rng(0)
    for _ in range(k):
        v = rng.normal(size=C.shape[0])
        v /= np.linalg.norm(v)
        for _ in range(iters):
            u = C @ v
            u /= np.linalg.norm(u)
            if np.linalg.norm(u - v) < tol:
                v = u
                break
            v = u
        lam = float(v @ C @ v)
        vecs.append(v)
        vals.append(lam)
        C = C - lam * np.outer(v, v)
    return np.array(vecs), np.array(vals) / total


def mae_ref(t, p):
    return sum(abs(a - b) for a, b in zip(t, p)) / len(t)


def r2_ref(t, p):
    m = sum(t) / len(t)
    return 1 - sum((a - b) ** 2 for a, b in zip(t, p)) / sum((a - m) ** 2 for a in t)


def best_stump(x, y, min_leaf=1):
    """Enumerate every threshold between sorted distinct values; max SSE reduction."""
    pairs = sorted(zip(x, y))
    xs = sorted(set(x))
    n = len(y)
    mean = sum(y) / n
    sse0 = sum((v - mean) ** 2 for v in y)
    best = (-1.0, None)
    for a, b in zip(xs, xs[1:]):
        t = (a + b) / 2
        left = [v for u, v in pairs if u <= t]
        right = [v for u, v in pairs if u > t]
        if len(left) < min_leaf or len(right) < min_leaf:
            continue
        ml, mr = sum(left) / len(left), sum(right) / len(right)
        sse = sum((v - ml) ** 2 for v in left) + sum((v - mr) ** 2 for v in right)
        if sse0 - sse > best[0]:
            best = (sse0 - sse, t)
    return best
