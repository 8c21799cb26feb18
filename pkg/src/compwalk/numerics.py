"""Numerical kernels used by the evaluation battery.

All functions are pure and operate on float64 numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class SimilarityMatrix:
    labels: list
    values: np.ndarray

    def reordered(self, order):
        order = list(order)
        return SimilarityMatrix([self.labels[i] for i in order],
                                self.values[np.ix_(order, order)])

    def to_dict(self):
        return {"labels": list(self.labels), "values": self.values.tolist()}


@dataclass
class Dendrogram:
    """Merge history in scipy's convention.

    ``merges[k] = (i, j, height, size)`` joins clusters ``i < j`` into cluster
    ``n + k``; leaves are ``0..n-1``.
    """

    merges: list
    leaf_order: list

    def to_dict(self):
        return {"merges": [list(m) for m in self.merges], "leaf_order": list(self.leaf_order)}

    def cut(self, k):
        """Flat labels for ``k`` clusters, obtained by undoing the last ``k - 1`` merges."""
        n = len(self.merges) + 1
        if not 1 <= k <= n:
            raise ValueError(f"k must be in [1, {n}]")
        parent = list(range(2 * n - 1))
        for step, (i, j, _, _) in enumerate(self.merges[: n - k]):
            parent[i] = parent[j] = n + step

        def root(x):
            while parent[x] != x:
                x = parent[x]
            return x

        roots = [root(i) for i in range(n)]
        relabel = {}
        return [relabel.setdefault(r, len(relabel)) for r in roots]


def cosine(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def normalize_rows(x):
    x = np.asarray(x, dtype=float)
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("cosine undefined for a zero vector")
    return x / n


def cosine_matrix(x, labels=None):
    xn = normalize_rows(x)
    values = np.clip(xn @ xn.T, -1.0, 1.0)
    values = 0.5 * (values + values.T)
    np.fill_diagonal(values, 1.0)
    labels = list(labels) if labels is not None else [str(i) for i in range(len(x))]
    return SimilarityMatrix(labels, values)


def mean_pairwise_cosine(vectors):
    x = np.asarray(vectors, dtype=float)
    n = len(x)
    if n < 2:
        raise ValueError("need at least two vectors")
    sims = normalize_rows(x) @ normalize_rows(x).T
    iu = np.triu_indices(n, k=1)
    return float(np.mean(np.clip(sims[iu], -1.0, 1.0)))


def pearson(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D series of equal length")
    if len(x) < 3:
        raise ValueError("need at least three observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise ValueError("degenerate variance")
    return float(np.clip((dx @ dy) / math.sqrt(sxx * syy), -1.0, 1.0))


# ---------------------------------------------------------------- eigen / PCA

def jacobi_eigh(a, tol=1e-14, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` sorted by descending eigenvalue,
    eigenvectors in columns.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    v = np.eye(n)
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        # off-diagonal norm computed directly; differencing squared norms loses it to rounding
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * max(scale, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300 * max(scale, 1.0):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


@dataclass
class PCAResult:
    explained_variance_ratio: np.ndarray
    explained_variance: np.ndarray
    components: np.ndarray  # (k, d) loadings
    projected: np.ndarray  # (n, k) scores
    mean: np.ndarray


def pca(points):
    """PCA of the rows of ``points`` via a Jacobi eigensolver.

    The eigenproblem is solved on whichever of the (d x d) covariance or the
    (n x n) Gram matrix is smaller; the two share their nonzero spectrum.
    Each component is signed so its largest-magnitude loading is positive.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("need at least two points")
    n, d = x.shape
    mean = x.mean(axis=0)
    xc = x - mean
    if d <= n:
        w, vecs = jacobi_eigh(xc.T @ xc / (n - 1))
        w = np.maximum(w, 0.0)
        comps = vecs.T
    else:
        w, u = jacobi_eigh(xc @ xc.T / (n - 1))
        # Gram eigenvalues at rounding level belong to the null space (centring removes one rank)
        w = np.where(w > 1e-12 * max(w[0], 0.0), w, 0.0)
        keep = min(n, d)
        w, u = w[:keep], u[:, :keep]
        comps = np.zeros((keep, d))
        for k in range(keep):
            if w[k] > 0:
                comps[k] = xc.T @ u[:, k] / math.sqrt(w[k] * (n - 1))
    for k in range(len(comps)):
        j = int(np.argmax(np.abs(comps[k])))
        if comps[k, j] < 0:
            comps[k] = -comps[k]
    total = w.sum()
    ratios = w / total if total > 0 else np.zeros_like(w)
    return PCAResult(ratios, w, comps, xc @ comps.T, mean)


# ---------------------------------------------------------------- Ward

def _pairwise_euclidean(x):
    sq = np.sum(x * x, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2 * x @ x.T, 0.0)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def ward_cluster(data):
    """Ward agglomerative clustering with the Lance-Williams update.

    ``data`` is either a SimilarityMatrix (clustered on ``1 - similarity``)
    or an (n, d) point array (Euclidean distances). Merge heights follow
    scipy's ``method='ward'`` convention. Exact ties go to the smallest
    ``(i, j)`` cluster-id pair.
    """
    if isinstance(data, SimilarityMatrix):
        dist = 1.0 - np.asarray(data.values, dtype=float)
        dist = 0.5 * (dist + dist.T)
        np.fill_diagonal(dist, 0.0)
    else:
        dist = _pairwise_euclidean(np.asarray(data, dtype=float))
    n = len(dist)
    if n < 2:
        raise ValueError("need at least two items")
    d = np.full((2 * n - 1, 2 * n - 1), np.inf)
    d[:n, :n] = dist
    size = np.zeros(2 * n - 1, dtype=int)
    size[:n] = 1
    active = list(range(n))
    merges = []
    for step in range(n - 1):
        best = None
        for a_pos, i in enumerate(active):
            for j in active[a_pos + 1:]:
                key = (d[i, j], i, j)
                if best is None or key < best:
                    best = key
        h, i, j = best
        new = n + step
        ni, nj = size[i], size[j]
        active = [k for k in active if k not in (i, j)]
        for k in active:
            nk = size[k]
            val = ((ni + nk) * d[i, k] ** 2 + (nj + nk) * d[j, k] ** 2 - nk * h ** 2) / (ni + nj + nk)
            d[new, k] = d[k, new] = math.sqrt(max(val, 0.0))
        size[new] = ni + nj
        active.append(new)
        merges.append((int(i), int(j), float(h), int(ni + nj)))
    return Dendrogram(merges, _leaf_order(merges, n))


def _leaf_order(merges, n):
    height = {k: 0.0 for k in range(n)}
    children = {}
    for step, (i, j, h, _) in enumerate(merges):
        height[n + step] = h
        children[n + step] = (i, j)

    order = []
    stack = [2 * n - 2]
    while stack:
        node = stack.pop()
        if node < n:
            order.append(node)
            continue
        a, b = children[node]
        first, second = sorted((a, b), key=lambda c: (height[c], c))
        stack.append(second)
        stack.append(first)
    return order


# ---------------------------------------------------------------- rank-sum test

def _midranks(values):
    """Ranks of ``values`` with ties averaged, as doubled integers."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks2 = np.empty(len(values), dtype=np.int64)
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks2[order[i:j + 1]] = (i + 1) + (j + 1)  # 2 * mean rank
        i = j + 1
    return ranks2


def _exact_rank_sum_pvalue(ranks2, m, observed2):
    """Two-sided p for a doubled rank sum over all C(N, m) subsets."""
    top = int(np.sort(ranks2)[-m:].sum()) if m else 0
    counts = np.zeros((m + 1, top + 1))
    counts[0, 0] = 1.0
    for r in ranks2:
        r = int(r)
        if r > top:
            continue
        counts[1:, r:] += counts[:-1, :top + 1 - r].copy()
    dist = counts[m]
    dist = dist / dist.sum()
    le = dist[:observed2 + 1].sum()
    ge = dist[observed2:].sum()
    return min(1.0, 2.0 * min(le, ge))


def rank_sum_test(sample_a, sample_b, method="auto"):
    """Mann-Whitney U test. Returns ``(U_a, two_sided_p)``.

    ``U_a`` counts pairs (a, b) with a > b, ties counted one half. The exact
    p-value enumerates the null distribution of the rank sum over all
    assignments of the pooled (mid)ranks, so it stays exact under ties; the
    two-sided value is ``2 * min(P(U <= u), P(U >= u))`` capped at 1. The
    asymptotic path is the tie-corrected normal approximation with
    continuity correction. ``auto`` picks exact when the smaller sample has
    at most 10 values and the pooled size is at most 1000.
    """
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be nonempty")
    pooled = np.concatenate([a, b])
    ranks2 = _midranks(pooled)
    r1_2 = int(ranks2[:n1].sum())
    u_a = r1_2 / 2.0 - n1 * (n1 + 1) / 2.0
    if method == "auto":
        method = "exact" if min(n1, n2) <= 10 and n1 + n2 <= 1000 else "asymptotic"
    if method == "exact":
        if n1 <= n2:
            p = _exact_rank_sum_pvalue(ranks2, n1, r1_2)
        else:
            p = _exact_rank_sum_pvalue(ranks2, n2, int(ranks2[n1:].sum()))
        return u_a, float(p)
    if method != "asymptotic":
        raise ValueError(f"unknown method {method!r}")
    n = n1 + n2
    _, ties = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(ties.astype(float) ** 3 - ties))
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    if var <= 0:
        return u_a, 1.0
    mu = n1 * n2 / 2.0
    z = (abs(u_a - mu) - 0.5) / math.sqrt(var)
    z = max(z, 0.0)
    return u_a, float(min(1.0, math.erfc(z / math.sqrt(2.0))))


def linear_interpolate(a, b, steps):
    if steps < 2:
        raise ValueError("steps must be >= 2")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    # convex form keeps both endpoints exact
    return [(1.0 - k / (steps - 1)) * a + (k / (steps - 1)) * b for k in range(steps)]
