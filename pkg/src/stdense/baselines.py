"""Comparison estimators: k-nearest-neighbour averaging and Gaussian kernel ridge.

Both are fitted on the flattened panel and tuned by cross-validation over
whole time indices, so correlated measurements from one time index never
straddle a fold boundary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import NumericError, ParameterError
from .metrics import empirical_norm_sq

KNN_GRID = (5, 10, 15)
ALPHA_GRID = tuple(10.0 ** np.arange(-2, 3))
BANDWIDTH_MULTIPLIERS = (0.5, 1.0, 2.0)


def _arrays(train):
    if hasattr(train, "x"):
        return train.x, train.y
    x, y = train
    return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64).ravel()


def _sq_dists(A, B):
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.maximum(d, 0.0)


@dataclass(frozen=True)
class KnnModel:
    x: np.ndarray
    y: np.ndarray
    k: int

    def __post_init__(self):
        if len(self.y) == 0:
            raise ParameterError("k-NN needs at least one training point")
        if not 1 <= self.k <= len(self.y):
            raise ParameterError(f"k must lie in 1..{len(self.y)}, got {self.k}")

    def predict(self, Q):
        """Mean response of the ``k`` nearest training points.

        Distance ties go to the lower training index.
        """
        nbrs = nearest_neighbors(self.x, Q, self.k)
        return self.y[nbrs].mean(axis=1)


def nearest_neighbors(X, Q, k, chunk=512):
    """Indices of the ``k`` nearest rows of ``X`` for every query, ordered by
    (distance, index)."""
    X = np.asarray(X, dtype=np.float64)
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    out = np.empty((len(Q), k), dtype=np.int64)
    for lo in range(0, len(Q), chunk):
        q = Q[lo : lo + chunk]
        # coordinate-wise differences so that identical points tie exactly
        D = np.zeros((len(q), len(X)))
        for c in range(X.shape[1]):
            D += (q[:, c, None] - X[None, :, c]) ** 2
        rows = np.arange(len(q))[:, None]
        part = np.argpartition(D, k - 1, axis=1)[:, :k] if k < len(X) else np.tile(np.arange(len(X)), (len(q), 1))
        dpart = D[rows, part]
        kth = dpart.max(axis=1)
        crowded = np.flatnonzero((D <= kth[:, None]).sum(axis=1) > k)
        order = np.lexsort((part, dpart), axis=1)
        best = part[rows, order]
        for r in crowded:
            cand = np.flatnonzero(D[r] <= kth[r])
            best[r] = cand[np.lexsort((cand, D[r, cand]))][:k]
        out[lo : lo + chunk] = best
    return out


def knn_fit(train, k):
    x, y = _arrays(train)
    return KnnModel(x, y, int(k))


def knn_fit_predict(train, k, query_points):
    return knn_fit(train, k).predict(query_points)


def gaussian_kernel(A, B, bandwidth):
    return np.exp(-_sq_dists(A, B) / (2.0 * bandwidth**2))


def median_heuristic(X, max_points=1000, seed=0):
    """Median pairwise Euclidean distance (on a seeded subsample)."""
    X = np.asarray(X, dtype=np.float64)
    if len(X) > max_points:
        X = X[np.random.default_rng(seed).choice(len(X), max_points, replace=False)]
    d = np.sqrt(_sq_dists(X, X))[np.triu_indices(len(X), 1)]
    d = d[d > 0]
    return float(np.median(d)) if len(d) else 1.0


@dataclass(frozen=True)
class KrrModel:
    x: np.ndarray
    coef: np.ndarray
    bandwidth: float
    alpha: float

    def predict(self, Q):
        Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
        return gaussian_kernel(Q, self.x, self.bandwidth) @ self.coef


def solve_dual(K, y, alpha, rtol=1e-8):
    """Solve ``(K + alpha I) c = y`` by Cholesky.

    On factorisation failure add ``1e-10 I`` and retry, growing the jitter
    tenfold up to three times.
    """
    A = K + alpha * np.eye(len(K))
    jitter = 0.0
    for attempt in range(4):
        try:
            c = linalg.cho_solve(linalg.cho_factor(A + jitter * np.eye(len(K)), lower=True), y)
        except linalg.LinAlgError:
            jitter = 1e-10 if attempt == 0 else jitter * 10
            continue
        resid = np.linalg.norm(A @ c - y)
        if resid <= rtol * max(np.linalg.norm(y), 1e-300) or not np.any(y):
            return c
        jitter = 1e-10 if attempt == 0 else jitter * 10
    raise NumericError(f"kernel system is singular beyond tolerance (alpha={alpha})")


def krr_fit(train, bandwidth, alpha, max_points=None, seed=0):
    """Gaussian-kernel ridge regression in the dual.

    ``max_points`` caps the training set by seeded uniform subsampling; the
    dense solve is cubic in the number of points.
    """
    if not alpha > 0 or not bandwidth > 0:
        raise ParameterError("alpha and bandwidth must be positive")
    x, y = _arrays(train)
    if max_points is not None and len(y) > max_points:
        keep = np.sort(np.random.default_rng(seed).choice(len(y), max_points, replace=False))
        x, y = x[keep], y[keep]
    K = gaussian_kernel(x, x, bandwidth)
    return KrrModel(x, solve_dual(K, y, alpha), float(bandwidth), float(alpha))


def krr_predict(model, query):
    return model.predict(query)


def time_folds(n, folds=5, seed=0):
    """Assign each of ``n`` time indices to one of ``folds`` groups at random."""
    folds = min(folds, n)
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(perm[f::folds]) for f in range(folds)]


def _cv_score(panel, fit_predict, folds, seed):
    score = 0.0
    for held in time_folds(panel.n, folds, seed):
        rest = np.setdiff1d(np.arange(panel.n), held)
        tr, te = panel.select_times(rest), panel.select_times(held)
        pred = fit_predict(tr, te.x)
        score += empirical_norm_sq(te.y - pred, te.group_sizes) * len(held)
    return score / panel.n


def cv_knn(panel, grid=KNN_GRID, folds=5, seed=0):
    """Best ``k`` by whole-time-index cross-validation (first of equals wins)."""
    grid = sorted(grid)
    scores = np.zeros(len(grid))
    for held in time_folds(panel.n, folds, seed):
        rest = np.setdiff1d(np.arange(panel.n), held)
        tr, te = panel.select_times(rest), panel.select_times(held)
        kmax = min(grid[-1], tr.size)
        nbrs = nearest_neighbors(tr.x, te.x, kmax)
        for g, k in enumerate(grid):
            pred = tr.y[nbrs[:, : min(k, kmax)]].mean(axis=1)
            scores[g] += empirical_norm_sq(te.y - pred, te.group_sizes) * len(held)
    return grid[int(np.argmin(scores))]


def cv_krr(panel, alphas=ALPHA_GRID, multipliers=BANDWIDTH_MULTIPLIERS, folds=5, seed=0, max_points=2000):
    """Best ``(bandwidth, alpha)``; bandwidths are the median heuristic times ``multipliers``."""
    h0 = median_heuristic(panel.x, seed=seed)
    best = None
    for mult in multipliers:
        for alpha in alphas:
            def fp(tr, q, h=h0 * mult, a=alpha):
                return krr_fit(tr, h, a, max_points=max_points, seed=seed).predict(q)

            s = _cv_score(panel, fp, folds, seed)
            if best is None or s < best[0]:
                best = (s, h0 * mult, alpha)
    return best[1], best[2]
