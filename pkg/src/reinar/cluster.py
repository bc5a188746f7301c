"""K-means, state estimation from counts, agreement scoring and calibration searches."""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .preestimate import RenesConfig, build_features, p_pre

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray  # 1-based
    centers: np.ndarray
    inertia: float
    iterations: int
    inertia_history: tuple = field(default=(), repr=False)


def _sq_dist(points, centers):
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)


def kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers[c] = points[idx]
        d2 = np.minimum(d2, ((points - centers[c]) ** 2).sum(axis=1))
    return centers


def _lloyd(points, centers, max_iter, tol_abs):
    k = centers.shape[0]
    history = []
    labels = None
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dist(points, centers)
        new_labels = d2.argmin(axis=1)
        point_d2 = d2[np.arange(points.shape[0]), new_labels]
        inertia = float(point_d2.sum())
        if __debug__ and history:
            assert inertia <= history[-1] * (1 + 1e-9) + 1e-12, "k-means inertia increased"
        history.append(inertia)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        new_centers = np.empty_like(centers)
        counts = np.bincount(labels, minlength=k)
        taken = np.zeros(points.shape[0], dtype=bool)
        for c in range(k):
            if counts[c]:
                new_centers[c] = points[labels == c].mean(axis=0)
            else:
                # reseed at the point worst served by its current center
                order = np.argsort(-point_d2, kind="stable")
                far = next(int(i) for i in order if not taken[i])
                taken[far] = True
                new_centers[c] = points[far]
        shift = ((new_centers - centers) ** 2).sum(axis=1).max()
        centers = new_centers
        if shift <= tol_abs:
            d2 = _sq_dist(points, centers)
            labels = d2.argmin(axis=1)
            history.append(float(d2[np.arange(points.shape[0]), labels].sum()))
            break
    return labels, centers, history, it


def kmeans(points, k: int, seed=None, max_iter: int = 300, tol: float = 1e-4,
           n_init: int = 1) -> ClusterResult:
    """Lloyd's algorithm from k-means++ starts.

    ``tol`` is relative to the mean per-coordinate variance of the data, so
    a global rescaling of the points leaves the run unchanged.  With
    ``n_init > 1`` the run with the lowest inertia is kept (first on ties).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain NaN or infinite values")
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tol_abs = tol * float(np.var(pts, axis=0).mean())
    best = None
    for _ in range(n_init):
        centers = kmeans_pp_init(pts, k, rng)
        labels, centers, hist, it = _lloyd(pts, centers, max_iter, tol_abs)
        if best is None or hist[-1] < best.inertia:
            best = ClusterResult(labels + 1, centers, hist[-1], it, tuple(hist))
    return best


def _relabel_by(values: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Rename clusters so that cluster means of ``values`` ascend with the label."""
    means = np.array([values[labels == c].mean() if np.any(labels == c) else np.inf
                      for c in range(1, k + 1)])
    order = np.argsort(means, kind="stable")
    rank = np.empty(k, dtype=int)
    rank[order] = np.arange(1, k + 1)
    return rank[labels - 1]


def baseline_states(x, r: int, seed=None, n_init: int = 1) -> np.ndarray:
    """K-means on the raw values; state 1 is the cluster with the smallest center."""
    v = np.asarray(x, dtype=float)
    if v.shape[0] < r:
        raise ValueError(f"series of length {v.shape[0]} shorter than r={r}")
    distinct = np.unique(v)
    if distinct.shape[0] < r:
        warnings.warn(
            f"only {distinct.shape[0]} distinct values for {r} states; states follow value rank",
            RuntimeWarning,
            stacklevel=2,
        )
        return np.searchsorted(distinct, v) + 1
    res = kmeans(v, r, seed=seed, n_init=n_init)
    return _relabel_by(v, res.labels, r)


def states_from_features(x, features, r: int, seed=None, n_init: int = 1) -> np.ndarray:
    res = kmeans(features, r, seed=seed, n_init=n_init)
    return _relabel_by(np.asarray(x, dtype=float), res.labels, r)


def renes_states(x, cfg: RenesConfig, r: int, p_max: int, seed=None, n_init: int = 1) -> np.ndarray:
    """Transform the series into weighted pre-estimates, cluster, order states by mean count."""
    pre = build_features(x, cfg, p_max)
    return states_from_features(x, pre.features, r, seed=seed, n_init=n_init)


def align_and_count(est, truth, r: int) -> tuple[tuple[int, ...], int]:
    """Best relabeling of ``est`` against ``truth``.

    Returns ``(perm, count)`` where ``perm[l-1]`` is the truth label assigned
    to estimated label ``l``; ties favour the lexicographically first
    permutation.
    """
    est = np.asarray(est, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if est.shape != truth.shape:
        raise ValueError(f"length mismatch: {est.shape[0]} vs {truth.shape[0]}")
    if r > 6:
        raise ValueError("brute-force alignment limited to r <= 6")
    conf = np.zeros((r, r), dtype=int)
    np.add.at(conf, (est - 1, truth - 1), 1)
    best_perm, best = None, -1
    for perm in itertools.permutations(range(r)):
        count = int(conf[np.arange(r), perm].sum())
        if count > best:
            best_perm, best = perm, count
    return tuple(p + 1 for p in best_perm), best


def rms_diff(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def delta_p(x, truth_orders, d_p: int, p_max: int) -> float:
    """RMS difference between the true working orders and their PACF proxy."""
    return rms_diff(truth_orders, p_pre(x, d_p, p_max))


@dataclass
class CalibrationResult:
    best_dp: int | None = None
    best_delta: float | None = None
    dp_table: list = field(default_factory=list)  # (d_p, delta_p)
    best_C: tuple | None = None
    best_matches: int | None = None
    C_table: list = field(default_factory=list)  # (C_m, C_a, C_p, matches)

    @property
    def C_top10(self) -> list:
        return sorted(self.C_table, key=lambda row: (-row[3], row[:3]))[:10]


def search_dp(x, truth_orders, dp_range=range(5, 21), p_max: int = 4) -> CalibrationResult:
    dps = list(dp_range)
    if not dps:
        raise ValueError("empty d_p range")
    res = CalibrationResult()
    for d in dps:
        delta = delta_p(x, truth_orders, d, p_max)
        res.dp_table.append((d, delta))
        if res.best_delta is None or delta < res.best_delta:
            res.best_dp, res.best_delta = d, delta
    return res


def search_C(x, truth, cfg: RenesConfig, r: int, p_max: int, grid=None, seed=0,
             n_init: int = 1) -> CalibrationResult:
    """Exhaustive search of the coordinate weights maximising agreement with ``truth``.

    ``grid`` is a triple of iterables (default ``1..10`` each).  Every cell
    clusters with the same seed, so cells differing by a global factor give
    identical labels.
    """
    if grid is None:
        grid = (range(1, 11),) * 3
    cells = list(itertools.product(*[sorted(g) for g in grid]))
    if not cells:
        raise ValueError("empty C grid")
    base = build_features(x, cfg, p_max).base
    res = CalibrationResult()
    for C in cells:
        labels = kmeans(base * np.asarray(C, dtype=float), r, seed=seed, n_init=n_init).labels
        _, count = align_and_count(labels, truth, r)
        res.C_table.append((*C, count))
        if res.best_matches is None or count > res.best_matches:
            res.best_C, res.best_matches = tuple(C), count
    return res
