"""Pre-estimate sequences used as clustering features.

From a raw count series three per-time-point proxies are built: the value
itself (mean proxy), a windowed PACF cut-off (order proxy) and a ratio of
positive excesses (thinning proxy).  Each is smoothed with a symmetric
weighted mean, normalised to sum to the series length, and weighted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SUM_TOL = 1e-12

TSummand = Literal["neighbor", "center"]
OrderStat = Literal["argmax", "max_value"]
BWindow = Literal["recent", "head"]


def check_weights(c: Sequence[float]) -> tuple[float, ...]:
    """Validate a smoothing weight vector ``(c_0, ..., c_k)``."""
    c = tuple(float(v) for v in np.atleast_1d(c))
    if not 1 <= len(c) <= 5:
        raise ValueError(f"weight vector must have 1..5 entries, got {len(c)}")
    if any(v <= 0 for v in c):
        raise ValueError(f"weights must be positive: {c}")
    if any(c[i] < c[i + 1] for i in range(len(c) - 1)):
        raise ValueError(f"weights must be non-increasing: {c}")
    total = c[0] + 2.0 * sum(c[1:])
    if abs(total - 1.0) > SUM_TOL:
        raise ValueError(f"weights must satisfy c0 + 2*sum(c1..ck) = 1, got {total:.15g}")
    return c


@dataclass(frozen=True)
class RenesConfig:
    """Parameters of the transform-then-cluster state estimator.

    The three ``*_literal`` style switches select alternative readings of
    the construction; defaults are the consistent ones.

    ``t_summand``: ``"neighbor"`` weights the neighbours ``a_j``;
    ``"center"`` repeats the centre value (which makes smoothing a no-op).
    ``order_stat``: ``"argmax"`` returns the lag with the largest PACF,
    ``"max_value"`` the largest PACF value itself.
    ``b_window``: ``"recent"`` averages the ``s`` most recent excesses,
    ``"head"`` the first ``s`` excesses of the series.
    """

    d_p: int = 8
    c_m: tuple = (0.16, 0.14, 0.14, 0.14)
    c_a: tuple = (0.16, 0.14, 0.14, 0.14)
    c_p: tuple = (0.16, 0.14, 0.14, 0.14)
    C_m: float = 1.0
    C_a: float = 1.0
    C_p: float = 1.0
    t_summand: TSummand = "neighbor"
    order_stat: OrderStat = "argmax"
    b_window: BWindow = "recent"

    def __post_init__(self):
        if int(self.d_p) != self.d_p or self.d_p < 1:
            raise ValueError(f"d_p must be a positive integer, got {self.d_p}")
        object.__setattr__(self, "d_p", int(self.d_p))
        for name in ("c_m", "c_a", "c_p"):
            object.__setattr__(self, name, check_weights(getattr(self, name)))
        for name in ("C_m", "C_a", "C_p"):
            v = float(getattr(self, name))
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
            object.__setattr__(self, name, v)
        if self.t_summand not in ("neighbor", "center"):
            raise ValueError(f"unknown t_summand {self.t_summand!r}")
        if self.order_stat not in ("argmax", "max_value"):
            raise ValueError(f"unknown order_stat {self.order_stat!r}")
        if self.b_window not in ("recent", "head"):
            raise ValueError(f"unknown b_window {self.b_window!r}")

    @property
    def C(self) -> np.ndarray:
        return np.array([self.C_m, self.C_a, self.C_p])

    def with_C(self, C_m, C_a, C_p) -> "RenesConfig":
        d = self.to_dict()
        d.update(C_m=C_m, C_a=C_a, C_p=C_p)
        return RenesConfig(**d)

    def with_dp(self, d_p: int) -> "RenesConfig":
        d = self.to_dict()
        d["d_p"] = d_p
        return RenesConfig(**d)

    def to_dict(self) -> dict:
        return {
            "d_p": self.d_p,
            "c_m": list(self.c_m),
            "c_a": list(self.c_a),
            "c_p": list(self.c_p),
            "C_m": self.C_m,
            "C_a": self.C_a,
            "C_p": self.C_p,
            "t_summand": self.t_summand,
            "order_stat": self.order_stat,
            "b_window": self.b_window,
        }


@dataclass(frozen=True)
class PreEstimates:
    mu_raw: np.ndarray
    alpha_raw: np.ndarray
    p_raw: np.ndarray
    mu_t: np.ndarray
    alpha_t: np.ndarray
    p_t: np.ndarray
    base: np.ndarray  # unweighted scaled coordinates, N x 3
    features: np.ndarray = field(repr=False)


def trim(seq, c, t_summand: TSummand = "neighbor") -> np.ndarray:
    """Symmetric weighted mean of every element; the ``k`` edge elements are kept."""
    a = np.asarray(seq, dtype=float)
    c = check_weights(c)
    k = len(c) - 1
    n = a.shape[0]
    out = a.copy()
    if k == 0 or n <= 2 * k or t_summand == "center":
        return out
    w = np.array(c[::-1] + c[1:])
    out[k:n - k] = sliding_window_view(a, 2 * k + 1) @ w
    return out


def trimmed(seq, c, i: int, t_summand: TSummand = "neighbor") -> float:
    """Smoothed value at 1-based index ``i``."""
    a = np.asarray(seq, dtype=float)
    n = a.shape[0]
    if not 1 <= i <= n:
        raise IndexError(f"index {i} outside 1..{n}")
    c = check_weights(c)
    k = len(c) - 1
    if i <= k or i > n - k or t_summand == "center":
        return float(a[i - 1])
    return float(sum(c[abs(j - i)] * a[j - 1] for j in range(i - k, i + k + 1)))


def scaled(seq, c, t_summand: TSummand = "neighbor") -> np.ndarray:
    """Smoothed sequence normalised to sum to its length; invariant to positive rescaling."""
    t = trim(seq, c, t_summand)
    total = t.sum()
    if not total > 0:
        raise ValueError("smoothed sequence has non-positive sum; coordinate carries no information")
    return t * t.shape[0] / total


def mu_pre(x) -> np.ndarray:
    return np.asarray(x, dtype=float).copy()


def _acov(windows: np.ndarray, max_lag: int) -> np.ndarray:
    d = windows - windows.mean(axis=-1, keepdims=True)
    n = windows.shape[-1]
    g = np.empty(windows.shape[:-1] + (max_lag + 1,))
    for h in range(max_lag + 1):
        g[..., h] = (d[..., h:] * d[..., :n - h]).sum(axis=-1) / n
    return g


def durbin_levinson(gamma: np.ndarray) -> np.ndarray:
    """PACF at lags ``1..K`` from autocovariances ``gamma[..., 0..K]``.

    Works on a stack of autocovariance vectors.  Where the prediction error
    variance collapses the remaining partial autocorrelations are set to 0.
    """
    gamma = np.asarray(gamma, dtype=float)
    K = gamma.shape[-1] - 1
    batch = gamma.shape[:-1]
    out = np.zeros(batch + (K,))
    phi = np.zeros(batch + (K,))
    v = gamma[..., 0].copy()
    alive = v > 0
    for k in range(1, K + 1):
        acc = gamma[..., k] - (phi[..., :k - 1] * gamma[..., k - 1:0:-1]).sum(axis=-1)
        safe_v = np.where(alive, v, 1.0)
        pk = np.where(alive, acc / safe_v, 0.0)
        new = phi.copy()
        new[..., :k - 1] = phi[..., :k - 1] - pk[..., None] * phi[..., k - 2::-1] if k > 1 else phi[..., :0]
        new[..., k - 1] = pk
        phi = new
        out[..., k - 1] = pk
        v = v * (1.0 - pk ** 2)
        alive = alive & (v > 1e-12 * np.maximum(gamma[..., 0], 1e-300))
    return out


def pacf(window, max_lag: int) -> np.ndarray:
    """Sample partial autocorrelations at lags ``1..max_lag`` (biased autocovariances)."""
    w = np.asarray(window, dtype=float)
    if w.shape[0] < max_lag + 1:
        raise ValueError(f"window of length {w.shape[0]} too short for lag {max_lag}")
    g = _acov(w, max_lag)
    if not g[0] > 0:
        raise ValueError("window has zero variance")
    return durbin_levinson(g)


def p_pre(x, d_p: int, p_max: int, order_stat: OrderStat = "argmax") -> np.ndarray:
    """Order proxy per time point from the PACF of a ``2*d_p+1`` window.

    Edge points reuse the first or last full window.  Zero-variance windows
    map to order 1.
    """
    a = np.asarray(x, dtype=float)
    n = a.shape[0]
    width = 2 * d_p + 1
    if n < width:
        raise ValueError(f"series of length {n} shorter than one window ({width})")
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    if width < p_max + 1:
        raise ValueError(f"window width {width} too short for lag {p_max}")
    windows = sliding_window_view(a, width)  # window m covers x[m .. m+width-1]
    g = _acov(windows, p_max)
    flat = g[:, 0] <= 0
    pac = durbin_levinson(g)
    if order_stat == "argmax":
        stat = np.argmax(pac, axis=1).astype(float) + 1.0
        stat[flat] = 1.0
    elif order_stat == "max_value":
        stat = pac.max(axis=1)
        stat[flat] = 1.0
    else:
        raise ValueError(f"unknown order_stat {order_stat!r}")
    idx = np.clip(np.arange(n) - d_p, 0, n - width)
    return stat[idx]


def alpha_pre(x, mu_trimmed, p_t, b_window: BWindow = "recent") -> np.ndarray:
    """Thinning proxy: positive excess over the smoothed mean relative to its recent average."""
    x = np.asarray(x, dtype=float)
    mt = np.asarray(mu_trimmed, dtype=float)
    pt = np.asarray(p_t, dtype=float)
    n = x.shape[0]
    if not (mt.shape[0] == n and pt.shape[0] == n):
        raise ValueError("length mismatch")
    if n < 2:
        raise ValueError("need at least two observations")
    A = np.maximum(x - mt, 0.0)
    csum = np.concatenate([[0.0], np.cumsum(A)])
    B = np.zeros(n)
    has_b = np.zeros(n, dtype=bool)
    for k in range(1, n):  # 0-based k is time point n = k + 1
        s = int(min(k, max(1, round(pt[k]))))
        if b_window == "recent":
            B[k] = (csum[k] - csum[k - s]) / s
        else:
            B[k] = csum[s] / s
        has_b[k] = True
    ratio_ok = has_b & (B > 0)
    ratios = np.zeros(n)
    ratios[ratio_ok] = A[ratio_ok] / B[ratio_ok]
    fallback = ratios[ratio_ok].max() if ratio_ok.any() else 1.0
    star = np.full(n, fallback)
    star[ratio_ok] = ratios[ratio_ok]
    star[has_b & (B == 0) & (A == 0)] = 1.0
    top = star.max()
    if top > 0:
        return star / top
    return star


def build_features(x, cfg: RenesConfig, p_max: int) -> PreEstimates:
    """Pre-estimates and the weighted clustering features for a count series."""
    mu = mu_pre(x)
    mu_t = trim(mu, cfg.c_m, cfg.t_summand)
    p_raw = p_pre(x, cfg.d_p, p_max, cfg.order_stat)
    alpha_raw = alpha_pre(x, mu_t, p_raw, cfg.b_window)
    alpha_t = trim(alpha_raw, cfg.c_a, cfg.t_summand)
    p_t = trim(p_raw, cfg.c_p, cfg.t_summand)
    n = mu.shape[0]
    cols = []
    for name, t in (("mean", mu_t), ("thinning", alpha_t), ("order", p_t)):
        total = t.sum()
        if not total > 0:
            raise ValueError(f"{name} pre-estimate sums to {total}; cannot scale")
        cols.append(t * n / total)
    base = np.column_stack(cols)
    return PreEstimates(mu, alpha_raw, p_raw, mu_t, alpha_t, p_t, base, base * cfg.C)
