"""Conditional pmfs, conditional maximum likelihood and one-step prediction.

Two routes compute the same conditional probabilities:

* ``cond_pmf`` follows the definition literally (explicit convolution of the
  thinned lag with the innovation mixture) and serves as the reference;
* ``LogLikelihood`` precomputes parameter-free parts once per data set and
  evaluates all terms in closed form, which is what the optimiser calls.

The fast route uses two identities: thinning ``x`` followed by an extra
geometric(alpha) count is negative binomial with ``x + 1`` trials, and the
convolution of a negative binomial with a geometric(mu) count is a
truncated power series in ``rho = alpha (1 + mu) / ((1 + alpha) mu)``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import betainc, expit, gammaln, logsumexp

from .model import InfeasibleParameters, ModelParams, OrderRule, order_sequence
from .sampling import innovation_params, mixture_weight

logger = logging.getLogger(__name__)

ALPHA_FLOOR = 1e-10  # relative to the bound; keeps log(alpha) finite
SIMPLEX_STEP = 0.5  # initial simplex edge in the unconstrained coordinates


def geom_pmf(mean: float, t) -> np.ndarray | float:
    """``mean**t / (1 + mean)**(t + 1)``."""
    if not mean > 0:
        raise ValueError(f"geometric mean must be positive, got {mean}")
    t = np.asarray(t)
    if np.any(t < 0):
        raise ValueError("support is the nonnegative integers")
    out = np.exp(t * np.log(mean) - (t + 1) * np.log1p(mean))
    return float(out) if out.ndim == 0 else out


def thin_pmf(x_lag: int, alpha: float, t) -> np.ndarray | float:
    """pmf of ``alpha * x_lag`` (negative binomial with ``x_lag`` trials)."""
    if x_lag < 0:
        raise ValueError("lag value must be nonnegative")
    if not 0 < alpha < 1:
        raise ValueError(f"thinning parameter must lie in (0, 1), got {alpha}")
    t = np.asarray(t)
    if x_lag == 0:
        out = (t == 0).astype(float)
    else:
        logp = (gammaln(t + x_lag) - gammaln(t + 1) - gammaln(x_lag)
                + t * np.log(alpha) - (t + x_lag) * np.log1p(alpha))
        out = np.exp(logp)
    return float(out) if out.ndim == 0 else out


def innov_pmf(mu_cur: float, mu_lag: float, alpha: float, t) -> np.ndarray | float:
    mix = innovation_params(mu_cur, mu_lag, alpha)
    return mix.w * geom_pmf(mix.mean_low, t) + (1.0 - mix.w) * geom_pmf(mix.mean_high, t)


def cond_pmf(n: int, t: int, x, z, params: ModelParams, order_rule: OrderRule = "min") -> float:
    """``P(X_n = t | past)`` at 1-based position ``n`` by explicit convolution."""
    x = np.asarray(x, dtype=int)
    z = np.asarray(z, dtype=int)
    Pn = order_sequence(z, params, order_rule)
    q = int(Pn[n - 1])
    if n < 2 or q < 1:
        raise ValueError(f"no autoregressive term at n={n}")
    j = z[n - 1]
    mu, a = params.M[j - 1], params.A[j - 1]
    probs = params.lag_probs(j, q)
    ks = np.arange(t + 1)
    total = 0.0
    for i in range(1, q + 1):
        if probs[i - 1] == 0:
            continue
        lz = z[n - 1 - i]
        thin = thin_pmf(int(x[n - 1 - i]), a, ks)
        eps = innov_pmf(mu, params.M[lz - 1], a, t - ks)
        total += probs[i - 1] * float(np.dot(thin, eps))
    return total


class LogLikelihood:
    """Vectorised conditional log-likelihood for fixed data, states and orders.

    Only the terms with ``P_n >= 1`` enter (the first observation is
    conditioned on).  Build once per data set, then call with parameters.
    """

    def __init__(self, x, z, variant: str, P, order_rule: OrderRule = "min"):
        self.x = np.asarray(x, dtype=np.int64)
        self.z = np.asarray(z, dtype=np.int64)
        if self.x.shape != self.z.shape:
            raise ValueError("series and states differ in length")
        if np.any(self.x < 0):
            raise ValueError("counts must be nonnegative")
        self.variant = variant
        self.P = np.asarray(P, dtype=int)
        self.r = self.P.shape[0]
        if self.z.size and (self.z.min() < 1 or self.z.max() > self.r):
            raise ValueError(f"states must lie in 1..{self.r}")
        self.order_rule = order_rule
        shell = ModelParams(variant, np.ones(self.r), np.full(self.r, 0.1), self.P,
                            _uniform_phi(variant, self.P))
        self.Pn = order_sequence(self.z, shell, order_rule)

        obs, lag = [], []
        for k in np.flatnonzero(self.Pn >= 1):
            for i in range(1, self.Pn[k] + 1):
                obs.append(k)
                lag.append(i)
        obs = np.array(obs, dtype=np.int64)
        lag = np.array(lag, dtype=np.int64)
        self.obs_index = np.unique(obs)
        self.n_terms = self.obs_index.shape[0]
        self.seg_start = np.searchsorted(obs, self.obs_index)
        self._seg_len = np.diff(np.append(self.seg_start, obs.shape[0]))
        self.lag = lag
        self.xn = self.x[obs]
        self.xl = self.x[obs - lag]
        self.zc = self.z[obs] - 1
        self.zl = self.z[obs - lag] - 1
        self.q = self.Pn[obs]
        self.pairs = np.zeros((self.r, self.r), dtype=bool)
        self.pairs[self.zl, self.zc] = True
        self._pair_id = self.zl * self.r + self.zc
        xn, xl = self.xn.astype(float), self.xl.astype(float)
        self._nb_comb = gammaln(xn + xl + 1) - gammaln(xn + 1) - gammaln(xl + 1)

        # power-series coefficients for every distinct (lag value, count, state)
        keys = np.stack([self.xl, self.xn, self.zc], axis=1)
        uniq, inv = np.unique(keys, axis=0, return_inverse=True) if keys.size else (np.zeros((0, 3), int), np.zeros(0, int))
        self._inv = np.asarray(inv).reshape(-1)
        self._u_state = uniq[:, 2] if uniq.size else np.zeros(0, dtype=int)
        kmax = int(uniq[:, 1].max()) if uniq.size else 0
        ks = np.arange(kmax + 1, dtype=float)
        ul = uniq[:, 0:1].astype(float) if uniq.size else np.zeros((0, 1))
        un = uniq[:, 1:2].astype(float) if uniq.size else np.zeros((0, 1))
        with np.errstate(invalid="ignore", divide="ignore"):
            lb = gammaln(ks + ul) - gammaln(ks + 1) - gammaln(np.maximum(ul, 1))
        lb = np.where(ul == 0, np.where(ks == 0, 0.0, -np.inf), lb)
        lb = np.where(ks <= un, lb, -np.inf)
        self._u_xl = ul[:, 0]
        self._u_t = un[:, 0]
        self._lb = lb
        self._ks = ks

        # offsets of the lag-probability rows used by the data
        self.rows = sorted({(int(c), int(q)) for c, q in zip(self.zc, self.q)})
        self._row_offset = {}
        off = 0
        for c, q in self.rows:
            self._row_offset[(c, q)] = off
            off += q
        self._phi_index = np.array(
            [self._row_offset[(int(c), int(q))] + int(i) - 1 for c, q, i in zip(self.zc, self.q, self.lag)],
            dtype=np.int64,
        )
        self._phi_len = off

    def _log_series(self, log_rho) -> np.ndarray:
        """``log sum_{k<=t} C(k+x-1, k) rho**k`` per distinct ``(x, t, state)``.

        Closed form through the negative binomial cdf,
        ``(1-rho)**(-x) * I_{1-rho}(x, t+1)``; falls back to direct
        summation where the regularised beta function underflows.
        """
        xl, t = self._u_xl, self._u_t
        one_minus = -np.expm1(log_rho)
        with np.errstate(divide="ignore"):
            ib = np.where(xl > 0, betainc(np.maximum(xl, 1), t + 1, one_minus), 1.0)
            out = np.log(ib) - np.where(xl > 0, xl * np.log(one_minus), 0.0)
        bad = ~(ib > 0)
        if np.any(bad):
            expo = self._lb[bad] + self._ks * log_rho[bad][:, None]
            out[bad] = logsumexp(expo, axis=1)
        return out

    def row_probs(self, params: ModelParams) -> np.ndarray:
        flat = np.empty(self._phi_len)
        for (c, q), off in self._row_offset.items():
            flat[off:off + q] = params.lag_probs(c + 1, q)
        return flat

    def term_logs(self, M, A, flat_phi) -> np.ndarray:
        """Log conditional probability of each observation with ``P_n >= 1``."""
        M = np.asarray(M, dtype=float)
        A = np.asarray(A, dtype=float)
        if self.n_terms == 0:
            return np.zeros(0)
        if np.any(A >= M) or np.any(A <= 0):
            raise InfeasibleParameters("thinning parameters outside (0, mu)")
        w = mixture_weight(M[None, :], M[:, None], A[None, :])  # [lag state, current state]
        if np.any(w[self.pairs] > 1.0 + 1e-12):
            raise InfeasibleParameters("thinning parameters exceed the feasible bound")
        w = np.clip(w, 0.0, 1.0).ravel()
        la, l1a, lm, l1m = np.log(A), np.log1p(A), np.log(M), np.log1p(M)
        zc, pid = self.zc, self._pair_id
        xn, xl = self.xn, self.xl
        log_u = self._log_series((la + l1m - l1a - lm)[self._u_state])
        with np.errstate(divide="ignore"):
            lw, l1w = np.log(w), np.log1p(-w)
            first = lw[pid] + self._nb_comb + xn * la[zc] - (xn + xl + 1) * l1a[zc]
            second = l1w[pid] + xn * lm[zc] - (xn + 1) * l1m[zc] - xl * l1a[zc] + log_u[self._inv]
            v = np.logaddexp(first, second) + np.log(np.asarray(flat_phi))[self._phi_index]
        peak = np.maximum.reduceat(v, self.seg_start)
        peak_safe = np.where(np.isfinite(peak), peak, 0.0)
        s = np.add.reduceat(np.exp(v - np.repeat(peak_safe, self._seg_len)), self.seg_start)
        with np.errstate(divide="ignore"):
            return np.log(s) + peak_safe

    def __call__(self, params: ModelParams) -> float:
        logs = self.term_logs(params.M, params.A, self.row_probs(params))
        bad = ~np.isfinite(logs)
        if np.any(bad):
            n = int(self.obs_index[np.flatnonzero(bad)[0]]) + 1
            raise FloatingPointError(f"observation at n={n} has zero conditional probability")
        return float(logs.sum())


def loglik(x, z, params: ModelParams, order_rule: OrderRule = "min") -> float:
    """Conditional log-likelihood of ``x`` given states ``z`` and parameters."""
    return LogLikelihood(x, z, params.variant, params.P, order_rule)(params)


def _uniform_phi(variant, P) -> tuple:
    out = []
    for p in np.asarray(P, dtype=int):
        if variant == "max":
            out.append(np.tril(np.ones((p, p))) / np.arange(1, p + 1)[:, None])
        else:
            out.append(np.full(p, 1.0 / p))
    return tuple(out)


@dataclass
class FitResult:
    variant: str
    P: np.ndarray
    M_hat: np.ndarray
    A_hat: np.ndarray
    phi_hat: tuple
    loglik: float
    converged: bool
    iterations: int
    rms: float | None = None
    restarts: list = field(default_factory=list, repr=False)

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.variant, self.M_hat, self.A_hat, self.P, self.phi_hat)


class _Transform:
    """Map an unconstrained vector to feasible parameters.

    Layout: ``log mu`` for each free state, a logit per free state scaling
    ``alpha`` into ``(0, bound)``, then softmax logits (first fixed at 0)
    for every lag-probability row the data uses with more than one lag.
    """

    def __init__(self, ll: LogLikelihood, free_states: np.ndarray, M0, A0, phi0):
        self.ll = ll
        self.free = free_states
        self.M0 = np.asarray(M0, dtype=float)
        self.A0 = np.asarray(A0, dtype=float)
        self.phi0 = phi0
        self.rows = [(c, q) for c, q in ll.rows if q > 1 and free_states[c]]
        nf = int(free_states.sum())
        self.n_mu = nf
        self.size = 2 * nf + sum(q - 1 for _, q in self.rows)

    def bounds(self, M):
        return _alpha_bounds(M, self.ll.pairs)

    def unpack_flat(self, theta, flat0):
        """Like ``unpack`` but fills the data's lag-probability vector directly."""
        M, A = self._mu_alpha(theta)
        flat = flat0.copy()
        pos = 2 * self.n_mu
        for c, q in self.rows:
            logits = np.concatenate([[0.0], theta[pos:pos + q - 1]])
            pos += q - 1
            e = np.exp(logits - logits.max())
            off = self.ll._row_offset[(c, q)]
            flat[off:off + q] = e / e.sum()
        return M, A, flat

    def _mu_alpha(self, theta):
        M = self.M0.copy()
        nf = self.n_mu
        M[self.free] = np.exp(theta[:nf])
        bound = self.bounds(M)
        A = self.A0.copy()
        A[self.free] = bound[self.free] * np.clip(expit(theta[nf:2 * nf]), ALPHA_FLOOR, 1.0)
        # frozen states keep their alpha only while still feasible
        return M, np.minimum(A, bound)

    def unpack(self, theta):
        M, A = self._mu_alpha(theta)
        phi = [np.array(f, dtype=float) for f in self.phi0]
        pos = 2 * self.n_mu
        for c, q in self.rows:
            logits = np.concatenate([[0.0], theta[pos:pos + q - 1]])
            pos += q - 1
            e = np.exp(logits - logits.max())
            probs = e / e.sum()
            if self.ll.variant == "max":
                phi[c][q - 1, :q] = probs
            else:
                phi[c][:] = probs
        return M, A, tuple(phi)

    def pack(self, M, A, phi):
        M = np.asarray(M, dtype=float)
        bound = self.bounds(M)
        frac = np.clip(np.asarray(A)[self.free] / bound[self.free], 1e-6, 1 - 1e-6)
        parts = [np.log(M[self.free]), np.log(frac) - np.log1p(-frac)]
        for c, q in self.rows:
            row = phi[c][q - 1, :q] if self.ll.variant == "max" else phi[c]
            row = np.clip(row, 1e-9, None)
            parts.append(np.log(row[1:]) - np.log(row[0]))
        return np.concatenate(parts)


def _alpha_bounds(M, pairs):
    # pairs[i, j]: lag state i precedes current state j somewhere in the data
    ratio = M[None, :] / (1.0 + M[:, None])
    ratio = np.where(pairs, ratio, np.inf).min(axis=0)
    return np.where(np.isfinite(ratio), ratio, M / (1.0 + M))


def cml_fit(x, z, variant: str, P, order_rule: OrderRule = "min", seed=0, restarts: int = 5,
            maxfev: int = 5000, fatol: float = 1e-8) -> FitResult:
    """Conditional maximum likelihood given the state sequence.

    Nelder-Mead on an unconstrained reparametrisation, started from
    within-state moments (``alpha`` at half its bound, uniform lag
    probabilities) and from ``restarts - 1`` seeded perturbations of that
    start.  The best run is returned; ``converged`` reports whether any run
    met the tolerance.
    """
    x = np.asarray(x, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    P = np.asarray(P, dtype=int)
    r = P.shape[0]
    ll = LogLikelihood(x, z, variant, P, order_rule)
    counts = np.bincount(z - 1, minlength=r)
    free = counts > 0
    overall = max(float(x.mean()), 0.05) if x.size else 1.0
    M0 = np.array([max(float(x[z == j + 1].mean()), 0.05) if free[j] else overall for j in range(r)])
    for j in np.flatnonzero(~free):
        warnings.warn(f"state {j + 1} has no observations; its parameters stay at the start values",
                      RuntimeWarning, stacklevel=2)
    A0 = 0.5 * _alpha_bounds(M0, ll.pairs)
    phi0 = _uniform_phi(variant, P)
    tr = _Transform(ll, free, M0, A0, phi0)
    theta0 = tr.pack(M0, A0, phi0)
    rng = np.random.default_rng(seed)

    flat0 = ll.row_probs(ModelParams(variant, M0, A0, P, phi0))

    def objective(theta):
        M, A, flat = tr.unpack_flat(theta, flat0)
        try:
            logs = ll.term_logs(M, A, flat)
        except InfeasibleParameters:
            return np.inf
        total = logs.sum()
        return -total if np.isfinite(total) else np.inf

    runs = []
    best = None
    total_fev = 0
    for k in range(max(1, restarts)):
        start = theta0 if k == 0 else theta0 + rng.normal(0.0, 0.5, size=theta0.shape)
        if tr.size == 0:
            runs.append((objective(start), True, 0))
            best = (runs[-1][0], start)
            break
        simplex = np.vstack([start, start + SIMPLEX_STEP * np.eye(start.shape[0])])
        # stop on the loglik spread only: flat directions (alpha or a lag
        # probability heading to 0) never settle in the unconstrained space
        res = minimize(objective, start, method="Nelder-Mead",
                       options={"maxfev": maxfev, "fatol": fatol, "xatol": np.inf,
                                "adaptive": True, "initial_simplex": simplex})
        total_fev += int(res.nfev)
        runs.append((float(res.fun), bool(res.success), int(res.nfev)))
        if best is None or res.fun < best[0]:
            best = (float(res.fun), res.x)
    M, A, phi = tr.unpack(best[1])
    converged = any(ok for _, ok, _ in runs)
    if not converged:
        logger.warning("CML fit did not converge in %d restarts", len(runs))
    return FitResult(variant, P, M, A, phi, -best[0], converged, total_fev, restarts=runs)


@dataclass(frozen=True)
class PredSeries:
    xhat: np.ndarray
    defined: np.ndarray  # True where a conditional prediction exists (P_n >= 1)


def predict(x, z, params: ModelParams, order_rule: OrderRule = "min") -> PredSeries:
    """One-step conditional expectations ``E[X_n | past, states]``.

    Positions without autoregressive terms get the state mean.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=int)
    Pn = order_sequence(z, params, order_rule)
    M, A = params.M, params.A
    xhat = M[z - 1].astype(float)
    for k in np.flatnonzero(Pn >= 1):
        j = z[k]
        q = int(Pn[k])
        probs = params.lag_probs(j, q)
        a, mu = A[j - 1], M[j - 1]
        lags = np.arange(1, q + 1)
        xhat[k] = float(np.dot(probs, a * x[k - lags] + mu - a * M[z[k - lags] - 1]))
    return PredSeries(xhat, Pn >= 1)


def rms(x, xhat, defined=None) -> float:
    """Root mean square of ``x - xhat`` over positions with a defined prediction."""
    if isinstance(xhat, PredSeries):
        defined = xhat.defined if defined is None else defined
        xhat = xhat.xhat
    x = np.asarray(x, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    if x.shape != xhat.shape:
        raise ValueError("length mismatch")
    mask = np.ones(x.shape, dtype=bool) if defined is None else np.asarray(defined, dtype=bool)
    if not mask.any():
        raise ValueError("no positions to evaluate")
    return float(np.sqrt(np.mean((x[mask] - xhat[mask]) ** 2)))
