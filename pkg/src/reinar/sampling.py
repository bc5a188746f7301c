"""Samplers: geometric counts, negative binomial thinning, innovations, full series.

Random streams
--------------
``simulate`` derives four independent generators from one integer seed via
``numpy.random.SeedSequence(seed).spawn(4)``, in this order:

0. environment chain,
1. lag choice,
2. thinning counters,
3. innovations and marginal draws.

Changing how one component consumes randomness therefore never shifts the
others.  All generators are PCG64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    FEAS_TOL,
    EnvChainSpec,
    InfeasibleParameters,
    ModelParams,
    OrderRule,
    order_sequence,
    sample_env,
    validate_model,
)

STREAMS = ("env", "lag", "thin", "innov")


def spawn_streams(seed) -> dict[str, np.random.Generator]:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return {name: np.random.Generator(np.random.PCG64(s)) for name, s in zip(STREAMS, ss.spawn(4))}


def _log_ratio(mean: float) -> float:
    # log(mean / (1 + mean)), stable for tiny means
    return -np.log1p(1.0 / mean)


def geom_from_uniform(mean, u):
    """Inverse-CDF transform: ``P(U >= k) = (mean/(1+mean))**k``."""
    return np.floor(np.log1p(-np.asarray(u)) / _log_ratio(mean)).astype(np.int64)


def geom_sample(mean: float, rng: np.random.Generator, size=None):
    """Geometric count on ``{0, 1, ...}`` with the given mean."""
    if not mean > 0:
        raise ValueError(f"geometric mean must be positive, got {mean}")
    u = rng.random(size)
    out = geom_from_uniform(mean, u)
    return int(out) if size is None else out


def nb_thin(alpha: float, x: int, rng: np.random.Generator) -> int:
    """Negative binomial thinning ``alpha * x``: a sum of ``x`` geometric(alpha) counts."""
    if not 0 < alpha < 1:
        raise ValueError(f"thinning parameter must lie in (0, 1), got {alpha}")
    if x < 0:
        raise ValueError("cannot thin a negative count")
    if x == 0:
        return 0
    return int(geom_from_uniform(alpha, rng.random(int(x))).sum())


@dataclass(frozen=True)
class InnovationMixture:
    """With probability ``w`` a geometric(``mean_low``) count, else geometric(``mean_high``)."""

    w: float
    mean_low: float
    mean_high: float

    @property
    def mean(self) -> float:
        return self.w * self.mean_low + (1.0 - self.w) * self.mean_high


def mixture_weight(mu_cur, mu_lag, alpha):
    """Weight of the geometric(alpha) component; vectorised, no checks."""
    return alpha * mu_lag / (mu_cur - alpha)


def innovation_params(mu_cur: float, mu_lag: float, alpha: float) -> InnovationMixture:
    """Innovation law that keeps the marginal of ``X_n`` geometric(mu_cur).

    Given ``X_lag ~ geometric(mu_lag)``, ``alpha * X_lag`` has pgf
    ``(1 + a u) / (1 + a (1 + mu_lag) u)`` with ``u = 1 - s``.  Dividing the
    target pgf ``1 / (1 + mu_cur u)`` by it leaves a two-point mixture of
    geometric(alpha) and geometric(mu_cur) with weight
    ``alpha * mu_lag / (mu_cur - alpha)`` on the first.
    """
    if not (mu_cur > 0 and mu_lag > 0 and 0 < alpha < 1):
        raise InfeasibleParameters(f"bad innovation inputs mu_cur={mu_cur}, mu_lag={mu_lag}, alpha={alpha}")
    if alpha >= mu_cur:
        raise InfeasibleParameters(f"alpha={alpha} must be below mu_cur={mu_cur}")
    w = mixture_weight(mu_cur, mu_lag, alpha)
    if w > 1.0 + FEAS_TOL:
        raise InfeasibleParameters(
            f"alpha={alpha} exceeds mu_cur/(1+mu_lag)={mu_cur / (1 + mu_lag):g} (mixture weight {w:g})"
        )
    return InnovationMixture(min(w, 1.0), alpha, mu_cur)


def innovation_sample(mix: InnovationMixture, rng: np.random.Generator) -> int:
    u_mix, u_geo = rng.random(2)
    mean = mix.mean_low if u_mix < mix.w else mix.mean_high
    return int(geom_from_uniform(mean, u_geo))


@dataclass(frozen=True)
class SimOutput:
    x: np.ndarray
    z: np.ndarray
    P: np.ndarray
    lag: np.ndarray

    def __len__(self):
        return int(self.x.shape[0])


def simulate(params: ModelParams, env: EnvChainSpec | np.ndarray, N: int | None = None,
             seed=None, order_rule: OrderRule = "min") -> SimOutput:
    """Simulate a series from the model.

    Args:
        params: model parameters.
        env: either a chain spec (states are sampled) or a fixed 1-based
            state sequence, in which case ``N`` defaults to its length.
        N: series length.
        seed: integer seed or ``SeedSequence``; the run is a pure function
            of it.
        order_rule: working-order rule for the ``max`` variant.
    """
    streams = spawn_streams(seed)
    if isinstance(env, EnvChainSpec):
        if N is None:
            raise ValueError("N is required when sampling the environment")
        errs = validate_model(params, env, order_rule)
        if errs:
            raise InfeasibleParameters("; ".join(errs))
        z = sample_env(env, N, streams["env"])
    else:
        z = np.asarray(env, dtype=int)
        if N is not None and N != z.shape[0]:
            raise ValueError(f"state sequence has length {z.shape[0]}, N={N}")
        N = z.shape[0]
        errs = validate_model(params, None, order_rule)
        if errs:
            # only pairs that actually occur have to be feasible
            errs = [e for e in errs if not e.startswith("feasibility")]
            if errs:
                raise InfeasibleParameters("; ".join(errs))
    if N < 1:
        raise ValueError("series length must be >= 1")

    Pn = order_sequence(z, params, order_rule)
    rng_lag, rng_thin, rng_innov = streams["lag"], streams["thin"], streams["innov"]
    u_lag = rng_lag.random(N)
    u_mix = rng_innov.random(N)
    u_geo = rng_innov.random(N)

    M, A = params.M, params.A
    log_ratio = {}
    cum_lag = {}
    weights = {}
    x = np.zeros(N, dtype=np.int64)
    lag = np.zeros(N, dtype=np.int64)
    for k in range(N):
        j = z[k]
        q = Pn[k]
        mu = M[j - 1]
        if q == 0:
            x[k] = geom_from_uniform(mu, u_geo[k])
            continue
        key = (j, q)
        cum = cum_lag.get(key)
        if cum is None:
            cum = cum_lag[key] = np.cumsum(params.lag_probs(j, q))
        i = min(int(np.searchsorted(cum, u_lag[k], side="right")), q - 1) + 1
        lag[k] = i
        a = A[j - 1]
        lz = z[k - i]
        w = weights.get((lz, j))
        if w is None:
            w = weights[(lz, j)] = innovation_params(mu, M[lz - 1], a).w
        prev = int(x[k - i])
        thin = 0
        if prev:
            lr = log_ratio.get(a)
            if lr is None:
                lr = log_ratio[a] = _log_ratio(a)
            thin = int(np.floor(np.log1p(-rng_thin.random(prev)) / lr).sum())
        mean = a if u_mix[k] < w else mu
        x[k] = thin + geom_from_uniform(mean, u_geo[k])
    return SimOutput(x=x, z=z.astype(np.int64), P=Pn.astype(np.int64), lag=lag)
