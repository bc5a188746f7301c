"""Random environment chain, model parameter sets and working-order rules.

States are 1-based everywhere in the public API (``z`` takes values in
``1..r``).  The transition matrix follows the column-conditioning
convention: ``p_mat[i, j] = P(Z_n = i+1 | Z_{n-1} = j+1)``, so every column
is a probability distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

Variant = Literal["max", "one"]
OrderRule = Literal["min", "literal_max"]

PROB_TOL = 1e-12
# slack for boundary parameter sets such as alpha = mu / (1 + mu)
FEAS_TOL = 1e-12


class InfeasibleParameters(ValueError):
    """Raised when a parameter combination cannot produce a valid process."""


@dataclass(frozen=True)
class EnvChainSpec:
    """Markov chain driving the environment states."""

    p_vec: np.ndarray
    p_mat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_vec", np.asarray(self.p_vec, dtype=float))
        object.__setattr__(self, "p_mat", np.atleast_2d(np.asarray(self.p_mat, dtype=float)))

    @property
    def r(self) -> int:
        return int(self.p_vec.shape[0])

    def violations(self) -> list[str]:
        out = []
        r = self.r
        if r < 1:
            out.append("r must be >= 1")
            return out
        if self.p_mat.shape != (r, r):
            out.append(f"p_mat has shape {self.p_mat.shape}, expected ({r}, {r})")
            return out
        if np.any(self.p_vec < 0):
            out.append("p_vec has negative entries")
        if abs(self.p_vec.sum() - 1.0) > PROB_TOL:
            out.append(f"p_vec sums to {self.p_vec.sum():.15g}, not 1")
        if np.any(self.p_mat < 0):
            out.append("p_mat has negative entries")
        col = self.p_mat.sum(axis=0)
        for j in np.flatnonzero(np.abs(col - 1.0) > PROB_TOL):
            out.append(f"p_mat column {j + 1} sums to {col[j]:.15g}, not 1")
        return out

    def validate(self) -> None:
        errs = self.violations()
        if errs:
            raise InfeasibleParameters("; ".join(errs))


@dataclass(frozen=True)
class ModelParams:
    """Per-state parameters of the random-environment geometric INAR model.

    Attributes:
        variant: ``"max"`` or ``"one"``; selects how the working order is
            built from the state run length.
        M: per-state geometric means.
        A: per-state thinning parameters.
        P: per-state maximal orders.
        phi: per state, a ``p_j x p_j`` lower-triangular row-stochastic
            matrix (``max``) or a probability vector of length ``p_j``
            (``one``).
    """

    variant: Variant
    M: np.ndarray
    A: np.ndarray
    P: np.ndarray
    phi: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.variant not in ("max", "one"):
            raise ValueError(f"unknown variant {self.variant!r}")
        object.__setattr__(self, "M", np.asarray(self.M, dtype=float))
        object.__setattr__(self, "A", np.asarray(self.A, dtype=float))
        object.__setattr__(self, "P", np.asarray(self.P, dtype=int))
        phi = tuple(np.asarray(f, dtype=float) for f in self.phi)
        object.__setattr__(self, "phi", phi)

    @property
    def r(self) -> int:
        return int(self.M.shape[0])

    def lag_probs(self, state: int, order: int) -> np.ndarray:
        """Lag-choice probabilities ``(phi_{1,q}, ..., phi_{q,q})`` for 1-based ``state``."""
        f = self.phi[state - 1]
        if self.variant == "max":
            return f[order - 1, :order]
        if order == 1:
            return np.ones(1)
        return f

    def relabeled(self, perm: Sequence[int]) -> "ModelParams":
        """Parameters with new state ``k`` taking old state ``perm[k]`` (0-based)."""
        perm = list(perm)
        return ModelParams(
            self.variant,
            self.M[perm],
            self.A[perm],
            self.P[perm],
            tuple(self.phi[k] for k in perm),
        )


def alpha_bounds(M: np.ndarray, pairs: np.ndarray | None = None) -> np.ndarray:
    """Largest feasible thinning parameter per current state.

    ``pairs`` is a boolean ``r x r`` mask, ``pairs[i, j]`` True when lag state
    ``i`` may precede current state ``j``.  Defaults to all pairs.
    """
    M = np.asarray(M, dtype=float)
    r = M.shape[0]
    if pairs is None:
        pairs = np.ones((r, r), dtype=bool)
    ratio = M[None, :] / (1.0 + M[:, None])
    ratio = np.where(pairs, ratio, np.inf)
    out = ratio.min(axis=0)
    # a state that is never preceded by anything only appears at startup
    return np.where(np.isfinite(out), out, M / (1.0 + M))


def reachable_pairs(env: EnvChainSpec | None, r: int, order_rule: OrderRule = "min") -> np.ndarray:
    """Boolean mask of (lag state, current state) pairs that can occur.

    Under the ``min`` rule every lag lies inside the run ending at ``n-1``,
    so the lag state is always ``z_{n-1}``; the pair ``(i, j)`` is reachable
    iff the chain can step from ``i`` to ``j``.  The literal rule can reach
    across runs, so every pair counts.
    """
    if env is None or order_rule != "min":
        return np.ones((r, r), dtype=bool)
    return env.p_mat.T > 0


def validate_model(params: ModelParams, env: EnvChainSpec | None = None,
                   order_rule: OrderRule = "min") -> list[str]:
    """Return a list of violated invariants; an empty list means valid."""
    out: list[str] = []
    r = params.r
    for name in ("A", "P"):
        if getattr(params, name).shape != (r,):
            out.append(f"{name} has length {getattr(params, name).shape}, expected {r}")
    if len(params.phi) != r:
        out.append(f"phi has {len(params.phi)} entries, expected {r}")
    if out:
        return out
    if np.any(params.M <= 0):
        out.append("M entries must be positive")
    if np.any((params.A <= 0) | (params.A >= 1)):
        out.append("A entries must lie in (0, 1)")
    if np.any(params.P < 1):
        out.append("P entries must be positive integers")
    for j in range(r):
        f = params.phi[j]
        p = int(params.P[j])
        tag = f"phi[{j + 1}]"
        if params.variant == "max":
            if f.shape != (p, p):
                out.append(f"{tag} has shape {f.shape}, expected ({p}, {p})")
                continue
            if np.any(np.triu(f, 1) != 0):
                out.append(f"{tag} has nonzero entries above the diagonal")
            rows = f
        else:
            if f.shape != (p,):
                out.append(f"{tag} has shape {f.shape}, expected ({p},)")
                continue
            rows = f[None, :]
        if np.any(rows < 0):
            out.append(f"{tag} has negative entries")
        sums = rows.sum(axis=1)
        for q in np.flatnonzero(np.abs(sums - 1.0) > PROB_TOL):
            out.append(f"{tag} row {q + 1} sums to {sums[q]:.15g}, not 1")
    if env is not None:
        if env.r != r:
            out.append(f"environment has {env.r} states, parameters have {r}")
            return out
        out.extend(env.violations())
    if np.any(params.M <= 0):
        return out
    pairs = reachable_pairs(env, r, order_rule)
    for i in range(r):
        for j in range(r):
            if not pairs[i, j]:
                continue
            bound = params.M[j] / (1.0 + params.M[i])
            if params.A[j] > bound + FEAS_TOL:
                out.append(
                    f"feasibility: alpha_{j + 1}={params.A[j]:g} exceeds "
                    f"mu_{j + 1}/(1+mu_{i + 1})={bound:g}"
                )
    return out


def _check_states(z: np.ndarray, r: int | None = None) -> np.ndarray:
    z = np.asarray(z)
    if z.ndim != 1:
        raise ValueError("state sequence must be one-dimensional")
    if z.size and (np.any(z < 1) or (r is not None and np.any(z > r))):
        raise ValueError(f"state values must lie in 1..{r}")
    return z.astype(int)


def run_lengths(z: np.ndarray) -> np.ndarray:
    """``p*_n`` for every position (0-based array; entry 0 is 0)."""
    z = _check_states(z)
    n = z.shape[0]
    out = np.zeros(n, dtype=int)
    run = 0
    for k in range(1, n):
        run = run + 1 if k >= 2 and z[k - 1] == z[k - 2] else 1
        out[k] = run
    return out


def consecutive_run(z: np.ndarray, n: int) -> int:
    """Number of mutually equal immediate predecessors of position ``n`` (1-based)."""
    z = _check_states(z)
    if not 2 <= n <= z.shape[0]:
        raise IndexError(f"n={n} outside 2..{z.shape[0]}")
    last = z[n - 2]
    i = 1
    while i < n - 1 and z[n - 2 - i] == last:
        i += 1
    return i


def order_sequence(z: np.ndarray, params: ModelParams, order_rule: OrderRule = "min") -> np.ndarray:
    """Working orders ``P_n`` for a state sequence (``P_1 = 0``).

    ``min`` (default) caps the run length at the state's maximal order.
    ``literal_max`` takes ``max{p*_n, p_{z_n}}`` as printed; because no lag
    probabilities exist beyond ``p_{z_n}`` the result is then clipped to
    ``p_{z_n}`` and to the available history.
    """
    z = _check_states(z, params.r)
    pstar = run_lengths(z)
    pz = params.P[z - 1] if z.size else np.zeros(0, dtype=int)
    hist = np.arange(z.shape[0])
    if params.variant == "max":
        if order_rule == "min":
            out = np.minimum(pstar, pz)
        elif order_rule == "literal_max":
            out = np.minimum(np.maximum(pstar, pz), pz)
        else:
            raise ValueError(f"unknown order rule {order_rule!r}")
    else:
        out = np.where(pstar < pz, 1, pz)
    out = np.minimum(out, hist)
    if out.size:
        out[0] = 0
    return out.astype(int)


def sample_env(env: EnvChainSpec, N: int, seed=None) -> np.ndarray:
    """Draw ``N`` states from the chain (1-based)."""
    env.validate()
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = rng.random(N)
    cum_init = np.cumsum(env.p_vec)
    cum_cols = np.cumsum(env.p_mat, axis=0)
    r = env.r
    z = np.empty(N, dtype=int)
    z[0] = min(int(np.searchsorted(cum_init, u[0], side="right")), r - 1)
    for k in range(1, N):
        z[k] = min(int(np.searchsorted(cum_cols[:, z[k - 1]], u[k], side="right")), r - 1)
    return z + 1
