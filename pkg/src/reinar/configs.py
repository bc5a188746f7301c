"""Reference parameter sets used in the simulation studies.

Four model combinations are provided (two with two states, two with three
states), each usable with either variant.  The transition matrices as tabulated
are row-conditioned (rows sum to one); they are stored here transposed so
that they follow the package's column-conditioning convention.
"""

from __future__ import annotations

import numpy as np

from .model import EnvChainSpec, ModelParams
from .preestimate import RenesConfig

W4 = (0.16, 0.14, 0.14, 0.14)
W3 = (0.2, 0.2, 0.2)
W2 = (0.4, 0.3)


def _combo(M, A, P, phis, p_vec, p_mat_rows):
    return {
        "M": M,
        "A": A,
        "P": P,
        "phi": [np.array(f, dtype=float) for f in phis],
        "p_vec": p_vec,
        "p_mat": np.array(p_mat_rows, dtype=float).T,
    }


_COMBOS = {
    "r2c1": _combo(
        (1.0, 1.5), (0.05, 0.6), (2, 4),
        [
            [[1, 0], [0.9, 0.1]],
            [[1, 0, 0, 0], [0.1, 0.9, 0, 0], [0.1, 0.45, 0.45, 0], [0.1, 0.1, 0.4, 0.4]],
        ],
        (0.6, 0.4),
        [[0.9, 0.1], [0.2, 0.8]],
    ),
    "r2c2": _combo(
        (3.0, 5.0), (0.4, 0.5), (2, 5),
        [
            [[1, 0], [0.4, 0.6]],
            [
                [1, 0, 0, 0, 0],
                [0.2, 0.8, 0, 0, 0],
                [0.4, 0.4, 0.2, 0, 0],
                [0.3, 0.3, 0.3, 0.1, 0],
                [0.4, 0.2, 0.2, 0.1, 0.1],
            ],
        ],
        (0.5, 0.5),
        [[0.8, 0.2], [0.25, 0.75]],
    ),
    "r3c1": _combo(
        (0.5, 1.0, 1.5), (0.1, 0.35, 0.6), (2, 4, 2),
        [
            [[1, 0], [0.9, 0.1]],
            [[1, 0, 0, 0], [0.2, 0.8, 0, 0], [0.2, 0.4, 0.4, 0], [0.2, 0.2, 0.3, 0.3]],
            [[1, 0], [0.1, 0.9]],
        ],
        (0.3, 0.4, 0.3),
        [[0.7, 0.2, 0.1], [0.1, 0.8, 0.1], [0.2, 0.2, 0.6]],
    ),
    "r3c2": _combo(
        (2.0, 4.0, 6.0), (0.2, 0.3, 0.6), (2, 4, 5),
        [
            [[1, 0], [0.7, 0.3]],
            [[1, 0, 0, 0], [0.5, 0.5, 0, 0], [0.3, 0.3, 0.4, 0], [0.3, 0.2, 0.2, 0.3]],
            [
                [1, 0, 0, 0, 0],
                [0.4, 0.6, 0, 0, 0],
                [0.2, 0.5, 0.3, 0, 0],
                [0.25, 0.3, 0.2, 0.25, 0],
                [0.2, 0.2, 0.3, 0.1, 0.2],
            ],
        ],
        (0.35, 0.35, 0.3),
        [[0.9, 0.05, 0.05], [0.2, 0.7, 0.1], [0.1, 0.1, 0.8]],
    ),
}

# (d_p, c_m, c_a, c_p, (C_m, C_a, C_p)); C is None where no value was reported
_RENES = {
    ("r2c1", "max"): (8, W4, W4, W4, (6, 2, 9)),
    ("r2c1", "one"): (15, W4, W4, W4, (8, 2, 3)),
    ("r2c2", "max"): (17, W4, W4, W2, (4, 2, 3)),
    ("r2c2", "one"): (9, W3, W4, W2, (9, 6, 7)),
    ("r3c1", "max"): (17, W4, W4, W2, (9, 7, 2)),
    ("r3c1", "one"): (18, W4, W4, W2, (6, 1, 8)),
    ("r3c2", "max"): (12, W4, W4, W2, (10, 3, 1)),
    ("r3c2", "one"): (11, W4, W4, W2, (7, 5, 2)),
}

COMBO_NAMES = tuple(_COMBOS)


def reference_model(name: str, variant: str = "max") -> tuple[ModelParams, EnvChainSpec]:
    """Model parameters and environment chain for a named combination."""
    c = _COMBOS[name]
    if variant == "max":
        phi = tuple(f.copy() for f in c["phi"])
    elif variant == "one":
        phi = tuple(f[-1].copy() for f in c["phi"])
    else:
        raise ValueError(f"unknown variant {variant!r}")
    params = ModelParams(variant, c["M"], c["A"], c["P"], phi)
    env = EnvChainSpec(c["p_vec"], c["p_mat"])
    return params, env


def reference_renes(name: str, variant: str = "max") -> RenesConfig:
    d_p, c_m, c_a, c_p, C = _RENES[(name, variant)]
    return RenesConfig(d_p=d_p, c_m=c_m, c_a=c_a, c_p=c_p, C_m=C[0], C_a=C[1], C_p=C[2])
