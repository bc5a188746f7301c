"""JSON and CSV readers and writers.

Model documents use the keys ``variant, r, M, A, P, phi, p_vec, p_mat``.
``p_mat`` is row-major and column-stochastic: ``p_mat[i][j]`` is the
probability of moving to state ``i+1`` from state ``j+1``.  A document may
carry ``"p_mat_convention": "row"`` to supply the transpose instead.

All writers are deterministic: fixed column order, ``repr``-exact floats,
sorted JSON keys and ``\\n`` line endings.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .cluster import CalibrationResult
from .likelihood import FitResult, PredSeries
from .model import EnvChainSpec, ModelParams
from .preestimate import PreEstimates, RenesConfig
from .sampling import SimOutput


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def _num(v):
    if isinstance(v, (np.integer, int)):
        return int(v)
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def _tolist(a):
    return np.asarray(a).tolist()


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


# model documents

def model_to_dict(params: ModelParams, env: EnvChainSpec | None = None) -> dict:
    d = {
        "variant": params.variant,
        "r": params.r,
        "M": _tolist(params.M),
        "A": _tolist(params.A),
        "P": _tolist(params.P),
        "phi": [_tolist(f) for f in params.phi],
    }
    if env is not None:
        d["p_vec"] = _tolist(env.p_vec)
        d["p_mat"] = _tolist(env.p_mat)
    return d


def _require(d: dict, keys, where: str):
    missing = [k for k in keys if k not in d]
    if missing:
        raise DataError(f"{where}: missing key(s) {', '.join(missing)}")


def model_from_dict(d: dict, where: str = "model") -> tuple[ModelParams, EnvChainSpec | None]:
    """Parse a model document; the chain is returned only if present."""
    _require(d, ("variant", "M", "A", "P", "phi"), where)
    try:
        params = ModelParams(d["variant"], d["M"], d["A"], d["P"], tuple(d["phi"]))
    except (TypeError, ValueError) as exc:
        raise DataError(f"{where}: {exc}") from exc
    if "r" in d and int(d["r"]) != params.r:
        raise DataError(f"{where}: r={d['r']} but M has {params.r} entries")
    env = None
    if "p_mat" in d or "p_vec" in d:
        _require(d, ("p_vec", "p_mat"), where)
        p_mat = np.asarray(d["p_mat"], dtype=float)
        conv = d.get("p_mat_convention", "column")
        if conv == "row":
            p_mat = p_mat.T
        elif conv != "column":
            raise DataError(f"{where}: p_mat_convention must be 'column' or 'row', got {conv!r}")
        env = EnvChainSpec(d["p_vec"], p_mat)
    return params, env


def fit_to_dict(fit: FitResult) -> dict:
    d = model_to_dict(fit.params)
    d.update(loglik=float(fit.loglik), rms=None if fit.rms is None else float(fit.rms),
             converged=bool(fit.converged), evaluations=int(fit.iterations))
    return d


def fit_from_dict(d: dict) -> FitResult:
    _require(d, ("loglik", "converged"), "fit")
    params, _ = model_from_dict(d, "fit")
    return FitResult(params.variant, params.P, params.M, params.A, params.phi, float(d["loglik"]),
                     bool(d["converged"]), int(d.get("evaluations", 0)), d.get("rms"))


def renes_from_dict(d: dict) -> RenesConfig:
    known = set(RenesConfig().to_dict())
    extra = set(d) - known
    if extra:
        raise DataError(f"renes: unknown key(s) {', '.join(sorted(extra))}")
    try:
        return RenesConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})
    except (TypeError, ValueError) as exc:
        raise DataError(f"renes: {exc}") from exc


# CSV tables

def _write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) if not isinstance(v, str) else v for v in row])
    write_text(path, buf.getvalue())


def _read_csv(path, required, optional=(), kinds=None) -> dict[str, np.ndarray]:
    """Read named columns; integer columns unless ``kinds`` says ``float``."""
    kinds = kinds or {}
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file, expected header with {', '.join(required)}")
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        cols = [c for c in (*required, *optional) if c in header]
        idx = {c: header.index(c) for c in cols}
        data = {c: [] for c in cols}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not v.strip() for v in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            for c in cols:
                raw = row[idx[c]].strip()
                try:
                    if kinds.get(c) == "float":
                        val = float(raw)
                    else:
                        val = int(raw)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: column {c}: cannot parse {raw!r}") from None
                data[c].append(val)
    out = {}
    for c in cols:
        dtype = float if kinds.get(c) == "float" else np.int64
        out[c] = np.array(data[c], dtype=dtype)
    return out


def write_sim(path, sim: SimOutput) -> None:
    n = len(sim)
    _write_csv(path, ["t", "x", "z", "P", "lag"],
               zip(range(1, n + 1), sim.x, sim.z, sim.P, sim.lag))


def read_sim(path) -> SimOutput:
    d = _read_csv(path, ["t", "x", "z", "P", "lag"])
    return SimOutput(d["x"], d["z"], d["P"], d["lag"])


def read_series(path) -> dict[str, np.ndarray]:
    """Series CSV ``t,x[,z[,P]]``; returns the columns present (``x`` always)."""
    d = _read_csv(path, ["x"], optional=("t", "z", "P"))
    x = d["x"]
    if x.size == 0:
        raise DataError(f"{path}: no data rows")
    if np.any(x < 0):
        bad = int(np.flatnonzero(x < 0)[0]) + 2
        raise DataError(f"{path}:{bad}: negative count")
    if "z" in d and np.any(d["z"] < 1):
        bad = int(np.flatnonzero(d["z"] < 1)[0]) + 2
        raise DataError(f"{path}:{bad}: states must be >= 1")
    return d


def write_series(path, x, z=None, P=None) -> None:
    header = ["t", "x"]
    cols = [np.arange(1, len(x) + 1), x]
    for name, c in (("z", z), ("P", P)):
        if c is not None:
            header.append(name)
            cols.append(c)
    _write_csv(path, header, zip(*cols))


def write_states(path, z_hat) -> None:
    _write_csv(path, ["t", "z_hat"], zip(range(1, len(z_hat) + 1), z_hat))


def read_states(path) -> np.ndarray:
    z = _read_csv(path, ["z_hat"], optional=("t",))["z_hat"]
    if np.any(z < 1):
        raise DataError(f"{path}: states must be >= 1")
    return z


def write_preestimates(path, pre: PreEstimates) -> None:
    n = pre.mu_t.shape[0]
    f = pre.features
    _write_csv(path, ["t", "mu_t", "alpha_t", "p_t", "f1", "f2", "f3"],
               zip(range(1, n + 1), pre.mu_t, pre.alpha_t, pre.p_t, f[:, 0], f[:, 1], f[:, 2]))


def read_preestimates(path) -> dict[str, np.ndarray]:
    cols = ["mu_t", "alpha_t", "p_t", "f1", "f2", "f3"]
    return _read_csv(path, ["t", *cols], kinds={c: "float" for c in cols})


def write_dp_table(path, cal: CalibrationResult) -> None:
    _write_csv(path, ["d_p", "delta_p"], cal.dp_table)


def write_C_table(path, cal: CalibrationResult) -> None:
    _write_csv(path, ["C_m", "C_a", "C_p", "matches"], cal.C_table)


def read_dp_table(path) -> list[tuple]:
    d = _read_csv(path, ["d_p", "delta_p"], kinds={"delta_p": "float"})
    return [(int(a), float(b)) for a, b in zip(d["d_p"], d["delta_p"])]


def read_C_table(path) -> list[tuple]:
    cols = ["C_m", "C_a", "C_p"]
    d = _read_csv(path, [*cols, "matches"], kinds={c: "float" for c in cols})
    return [(*(_int_if_whole(d[c][k]) for c in cols), int(d["matches"][k])) for k in range(d["matches"].shape[0])]


def _int_if_whole(v: float):
    return int(v) if float(v).is_integer() else float(v)


def write_predictions(path, x, z, pred: PredSeries) -> None:
    _write_csv(path, ["t", "x", "z", "xhat", "defined"],
               zip(range(1, len(x) + 1), x, z, pred.xhat, pred.defined.astype(int)))


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
