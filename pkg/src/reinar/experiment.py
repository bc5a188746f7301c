"""Experiment configuration and the seeded simulate, estimate, fit, evaluate pipeline.

Seeding: for experiment seed ``s`` the calibration replication is simulated
from ``SeedSequence([s, 0])``, the evaluation replication from
``SeedSequence([s, 1])``, and every K-means run and CML fit is seeded with
``s``.  A report is therefore a pure function of the config.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cluster import align_and_count, baseline_states, renes_states, search_C, search_dp
from .configs import reference_model, reference_renes
from .io import DataError, dumps_json, model_from_dict, model_to_dict, read_series, renes_from_dict, fit_to_dict
from .likelihood import cml_fit, predict, rms
from .model import EnvChainSpec, ModelParams
from .preestimate import RenesConfig
from .sampling import simulate

logger = logging.getLogger(__name__)

DEFAULT_N = 500
DEFAULT_DP_RANGE = (5, 20)


@dataclass
class ExperimentConfig:
    """Everything a run needs; serialisable as one JSON document.

    In simulation mode ``env`` must be set and the pipeline runs one record
    per seed.  With ``series`` set the pipeline runs once on that CSV
    instead (no calibration, since no truth is available).
    """

    model: ModelParams
    env: EnvChainSpec | None = None
    renes: RenesConfig = field(default_factory=RenesConfig)
    seeds: list = field(default_factory=lambda: [0])
    N: int = DEFAULT_N
    order_rule: str = "min"
    kmeans_n_init: int = 1
    calibrate_dp: bool = True
    calibrate_C: bool = True
    dp_range: tuple = DEFAULT_DP_RANGE  # inclusive bounds
    C_grid: list | None = None  # three lists of candidate weights; None means 1..10 each
    fit: bool = True
    restarts: int = 5
    maxfev: int = 5000
    series: str | None = None

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seed list is empty")
        if self.series is None and self.env is None:
            raise ValueError("a chain (p_vec, p_mat) is required unless a series file is given")
        if self.order_rule not in ("min", "literal_max"):
            raise ValueError(f"unknown order rule {self.order_rule!r}")
        if int(self.N) < 1:
            raise ValueError("N must be positive")

    @property
    def p_max(self) -> int:
        return int(self.model.P.max())

    def C_grid_ranges(self):
        return None if self.C_grid is None else tuple(tuple(g) for g in self.C_grid)

    def to_dict(self) -> dict:
        return {
            "model": model_to_dict(self.model, self.env),
            "renes": self.renes.to_dict(),
            "seeds": [int(s) for s in self.seeds],
            "N": int(self.N),
            "order_rule": self.order_rule,
            "kmeans_n_init": int(self.kmeans_n_init),
            "calibrate": {
                "d_p": bool(self.calibrate_dp),
                "C": bool(self.calibrate_C),
                "dp_range": list(self.dp_range),
                "C_grid": None if self.C_grid is None else [list(g) for g in self.C_grid],
            },
            "fit": {"enabled": bool(self.fit), "restarts": int(self.restarts), "maxfev": int(self.maxfev)},
            "paths": {"series": self.series},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if "model" not in d:
            raise DataError("config: missing key model")
        params, env = model_from_dict(d["model"])
        cal = d.get("calibrate", {})
        fit = d.get("fit", {})
        paths = d.get("paths", {})
        try:
            return cls(
                model=params,
                env=env,
                renes=renes_from_dict(d.get("renes", {})),
                seeds=list(d.get("seeds", [0])),
                N=int(d.get("N", DEFAULT_N)),
                order_rule=d.get("order_rule", "min"),
                kmeans_n_init=int(d.get("kmeans_n_init", 1)),
                calibrate_dp=bool(cal.get("d_p", True)),
                calibrate_C=bool(cal.get("C", True)),
                dp_range=tuple(cal.get("dp_range", DEFAULT_DP_RANGE)),
                C_grid=cal.get("C_grid"),
                fit=bool(fit.get("enabled", True)),
                restarts=int(fit.get("restarts", 5)),
                maxfev=int(fit.get("maxfev", 5000)),
                series=paths.get("series"),
            )
        except ValueError as exc:
            raise DataError(f"config: {exc}") from exc


def reference_config(combo: str, variant: str = "max", seeds=range(20), **overrides) -> ExperimentConfig:
    """Config for one of the reference parameter sets with its reported RENES settings."""
    params, env = reference_model(combo, variant)
    kw = {"model": params, "env": env, "renes": reference_renes(combo, variant), "seeds": list(seeds)}
    kw.update(overrides)
    return ExperimentConfig(**kw)


def _fit_eval(x, z_hat, cfg: ExperimentConfig, seed) -> dict:
    fit = cml_fit(x, z_hat, cfg.model.variant, cfg.model.P, cfg.order_rule, seed=seed,
                  restarts=cfg.restarts, maxfev=cfg.maxfev)
    pred = predict(x, z_hat, fit.params, cfg.order_rule)
    fit.rms = rms(x, pred)
    return fit_to_dict(fit)


def _estimate_and_score(x, truth, cfg: ExperimentConfig, renes_cfg: RenesConfig, seed) -> dict:
    r = cfg.model.r
    out = {}
    states = {
        "renes": renes_states(x, renes_cfg, r, cfg.p_max, seed=seed, n_init=cfg.kmeans_n_init),
        "kmeans": baseline_states(x, r, seed=seed, n_init=cfg.kmeans_n_init),
    }
    for name, z_hat in states.items():
        rec = {"matches": None, "rms": None, "fit": None}
        if truth is not None:
            rec["matches"] = align_and_count(z_hat, truth, r)[1]
        if cfg.fit:
            rec["fit"] = _fit_eval(x, z_hat, cfg, seed)
            rec["rms"] = rec["fit"]["rms"]
        out[name] = rec
    return out


def run_seed(cfg: ExperimentConfig, seed: int) -> dict:
    """Two-replication protocol for one seed: calibrate on one, evaluate on the other."""
    seed = int(seed)
    rec = {"seed": seed, "status": "ok", "error": None, "calibration": None}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            cal = simulate(cfg.model, cfg.env, cfg.N, np.random.SeedSequence([seed, 0]), cfg.order_rule)
            ev = simulate(cfg.model, cfg.env, cfg.N, np.random.SeedSequence([seed, 1]), cfg.order_rule)
            renes_cfg = cfg.renes
            cal_info = {"d_p": renes_cfg.d_p, "delta_p": None, "C": list(renes_cfg.C), "matches": None}
            if cfg.calibrate_dp:
                lo, hi = cfg.dp_range
                res = search_dp(cal.x, cal.P, range(lo, hi + 1), cfg.p_max)
                renes_cfg = renes_cfg.with_dp(res.best_dp)
                cal_info.update(d_p=res.best_dp, delta_p=res.best_delta)
            if cfg.calibrate_C:
                res = search_C(cal.x, cal.z, renes_cfg, cfg.model.r, cfg.p_max, grid=cfg.C_grid_ranges(),
                               seed=seed, n_init=cfg.kmeans_n_init)
                renes_cfg = renes_cfg.with_C(*res.best_C)
                cal_info.update(C=list(res.best_C), matches=res.best_matches)
            rec["calibration"] = cal_info
            rec.update(_estimate_and_score(ev.x, ev.z, cfg, renes_cfg, seed))
    except Exception as exc:  # recorded, run continues
        logger.warning("seed %d failed: %s", seed, exc)
        rec.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return rec


def run_series(cfg: ExperimentConfig) -> dict:
    """Single record for an observed series (``cfg.series``)."""
    d = read_series(cfg.series)
    seed = int(cfg.seeds[0])
    rec = {"seed": seed, "status": "ok", "error": None, "calibration": None}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rec.update(_estimate_and_score(d["x"], d.get("z"), cfg, cfg.renes, seed))
    except Exception as exc:
        logger.warning("series run failed: %s", exc)
        rec.update(status="error", error=f"{type(exc).__name__}: {exc}")
    return rec


def _median(vals):
    vals = [v for v in vals if v is not None]
    return float(np.median(vals)) if vals else None


def aggregate(records: list) -> dict:
    ok = [r for r in records if r["status"] == "ok"]
    agg = {"n_records": len(records), "n_ok": len(ok), "n_failed": len(records) - len(ok)}
    for m in ("renes", "kmeans"):
        agg[f"median_matches_{m}"] = _median([r[m]["matches"] for r in ok])
        agg[f"median_rms_{m}"] = _median([r[m]["rms"] for r in ok])
    both = [r for r in ok if r["renes"]["matches"] is not None and r["kmeans"]["matches"] is not None]
    agg["matches_win_rate"] = (sum(r["renes"]["matches"] >= r["kmeans"]["matches"] for r in both) / len(both)
                               if both else None)
    both = [r for r in ok if r["renes"]["rms"] is not None and r["kmeans"]["rms"] is not None]
    agg["rms_win_rate"] = (sum(r["renes"]["rms"] <= r["kmeans"]["rms"] for r in both) / len(both)
                           if both else None)
    return agg


@dataclass
class RunReport:
    config: dict
    records: list
    aggregates: dict

    def to_dict(self) -> dict:
        return {"config": self.config, "records": self.records, "aggregates": self.aggregates}

    def to_json(self) -> str:
        return dumps_json(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(d["config"], d["records"], d["aggregates"])

    def consistent(self) -> bool:
        return aggregate(self.records) == self.aggregates


def run_pipeline(cfg: ExperimentConfig) -> RunReport:
    if cfg.series is not None:
        records = [run_series(cfg)]
    else:
        records = [run_seed(cfg, s) for s in cfg.seeds]
    return RunReport(cfg.to_dict(), records, aggregate(records))
