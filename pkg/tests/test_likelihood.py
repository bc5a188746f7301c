import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reinar.configs import COMBO_NAMES, reference_model
from reinar.likelihood import (
    LogLikelihood,
    PredSeries,
    cml_fit,
    cond_pmf,
    geom_pmf,
    loglik,
    predict,
    rms,
    thin_pmf,
)
from reinar.model import InfeasibleParameters, ModelParams, order_sequence
from reinar.sampling import simulate

from oracles import geom_pmf_array, nfold_geom_conv


# geometric pmf

def test_geom_pmf_examples():
    assert geom_pmf(1.0, 0) == 0.5
    assert geom_pmf(1e-12, 0) == pytest.approx(1.0)
    for mean in (0.5, 1.0, 2.5, 5.0):
        assert geom_pmf(mean, np.arange(501)).sum() >= 1 - 1e-10


def test_geom_pmf_domain():
    with pytest.raises(ValueError):
        geom_pmf(0.0, 1)
    with pytest.raises(ValueError):
        geom_pmf(1.0, -1)


# thinning pmf

def test_thin_pmf_examples():
    t = np.arange(20)
    assert np.array_equal(thin_pmf(0, 0.3, t), (t == 0).astype(float))
    np.testing.assert_allclose(thin_pmf(1, 0.3, t), geom_pmf_array(0.3, 20), atol=1e-15)


def test_thin_pmf_convolution_oracle():
    np.testing.assert_allclose(thin_pmf(3, 0.4, np.arange(101)), nfold_geom_conv(0.4, 3, 101), rtol=0, atol=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 12), st.floats(0.01, 0.99))
def test_thin_pmf_property(x_lag, alpha):
    np.testing.assert_allclose(thin_pmf(x_lag, alpha, np.arange(60)), nfold_geom_conv(alpha, x_lag, 60),
                               rtol=0, atol=1e-12)


def test_thin_pmf_domain():
    with pytest.raises(ValueError):
        thin_pmf(-1, 0.3, 0)
    with pytest.raises(ValueError):
        thin_pmf(2, 1.0, 0)


# conditional pmf

def _contexts(name, variant, count, seed):
    params, env = reference_model(name, variant)
    sim = simulate(params, env, 300, seed=seed)
    rng = np.random.default_rng(seed)
    ns = rng.choice(np.flatnonzero(sim.P >= 1) + 1, size=count, replace=False)
    return params, sim, ns


@pytest.mark.parametrize("name", COMBO_NAMES)
@pytest.mark.parametrize("variant", ["max", "one"])
def test_cond_pmf_normalised(name, variant):
    params, sim, ns = _contexts(name, variant, 3, 0)
    for n in ns:
        total = sum(cond_pmf(int(n), t, sim.x, sim.z, params) for t in range(501))
        assert 1 - 1e-8 <= total <= 1 + 1e-10


def test_cond_pmf_alpha_to_zero():
    phi = (np.array([[1.0, 0.0], [0.5, 0.5]]), np.array([[1.0, 0.0], [0.5, 0.5]]))
    params = ModelParams("max", [1.0, 2.0], [1e-12, 1e-12], [2, 2], phi)
    x = np.array([4, 9, 0, 3])
    z = np.array([1, 2, 2, 2])
    for t in range(8):
        assert cond_pmf(4, t, x, z, params) == pytest.approx(geom_pmf(2.0, t), rel=1e-9)


def test_cond_pmf_needs_ar_term():
    params, env = reference_model("r2c1", "max")
    sim = simulate(params, env, 10, seed=0)
    with pytest.raises(ValueError):
        cond_pmf(1, 0, sim.x, sim.z, params)


@pytest.mark.slow
def test_cond_pmf_matches_simulator_frequencies():
    params = ModelParams("max", [1.5], [0.4], [1], (np.ones((1, 1)),))
    N = 1_000_000
    sim = simulate(params, np.ones(N, dtype=int), N, seed=13)
    prev, cur = sim.x[:-1], sim.x[1:]
    for x_lag in range(4):
        sel = cur[prev == x_lag]
        m = sel.shape[0]
        for t in range(7):
            p = cond_pmf(2, t, np.array([x_lag, t]), np.array([1, 1]), params)
            freq = np.mean(sel == t)
            assert abs(freq - p) <= 3 * math.sqrt(p * (1 - p) / m) + 1e-12


# log-likelihood

def test_loglik_single_term():
    params = ModelParams("max", [1.0], [1e-9], [1], (np.ones((1, 1)),))
    assert loglik(np.array([5, 0]), np.array([1, 1]), params) == pytest.approx(math.log(0.5), abs=1e-8)


@pytest.mark.parametrize("name", COMBO_NAMES)
@pytest.mark.parametrize("variant", ["max", "one"])
def test_fast_loglik_matches_reference(name, variant):
    params, env = reference_model(name, variant)
    sim = simulate(params, env, 120, seed=4)
    fast = LogLikelihood(sim.x, sim.z, variant, params.P)(params)
    Pn = order_sequence(sim.z, params)
    ref = sum(math.log(cond_pmf(n, int(sim.x[n - 1]), sim.x, sim.z, params))
              for n in range(1, 121) if Pn[n - 1] >= 1)
    assert fast == pytest.approx(ref, rel=1e-10, abs=1e-9)


def test_loglik_relabel_invariant():
    params, env = reference_model("r2c2", "max")
    sim = simulate(params, env, 300, seed=5)
    swapped = params.relabeled([1, 0])
    z2 = 3 - sim.z
    assert loglik(sim.x, z2, swapped) == pytest.approx(loglik(sim.x, sim.z, params), rel=1e-12)


@pytest.mark.slow
def test_true_params_beat_mean_perturbations():
    params, env = reference_model("r2c1", "max")
    wins = 0
    for seed in range(20):
        sim = simulate(params, env, 500, seed=seed)
        ll = LogLikelihood(sim.x, sim.z, "max", params.P)
        base = ll(params)
        ok = True
        for f in (0.5, 1.5):
            M = params.M * f
            A = np.minimum(params.A, 0.999 * np.min(M) / (1 + np.max(M)))
            try:
                ok &= base >= ll(ModelParams("max", M, A, params.P, params.phi))
            except (InfeasibleParameters, FloatingPointError):
                pass
        wins += ok
    assert wins >= 18


def test_loglik_rejects_infeasible():
    params = ModelParams("max", [1.0], [0.9], [1], (np.ones((1, 1)),))
    with pytest.raises(InfeasibleParameters):
        loglik(np.array([1, 2, 3]), np.ones(3, dtype=int), params)


# fitting

def test_cml_iid_limit():
    rng = np.random.default_rng(3)
    q = 2.0 / 3.0
    x = rng.geometric(1 - q, size=2000) - 1  # mean 2 on {0, 1, ...}
    fit = cml_fit(x, np.ones(2000, dtype=int), "max", [1], seed=0)
    se = x.std() / math.sqrt(x.shape[0])
    assert abs(fit.M_hat[0] - x.mean()) <= 2 * se
    assert fit.A_hat[0] < 0.1


def test_cml_feasible_and_deterministic():
    params, env = reference_model("r2c1", "max")
    sim = simulate(params, env, 300, seed=6)
    f1 = cml_fit(sim.x, sim.z, "max", params.P, seed=2, restarts=2)
    f2 = cml_fit(sim.x, sim.z, "max", params.P, seed=2, restarts=2)
    assert np.array_equal(f1.M_hat, f2.M_hat) and f1.loglik == f2.loglik
    from reinar.model import validate_model
    assert validate_model(f1.params, env) == []
    assert f1.loglik >= loglik(sim.x, sim.z, params) - 1e-6 or not f1.converged


def test_cml_empty_state_frozen():
    x = np.random.default_rng(0).geometric(0.5, size=100) - 1
    with pytest.warns(RuntimeWarning, match="no observations"):
        fit = cml_fit(x, np.ones(100, dtype=int), "one", [1, 1], seed=0, restarts=1)
    assert fit.M_hat.shape == (2,)


# prediction

def _moment(n, x, z, params):
    return sum(t * cond_pmf(n, t, x, z, params) for t in range(400))


def test_predict_matches_pmf_moment():
    rng = np.random.default_rng(7)
    done = 0
    for name in COMBO_NAMES:
        for variant in ("max", "one"):
            params, sim, ns = _contexts(name, variant, 13, int(rng.integers(1000)))
            pred = predict(sim.x, sim.z, params)
            for n in ns[: 100 // 8 + 1]:
                if done == 100:
                    break
                assert pred.xhat[n - 1] == pytest.approx(_moment(int(n), sim.x, sim.z, params), abs=1e-6)
                done += 1
    assert done == 100


def test_predict_single_lag_formula():
    params = ModelParams("max", [1.0, 1.5], [0.05, 0.3], [1, 1], (np.ones((1, 1)), np.ones((1, 1))))
    x = np.array([4, 2])
    z = np.array([1, 2])
    pred = predict(x, z, params)
    assert pred.xhat[1] == pytest.approx(0.3 * 4 + 1.5 - 0.3 * 1.0, abs=1e-12)
    assert pred.xhat[1] == pytest.approx(_moment(2, x, z, params), abs=1e-8)
    assert not pred.defined[0] and pred.xhat[0] == 1.0


def test_predict_alpha_zero_gives_state_mean():
    params = ModelParams("one", [2.0], [0.0], [2], (np.array([0.5, 0.5]),))
    pred = predict(np.array([1, 7, 3, 0]), np.ones(4, dtype=int), params)
    np.testing.assert_allclose(pred.xhat, 2.0)


@pytest.mark.slow
def test_predict_tower_property():
    params = ModelParams("max", [1.5], [0.4], [2], (np.array([[1.0, 0.0], [0.3, 0.7]]),))
    sim = simulate(params, np.ones(200_000, dtype=int), 200_000, seed=21)
    pred = predict(sim.x, sim.z, params)
    v = pred.xhat[pred.defined]
    # batch means absorb the serial dependence
    batches = v[: v.shape[0] // 100 * 100].reshape(100, -1).mean(axis=1)
    se = batches.std(ddof=1) / math.sqrt(100)
    assert abs(v.mean() - 1.5) <= 3 * se


def test_rms_examples():
    assert rms(np.array([0, 2]), np.array([1.0, 1.0])) == 1.0
    assert rms(np.array([3, 4]), np.array([3.0, 4.0])) == 0.0
    ps = PredSeries(np.array([9.0, 1.0, 1.0]), np.array([False, True, True]))
    assert rms(np.array([0, 0, 2]), ps) == 1.0
    with pytest.raises(ValueError):
        rms(np.array([1]), PredSeries(np.array([1.0]), np.array([False])))
    with pytest.raises(ValueError):
        rms(np.array([1, 2]), np.array([1.0]))

