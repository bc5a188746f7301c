import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from reinar.configs import reference_model, reference_renes
from reinar.preestimate import (
    RenesConfig,
    alpha_pre,
    build_features,
    check_weights,
    durbin_levinson,
    mu_pre,
    p_pre,
    pacf,
    scaled,
    trim,
    trimmed,
)
from reinar.sampling import simulate

from oracles import regression_pacf, trim_loop

WEIGHTS = [(1.0,), (0.4, 0.3), (0.2, 0.2, 0.2), (0.16, 0.14, 0.14, 0.14)]


# weights

@pytest.mark.parametrize("c", WEIGHTS)
def test_reference_weights_valid(c):
    assert check_weights(c) == c


@pytest.mark.parametrize("c", [(0.3, 0.4), (0.5, 0.3), (0.2,) * 6, (1.0, 0.0)])
def test_bad_weights_rejected(c):
    with pytest.raises(ValueError):
        check_weights(c)


# trimmed mean

def test_trimmed_identity_weight():
    seq = np.array([3.0, 1.0, 4.0, 1.0, 5.0])
    assert [trimmed(seq, (1.0,), i) for i in range(1, 6)] == seq.tolist()


@pytest.mark.parametrize("c", WEIGHTS)
def test_trimmed_constant_fixed_point(c):
    seq = np.full(12, 2.5)
    np.testing.assert_allclose(trim(seq, c), seq, rtol=0, atol=1e-12)


def test_trimmed_hand_example():
    assert trimmed(np.array([0, 10, 0, 10, 0]), (0.4, 0.3), 3) == pytest.approx(6.0)


def test_trimmed_edges_unchanged():
    seq = np.arange(10.0) ** 2
    c = (0.2, 0.2, 0.2)
    assert trimmed(seq, c, 1) == 0.0 and trimmed(seq, c, 2) == 1.0 and trimmed(seq, c, 10) == 81.0


def test_trimmed_index_range():
    with pytest.raises(IndexError):
        trimmed(np.ones(3), (1.0,), 0)


@settings(max_examples=50)
@given(arrays(float, st.integers(1, 30), elements=st.floats(-100, 100)), st.sampled_from(WEIGHTS))
def test_trim_matches_loop_and_pointwise(seq, c):
    out = trim(seq, c)
    np.testing.assert_allclose(out, trim_loop(seq, c), atol=1e-9)
    for i in range(1, seq.shape[0] + 1):
        assert out[i - 1] == pytest.approx(trimmed(seq, c, i), abs=1e-9)


@settings(max_examples=30)
@given(arrays(float, st.integers(1, 30), elements=st.floats(-10, 10)),
       arrays(float, st.integers(1, 30), elements=st.floats(-10, 10)), st.sampled_from(WEIGHTS))
def test_trim_linear_and_reversal(a, b, c):
    n = min(a.shape[0], b.shape[0])
    a, b = a[:n], b[:n]
    np.testing.assert_allclose(trim(2 * a - b, c), 2 * trim(a, c) - trim(b, c), atol=1e-9)
    np.testing.assert_allclose(trim(a[::-1], c), trim(a, c)[::-1], atol=1e-9)


# scaling

def test_scaled_constant_is_ones():
    np.testing.assert_allclose(scaled(np.full(7, 3.0), (0.4, 0.3)), np.ones(7))


def test_scaled_hand_example():
    np.testing.assert_allclose(scaled(np.array([1.0, 2.0, 3.0]), (1.0,)), [0.5, 1.0, 1.5])


def test_scaled_zero_sum_raises():
    with pytest.raises(ValueError):
        scaled(np.zeros(5), (1.0,))


@settings(max_examples=50)
@given(arrays(float, st.integers(1, 40), elements=st.floats(0.01, 50)), st.sampled_from(WEIGHTS),
       st.floats(0.01, 100))
def test_scaled_sum_and_scale_invariance(seq, c, lam):
    s = scaled(seq, c)
    assert s.sum() == pytest.approx(seq.shape[0], abs=1e-9)
    np.testing.assert_allclose(scaled(lam * seq, c), s, rtol=1e-9)


# mean proxy

def test_mu_pre_identity():
    out = mu_pre(np.array([0, 3, 7]))
    assert out.dtype == float and out.tolist() == [0.0, 3.0, 7.0]
    assert mu_pre(np.array([], dtype=int)).shape == (0,)


# PACF

def _ar1(n, phi, seed):
    rng = np.random.default_rng(seed)
    x = np.zeros(n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + rng.normal()
    return x


def test_pacf_ar1():
    p = pacf(_ar1(200, 0.9, 0), 2)
    assert 0.7 < p[0] < 1.0
    assert abs(p[1]) < 0.2


@pytest.mark.slow
def test_pacf_iid_bartlett_band():
    inside = 0
    for seed in range(20):
        x = np.random.default_rng(seed).normal(size=500)
        inside += np.all(np.abs(pacf(x, 5)) < 2.5 / np.sqrt(500))
    assert inside >= 18


def test_pacf_matches_regression_oracle():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(9, 60))
        w = rng.poisson(3.0, size=n).astype(float) + rng.normal(0, 0.1, size=n)
        np.testing.assert_allclose(pacf(w, 4), regression_pacf(w, 4), atol=1e-8)


def test_pacf_zero_variance_raises():
    with pytest.raises(ValueError):
        pacf(np.ones(10), 2)


def test_durbin_levinson_batched():
    rng = np.random.default_rng(1)
    ws = rng.normal(size=(5, 30))
    from reinar.preestimate import _acov
    batch = durbin_levinson(_acov(ws, 3))
    for k in range(5):
        np.testing.assert_allclose(batch[k], regression_pacf(ws[k], 3), atol=1e-10)


# order proxy

def test_p_pre_constant_series():
    assert np.all(p_pre(np.full(40, 2), 5, 4) == 1)


def test_p_pre_ar1_interior():
    x = _ar1(400, 0.95, 3)
    out = p_pre(x, 40, 4)
    assert np.mean(out[40:-40] == 1) > 0.95


def test_p_pre_edge_windows_shared():
    x = np.random.default_rng(2).poisson(2.0, size=60)
    out = p_pre(x, 6, 4)
    assert np.all(out[:6] == out[6])
    assert np.all(out[-6:] == out[-7])
    expected = np.argmax(pacf(x[:13], 4)) + 1
    assert out[0] == expected


def test_p_pre_short_series():
    with pytest.raises(ValueError):
        p_pre(np.arange(10), 5, 2)


@settings(max_examples=30, deadline=None)
@given(arrays(np.int64, st.integers(25, 80), elements=st.integers(0, 6)), st.integers(1, 4))
def test_p_pre_range(x, p_max):
    out = p_pre(x, 5, p_max)
    assert set(np.unique(out)) <= set(range(1, p_max + 1))


# thinning proxy

def test_alpha_pre_below_mean_is_zero():
    x = np.array([5, 5, 0, 5])
    mt = np.full(4, 2.0)
    out = alpha_pre(x, mt, np.ones(4))
    assert out[2] == 0.0


def test_alpha_pre_flat_series_all_ones():
    x = np.full(10, 3)
    assert np.all(alpha_pre(x, np.full(10, 3.0), np.full(10, 2.0)) == 1.0)


def test_alpha_pre_recent_window():
    x = np.array([0, 4, 0, 2, 6])
    mt = np.ones(5)
    A = np.maximum(x - 1, 0)  # (0, 3, 0, 1, 5)
    out_raw = alpha_pre(x, mt, np.full(5, 2.0))
    # s = min(n-1, 2); B_5 = mean(A_4, A_3) = 0.5 -> ratio 10 is the maximum
    ratios = {3: A[2] / ((A[1] + A[0]) / 2), 4: A[3] / ((A[2] + A[1]) / 2), 5: A[4] / ((A[3] + A[2]) / 2)}
    top = max(ratios.values())
    for n, v in ratios.items():
        assert out_raw[n - 1] == pytest.approx(v / top)


def test_alpha_pre_needs_two_points():
    with pytest.raises(ValueError):
        alpha_pre(np.array([1]), np.array([1.0]), np.array([1.0]))


@settings(max_examples=40, deadline=None)
@given(arrays(np.int64, st.integers(2, 60), elements=st.integers(0, 9)))
def test_alpha_pre_unit_interval(x):
    mt = trim(x.astype(float), (0.4, 0.3))
    out = alpha_pre(x, mt, np.full(x.shape[0], 2.0))
    assert np.all((out >= 0) & (out <= 1))
    assert out.max() == 1.0


# features

def test_features_constant_series():
    cfg = RenesConfig(d_p=3)
    pre = build_features(np.full(30, 4), cfg, 2)
    np.testing.assert_allclose(pre.features, np.ones((30, 3)))


def test_features_column_means():
    params, env = reference_model("r2c1", "max")
    x = simulate(params, env, 500, seed=3).x
    cfg = reference_renes("r2c1", "max")
    pre = build_features(x, cfg, 4)
    assert pre.features.shape == (500, 3) and np.all(np.isfinite(pre.features))
    np.testing.assert_allclose(pre.features.mean(axis=0), cfg.C, atol=1e-9)
    assert np.all(pre.p_t >= 1)


def test_features_reject_all_zero():
    with pytest.raises(ValueError, match="mean"):
        build_features(np.zeros(30, dtype=int), RenesConfig(d_p=3), 2)


def test_literal_switches():
    x = np.random.default_rng(0).poisson(2.0, size=80)
    base = build_features(x, RenesConfig(d_p=5), 3)
    center = build_features(x, RenesConfig(d_p=5, t_summand="center"), 3)
    np.testing.assert_allclose(center.mu_t, x)
    assert not np.allclose(base.mu_t, center.mu_t)
    mv = p_pre(x, 5, 3, order_stat="max_value")
    assert np.all(mv <= 1.0)
    head = build_features(x, RenesConfig(d_p=5, b_window="head"), 3)
    assert not np.allclose(head.alpha_raw, base.alpha_raw)
