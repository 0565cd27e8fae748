import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gramlab.diagnostics import (
    agop,
    construct_etf,
    fle_residual,
    gram_shift,
    kantorovich_check,
    layer_diagnostics,
    moving_target_decomp,
    nc_probe,
    normalize_sample_for_layer,
    ols_interpolation_gap,
    one_hot_centered,
    pairwise_taylor_sum,
    prop1_alignment,
    region_crossings_depth2,
    surrogate,
    surrogate_id,
    target_linearity,
    thm1_residual_scaling,
    thm2_bound_check,
    thm2_constant,
    thm3_prediction,
    virtual_trajectory,
    vcs,
    woodbury_error_check,
)
from gramlab.errors import AssumptionViolated, ConstantInput, DegenerateLabels, NotHomogeneous, ShapeMismatch
from gramlab.nn import GradientBundle, Layer, Network, backward, forward, init_network, output_gradients
from gramlab.rng import SplitMix64


def _net_batch(seed, dims=(4, 7, 5, 2), act="relu"):
    rng = SplitMix64(seed)
    net = init_network(list(dims), act, seed=seed)
    X, Y = rng.normal((dims[0], 9)), rng.normal((dims[-1], 9))
    trace = forward(net, X)
    _, grads = backward(net, trace, "mse", Y)
    return net, trace, grads


# ---------------------------------------------------------------- FLE / VCS


def test_fle_exact_on_correct_backward():
    net, trace, grads = _net_batch(1)
    for l in range(net.depth):
        assert fle_residual(net, trace, grads, l) <= 1e-10


def test_fle_detects_inconsistent_bundle():
    net, trace, grads = _net_batch(2)
    broken = GradientBundle(grads.dW, [np.zeros_like(d) for d in grads.dh])
    assert fle_residual(net, trace, broken, 1) == pytest.approx(1.0)


def test_gram_shift_cases():
    W = SplitMix64(3).normal((4, 6))
    assert np.all(gram_shift(W, W) == 0)
    np.testing.assert_allclose(gram_shift(W, 2 * W), 3 * W.T @ W, atol=1e-12)
    W2 = SplitMix64(4).normal((4, 6))
    direct = np.einsum("ki,kj->ij", W2, W2) - np.einsum("ki,kj->ij", W, W)
    np.testing.assert_allclose(gram_shift(W, W2), direct, atol=1e-12)


def test_vcs_cases():
    H = SplitMix64(5).normal((3, 4))
    dH = SplitMix64(6).normal((3, 4))
    assert np.all(vcs(H, dH, 0.0) == 0)
    assert np.all(vcs(H, np.zeros_like(H), 0.3) == 0)
    h, g = H[:, :1], dH[:, :1]
    hp = h - 0.3 * g
    np.testing.assert_allclose(vcs(h, g, 0.3), hp @ hp.T - h @ h.T, atol=1e-14)


def test_thm1_residual_closed_form():
    # the Gram shift minus its first-order part is exactly gamma^2 dW^T dW
    net, trace, _ = _net_batch(7)
    Y = np.ones_like(trace.output)
    gamma = 0.05
    r, r_half = thm1_residual_scaling(net, trace.hs[0], Y, "mse", gamma, layer=1)
    _, g = backward(net, trace, "mse", Y)
    exact = gamma**2 * np.linalg.norm(g.dW[1].T @ g.dW[1])
    assert r == pytest.approx(exact, rel=1e-10)
    assert r / r_half == pytest.approx(4.0, rel=1e-10)


def test_thm1_zero_step():
    net, trace, _ = _net_batch(8)
    assert thm1_residual_scaling(net, trace.hs[0], np.zeros_like(trace.output), "mse", 0.0) == (0.0, 0.0)


# ---------------------------------------------------------------- AGOP / virtual


def test_agop_linear():
    w = SplitMix64(9).normal((1, 5))
    net = Network([Layer(w, "identity")])
    A = agop(net, forward(net, SplitMix64(10).normal((5, 7))), 0)
    np.testing.assert_allclose(A, w.T @ w, atol=1e-14)


def test_agop_zero_readout():
    net = init_network([4, 6, 1], seed=11)
    net.layers[-1].W[:] = 0.0
    assert np.all(agop(net, forward(net, SplitMix64(0).normal((4, 5))), 1) == 0)


def test_agop_finite_difference():
    net = init_network([3, 8, 8, 1], "relu", seed=12)
    X = SplitMix64(13).normal((3, 40))
    trace = forward(net, X)
    # central differences are only valid away from relu kinks
    keep = np.abs(trace.zs[1]).min(axis=0) > 1e-4
    X = X[:, keep]
    trace = forward(net, X)
    head = Network(net.layers[1:])
    n = X.shape[1]
    fd = np.zeros((8, n))
    for i in range(n):
        h = trace.hs[1][:, [i]]
        for k in range(8):
            e = np.zeros((8, 1))
            e[k] = 1e-6
            fd[k, i] = (head(h + e) - head(h - e))[0, 0] / 2e-6
    assert n >= 10
    np.testing.assert_allclose(agop(net, trace, 1), fd @ fd.T / n, atol=1e-8)


def test_virtual_trajectory_cases():
    net = init_network([2, 5, 1], seed=14)
    X0 = SplitMix64(15).normal((2, 4))
    Y = SplitMix64(16).normal((1, 4))
    for Xt in virtual_trajectory([net, net], X0, Y, 0.0):
        np.testing.assert_array_equal(Xt, X0)
    for Xt in virtual_trajectory([net, net], X0, net(X0), 0.1):
        np.testing.assert_allclose(Xt, X0, atol=1e-15)


def test_virtual_trajectory_linear_step():
    w = np.array([[1.5, -0.5]])
    net = Network([Layer(w, "identity")])
    X0 = SplitMix64(17).normal((2, 3))
    Y = SplitMix64(18).normal((1, 3))
    X1 = virtual_trajectory([net], X0, Y, 0.1)[1]
    expected = X0 - 0.1 * 2 * w.T @ (w @ X0 - Y)  # per-sample loss (w x - y)^2
    np.testing.assert_allclose(X1, expected, atol=1e-14)


# ---------------------------------------------------------------- TL and surrogate


def _r2_oracle(H, Y, lam):
    H = np.asarray(H)
    beta = np.linalg.inv(H @ H.T + lam * np.eye(H.shape[0])) @ H @ Y
    resid = Y - H.T @ beta
    return 1 - np.sum(resid**2) / np.sum((Y - Y.mean(axis=0)) ** 2)


def test_tl_self_regression():
    labels = np.arange(20) % 4
    Y = one_hot_centered(labels, 4)
    assert target_linearity(Y.T, Y, 0.0) == pytest.approx(1.0, abs=1e-8)


def test_tl_large_lambda():
    rng = SplitMix64(19)
    Y = one_hot_centered(rng.integers(3, 30), 3)
    Y = Y - Y.mean(axis=0)
    assert abs(target_linearity(rng.normal((5, 30)), Y, 1e12)) <= 1e-8


def test_tl_matches_dense_oracle():
    rng = SplitMix64(20)
    H, Y = rng.normal((8, 20)), rng.normal((20, 2))
    for lam in (1e-3, 0.5, 10.0):
        assert target_linearity(H, Y, lam) == pytest.approx(_r2_oracle(H, Y, lam), abs=1e-8)


def test_tl_constant_target():
    with pytest.raises(ConstantInput):
        target_linearity(np.ones((2, 5)), np.ones(5))


def test_woodbury_cases():
    rng = SplitMix64(21)
    H, Y = rng.normal((6, 40)), rng.normal((40, 2))
    assert woodbury_error_check(H, Y, 0.3) <= 1e-8
    assert woodbury_error_check(np.zeros((6, 40)), Y, 0.3) <= 1e-12
    assert woodbury_error_check(H, Y, 1e8) <= 1e-8


def test_surrogate_cases():
    rng = SplitMix64(22)
    Y = rng.normal((6, 2))
    assert surrogate(np.eye(6), Y) == pytest.approx(np.sum(Y**2))
    y = rng.normal(6)
    assert surrogate(np.outer(y, y), y) == pytest.approx(np.sum(y**2) ** 2)
    H, W = rng.normal((4, 6)), rng.normal((3, 4))
    G = H.T @ W.T @ W @ H
    assert surrogate_id(H, W, Y) == pytest.approx(np.trace(Y.T @ G @ Y), rel=1e-12)


def test_thm2_bound_and_preconditions():
    rng = SplitMix64(23)
    H, W = rng.normal((3, 30)), rng.normal((2, 3))
    y = H.T @ rng.normal(3)
    c0, c1 = 1.01 * np.linalg.norm(W, 2), 1.01 * np.linalg.norm(H)
    res = thm2_bound_check(H, y, W, 0.1, c0, c1)
    assert res.holds
    with pytest.raises(AssumptionViolated):
        thm2_bound_check(H, y, W, 0.1, 0.5 * c0, c1)
    with pytest.raises(AssumptionViolated):
        thm2_bound_check(H[:, :3], y[:3], W, 0.1, c0, c1)


def test_thm2_constant_grows_with_lambda():
    y = SplitMix64(24).normal(10)
    c1 = 2.0
    lams = np.linspace(c1**2 / 2, 50, 20)
    Cs = [thm2_constant(y, lam, 1.0, c1) for lam in lams]
    assert np.all(np.diff(Cs) > 0)


def test_kantorovich_isotropic_equality():
    y = SplitMix64(25).normal(7)
    lhs, rhs = kantorovich_check(3.0 * np.eye(7), y, 0.5)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_kantorovich_random_and_extremes():
    rng = SplitMix64(26)
    A = rng.normal((9, 4))
    G = A @ A.T
    for y in (rng.normal(9), np.linalg.eigh(G)[1][:, 0], np.linalg.eigh(G)[1][:, -1]):
        lhs, rhs = kantorovich_check(G, y, 0.01)
        assert lhs <= rhs * (1 + 1e-12)


# ---------------------------------------------------------------- thm3


def test_thm3_zero_step_and_perfect_fit():
    net = init_network([5, 16, 1], seed=27)
    X = SplitMix64(28).normal((5, 30))
    y = SplitMix64(29).normal(30)
    r = thm3_prediction(net, X, y, 0.0, layer=1)
    assert (r.actual, r.predicted) == (0.0, 0.0)
    r = thm3_prediction(net, X, net(X).ravel(), 1e-4, layer=1)
    assert r.predicted == 0.0


def test_thm3_readout_prediction_accurate():
    net = init_network([5, 16, 1], seed=30)
    X = SplitMix64(31).normal((5, 40))
    y = SplitMix64(32).normal(40)
    assert thm3_prediction(net, X, y, 1e-4, layer=1).relative_gap <= 0.1


def test_thm3_needs_homogeneity():
    net = init_network([5, 16, 1], "gelu", seed=33)
    with pytest.raises(NotHomogeneous):
        thm3_prediction(net, SplitMix64(0).normal((5, 10)), np.ones(10), 1e-4, layer=0)


# ---------------------------------------------------------------- moving target


def test_moving_target_cases():
    rng = SplitMix64(34)
    H = rng.normal((20, 10))  # full row rank in sample space
    y = rng.normal(10)
    assert moving_target_decomp(H, y, y, 1e-12).target_gap <= 1e-6
    H2 = rng.normal((3, 10))
    dec = moving_target_decomp(H2, y, rng.normal(10), 1e-8)
    assert dec.triangle_ok
    from gramlab.diagnostics import ols_projection

    y_ols = ols_projection(H2, y, 1e-8)
    assert moving_target_decomp(H2, y, y_ols, 1e-8).fit_gap <= 1e-12


def test_ols_projection_dual_branch_agrees():
    from gramlab.diagnostics import ols_projection

    rng = SplitMix64(35)
    H, y = rng.normal((6, 9)), rng.normal(9)
    # primal (d <= N) vs an explicit formula
    direct = H.T @ np.linalg.solve(H @ H.T + 0.1 * np.eye(6), H @ y)
    np.testing.assert_allclose(ols_projection(H, y, 0.1), direct, atol=1e-12)
    Ht = rng.normal((12, 9))  # dual branch (d > N)
    direct = Ht.T @ np.linalg.solve(Ht @ Ht.T + 0.1 * np.eye(12), Ht @ y)
    np.testing.assert_allclose(ols_projection(Ht, y, 0.1), direct, atol=1e-10)


# ---------------------------------------------------------------- prop1 / taylor / regions


def test_prop1_zero_step():
    net = init_network([4, 6, 6, 1], seed=36)
    x = normalize_sample_for_layer(net, SplitMix64(37).normal(4), 2)
    rep = prop1_alignment(net, 2, x, [0.3], 0.0)
    assert rep.all_pass and np.all(rep.actual == 0)
    assert rep.h_norm == pytest.approx(1.0)


def test_prop1_dead_layer():
    net = init_network([3, 4, 1], seed=38)
    net.layers[0].W[:] = -np.abs(net.layers[0].W)
    x = np.abs(SplitMix64(39).normal(3))
    rep = prop1_alignment(net, 1, x, [1.0], 1e-3)
    # the actual change is zero while the virtual one need not be: the bound holds trivially
    assert rep.all_pass and np.all(rep.actual == 0)


def test_taylor_linear_is_zero():
    net = Network([Layer(SplitMix64(40).normal((1, 3)), "identity")])
    X = SplitMix64(41).normal((3, 8))
    X -= X.mean(axis=1, keepdims=True)
    lhs, rhs = pairwise_taylor_sum(net, X)
    assert abs(lhs) <= 1e-12 and abs(rhs) <= 1e-12


def test_taylor_symmetric_and_random():
    net = init_network([3, 10, 1], seed=42)
    x = SplitMix64(43).normal((3, 4))
    for X in (np.hstack([x, -x]), SplitMix64(44).normal((3, 15))):
        X = X - X.mean(axis=1, keepdims=True)
        lhs, rhs = pairwise_taylor_sum(net, X)
        assert abs(lhs - rhs) <= 1e-8 * abs(rhs)


def test_taylor_requires_centering():
    with pytest.raises(ShapeMismatch):
        pairwise_taylor_sum(init_network([2, 3, 1]), np.ones((2, 4)))


def test_regions_same_region():
    net = init_network([3, 8, 1], seed=45)
    a = SplitMix64(46).normal(3)
    res = region_crossings_depth2(net, a, 2.5 * a)  # a ray never leaves its region
    assert res.crossings == 0 and abs(res.error) <= 1e-12 and res.holds


def test_regions_single_crossing_by_hand():
    W = np.array([[1.0, 0.0], [0.0, 1.0]])
    r = np.array([[2.0, 3.0]])
    net = Network([Layer(W, "relu"), Layer(r, "identity")])
    a, b = np.array([1.0, 1.0]), np.array([-1.0, 1.0])
    res = region_crossings_depth2(net, a, b)
    # f(b) = 3, grad f(a) = (2, 3), b . grad = 1, so the error is 2
    assert res.crossings == 1 and res.error == pytest.approx(2.0)
    assert res.delta == pytest.approx(2.0) and res.radius == pytest.approx(np.sqrt(2))
    assert res.holds


# ---------------------------------------------------------------- collapse


def test_one_hot_centered():
    np.testing.assert_allclose(one_hot_centered([0], 2), [[0.5, -0.5]])
    Y = one_hot_centered(np.arange(12) % 4, 4)
    np.testing.assert_allclose(Y.sum(axis=0), 0, atol=1e-15)
    np.testing.assert_allclose(np.sum(Y**2, axis=1), 1 - 1 / 4)


@pytest.mark.parametrize("C", [2, 3, 5, 10])
def test_etf_extremality(C):
    H, labels, W = construct_etf(C, C + 3, 5, seed=C)
    rep = nc_probe(H, labels, W)
    assert rep.gram_distance <= 1e-8 and abs(rep.maximality_gap) <= 1e-8
    assert rep.nc1 <= 1e-20 and rep.etf_deviation <= 1e-10
    np.testing.assert_allclose(W @ H, one_hot_centered(labels, C).T, atol=1e-10)


def test_etf_geometry():
    H, labels, _ = construct_etf(2, 2, 1)
    np.testing.assert_allclose(H[:, 0], -H[:, 1], atol=1e-12)
    H, labels, _ = construct_etf(3, 5, 1)
    M = H / np.linalg.norm(H, axis=0)
    cos = M.T @ M
    np.testing.assert_allclose(cos[~np.eye(3, dtype=bool)], -0.5, atol=1e-12)


def test_nc_random_features_positive_gap():
    rng = SplitMix64(47)
    labels = np.arange(40) % 4
    rep = nc_probe(rng.normal((10, 40)), labels, rng.normal((4, 10)))
    assert rep.maximality_gap > 0 and rep.gram_distance > 0.1


def test_nc_single_class():
    with pytest.raises(DegenerateLabels):
        nc_probe(np.ones((3, 4)), np.zeros(4), np.ones((2, 3)))


def test_nc_gram_distance_explicit_oracle():
    rng = SplitMix64(48)
    labels = np.arange(30) % 3
    H, W = rng.normal((5, 30)), rng.normal((3, 5))
    Y = one_hot_centered(labels, 3)
    G = (W @ H).T @ (W @ H)
    ref = np.linalg.norm(G - Y @ Y.T) / np.linalg.norm(Y @ Y.T)
    assert nc_probe(H, labels, W).gram_distance == pytest.approx(ref, rel=1e-10)


# ---------------------------------------------------------------- interpolation


def test_interpolation_linear_is_zero():
    Z = SplitMix64(49).normal((20, 3))
    res = ols_interpolation_gap(Z, Z @ SplitMix64(50).normal((3, 4)))
    assert np.all(res.lhs <= 1e-10) and res.rhs <= 1e-10


def test_interpolation_bound_holds():
    rng = SplitMix64(51)
    Z = rng.normal((30, 2))
    res = ols_interpolation_gap(Z, np.sin(Z @ rng.normal((2, 5))))
    assert res.holds


# ---------------------------------------------------------------- per-layer bundle


def test_layer_diagnostics_bundle():
    net, trace, grads = _net_batch(52)
    Y = SplitMix64(53).normal((9, 2))
    d = layer_diagnostics(net, trace, Y, 1, 0.0, grads, 1e-3)
    assert d.fle_residual <= 1e-10
    assert d.vcs_residual == pytest.approx(1e-6 * np.linalg.norm(grads.dW[1].T @ grads.dW[1]), rel=1e-8)
    assert set(d.as_row()) == {"layer", "tl", "surrogate", "vcs_residual", "fle_residual"}


# ---------------------------------------------------------------- properties


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), lam=st.floats(1e-3, 1e3))
def test_tl_bounded_and_monotone_in_lambda(seed, lam):
    rng = SplitMix64(seed)
    H, Y = rng.normal((4, 25)), rng.normal((25, 2))
    a, b = target_linearity(H, Y, lam), target_linearity(H, Y, 2 * lam)
    assert a <= 1 + 1e-12 and b <= a + 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), c=st.floats(0.1, 10))
def test_surrogate_scales_quadratically(seed, c):
    rng = SplitMix64(seed)
    H, W, Y = rng.normal((3, 8)), rng.normal((2, 3)), rng.normal((8, 1))
    assert surrogate_id(H, c * W, Y) == pytest.approx(c**2 * surrogate_id(H, W, Y), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_moving_target_triangle_property(seed):
    rng = SplitMix64(seed)
    dec = moving_target_decomp(rng.normal((4, 12)), rng.normal(12), rng.normal(12), 1e-6)
    assert dec.triangle_ok
