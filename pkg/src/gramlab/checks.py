"""Randomised sweeps over the exact identities and inequalities.

Each sweep draws its instances from a seeded stream and returns a
:class:`CheckResult`; ``run_all`` is what ``gramlab check`` executes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagnostics import (
    construct_etf,
    fle_residual,
    kantorovich_check,
    nc_probe,
    normalize_sample_for_layer,
    ols_interpolation_gap,
    pairwise_taylor_sum,
    prop1_alignment,
    region_crossings_depth2,
    thm1_residual_scaling,
    thm2_bound_check,
    thm3_prediction,
    woodbury_error_check,
)
from .nn import backward, forward, init_network
from .rng import SplitMix64


@dataclass
class CheckResult:
    name: str
    trials: int
    failures: int
    worst: float
    limit: str
    values: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.trials > 0 and self.failures == 0

    def row(self) -> dict:
        return {"check": self.name, "trials": self.trials, "failures": self.failures,
                "worst": self.worst, "limit": self.limit, "passed": self.passed}


def _loss_setup(rng: SplitMix64, C: int, B: int):
    kind = ("mse", "bce", "softmax_ce")[int(rng.integers(3, 1)[0])]
    if kind == "bce":
        return kind, "sigmoid", 1, (rng.uniform((1, B)) > 0.5).astype(float)
    if kind == "softmax_ce":
        Y = np.zeros((C, B))
        Y[rng.integers(C, B), np.arange(B)] = 1.0
        return kind, "identity", C, Y
    return kind, ("identity", "sigmoid")[int(rng.integers(2, 1)[0])], C, rng.normal((C, B))


def fle_sweep(trials: int = 100, seed: int = 0, tol: float = 1e-10) -> CheckResult:
    """Feature Learning Equation residual on random nets, batches and losses."""
    vals = []
    for t in range(trials):
        rng = SplitMix64(seed).spawn(t)
        depth = 1 + int(rng.integers(3, 1)[0])
        width = [2 + int(w) for w in rng.integers(12, depth)]
        d0, C, B = 2 + int(rng.integers(8, 1)[0]), 2 + int(rng.integers(3, 1)[0]), 1 + int(rng.integers(16, 1)[0])
        loss, readout, out, Y = _loss_setup(rng, C, B)
        act = ("relu", "gelu", "identity", "sigmoid")[int(rng.integers(4, 1)[0])]
        net = init_network([d0, *width, out], act, bias=bool(rng.integers(2, 1)[0]), seed=int(rng.u64(1)[0]), readout=readout)
        X = rng.normal((d0, B))
        trace = forward(net, X)
        _, grads = backward(net, trace, loss, Y)
        vals.append(max(fle_residual(net, trace, grads, l) for l in range(net.depth)))
    vals = np.asarray(vals)
    return CheckResult("fle_exactness", trials, int(np.sum(vals > tol)), float(vals.max()), f"<= {tol:g}", vals.tolist())


def thm1_sweep(nets: int = 20, gammas=(1e-2, 1e-3), seed: int = 0, band=(3.5, 4.5)) -> CheckResult:
    """Ratio of Gram/VCS residuals at gamma and gamma/2 for random relu nets."""
    ratios = []
    for t in range(nets):
        rng = SplitMix64(seed).spawn(t)
        net = init_network([6, 16, 16, 3], "relu", seed=int(rng.u64(1)[0]))
        X, Y = rng.normal((6, 12)), rng.normal((3, 12))
        for g in gammas:
            for layer in range(net.depth):
                r1, r2 = thm1_residual_scaling(net, X, Y, "mse", g, layer)
                if r1 > 1e-12:
                    ratios.append(r1 / r2)
    ratios = np.asarray(ratios)
    bad = np.sum((ratios < band[0]) | (ratios > band[1]))
    worst = float(ratios[np.argmax(np.abs(ratios - 4.0))])
    return CheckResult("thm1_second_order", len(ratios), int(bad), worst, f"in [{band[0]}, {band[1]}]", ratios.tolist())


def woodbury_sweep(trials: int = 50, seed: int = 0, tol: float = 1e-8) -> CheckResult:
    vals = []
    for t in range(trials):
        rng = SplitMix64(seed).spawn(t)
        d, N = 2 + int(rng.integers(30, 1)[0]), 5 + int(rng.integers(250, 1)[0])
        H, Y = rng.normal((d, N)), rng.normal((N, 1 + int(rng.integers(3, 1)[0])))
        lam = float(10 ** (-3 + 5 * rng.uniform()))
        vals.append(woodbury_error_check(H, Y, lam))
    vals = np.asarray(vals)
    return CheckResult("woodbury", trials, int(np.sum(vals > tol)), float(vals.max()), f"<= {tol:g}", vals.tolist())


def thm2_sweep(trials: int = 100, seed: int = 0) -> CheckResult:
    """TL against ``1 - C / S(G_id)`` on instances meeting the theorem's preconditions."""
    margins = []
    for t in range(trials):
        rng = SplitMix64(seed).spawn(t)
        d = 2 + int(rng.integers(10, 1)[0])
        N = d + 1 + int(rng.integers(60, 1)[0])
        H = rng.normal((d, N)) * float(10 ** (-1 + 2 * rng.uniform()))
        W = rng.normal((1 + int(rng.integers(8, 1)[0]), d))
        if t % 4 == 0:
            # a target that is nearly linear in H makes the bound bite
            y = H.T @ rng.normal(d) + 0.1 * rng.normal(N)
        else:
            y = rng.normal(N)
        lam = float(10 ** (-2 + 3 * rng.uniform()))
        c0 = float(np.linalg.norm(W, 2)) * (1 + rng.uniform())
        c1 = float(np.linalg.norm(H)) * (1 + rng.uniform())
        res = thm2_bound_check(H, y, W, lam, c0, c1)
        margins.append(res.tl - res.bound)
    margins = np.asarray(margins)
    return CheckResult("thm2_bound", trials, int(np.sum(margins < 0)), float(margins.min()), "TL - bound >= 0", margins.tolist())


def kantorovich_sweep(trials: int = 200, seed: int = 0) -> CheckResult:
    gaps = []
    for t in range(trials):
        rng = SplitMix64(seed).spawn(t)
        n = 2 + int(rng.integers(40, 1)[0])
        A = rng.normal((n, 1 + int(rng.integers(2 * n, 1)[0])))
        G = A @ A.T
        y = rng.normal(n)
        if t % 5 == 0:
            y = np.linalg.eigh(G)[1][:, 0]  # along the smallest eigenvector
        lam = float(10 ** (-3 + 4 * rng.uniform()))
        lhs, rhs = kantorovich_check(G, y, lam)
        gaps.append((rhs - lhs) / max(rhs, 1e-300))
    gaps = np.asarray(gaps)
    return CheckResult("kantorovich", trials, int(np.sum(gaps < -1e-12)), float(gaps.min()), "lhs <= rhs", gaps.tolist())


def regions_sweep(trials: int = 500, seed: int = 0) -> CheckResult:
    slack = []
    for t in range(trials):
        rng = SplitMix64(seed).spawn(t)
        d, m = 2 + int(rng.integers(6, 1)[0]), 2 + int(rng.integers(30, 1)[0])
        net = init_network([d, m, 1], "relu", seed=int(rng.u64(1)[0]))
        a, b = rng.normal(d), rng.normal(d)
        res = region_crossings_depth2(net, a, b)
        ok = res.holds
        slack.append((res.bound - abs(res.error)) if res.crossings else (0.0 if ok else -abs(res.error)))
        if not ok:
            slack[-1] = min(slack[-1], -1e-300)
    slack = np.asarray(slack)
    return CheckResult("pwl_regions", trials, int(np.sum(slack < 0)), float(slack.min()), "|eps| <= 2 M B delta", slack.tolist())


def nc_sweep(classes=(2, 3, 5, 10), extra_dims: int = 3, per_class: int = 5, seed: int = 0, tol: float = 1e-8) -> CheckResult:
    vals = []
    for C in classes:
        H, labels, W = construct_etf(C, C + extra_dims, per_class, seed=seed + C)
        rep = nc_probe(H, labels, W)
        vals.append(max(rep.gram_distance, abs(rep.maximality_gap)))
    vals = np.asarray(vals)
    return CheckResult("nc_extremality", len(vals), int(np.sum(vals > tol)), float(vals.max()), f"<= {tol:g}", vals.tolist())


def prop1_sweep(trials: int = 100, seed: int = 0) -> CheckResult:
    fails = []
    for t in range(trials):
        rng = SplitMix64(seed).spawn(t)
        depth = 2 + int(rng.integers(2, 1)[0])
        dims = [3 + int(rng.integers(6, 1)[0]) for _ in range(depth)] + [1]
        net = init_network(dims, "relu", seed=int(rng.u64(1)[0]))
        layer = 1 + int(rng.integers(depth - 1, 1)[0])
        x = rng.normal(dims[0])
        try:
            x = normalize_sample_for_layer(net, x, layer)
        except Exception:
            x = rng.normal(dims[0]) + 1.0
            x = normalize_sample_for_layer(net, x, layer)
        gamma = float(10 ** (-3 + 2.5 * rng.uniform()))
        rep = prop1_alignment(net, layer, x, rng.normal(1), gamma)
        fails.append(int(np.sum(~(rep.magnitude_ok & rep.sign_ok))))
    fails = np.asarray(fails)
    return CheckResult("prop1_alignment", trials, int(np.sum(fails > 0)), float(fails.max()), "all coordinates aligned", fails.tolist())


def taylor_sweep(trials: int = 50, seed: int = 0, tol: float = 1e-8) -> CheckResult:
    vals = []
    for t in range(trials):
        rng = SplitMix64(seed).spawn(t)
        d, N = 2 + int(rng.integers(8, 1)[0]), 2 + int(rng.integers(40, 1)[0])
        net = init_network([d, 4 + int(rng.integers(20, 1)[0]), 1], "relu", seed=int(rng.u64(1)[0]))
        X = rng.normal((d, N))
        X -= X.mean(axis=1, keepdims=True)
        lhs, rhs = pairwise_taylor_sum(net, X)
        vals.append(abs(lhs - rhs) / max(abs(rhs), 1e-300))
    vals = np.asarray(vals)
    return CheckResult("pairwise_taylor", trials, int(np.sum(vals > tol)), float(vals.max()), f"<= {tol:g}", vals.tolist())


def thm3_sweep(seeds: int = 50, loss: str = "mse", layer: int | None = None, gamma: float = 1e-4, seed: int = 0,
               tol: float = 0.1) -> CheckResult:
    """Median relative gap of the one-step surrogate prediction on 1-hidden relu nets.

    ``layer=None`` uses the readout layer. One trial = one seed; the check
    passes when the median gap is within ``tol``.
    """
    readout = "sigmoid" if loss == "bce" else "identity"
    gaps = []
    for s in range(seeds):
        rng = SplitMix64(seed).spawn(s)
        net = init_network([5, 16, 1], "relu", seed=int(rng.u64(1)[0]), readout=readout)
        X = rng.normal((5, 40))
        if loss == "bce":
            y = (rng.uniform(40) > 0.5).astype(float)
        else:
            y = rng.normal(40)
        l = net.depth - 1 if layer is None else layer
        # the sigmoid readout is not homogeneous; the theorem is stated on the logit
        res = thm3_prediction(net, X, y, gamma, loss, layer=l)
        gaps.append(res.relative_gap)
    gaps = np.asarray(gaps)
    med = float(np.median(gaps))
    return CheckResult(f"thm3_{loss}_layer{'out' if layer is None else layer}", seeds, int(med > tol), med,
                       f"median <= {tol:g}", gaps.tolist())


def interpolation_sweep(trials: int = 20, seed: int = 0) -> CheckResult:
    margins = []
    for t in range(trials):
        rng = SplitMix64(seed).spawn(t)
        N, k, d = 10 + int(rng.integers(60, 1)[0]), 1 + int(rng.integers(6, 1)[0]), 1 + int(rng.integers(20, 1)[0])
        Z = rng.normal((N, k))
        X = np.tanh(Z @ rng.normal((k, d))) + 0.1 * rng.normal((N, d))
        res = ols_interpolation_gap(Z, X)
        margins.append(float(np.min(res.rhs - res.lhs)))
    margins = np.asarray(margins)
    return CheckResult("ols_interpolation", trials, int(np.sum(margins < -1e-10)), float(margins.min()), "lhs <= rhs", margins.tolist())


def run_all(trials: int = 100, seed: int = 0) -> list[CheckResult]:
    """Every sweep, with counts scaled from ``trials`` (100 reproduces the default sizes)."""
    k = trials / 100.0

    def n(base):
        return max(1, int(round(base * k)))

    return [
        fle_sweep(n(100), seed),
        thm1_sweep(n(20), seed=seed),
        woodbury_sweep(n(50), seed),
        thm2_sweep(n(100), seed),
        thm3_sweep(n(50), "mse", seed=seed),
        thm3_sweep(n(50), "bce", seed=seed),
        nc_sweep(seed=seed),
        interpolation_sweep(n(20), seed),
        prop1_sweep(n(100), seed),
        taylor_sweep(n(50), seed),
        kantorovich_sweep(n(200), seed),
        regions_sweep(n(500), seed),
    ]
