import math

import numpy as np
import pytest

from jacobilog import (
    DomainError,
    EnsembleSpec,
    Seed,
    critical_indices,
    evolve,
    linearize,
    linearized_delta,
    linearized_delta_closed,
    linearized_Delta,
    sample,
    scalar_coefficients,
    scalar_report,
)
from jacobilog.scalar_regime import (
    ScalarCoefficients,
    backward_weights,
    coefficient_pair,
    scalar_csv,
)

GBE = EnsembleSpec(kind="gbe", beta=2.0)


def synthetic_coeffs(u, v, delta1=0.0, n=10**4):
    # arrays are k-indexed with NaN padding at 0 and 1
    kmax = len(u) + 1
    uu = np.full(kmax + 1, np.nan)
    vv = np.full(kmax + 1, np.nan)
    uu[2:] = u
    vv[2:] = v
    idx = critical_indices(n, 1.0, 4.0)
    return ScalarCoefficients(indices=idx, kmax=kmax, u=uu, v=vv, delta1=delta1)


def test_coefficient_pair_quadratic_identity():
    # alpha = 2 solves alpha^2 - 2.5 alpha + 1 = 0, so u vanishes exactly
    u, v = coefficient_pair(zk=2.5, ck=0.0, gk=0.0, bk=0.0,
                            alpha_k=2.0, alpha_km1=2.0, k=50)
    assert u == 0.0
    assert v == 0.25


def test_v_noise_free():
    spec = EnsembleSpec(kind="general", v=1.0, b_law="zero", g_law="zero", c_rule="zero")
    n = 1000
    mat = sample(n, spec, Seed(0))
    idx = critical_indices(n, 1.0, 4.0)
    co = scalar_coefficients(mat, idx)
    tr = evolve(mat, 1.0, c_rule="zero")
    for k in (2, 50, co.kmax):
        assert co.v[k] == pytest.approx(1.0 / (tr.alpha[k] * tr.alpha[k - 1]), rel=1e-12)


def test_delta_reconstruction():
    n, z = 1000, 1.0
    mat = sample(n, GBE, Seed(123))
    idx = critical_indices(n, z, 4.0)
    co = scalar_coefficients(mat, idx)
    tr = evolve(mat, z)
    worst = 0.0
    for k in range(2, co.kmax + 1):
        if tr.flags[k] or tr.flags[k - 1] or not np.isfinite(tr.delta[k - 1]):
            continue
        pred = co.u[k] + co.v[k] * tr.delta[k - 1] / (1.0 + tr.delta[k - 1])
        worst = max(worst, abs(pred - tr.delta[k]))
    assert worst < 1e-9


def test_dual_evaluation():
    for root in (1, 2, 3):
        mat = sample(1000, GBE, Seed(root))
        idx = critical_indices(1000, 1.0, 4.0)
        co = scalar_coefficients(mat, idx)
        rec = linearized_delta(co, co.delta1)
        clo = linearized_delta_closed(co, co.delta1)
        sel = slice(2, co.kmax + 1)
        np.testing.assert_allclose(rec[sel], clo[sel], rtol=1e-10, atol=1e-13)


def test_homogeneous_solution():
    rng = np.random.default_rng(5)
    v = rng.uniform(0.5, 1.5, 30)
    co = synthetic_coeffs(np.zeros(30), v, delta1=0.7)
    dbar = linearized_delta(co, 0.7)
    expect = 0.7 * np.cumprod(v)
    np.testing.assert_allclose(dbar[2:], expect, rtol=1e-14)


def test_pure_drive():
    co = synthetic_coeffs(np.ones(25), np.zeros(25), delta1=0.0)
    dbar = linearized_delta(co, 0.0)
    assert dbar[1] == 0.0
    assert (dbar[2:] == 1.0).all()


def test_Delta_zero_on_zero_deltabar():
    co = synthetic_coeffs(np.zeros(20), np.ones(20))
    Dbar = linearized_Delta(co, np.zeros(21))
    assert (Dbar[1:] == 0.0).all()


def test_Delta_telescoping():
    d = 0.3
    kmax = 21
    co = synthetic_coeffs(np.zeros(kmax - 1), np.ones(kmax - 1))
    dbar = np.full(kmax + 1, d)
    Dbar = linearized_Delta(co, dbar)
    k = np.arange(1, kmax + 1)
    np.testing.assert_allclose(Dbar[1:], -(k - 1) * d * d, rtol=1e-13)


def test_backward_weights_recursion():
    mat = sample(500, GBE, Seed(9))
    idx = critical_indices(500, 1.0, 4.0)
    co = scalar_coefficients(mat, idx)
    w = backward_weights(co)
    assert w[co.kmax] == 1.0
    for j in range(co.kmax - 1, 0, -1):
        assert w[j] == pytest.approx(1.0 + co.v[j + 1] * w[j + 1], rel=1e-14)


def test_window_bounds():
    mat = sample(2**12, GBE, Seed(17))
    idx = critical_indices(2**12, 1.0, 4.0)
    lin = linearize(mat, idx)
    lo, hi = lin.window(0.1)
    assert lo == math.ceil(0.9 * idx.k0)
    assert hi == idx.scalar_end
    assert lin.sum_deltabar(0.1) == pytest.approx(
        math.fsum(lin.deltabar[lo: hi + 1]), rel=1e-15)


def test_noise_free_u_bound():
    # |u_k| <= 10/n over k <= 0.9 k0 on the deterministic gbe path
    n = 10**4
    spec = EnsembleSpec(kind="general", v=1.0, b_law="zero", g_law="zero", c_rule="gbe")
    mat = sample(n, spec, Seed(0))
    idx = critical_indices(n, 1.0, 4.0)
    co = scalar_coefficients(mat, idx)
    hi = int(0.9 * idx.k0)
    assert np.abs(co.u[2: hi + 1]).max() <= 10.0 / n


def test_zero_noise_sums_deterministic():
    spec = EnsembleSpec(kind="general", v=1.0, b_law="zero", g_law="zero", c_rule="gbe")
    n = 2**12
    mat = sample(n, spec, Seed(0))
    idx = critical_indices(n, 1.0, 4.0)
    rep1 = scalar_report(mat, idx, epsilon=0.1)
    rep2 = scalar_report(mat, idx, epsilon=0.1)
    assert rep1.sum_deltabar == rep2.sum_deltabar
    lin = linearize(mat, idx)
    lo, hi = lin.window(0.1)
    direct = math.fsum(float(lin.deltabar[k]) for k in range(lo, hi + 1))
    assert rep1.sum_deltabar == pytest.approx(direct, rel=1e-14)


def test_scalar_report_smoke_finite():
    n, z = 2**14, 1.0
    idx = critical_indices(n, z, 4.0)
    for r in range(100):
        mat = sample(n, GBE, Seed(2718, r))
        rep = scalar_report(mat, idx, epsilon=0.1)
        assert not rep.degenerate
        assert np.isfinite(rep.sum_deltabar)
        assert np.isfinite(rep.sum_Deltabar)
        assert np.isfinite(rep.edge_scaled)
        assert rep.window_lo <= rep.window_hi


def test_scalar_report_degenerate_window():
    mat = sample(16, GBE, Seed(4))
    idx = critical_indices(16, 0.5, 4.0)  # k0 = 1
    with pytest.warns(UserWarning):
        rep = scalar_report(mat, idx, epsilon=0.1)
    assert rep.degenerate
    assert math.isnan(rep.sum_deltabar)


def test_scalar_report_epsilon_domain():
    mat = sample(64, GBE, Seed(4))
    idx = critical_indices(64, 1.0, 4.0)
    for eps in (0.0, 1.0, -0.3):
        with pytest.raises(DomainError):
            scalar_report(mat, idx, epsilon=eps)


def test_Delta_tracking():
    # the linearized second-order term tracks the actual nonlinearity:
    # sum |delta_k - dbar_k - Dbar_k| stays below 10 in at least 95% of
    # replicas (measured: max near 0.1, so the margin is wide)
    n, z = 2**14, 1.0
    idx = critical_indices(n, z, 4.0)
    good = 0
    reps = 200
    for r in range(reps):
        mat = sample(n, GBE, Seed(314, r))
        tr = evolve(mat, z)
        lin = linearize(mat, idx)
        kmax = lin.coeffs.kmax
        d = tr.delta[2: kmax + 1]
        ok = np.isfinite(d)
        resid = np.abs(d - lin.deltabar[2: kmax + 1] - lin.Deltabar[2: kmax + 1])[ok]
        if resid.sum() < 10.0:
            good += 1
    assert good >= 0.95 * reps


def test_scalar_csv_layout():
    mat = sample(512, GBE, Seed(21))
    idx = critical_indices(512, 1.0, 4.0)
    tr = evolve(mat, 1.0)
    lin = linearize(mat, idx)
    text = scalar_csv(tr, lin)
    lines = text.strip().split("\n")
    assert lines[0] == "k,delta,delta_bar,Delta_bar"
    assert len(lines) - 1 == lin.coeffs.kmax
    row = lines[2].split(",")
    assert int(row[0]) == 2
    assert float(row[2]) == lin.deltabar[2]
