import math

import numpy as np
import pytest

from lowrank_sdp import manifold as mf
from lowrank_sdp.costs import DspcaCost, LinearCost
from lowrank_sdp.errors import BasePointMismatch
from lowrank_sdp.manifold import FactorPoint, TangentVector, project_horizontal, retract
from lowrank_sdp.trust_region import (
    TrOptions,
    _Workspace,
    _hess_arr,
    minimize,
    riemannian_gradient,
    riemannian_hessian_vector,
    tcg_solve,
)


def sym(M):
    return (M + M.T) / 2.0


def block_projector_set(n=5):
    """Two scaled disjoint-block projectors: products vanish pairwise."""
    blocks = [np.arange(0, 2), np.arange(2, n)]
    scales = [0.7, 1.5]
    mats, rhs = [], []
    for idx, c in zip(blocks, scales):
        M = np.zeros((n, n))
        M[np.ix_(idx, idx)] = c * np.eye(len(idx))
        mats.append(M)
        rhs.append(c)
    return mf.generic(mats, rhs)


def cases():
    rng = np.random.default_rng(20)
    data = rng.standard_normal((7, 5))
    return [
        ("elliptope", mf.elliptope(5), LinearCost(sym(rng.standard_normal((5, 5)))), 3),
        ("elliptope-dspca", mf.elliptope(5), DspcaCost(rho=0.3, kappa=0.05, data=data), 2),
        ("spectahedron", mf.spectahedron(5), LinearCost(sym(rng.standard_normal((5, 5)))), 2),
        ("generic", block_projector_set(), LinearCost(sym(rng.standard_normal((5, 5)))), 2),
    ]


def grad_field(cs, cost, Yarr):
    return _Workspace(cs, cost, FactorPoint(Yarr)).grad_arr


# ---------------------------------------------------------------- options


def test_options_validation():
    with pytest.raises(ValueError):
        TrOptions(rho_accept=0.3)
    with pytest.raises(ValueError):
        TrOptions(delta0=10.0, delta_max=8.0)
    with pytest.raises(ValueError):
        TrOptions(theta=-1.0)
    with pytest.raises(ValueError):
        TrOptions(max_outer=0)


# ------------------------------------------------------- first derivative


@pytest.mark.parametrize("name,cs,cost,p", cases())
def test_gradient_directional_derivative(name, cs, cost, p):
    rng = np.random.default_rng(31)
    pt = mf.random_feasible(cs, p, seed=8)
    g = riemannian_gradient(cs, cost, pt)
    for _ in range(4):
        Z = project_horizontal(cs, pt, rng.standard_normal(pt.Y.shape)).Z
        h = 1e-6 / max(1.0, float(np.linalg.norm(Z)))
        fd = (
            cost.value(retract(cs, pt, h * Z).Y)
            - cost.value(retract(cs, pt, -h * Z).Y)
        ) / (2.0 * h)
        got = float(np.sum(g.Z * Z))
        assert abs(got - fd) <= 1e-4 * max(1.0, abs(fd))


@pytest.mark.parametrize("name,cs,cost,p", cases())
def test_gradient_is_horizontal(name, cs, cost, p):
    pt = mf.random_feasible(cs, p, seed=8)
    g = riemannian_gradient(cs, cost, pt)
    again = project_horizontal(cs, pt, g.Z).Z
    assert np.linalg.norm(again - g.Z) <= 1e-10 * max(1.0, np.linalg.norm(g.Z))


# ------------------------------------------------------ second derivative


@pytest.mark.parametrize("name,cs,cost,p", cases())
def test_hessian_matches_field_derivative(name, cs, cost, p):
    # The Riemannian Hessian is the projected ambient derivative of the
    # projected-gradient field, so a central difference of that field is
    # an independent check of the Sylvester and coefficient derivatives.
    rng = np.random.default_rng(45)
    pt = mf.random_feasible(cs, p, seed=8)
    ws = _Workspace(cs, cost, pt)
    for _ in range(3):
        Z = project_horizontal(cs, pt, rng.standard_normal(pt.Y.shape)).Z
        Ha = _hess_arr(cs, cost, ws, Z)
        h = 1e-6 * max(1.0, np.linalg.norm(pt.Y)) / max(1.0, np.linalg.norm(Z))
        diff = (grad_field(cs, cost, pt.Y + h * Z) - grad_field(cs, cost, pt.Y - h * Z)) / (2 * h)
        Hfd, _, _ = mf._split(cs, pt.Y, diff, ws.d, ws.V, ws.q)
        assert np.linalg.norm(Ha - Hfd) <= 1e-6 * max(1.0, np.linalg.norm(Ha))


@pytest.mark.parametrize("name,cs,cost,p", cases())
def test_hessian_self_adjoint(name, cs, cost, p):
    rng = np.random.default_rng(46)
    pt = mf.random_feasible(cs, p, seed=9)
    Z1 = project_horizontal(cs, pt, rng.standard_normal(pt.Y.shape))
    Z2 = project_horizontal(cs, pt, rng.standard_normal(pt.Y.shape))
    H1 = riemannian_hessian_vector(cs, cost, pt, Z1)
    H2 = riemannian_hessian_vector(cs, cost, pt, Z2)
    a = float(np.sum(Z2.Z * H1.Z))
    b = float(np.sum(Z1.Z * H2.Z))
    assert abs(a - b) <= 1e-8 * max(1.0, abs(a))


def test_hessian_base_mismatch():
    cs = mf.elliptope(4)
    cost = LinearCost(np.eye(4))
    pt = mf.random_feasible(cs, 2, seed=1)
    other = mf.random_feasible(cs, 2, seed=2)
    Z = project_horizontal(cs, other, np.ones((4, 2)))
    with pytest.raises(BasePointMismatch):
        riemannian_hessian_vector(cs, cost, pt, Z)


# ----------------------------------------------------------- truncated CG


def tangent_at(cs, seed, n=6, p=2):
    pt = mf.random_feasible(cs, p, seed=seed)
    rng = np.random.default_rng(seed + 100)
    return pt, project_horizontal(cs, pt, rng.standard_normal((n, p)))


def test_tcg_identity_hessian_gives_newton_step():
    cs = mf.elliptope(6)
    pt, g = tangent_at(cs, 3)
    res = tcg_solve(lambda Z: Z, g, delta=100.0, opts=TrOptions())
    assert res.stop_reason == "tolerance"
    assert res.iterations == 1
    assert np.linalg.norm(res.step.Z + g.Z) <= 1e-12 * np.linalg.norm(g.Z)
    assert res.model_value == pytest.approx(-0.5 * g.norm**2, rel=1e-12)


def test_tcg_negative_curvature_hits_boundary():
    cs = mf.elliptope(6)
    pt, g = tangent_at(cs, 4)
    res = tcg_solve(lambda Z: -Z, g, delta=0.7, opts=TrOptions())
    assert res.stop_reason == "negative-curvature"
    assert np.linalg.norm(res.step.Z) == pytest.approx(0.7, rel=1e-12)


def test_tcg_boundary_stop():
    cs = mf.elliptope(6)
    pt, g = tangent_at(cs, 5)
    delta = 0.01 * g.norm
    res = tcg_solve(lambda Z: Z, g, delta=delta, opts=TrOptions())
    assert res.stop_reason == "boundary"
    assert np.linalg.norm(res.step.Z) == pytest.approx(delta, rel=1e-12)
    # along -g, clipped to the radius
    assert np.linalg.norm(res.step.Z + delta * g.Z / g.norm) <= 1e-12


def test_tcg_zero_gradient():
    cs = mf.elliptope(6)
    pt = mf.random_feasible(cs, 2, seed=6)
    g = TangentVector(np.zeros((6, 2)), pt)
    res = tcg_solve(lambda Z: Z, g, delta=1.0, opts=TrOptions())
    assert res.iterations == 0
    assert res.model_value == 0.0
    assert np.all(res.step.Z == 0.0)


def test_tcg_beats_cauchy_point():
    cs = mf.elliptope(6)
    rng = np.random.default_rng(77)
    M = sym(rng.standard_normal((6, 6)))  # indefinite in general
    for seed in range(5):
        pt, g = tangent_at(cs, seed)
        for delta in (0.05, 0.5, 5.0):
            res = tcg_solve(lambda Z: M @ Z, g, delta=delta, opts=TrOptions())
            gHg = float(np.sum(g.Z * (M @ g.Z)))
            t = delta / g.norm
            if gHg > 0.0:
                t = min(g.norm**2 / gHg, t)
            m_cauchy = -t * g.norm**2 + 0.5 * t * t * gHg
            assert res.model_value <= m_cauchy + 1e-12 * max(1.0, abs(m_cauchy))


# ------------------------------------------------------------- outer loop


def test_minimize_spectahedron_smallest_eigenvalue():
    # f(Y) = Tr(Y^T D Y) with D = diag(-1, 0, ..., 0) over unit trace:
    # the minimum is the smallest eigenvalue, attained at Y = +-e1.
    n = 6
    cs = mf.spectahedron(n)
    D = np.zeros((n, n))
    D[0, 0] = -1.0
    pt, recs, status = minimize(cs, LinearCost(D), mf.random_feasible(cs, 1, seed=3))
    assert status == "Converged"
    assert recs[-1].cost == pytest.approx(-1.0, abs=1e-9)
    assert abs(pt.Y[0, 0]) == pytest.approx(1.0, abs=1e-6)


def test_minimize_elliptope_two_nodes():
    # offdiagonal coupling on the 2x2 elliptope: min 2 X_12 = -2
    cs = mf.elliptope(2)
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    pt, recs, status = minimize(cs, LinearCost(A), mf.random_feasible(cs, 2, seed=12))
    assert status == "Converged"
    assert recs[-1].cost == pytest.approx(-2.0, abs=1e-8)


def test_minimize_records_are_monotone_and_start_with_init():
    rng = np.random.default_rng(9)
    cs = mf.elliptope(8)
    cost = DspcaCost(rho=0.2, kappa=0.05, data=rng.standard_normal((10, 8)))
    pt, recs, status = minimize(cs, cost, mf.random_feasible(cs, 3, seed=4))
    assert status == "Converged"
    assert recs[0].stop_reason == "init" and recs[0].iteration == 0
    assert math.isnan(recs[0].ratio)
    costs = [r.cost for r in recs]
    assert all(a >= b - 1e-15 for a, b in zip(costs, costs[1:]))
    # rejected iterations must not move the iterate
    for prev, cur in zip(recs, recs[1:]):
        if not cur.accepted:
            assert cur.cost == prev.cost and cur.grad_norm == prev.grad_norm


def test_minimize_converges_quickly_when_smooth():
    rng = np.random.default_rng(15)
    cs = mf.elliptope(10)
    cost = LinearCost(sym(rng.standard_normal((10, 10))))
    pt, recs, status = minimize(cs, cost, mf.random_feasible(cs, 4, seed=2))
    assert status == "Converged"
    assert recs[-1].iteration < 60


def test_minimize_grad_tol_resolution():
    # explicit grad_tol is honored; the default scales with |f(Y0)|
    cs = mf.spectahedron(4)
    D = np.diag([-1.0, 0.0, 0.0, 0.0])
    opts = TrOptions(grad_tol=1e-3)
    pt, recs, status = minimize(cs, LinearCost(D), mf.random_feasible(cs, 1, seed=3), opts)
    assert status == "Converged"
    assert recs[-1].grad_norm <= 1e-3


def test_minimize_max_iterations_status():
    rng = np.random.default_rng(15)
    cs = mf.elliptope(10)
    cost = LinearCost(sym(rng.standard_normal((10, 10))))
    opts = TrOptions(max_outer=2)
    pt, recs, status = minimize(cs, cost, mf.random_feasible(cs, 4, seed=2), opts)
    assert status == "MaxIterations"
    assert recs[-1].iteration == 2


# ------------------------------------------------- saddle escape and rank


def cycle_laplacian(n):
    A = np.zeros((n, n))
    for i in range(n):
        A[i, (i + 1) % n] = 1.0
        A[(i + 1) % n, i] = 1.0
    return np.diag(A.sum(axis=1)) - A


def test_minimize_escape_from_padded_saddle():
    # A suboptimal one-column cut padded with a zero column is a rank
    # deficient stationary point; the certified direction in the new
    # column must be taken by the escape search, after which the loop
    # descends to the optimal cut of the 4-cycle (value -4 for -L/4).
    L = cycle_laplacian(4)
    cs = mf.elliptope(4)
    cost = LinearCost(-L / 4.0)
    Y0 = np.zeros((4, 2))
    Y0[:, 0] = 1.0
    esc = np.zeros((4, 2))
    esc[:, 1] = [0.5, -0.5, 0.5, -0.5]
    pt, recs, status = minimize(cs, cost, Y0, escape=esc, escape_curvature=-2.0)
    assert status == "Converged"
    assert recs[-1].cost == pytest.approx(-4.0, abs=1e-9)
    assert any(r.stop_reason == "escape" for r in recs)
    # the iterate collapsed to the rank-one optimum and was padded back
    assert pt.Y.shape == (4, 2)
    svals = np.linalg.svd(pt.Y, compute_uv=False)
    assert svals[0] == pytest.approx(2.0, abs=1e-8)
    assert svals[1] <= 1e-7
    assert any(r.stop_reason.endswith("+compress") for r in recs)


def test_minimize_escape_skipped_away_from_saddle():
    # a full-rank start with a visible gradient ignores the escape hint
    cs = mf.elliptope(4)
    cost = LinearCost(-cycle_laplacian(4) / 4.0)
    pt0 = mf.random_feasible(cs, 2, seed=21)
    esc = np.zeros((4, 2))
    esc[:, 1] = 1.0
    pt, recs, status = minimize(cs, cost, pt0, escape=esc, escape_curvature=-1.0)
    assert status == "Converged"
    assert not any(r.stop_reason == "escape" for r in recs)


def test_minimize_sufficient_decrease_recorded_on_escape():
    D = np.diag([0.0, -1.0])
    cs = mf.spectahedron(2)
    Y0 = np.array([[1.0, 0.0], [0.0, 0.0]])
    esc = np.array([[0.0, 0.0], [0.0, 1.0]])
    pt, recs, status = minimize(cs, LinearCost(D), Y0, escape=esc, escape_curvature=-2.0)
    assert status == "Converged"
    rows = [r for r in recs if r.stop_reason == "escape"]
    assert len(rows) == 1
    assert rows[0].cost < 0.0
    assert recs[-1].cost == pytest.approx(-1.0, abs=1e-9)
