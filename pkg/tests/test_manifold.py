"""Geometry tests: constraint sets, projection, retraction.

Frozen numeric expectations were produced by standalone oracle scripts
that solve the Sylvester system through a dense Kronecker product and
the feasibility quadratics through numpy.roots, sharing no code with
the implementations under test.  The Kronecker path is kept here as
kron_project for randomized cross-checks.
"""

import numpy as np
import pytest

from lowrank_sdp import manifold as mf
from lowrank_sdp.errors import (
    AssumptionViolation,
    BasePointMismatch,
    DegenerateConstraint,
    DimensionMismatch,
    InfeasibleStart,
    RetractionFailure,
    SingularGram,
)


def kron_project(cs, Y, Z):
    """Oracle projection: dense Kronecker solve of the Sylvester equation."""
    p = Y.shape[1]
    S = Y.T @ Y
    C = Y.T @ Z - Z.T @ Y
    K = np.kron(np.eye(p), S.T) + np.kron(S, np.eye(p))
    Om = np.linalg.solve(K, C.ravel(order="C")).reshape(p, p)
    alpha = cs.inner_with(Y, Z) / cs.gram_sq(Y)
    return Z - Y @ Om - cs.combo(alpha, Y), Om, alpha


def random_generic_set(rng, n, blocks=3):
    """Scaled projectors on disjoint index blocks (products vanish).

    Constant diagonal values per block keep the one-shot feasibility
    correction solvable from any standard-normal draw; spread values can
    genuinely lack a real root, which is tested separately.
    """
    cut = np.sort(rng.choice(np.arange(1, n), size=blocks - 1, replace=False))
    bounds = np.concatenate([[0], cut, [n]])
    mats, rhs = [], []
    for k in range(blocks):
        d = np.zeros(n)
        d[bounds[k]:bounds[k + 1]] = rng.uniform(0.5, 2.0)
        mats.append(np.diag(d))
        rhs.append(rng.uniform(0.5, 3.0))
    return mf.generic(mats, np.array(rhs))


GEOMETRIES = ["elliptope", "spectahedron", "generic"]


def make_cs(kind, n, rng):
    if kind == "elliptope":
        return mf.elliptope(n)
    if kind == "spectahedron":
        return mf.spectahedron(n)
    return random_generic_set(rng, n)


# ---------------------------------------------------------------------------
# constraint set construction and validation
# ---------------------------------------------------------------------------


def test_validate_elliptope_passes():
    mf.validate_constraints(mf.elliptope(3))


def test_validate_rejects_overlapping_products():
    A1 = np.diag([1.0, 1.0, 0.0])
    A2 = np.diag([0.0, 1.0, 1.0])   # overlaps A1 on index 1
    cs = mf.generic([A1, A2], [1.0, 1.0])
    with pytest.raises(AssumptionViolation):
        mf.validate_constraints(cs)


def test_validate_rejects_asymmetric_matrix():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    cs = mf.generic([A], [1.0])
    with pytest.raises(AssumptionViolation):
        mf.validate_constraints(cs)


def test_generic_dimension_checks():
    with pytest.raises(DimensionMismatch):
        mf.generic([np.eye(3), np.eye(4)], [1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        mf.generic([np.eye(3)], [1.0, 2.0])


def test_residual_row_norms():
    rng = np.random.default_rng(7)
    Y = rng.standard_normal((3, 2))
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    Y *= np.array([[1.0], [2.0], [1.0]])
    res = mf.residual(mf.elliptope(3), Y)
    np.testing.assert_allclose(res, [0.0, 3.0, 0.0], atol=1e-12)


# ---------------------------------------------------------------------------
# random feasible points
# ---------------------------------------------------------------------------


def test_random_feasible_deterministic_in_seed():
    cs = mf.elliptope(8)
    a = mf.random_feasible(cs, 3, seed=42)
    b = mf.random_feasible(cs, 3, seed=42)
    c = mf.random_feasible(cs, 3, seed=43)
    assert np.array_equal(a.Y, b.Y)
    assert not np.array_equal(a.Y, c.Y)


@pytest.mark.parametrize("kind", GEOMETRIES)
def test_random_feasible_is_feasible(kind):
    rng = np.random.default_rng(0)
    for trial in range(5):
        cs = make_cs(kind, 12, rng)
        pt = mf.random_feasible(cs, 4, seed=trial)
        assert mf.feasibility_gap(cs, pt) <= 1e-10
        assert pt.rank_p == 4


def test_random_feasible_spectahedron_unit_trace():
    pt = mf.random_feasible(mf.spectahedron(6), 2, seed=1)
    assert abs(np.sum(pt.Y * pt.Y) - 1.0) <= 1e-12


def test_random_feasible_rejects_bad_rank():
    with pytest.raises(DimensionMismatch):
        mf.random_feasible(mf.elliptope(3), 4, seed=0)
    with pytest.raises(DimensionMismatch):
        mf.random_feasible(mf.elliptope(3), 0, seed=0)


# ---------------------------------------------------------------------------
# horizontal projection
# ---------------------------------------------------------------------------


def test_project_frozen_case():
    # Frozen from the Kronecker oracle script: Om = [[0, .5], [-.5, 0]],
    # alpha = (1, .5, 0).
    Y = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    Z = np.array([[1.0, 2.0], [0.0, 1.0], [1.0, 0.0]])
    t = mf.project_horizontal(mf.elliptope(3), Y, Z)
    expected = np.array([[0.0, 1.5], [0.0, 0.0], [1.5, 0.0]])
    np.testing.assert_allclose(t.Z, expected, atol=1e-14)


@pytest.mark.parametrize("kind", GEOMETRIES)
@pytest.mark.parametrize("trial", range(6))
def test_project_matches_kron_oracle(kind, trial):
    rng = np.random.default_rng(100 + trial)
    cs = make_cs(kind, 10, rng)
    pt = mf.random_feasible(cs, 3, seed=trial)
    Z = rng.standard_normal(pt.Y.shape)
    t = mf.project_horizontal(cs, pt, Z)
    oracle, _, _ = kron_project(cs, pt.Y, Z)
    np.testing.assert_allclose(t.Z, oracle, atol=1e-11 * max(1.0, np.linalg.norm(Z)))


@pytest.mark.parametrize("kind", GEOMETRIES)
def test_project_invariants(kind):
    rng = np.random.default_rng(11)
    for trial in range(8):
        n = int(rng.integers(4, 20))
        p = int(rng.integers(1, min(n, 6) + 1))
        cs = make_cs(kind, n, rng)
        pt = mf.random_feasible(cs, p, seed=trial)
        Y = pt.Y
        Z = rng.standard_normal((n, p))
        t = mf.project_horizontal(cs, pt, Z)
        P = t.Z
        zn = np.linalg.norm(Z)

        # tangency and horizontality
        tang = cs.inner_with(Y, P)
        assert np.max(np.abs(tang)) <= 1e-10 * max(1.0, zn)
        sym_gap = np.linalg.norm(Y.T @ P - P.T @ Y)
        assert sym_gap <= 1e-10 * max(1.0, zn)

        # idempotence
        t2 = mf.project_horizontal(cs, pt, P)
        assert np.linalg.norm(t2.Z - P) <= 1e-12 * max(1.0, zn)

        # orthogonal three-way split
        _, Om, alpha = kron_project(cs, Y, Z)
        vert = Y @ Om
        norm_part = cs.combo(alpha, Y)
        total = np.linalg.norm(P) ** 2 + np.linalg.norm(vert) ** 2 + np.linalg.norm(norm_part) ** 2
        assert abs(total - zn**2) <= 1e-10 * max(1.0, zn**2)

        # the projector is symmetric
        W = rng.standard_normal((n, p))
        PW = mf.project_horizontal(cs, pt, W).Z
        assert abs(np.sum(PW * Z) - np.sum(P * W)) <= 1e-10 * max(1.0, zn * np.linalg.norm(W))


def test_project_equivariance_under_rotation():
    rng = np.random.default_rng(3)
    cs = mf.elliptope(9)
    pt = mf.random_feasible(cs, 4, seed=5)
    Z = rng.standard_normal(pt.Y.shape)
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    left = mf.project_horizontal(cs, pt.Y @ Q, Z @ Q).Z
    right = mf.project_horizontal(cs, pt, Z).Z @ Q
    np.testing.assert_allclose(left, right, atol=1e-10)


def test_project_raises_on_rank_deficient_factor():
    Y = np.ones((5, 2))   # duplicate columns
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    with pytest.raises(SingularGram):
        mf.project_horizontal(mf.elliptope(5), Y, np.ones((5, 2)))


def test_project_raises_on_degenerate_constraint():
    A1 = np.diag([1.0, 0.0, 0.0])
    A2 = np.diag([0.0, 1.0, 1.0])
    cs = mf.generic([A1, A2], [1.0, 1.0])
    Y = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])   # A1 @ Y = 0
    with pytest.raises(DegenerateConstraint):
        mf.project_horizontal(cs, Y, np.ones((3, 2)))


def test_project_shape_mismatch():
    cs = mf.elliptope(4)
    pt = mf.random_feasible(cs, 2, seed=0)
    with pytest.raises(DimensionMismatch):
        mf.project_horizontal(cs, pt, np.ones((4, 3)))


# ---------------------------------------------------------------------------
# retraction
# ---------------------------------------------------------------------------


def test_retract_elliptope_row_rescaling():
    Y = np.eye(2)
    Z = np.array([[0.0, 0.5], [0.5, 0.0]])
    new = mf.retract(mf.elliptope(2), Y, Z)
    expected = np.array([[0.894, 0.447], [0.447, 0.894]])
    np.testing.assert_allclose(new.Y, expected, atol=1e-3)


def test_retract_spectahedron_global_rescaling():
    cs = mf.spectahedron(4)
    pt = mf.random_feasible(cs, 2, seed=2)
    Z = 0.3 * np.ones((4, 2))
    new = mf.retract(cs, pt, Z)
    Yt = pt.Y + Z
    np.testing.assert_allclose(new.Y, Yt / np.linalg.norm(Yt), atol=1e-14)


def test_retract_generic_frozen_case():
    # Frozen from the quadratic-root oracle: alpha = (-0.5, -0.18350341907227397)
    # and the corrected factor below; both constraints then hold exactly.
    A1 = np.diag([1.0, 0.0, 0.0])
    A2 = np.diag([0.0, 1.0, 1.0])
    cs = mf.generic([A1, A2], [1.0, 2.0])
    Yt = np.array([[2.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    new = mf.retract(cs, np.zeros((3, 2)) + Yt, np.zeros((3, 2)))
    s = 0.816496580927726
    expected = np.array([[1.0, 0.0], [s, s], [0.0, s]])
    np.testing.assert_allclose(new.Y, expected, atol=1e-12)
    np.testing.assert_allclose(cs.values(new.Y), [1.0, 2.0], atol=1e-12)


def test_generic_non_diagonal_blocks():
    # full symmetric blocks, still pairwise-orthogonal by disjoint support
    A1 = np.zeros((4, 4))
    A1[:2, :2] = [[2.0, 1.0], [1.0, 2.0]]
    A2 = np.zeros((4, 4))
    A2[2:, 2:] = [[1.0, 0.0], [0.0, 3.0]]
    cs = mf.generic([A1, A2], [1.0, 2.0])
    mf.validate_constraints(cs)

    rng = np.random.default_rng(17)
    Y = cs.corrected(0.1 * rng.standard_normal((4, 2)))   # small draw: always correctable
    pt = mf.FactorPoint(Y)
    assert mf.feasibility_gap(cs, pt) <= 1e-12

    Z = mf.project_horizontal(cs, pt, rng.standard_normal((4, 2)))
    assert np.max(np.abs(cs.inner_with(pt.Y, Z.Z))) <= 1e-10
    np.testing.assert_allclose(Z.Z, mf.project_horizontal(cs, pt, Z.Z).Z, atol=1e-12)

    moved = mf.retract(cs, pt, 0.2 * Z.Z)
    assert mf.feasibility_gap(cs, moved) <= 1e-12


@pytest.mark.parametrize("kind", GEOMETRIES)
def test_retract_feasibility_and_first_order(kind):
    rng = np.random.default_rng(21)
    for trial in range(6):
        n = int(rng.integers(4, 16))
        p = int(rng.integers(1, 5))
        cs = make_cs(kind, n, rng)
        pt = mf.random_feasible(cs, p, seed=trial)
        Z = mf.project_horizontal(cs, pt, rng.standard_normal((n, p)))

        assert mf.feasibility_gap(cs, mf.retract(cs, pt, Z)) <= 1e-12

        # R_Y(tZ) = Y + tZ + O(t^2): the residual-over-t slope must drop
        # by ~10x per decade in t (checked within a factor of 3)
        slopes = []
        for t in (1e-3, 1e-4):
            moved = mf.retract(cs, pt, t * Z.Z).Y
            slopes.append(np.linalg.norm(moved - (pt.Y + t * Z.Z)) / t)
        if slopes[0] > 1e-12:   # skip degenerate directions with no curvature
            assert slopes[1] <= slopes[0] / 10 * 3


def test_retract_equivariance_under_rotation():
    rng = np.random.default_rng(5)
    cs = mf.spectahedron(7)
    pt = mf.random_feasible(cs, 3, seed=9)
    Z = mf.project_horizontal(cs, pt, rng.standard_normal((7, 3))).Z
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    left = mf.retract(cs, pt.Y @ Q, Z @ Q).Y
    right = mf.retract(cs, pt, Z).Y @ Q
    np.testing.assert_allclose(left, right, atol=1e-10)


def test_retract_failure_zero_row():
    Y = np.eye(2)
    with pytest.raises(RetractionFailure):
        mf.retract(mf.elliptope(2), Y, -Y)


def test_retract_failure_zero_matrix():
    pt = mf.random_feasible(mf.spectahedron(3), 1, seed=0)
    with pytest.raises(RetractionFailure):
        mf.retract(mf.spectahedron(3), pt, -pt.Y)


def test_retract_failure_no_real_root():
    cs = mf.generic([np.diag([1.0, 0.0])], [1.0])
    Yt = np.array([[0.0], [1.0]])   # constraint row is zero, b = 1 unreachable
    with pytest.raises(RetractionFailure):
        mf.retract(cs, Yt, np.zeros((2, 1)))


def test_random_feasible_infeasible_start():
    cs = mf.generic([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])], [1.0, -1.0])
    with pytest.raises(InfeasibleStart):
        mf.random_feasible(cs, 1, seed=0)   # b_2 < 0 unreachable for PSD A_2


# ---------------------------------------------------------------------------
# tangent vectors and inner products
# ---------------------------------------------------------------------------


def test_inner_requires_matching_base():
    cs = mf.elliptope(5)
    a = mf.random_feasible(cs, 2, seed=0)
    b = mf.random_feasible(cs, 2, seed=1)
    rng = np.random.default_rng(0)
    ta = mf.project_horizontal(cs, a, rng.standard_normal((5, 2)))
    tb = mf.project_horizontal(cs, b, rng.standard_normal((5, 2)))
    with pytest.raises(BasePointMismatch):
        mf.inner(ta, tb)


def test_inner_is_positive_definite():
    cs = mf.elliptope(5)
    pt = mf.random_feasible(cs, 2, seed=0)
    rng = np.random.default_rng(1)
    t = mf.project_horizontal(cs, pt, rng.standard_normal((5, 2)))
    assert mf.inner(t, t) > 0


def test_factor_point_is_read_only():
    pt = mf.random_feasible(mf.elliptope(4), 2, seed=0)
    with pytest.raises(ValueError):
        pt.Y[0, 0] = 5.0
