"""Geometry of trace-constrained factor sets.

The solver represents a positive semidefinite matrix X through a thin
factor Y (n-by-p, full column rank), X = Y Y^T, subject to m trace
constraints Tr(A_i X) = b_i.  The A_i are symmetric and their pairwise
products vanish (A_i A_j = 0 for i != j).  That orthogonality is what
keeps everything closed-form: splitting an arbitrary matrix into
horizontal, vertical and normal parts decouples per constraint, and a
step can be pulled back onto the feasible set by solving one scalar
quadratic per constraint.

Two families get dedicated fast paths because their corrections are a
row or global rescaling: the elliptope (unit diagonal, A_i = e_i e_i^T)
and the spectahedron (unit trace, A_1 = I).  Anything else satisfying
the product condition runs through the generic code path with explicit
matrices (dense or scipy.sparse).

The factorization is invariant under Y -> Y Q for orthogonal Q, so
directions of the form Y * skew ("vertical") move nowhere.  Search
directions live in the horizontal space: tangent directions Z with
Y^T Z symmetric.  project_horizontal computes that component.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (
    AssumptionViolation,
    BasePointMismatch,
    DegenerateConstraint,
    DimensionMismatch,
    InfeasibleStart,
    RetractionFailure,
    SingularGram,
)

# Relative threshold below which Y^T Y counts as singular, and absolute
# threshold below which Tr(Y^T A_i^2 Y) counts as degenerate.
GRAM_RTOL = 1e-14
DEGENERATE_TOL = 1e-14

# A freshly retracted point must satisfy the constraints this tightly
# (relative to max(1, |b_i|)).
RETRACT_FEAS_TOL = 1e-12


@dataclass(frozen=True)
class FactorPoint:
    """A factor Y; the matrix it represents is X = Y Y^T.

    The array is copied and frozen at construction.  Feasibility is a
    property of how the point was produced (random_feasible, retract),
    not enforced here, because the projection operators are also useful
    at off-manifold points.
    """

    Y: np.ndarray

    def __post_init__(self):
        arr = np.array(self.Y, dtype=float)
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise DimensionMismatch(f"factor must be n-by-p, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("factor contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "Y", arr)

    @property
    def rank_p(self):
        """Number of columns of the factor (the working rank)."""
        return self.Y.shape[1]


@dataclass(frozen=True)
class TangentVector:
    """A direction Z tagged with the base point it is anchored at."""

    Z: np.ndarray
    base: FactorPoint

    def __post_init__(self):
        arr = np.array(self.Z, dtype=float)
        if arr.shape != self.base.Y.shape:
            raise DimensionMismatch(
                f"tangent shape {arr.shape} does not match base {self.base.Y.shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "Z", arr)

    @property
    def norm(self):
        return float(np.linalg.norm(self.Z))


def _same_base(a, b):
    if a is b:
        return True
    return a.Y.shape == b.Y.shape and np.array_equal(a.Y, b.Y)


def inner(t1, t2):
    """Frobenius inner product of two tangent vectors at the same base."""
    if not _same_base(t1.base, t2.base):
        raise BasePointMismatch("tangent vectors are anchored at different points")
    return float(np.sum(t1.Z * t2.Z))


# ---------------------------------------------------------------------------
# constraint sets
# ---------------------------------------------------------------------------


class ConstraintSet:
    """Constraints Tr(A_i Y Y^T) = b_i with vanishing pairwise products.

    This generic base stores the A_i explicitly.  Subclasses for the
    elliptope and spectahedron override the per-constraint primitives
    with closed forms and store no matrices.
    """

    kind = "generic"

    def __init__(self, matrices, rhs):
        if len(matrices) == 0:
            raise DimensionMismatch("need at least one constraint matrix")
        mats = []
        n = None
        for i, A in enumerate(matrices):
            if not sp.issparse(A):
                A = np.asarray(A, dtype=float)
            if A.ndim != 2 or A.shape[0] != A.shape[1]:
                raise DimensionMismatch(f"constraint matrix {i} is not square")
            if n is None:
                n = A.shape[0]
            elif A.shape[0] != n:
                raise DimensionMismatch(
                    f"constraint matrix {i} is {A.shape[0]}x{A.shape[0]}, expected {n}x{n}"
                )
            mats.append(A)
        b = np.asarray(rhs, dtype=float).reshape(-1)
        if b.shape[0] != len(mats):
            raise DimensionMismatch(
                f"{len(mats)} matrices but {b.shape[0]} right-hand sides"
            )
        self.matrices = mats
        self.rhs = b
        self.dim_n = n
        self.count_m = len(mats)

    def __repr__(self):
        return f"<ConstraintSet {self.kind} n={self.dim_n} m={self.count_m}>"

    def _check_shape(self, Y):
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 2 or Y.shape[0] != self.dim_n:
            raise DimensionMismatch(
                f"factor shape {Y.shape} does not match n={self.dim_n}"
            )
        return Y

    # -- per-constraint primitives -----------------------------------------
    # values:        Tr(Y^T A_i Y)
    # inner_with:    Tr(Z^T A_i Y)
    # gram_sq:       Tr(Y^T A_i^2 Y) = ||A_i Y||_F^2
    # gram_sq_cross: Tr(Z^T A_i^2 Y)
    # combo:         sum_i c_i A_i V
    # correction_coeffs: (Tr(Yt^T A_i Yt), Tr(Yt^T A_i^2 Yt), Tr(Yt^T A_i^3 Yt))

    def values(self, Y):
        Y = self._check_shape(Y)
        return np.array([float(np.sum(Y * (A @ Y))) for A in self.matrices])

    def inner_with(self, Y, Z):
        return np.array([float(np.sum(Z * (A @ Y))) for A in self.matrices])

    def gram_sq(self, Y):
        out = np.empty(self.count_m)
        for i, A in enumerate(self.matrices):
            AY = A @ Y
            out[i] = float(np.sum(AY * AY))
        return out

    def gram_sq_cross(self, Y, Z):
        return np.array(
            [float(np.sum((A @ Z) * (A @ Y))) for A in self.matrices]
        )

    def combo(self, coeffs, V):
        out = np.zeros_like(np.asarray(V, dtype=float))
        for c, A in zip(coeffs, self.matrices):
            if c != 0.0:
                out += c * (A @ V)
        return out

    def correction_coeffs(self, Yt):
        c1 = np.empty(self.count_m)
        c2 = np.empty(self.count_m)
        c3 = np.empty(self.count_m)
        for i, A in enumerate(self.matrices):
            W1 = A @ Yt
            W2 = A @ W1
            c1[i] = float(np.sum(Yt * W1))
            c2[i] = float(np.sum(W1 * W1))
            c3[i] = float(np.sum(W1 * W2))
        return c1, c2, c3

    def corrected(self, Yt, err_cls=RetractionFailure):
        """Pull Yt back onto the feasible set along the normal directions.

        Solves, per constraint, the scalar quadratic
        a^2 Tr(Yt^T A_i^3 Yt) + 2 a Tr(Yt^T A_i^2 Yt) + Tr(Yt^T A_i Yt) = b_i
        and applies Yt + sum_i a_i A_i Yt.  The root of smallest magnitude
        is chosen so the correction degrades continuously to the closed
        forms of the elliptope and spectahedron.
        """
        c1, c2, c3 = self.correction_coeffs(Yt)
        alpha = np.empty(self.count_m)
        for i in range(self.count_m):
            root = _smallest_real_root(c3[i], 2.0 * c2[i], c1[i] - self.rhs[i])
            if root is None:
                raise err_cls(
                    f"no real feasibility correction for constraint {i} "
                    f"(coeffs {c3[i]:.3e}, {2 * c2[i]:.3e}, {c1[i] - self.rhs[i]:.3e})"
                )
            alpha[i] = root
        return Yt + self.combo(alpha, Yt)

    def validate(self):
        """Check symmetry and pairwise product orthogonality of the A_i."""
        if not np.all(np.isfinite(self.rhs)):
            raise AssumptionViolation("right-hand side contains non-finite values")
        norms = []
        for i, A in enumerate(self.matrices):
            dense_norm = sp.linalg.norm(A) if sp.issparse(A) else np.linalg.norm(A)
            norms.append(dense_norm)
            asym = A - A.T
            asym_norm = sp.linalg.norm(asym) if sp.issparse(asym) else np.linalg.norm(asym)
            if asym_norm > 1e-12 * max(1.0, dense_norm):
                raise AssumptionViolation(f"constraint matrix {i} is not symmetric")
        for i in range(self.count_m):
            for j in range(i + 1, self.count_m):
                prod = self.matrices[i] @ self.matrices[j]
                pnorm = sp.linalg.norm(prod) if sp.issparse(prod) else np.linalg.norm(prod)
                if pnorm > 1e-14 * max(1.0, norms[i] * norms[j]):
                    raise AssumptionViolation(
                        f"constraint matrices {i} and {j} have nonzero product "
                        f"(|A_i A_j| = {pnorm:.3e})"
                    )


class _Elliptope(ConstraintSet):
    """diag(Y Y^T) = 1: every row of Y has unit norm."""

    kind = "elliptope"

    def __init__(self, n):
        if n < 1:
            raise DimensionMismatch("elliptope needs n >= 1")
        self.matrices = None
        self.rhs = np.ones(n)
        self.dim_n = n
        self.count_m = n

    def values(self, Y):
        Y = self._check_shape(Y)
        return np.sum(Y * Y, axis=1)

    def inner_with(self, Y, Z):
        return np.sum(Y * Z, axis=1)

    def gram_sq(self, Y):
        return np.sum(Y * Y, axis=1)

    def gram_sq_cross(self, Y, Z):
        return np.sum(Y * Z, axis=1)

    def combo(self, coeffs, V):
        return np.asarray(coeffs).reshape(-1, 1) * V

    def correction_coeffs(self, Yt):
        s = np.sum(Yt * Yt, axis=1)
        return s, s, s

    def corrected(self, Yt, err_cls=RetractionFailure):
        norms = np.sqrt(np.sum(Yt * Yt, axis=1))
        bad = norms <= 1e-150
        if np.any(bad):
            raise err_cls(f"zero row at index {int(np.argmax(bad))}")
        return Yt / norms[:, None]

    def validate(self):
        pass  # structural: e_i e_i^T are symmetric with disjoint supports


class _Spectahedron(ConstraintSet):
    """Tr(Y Y^T) = 1: the factor has unit Frobenius norm."""

    kind = "spectahedron"

    def __init__(self, n):
        if n < 1:
            raise DimensionMismatch("spectahedron needs n >= 1")
        self.matrices = None
        self.rhs = np.ones(1)
        self.dim_n = n
        self.count_m = 1

    def values(self, Y):
        Y = self._check_shape(Y)
        return np.array([float(np.sum(Y * Y))])

    def inner_with(self, Y, Z):
        return np.array([float(np.sum(Y * Z))])

    def gram_sq(self, Y):
        return self.values(Y)

    def gram_sq_cross(self, Y, Z):
        return self.inner_with(Y, Z)

    def combo(self, coeffs, V):
        return coeffs[0] * V

    def correction_coeffs(self, Yt):
        t = np.array([float(np.sum(Yt * Yt))])
        return t, t, t

    def corrected(self, Yt, err_cls=RetractionFailure):
        nrm = float(np.linalg.norm(Yt))
        if nrm <= 1e-150:
            raise err_cls("attempted to retract the zero matrix")
        return Yt / nrm

    def validate(self):
        pass  # single identity constraint


def elliptope(n):
    """Constraint set diag(X) = 1 on n-by-n matrices."""
    return _Elliptope(n)


def spectahedron(n):
    """Constraint set Tr(X) = 1 on n-by-n matrices."""
    return _Spectahedron(n)


def generic(matrices, rhs):
    """Constraint set from explicit symmetric matrices A_i and targets b_i.

    The matrices may be dense arrays or scipy.sparse.  Pairwise products
    must vanish; call validate_constraints to verify before solving.
    """
    return ConstraintSet(matrices, rhs)


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


def validate_constraints(cs):
    """Raise AssumptionViolation unless the constraint family is admissible."""
    cs.validate()


def _as_point(Y):
    if isinstance(Y, FactorPoint):
        return Y
    return FactorPoint(np.asarray(Y, dtype=float))


def residual(cs, Y):
    """Constraint residual vector Tr(Y^T A_i Y) - b_i."""
    arr = Y.Y if isinstance(Y, FactorPoint) else np.asarray(Y, dtype=float)
    return cs.values(arr) - cs.rhs


def feasibility_gap(cs, Y):
    """Largest constraint violation, relative to max(1, |b_i|)."""
    res = residual(cs, Y)
    return float(np.max(np.abs(res) / np.maximum(1.0, np.abs(cs.rhs))))


def random_feasible(cs, p, seed):
    """Draw a feasible random factor with p columns, deterministic in seed."""
    if not 1 <= p <= cs.dim_n:
        raise DimensionMismatch(f"need 1 <= p <= n, got p={p}, n={cs.dim_n}")
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((cs.dim_n, p))
    Y = cs.corrected(W, err_cls=InfeasibleStart)
    return FactorPoint(Y)


def _gram_eig(Y):
    """Eigendecomposition of Y^T Y, guarding against lost column rank."""
    S = Y.T @ Y
    d, V = np.linalg.eigh(S)
    if d[-1] <= 0.0 or d[0] < GRAM_RTOL * d[-1]:
        raise SingularGram(
            f"Y^T Y has eigenvalue ratio {d[0]:.3e} / {d[-1]:.3e}"
        )
    return d, V


def _checked_gram_sq(cs, Y):
    q = cs.gram_sq(Y)
    if np.any(q < DEGENERATE_TOL):
        i = int(np.argmin(q))
        raise DegenerateConstraint(
            f"Tr(Y^T A_i^2 Y) = {q[i]:.3e} for constraint {i}"
        )
    return q


def _split(cs, Y, Z, d, V, q):
    """Horizontal component of Z at Y, plus the removed pieces.

    Returns (P, Om, alpha) with Z = P + Y Om + sum_i alpha_i A_i Y,
    Om skew-symmetric.  Om solves the Sylvester equation
    Om (Y^T Y) + (Y^T Y) Om = Y^T Z - Z^T Y in the eigenbasis of Y^T Y,
    where it is entrywise division by eigenvalue sums.
    """
    C = Y.T @ Z - Z.T @ Y
    Ct = V.T @ C @ V
    Om = V @ (Ct / (d[:, None] + d[None, :])) @ V.T
    alpha = cs.inner_with(Y, Z) / q
    P = Z - Y @ Om - cs.combo(alpha, Y)
    return P, Om, alpha


def project_horizontal(cs, Y, Z):
    """Project an arbitrary n-by-p matrix Z onto the horizontal space at Y.

    The result is tangent (Tr(Y^T A_i P) = 0) and horizontal (Y^T P
    symmetric), and the removed vertical and normal parts are orthogonal
    to it and to each other.  Raises SingularGram if Y has numerically
    lost column rank and DegenerateConstraint if some A_i Y vanishes.
    """
    point = _as_point(Y)
    Z = np.asarray(Z, dtype=float)
    if Z.shape != point.Y.shape:
        raise DimensionMismatch(
            f"direction shape {Z.shape} does not match factor {point.Y.shape}"
        )
    d, V = _gram_eig(point.Y)
    q = _checked_gram_sq(cs, point.Y)
    P, _, _ = _split(cs, point.Y, Z, d, V, q)
    return TangentVector(P, point)


def retract(cs, Y, Z):
    """Step from Y along Z and restore feasibility.

    Z may be a TangentVector at Y or a plain array.  The elliptope
    rescales rows, the spectahedron rescales globally, and the generic
    path solves one quadratic per constraint, picking the root of
    smallest magnitude.  The result satisfies the constraints to
    RETRACT_FEAS_TOL or RetractionFailure is raised.
    """
    point = _as_point(Y)
    if isinstance(Z, TangentVector):
        if not _same_base(Z.base, point):
            raise BasePointMismatch("step is anchored at a different point")
        step = Z.Z
    else:
        step = np.asarray(Z, dtype=float)
        if step.shape != point.Y.shape:
            raise DimensionMismatch(
                f"step shape {step.shape} does not match factor {point.Y.shape}"
            )
    Ynew = cs.corrected(point.Y + step)
    new_point = FactorPoint(Ynew)
    gap = feasibility_gap(cs, new_point)
    if gap > RETRACT_FEAS_TOL:
        raise RetractionFailure(f"retracted point violates constraints by {gap:.3e}")
    return new_point


def _smallest_real_root(a, b, c):
    """Real root of a x^2 + b x + c = 0 of smallest magnitude, or None.

    Uses the product-of-roots form to avoid cancellation.  Falls back to
    the linear solution when the quadratic coefficient is negligible.
    """
    scale = max(abs(a), abs(b), abs(c))
    if scale == 0.0:
        return 0.0
    if abs(a) <= 1e-16 * scale:
        if abs(b) <= 1e-16 * scale:
            return 0.0 if c == 0.0 else None
        return -c / b
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        # allow roundoff-level negativity at a double root
        if disc > -1e-12 * max(b * b, abs(4.0 * a * c)):
            disc = 0.0
        else:
            return None
    sq = np.sqrt(disc)
    if b >= 0.0:
        qq = -0.5 * (b + sq)
    else:
        qq = -0.5 * (b - sq)
    roots = []
    if qq != 0.0:
        roots.append(c / qq)   # smaller-magnitude root, computed stably
        roots.append(qq / a)
    else:
        # b and disc both ~ 0: symmetric pair +-sqrt(-c/a)
        r = np.sqrt(max(-c / a, 0.0))
        roots.extend([r, -r])
    return min(roots, key=abs)
