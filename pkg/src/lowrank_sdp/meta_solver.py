"""Rank-escalation loop with a dual optimality certificate.

The trace-constrained convex program over X >= 0 is solved through
factors X = Y Y^T of increasing width p.  At each width a trust-region
run finds a critical point; the dual matrix

    S_Y = grad f(Y Y^T) - sum_i lambda_i A_i,
    lambda_i = Tr(Y^T A_i grad f Y) / Tr(Y^T A_i^2 Y)

is then examined.  If its smallest eigenvalue is nonnegative (up to
epsilon) the KKT system is closed and Y Y^T is a certified global
optimum of the convex program.  Otherwise the eigenvector of the most
negative eigenvalue, appended as a fresh factor column, is a certified
descent direction, and the loop re-solves one rank higher.  A rank
deficient first solve already witnesses optimality and short-circuits
the loop.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import EigSolverNoConvergence, LowRankSdpError
from .manifold import FactorPoint, _checked_gram_sq, random_feasible
from .trust_region import TrOptions, TrStepRecord, minimize

# Below this order the dual matrix is materialized and handed to a dense
# symmetric eigensolver; above it, a shifted Lanczos iteration keeps the
# certificate matrix-free.
DENSE_EIG_CUTOFF = 800

# Relative eigenpair residual the certificate must meet.
EIG_RESIDUAL_RTOL = 1e-8


@dataclass
class DualCertificate:
    """Dual matrix summary at a critical factor.

    lam holds the closed-form multipliers, (smin, vmin) the algebraically
    smallest eigenpair of S_Y, and sy_apply the matrix-free operator
    v -> S_Y v used to compute them.
    """

    lam: np.ndarray
    smin: float
    vmin: np.ndarray
    sy_apply: object


@dataclass
class MetaOptions:
    """Controls for the rank loop.

    p_max = None resolves to n.  epsilon is the tolerance on the dual
    eigenvalue: the loop stops when smin >= -epsilon.  rank_tol is the
    absolute singular-value threshold of numerical_rank.
    """

    p0: int = 1
    epsilon: float = 1e-12
    rank_tol: float = 1e-6
    p_max: int | None = None
    inner: TrOptions = field(default_factory=TrOptions)

    def __post_init__(self):
        if self.p0 < 1:
            raise ValueError("p0 must be at least 1")
        if self.epsilon < 0.0 or self.rank_tol < 0.0:
            raise ValueError("epsilon and rank_tol must be nonnegative")


@dataclass
class MetaResult:
    """Outcome of the rank loop.

    Y_star is the final factor (width p); the matrix it represents is
    materialized by X().  traces holds one (p, records) pair per rank
    solved, rank_history one (p, smin) pair per certificate built.
    status is CertifiedOptimal, RankDeficientStop, or ReachedPMax; only
    the first two claim optimality (ReachedPMax with p_max = n is still
    optimal in exact arithmetic, but is reported as-is).
    """

    Y_star: FactorPoint
    p: int
    certificate: DualCertificate
    traces: list
    status: str
    objective: float
    rank_history: list

    def X(self):
        return self.Y_star.Y @ self.Y_star.Y.T


def _annotate(exc, p, stage):
    if isinstance(exc, LowRankSdpError):
        exc.context.setdefault("p", p)
        exc.context.setdefault("stage", stage)
    return exc


def multipliers(cs, cost, Y):
    """Closed-form Lagrange multipliers at a (near-)critical factor.

    lambda_i = Tr(Y^T A_i grad f Y) / Tr(Y^T A_i^2 Y); the numerator is
    evaluated through the factor-level gradient (half of it is
    grad f Y).  Raises DegenerateConstraint when some Tr(Y^T A_i^2 Y)
    underflows the safe threshold.
    """
    Y = Y.Y if isinstance(Y, FactorPoint) else np.asarray(Y, dtype=float)
    q = _checked_gram_sq(cs, Y)
    G = cost.euclidean_gradient(Y)
    return cs.inner_with(Y, G) / (2.0 * q)


def numerical_rank(Y, rank_tol=1e-6):
    """Number of singular values of Y strictly greater than rank_tol."""
    Y = Y.Y if isinstance(Y, FactorPoint) else np.asarray(Y, dtype=float)
    svals = np.linalg.svd(Y, compute_uv=False)
    return int(np.count_nonzero(svals > rank_tol))


def _lanczos_extreme(op, n, v0, maxiter):
    """Smallest eigenpair of a symmetric operator by two shifted runs:
    first a largest-magnitude bound B, then the top eigenpair of
    B I - S, whose extreme is B - smin."""
    try:
        mu = eigsh(op, k=1, which="LM", v0=v0, tol=1e-6, maxiter=maxiter,
                   return_eigenvectors=False)
        bound = 1.01 * abs(float(mu[0])) + 1e-12
    except ArpackNoConvergence as exc:
        if len(exc.eigenvalues):
            bound = 1.01 * abs(float(exc.eigenvalues[0])) + 1e-12
        else:
            raise EigSolverNoConvergence(
                "norm-estimation stage of the dual eigensolve stalled",
                best_value=None, best_vector=None,
            ) from exc
    shifted = LinearOperator((n, n), matvec=lambda v: bound * v - op.matvec(v))
    try:
        theta, U = eigsh(shifted, k=1, which="LA", v0=v0, tol=1e-10, maxiter=maxiter)
    except ArpackNoConvergence as exc:
        best_val = bound - float(exc.eigenvalues[0]) if len(exc.eigenvalues) else None
        best_vec = exc.eigenvectors[:, 0] if exc.eigenvectors.size else None
        raise EigSolverNoConvergence(
            "shifted stage of the dual eigensolve stalled",
            best_value=best_val, best_vector=best_vec,
        ) from exc
    return float(bound - theta[0]), U[:, 0], bound


def certificate(cs, cost, Y, dense_cutoff=DENSE_EIG_CUTOFF, maxiter=None):
    """Dual certificate at a critical factor.

    Builds the matrix-free operator v -> grad f(Y Y^T) v - sum lambda_i
    A_i v and computes its algebraically smallest eigenpair: densely for
    n <= dense_cutoff, else with the shifted Lanczos scheme.  The
    eigenpair residual must satisfy
    ||S_Y vmin - smin vmin|| <= 1e-8 * (norm estimate of S_Y)
    or EigSolverNoConvergence is raised with the best pair attached.
    """
    Yarr = Y.Y if isinstance(Y, FactorPoint) else np.asarray(Y, dtype=float)
    n = Yarr.shape[0]
    lam = multipliers(cs, cost, Yarr)

    def sy_apply(W):
        W = np.asarray(W, dtype=float)
        flat = W.ndim == 1
        Wm = W.reshape(n, -1) if flat else W
        out = cost.gradient_x_apply(Yarr, Wm) - cs.combo(lam, Wm)
        return out[:, 0] if flat else out

    if n <= dense_cutoff:
        S = sy_apply(np.eye(n))
        S = (S + S.T) / 2.0
        w, U = np.linalg.eigh(S)
        smin, vmin = float(w[0]), U[:, 0]
        scale = float(max(abs(w[0]), abs(w[-1])))
    else:
        v0 = np.random.default_rng(0).standard_normal(n)
        op = LinearOperator((n, n), matvec=sy_apply)
        smin, vmin, scale = _lanczos_extreme(op, n, v0, maxiter)
        vmin = vmin / np.linalg.norm(vmin)

    resid = float(np.linalg.norm(sy_apply(vmin) - smin * vmin))
    # sy_apply evaluates a difference of two O(||grad f||) terms, so its
    # output carries floating noise at eps times that magnitude even
    # when S_Y itself is numerically zero; without the additive floor
    # the test would be unsatisfiable at solved points whose dual
    # matrix vanishes
    noise = np.finfo(float).eps * (
        np.linalg.norm(cost.gradient_x_apply(Yarr, vmin))
        + np.linalg.norm(cs.combo(lam, vmin))
    )
    tol = EIG_RESIDUAL_RTOL * scale + 8.0 * math.sqrt(n) * noise
    if resid > tol:
        raise EigSolverNoConvergence(
            f"dual eigenpair residual {resid:.3e} exceeds {tol:.3e}",
            best_value=smin, best_vector=vmin,
        )
    return DualCertificate(lam=lam, smin=smin, vmin=vmin, sy_apply=sy_apply)


def solve(cs, cost, opts=None, seed=0, Y0=None):
    """Rank-escalation solve of min f(Y Y^T) subject to the constraints.

    Starts at width opts.p0 from a seeded random feasible factor (or the
    caller's Y0, whose width then takes the role of p0), runs the
    trust-region minimizer, and either stops on a rank-deficient first
    solve, certifies optimality through the dual matrix, or pads the
    factor with a zero column and escapes along the certified descent
    direction [0 | vmin] one rank higher.  The concatenated sequence of
    accepted costs across all ranks is non-increasing.
    """
    if opts is None:
        opts = MetaOptions()
    n = cs.dim_n
    p_max = opts.p_max if opts.p_max is not None else n
    if Y0 is not None:
        point = Y0 if isinstance(Y0, FactorPoint) else FactorPoint(Y0)
        p0 = point.Y.shape[1]
    else:
        p0 = opts.p0
    if not 1 <= p0 <= p_max <= n:
        raise ValueError(f"need 1 <= p0 <= p_max <= n, got p0={p0}, p_max={p_max}, n={n}")
    if Y0 is None:
        try:
            point = random_feasible(cs, p0, seed)
        except LowRankSdpError as exc:
            raise _annotate(exc, p0, "initial point")

    p = p0
    escape = None
    curv = None
    traces = []
    rank_history = []
    while True:
        try:
            point, records, _ = minimize(
                cs, cost, point, opts.inner, escape=escape, escape_curvature=curv
            )
        except LowRankSdpError as exc:
            raise _annotate(exc, p, "minimize")
        traces.append((p, records))

        rank_deficient_first = p == p0 and numerical_rank(point.Y, opts.rank_tol) < p
        try:
            cert = certificate(cs, cost, point)
        except LowRankSdpError as exc:
            raise _annotate(exc, p, "certificate")
        rank_history.append((p, cert.smin))

        if rank_deficient_first:
            status = "RankDeficientStop"
            break
        if cert.smin >= -opts.epsilon:
            status = "CertifiedOptimal"
            break
        if p + 1 > p_max:
            status = "ReachedPMax"
            break
        pad = np.zeros((n, 1))
        point = FactorPoint(np.hstack([point.Y, pad]))
        escape = np.hstack([np.zeros((n, p)), cert.vmin.reshape(n, 1)])
        curv = cert.smin
        p += 1

    return MetaResult(
        Y_star=point,
        p=p,
        certificate=cert,
        traces=traces,
        status=status,
        objective=cost.value(point.Y),
        rank_history=rank_history,
    )
