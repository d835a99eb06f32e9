"""Riemannian trust-region minimization of a cost over a factor manifold.

The outer loop is the classical trust-region scheme: minimize a
quadratic model of the lifted cost inside a radius, step through the
retraction, and adjust the radius from the agreement ratio.  The model
is solved by the truncated conjugate gradient of Steihaug and Toint,
stopped on the kappa/theta residual rule

    ||r_j|| <= ||r_0|| * min(||r_0||^theta, kappa_tcg)

so that with theta = 1 the local rate is quadratic.

The Riemannian gradient is the horizontal projection of the flat
gradient.  The Hessian applies the directional derivative of the whole
projected gradient field: the Sylvester factor Omega(Y) and the normal
coefficients alpha_i(Y) are differentiated analytically through their
defining linear systems, and the result is projected again.  The terms
coming from the derivatives of Omega and alpha are vertical and normal
respectively, so the final projection removes them; they are retained
for fidelity to the derivation at negligible cost (one extra small
Sylvester solve per application).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import BasePointMismatch, LowRankSdpError, SingularGram
from .manifold import (
    GRAM_RTOL,
    FactorPoint,
    TangentVector,
    _checked_gram_sq,
    _gram_eig,
    _split,
    retract,
)

# Ratio regularization in the spirit of classical trust-region codes:
# when predicted and actual decrease both sit at the cancellation floor,
# the ratio is meaningless and the step should not be spuriously
# rejected.  Acceptance additionally requires a non-increasing cost, so
# the regularization can never smuggle in an uphill step.
_RHO_REG_FACTOR = 1e3 * np.finfo(float).eps


@dataclass
class TrOptions:
    """Trust-region controls.

    grad_tol = None resolves to 1e-8 * max(1, |f(Y0)|) at entry;
    max_inner = None resolves to n * p.  delta_min is a floor on the
    radius: once rejections shrink it below the floor the loop stops,
    which matters for nonsmooth costs whose gradient never falls under
    grad_tol at a kink.
    """

    delta0: float = 1.0
    delta_max: float = 8.0
    rho_accept: float = 0.1
    grad_tol: float | None = None
    max_outer: int = 500
    theta: float = 1.0
    kappa_tcg: float = 0.1
    max_inner: int | None = None
    delta_min: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.rho_accept < 0.25:
            raise ValueError("rho_accept must lie in (0, 1/4)")
        if not 0.0 < self.delta0 <= self.delta_max:
            raise ValueError("need 0 < delta0 <= delta_max")
        if self.theta <= 0.0 or self.kappa_tcg <= 0.0:
            raise ValueError("theta and kappa_tcg must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be at least 1")
        if not 0.0 <= self.delta_min <= self.delta0:
            raise ValueError("need 0 <= delta_min <= delta0")


@dataclass
class TrStepRecord:
    """One outer-iteration snapshot.

    cost and grad_norm describe the iterate after the iteration
    (unchanged when the step was rejected), so the cost column of a
    trace is non-increasing.  Iteration 0 rows record the entry state
    ("init") and an optional saddle-escape move ("escape"); the tCG
    stop reasons are "tolerance", "boundary" and "negative-curvature",
    with defensive "max-inner" and "model-increase" exits.
    """

    iteration: int
    cost: float
    grad_norm: float
    radius: float
    ratio: float
    accepted: bool
    inner_iterations: int
    stop_reason: str


@dataclass
class TcgResult:
    """Truncated-CG outcome: the step, why it stopped, and the model value
    m(s) = <g, s> + 0.5 <s, H s> accumulated incrementally."""

    step: TangentVector
    stop_reason: str
    iterations: int
    model_value: float


class _Workspace:
    """Everything the outer loop reuses at one iterate: cost value, flat
    gradient, Gram eigendecomposition, and the projected gradient split."""

    def __init__(self, cs, cost, point):
        self.point = point
        self.Y = point.Y
        self.f = cost.value(self.Y)
        self.d, self.V = _gram_eig(self.Y)
        self.q = _checked_gram_sq(cs, self.Y)
        self.G = cost.euclidean_gradient(self.Y)
        P, Om, alpha = _split(cs, self.Y, self.G, self.d, self.V, self.q)
        self.grad_arr = P
        self.Om_g = Om
        self.alpha_g = alpha
        self.grad_norm = float(np.linalg.norm(P))


def _sylvester(d, V, C):
    """Solve W S + S W = C in the eigenbasis of S = V diag(d) V^T."""
    Ct = V.T @ C @ V
    return V @ (Ct / (d[:, None] + d[None, :])) @ V.T


def _hess_arr(cs, cost, ws, Zarr):
    """Riemannian Hessian applied to a horizontal direction (raw arrays)."""
    Y, G = ws.Y, ws.G
    Hz = cost.hessian_vector(Y, Zarr)

    # derivative of the Sylvester factor: Om' S + S Om' =
    #   d/dt [Y^T G - G^T Y] - (Om S' + S' Om),  S' = Z^T Y + Y^T Z
    Sp = Zarr.T @ Y + Y.T @ Zarr
    K = Zarr.T @ G + Y.T @ Hz
    Omp = _sylvester(ws.d, ws.V, (K - K.T) - (ws.Om_g @ Sp + Sp @ ws.Om_g))

    # derivative of the normal coefficients alpha_i = <A_i Y, G> / q_i
    num_p = cs.inner_with(Zarr, G) + cs.inner_with(Y, Hz)
    q_p = 2.0 * cs.gram_sq_cross(Y, Zarr)
    alpha_p = (num_p - ws.alpha_g * q_p) / ws.q

    Dxi = (
        Hz
        - Zarr @ ws.Om_g
        - Y @ Omp
        - cs.combo(ws.alpha_g, Zarr)
        - cs.combo(alpha_p, Y)
    )
    P, _, _ = _split(cs, Y, Dxi, ws.d, ws.V, ws.q)
    return P


def riemannian_gradient(cs, cost, point):
    """Horizontal projection of the flat gradient at a feasible point."""
    point = point if isinstance(point, FactorPoint) else FactorPoint(point)
    ws = _Workspace(cs, cost, point)
    return TangentVector(ws.grad_arr, point)


def riemannian_hessian_vector(cs, cost, point, tangent):
    """Riemannian Hessian of the quotient cost applied to a horizontal
    tangent vector at the same point."""
    point = point if isinstance(point, FactorPoint) else FactorPoint(point)
    if isinstance(tangent, TangentVector):
        if not np.array_equal(tangent.base.Y, point.Y):
            raise BasePointMismatch("tangent is anchored at a different point")
        Zarr = tangent.Z
    else:
        Zarr = np.asarray(tangent, dtype=float)
    ws = _Workspace(cs, cost, point)
    return TangentVector(_hess_arr(cs, cost, ws, Zarr), point)


def _to_boundary(s, d, delta):
    """Nonnegative tau with ||s + tau d|| = delta (s strictly inside)."""
    sd = float(np.sum(s * d))
    dd = float(np.sum(d * d))
    ss = float(np.sum(s * s))
    return (-sd + math.sqrt(sd * sd + dd * (delta * delta - ss))) / dd


def tcg_solve(hess, g, delta, opts, max_inner=None):
    """Steihaug-Toint truncated CG on the trust-region subproblem.

    hess maps a raw n-by-p array to H applied to it; g is the gradient
    as a TangentVector; the returned step is a TangentVector at the same
    base.  Stops on the kappa/theta residual rule, at the boundary, or
    on negative curvature (stepping to the boundary in that case).  The
    model value never rises between iterations and never exceeds the
    Cauchy-point value.
    """
    garr = g.Z
    if max_inner is None:
        max_inner = opts.max_inner if opts.max_inner is not None else garr.size
    s = np.zeros_like(garr)
    r = garr.copy()
    d = -r
    rr = float(np.sum(r * r))
    norm_r0 = math.sqrt(rr)
    if norm_r0 == 0.0:
        return TcgResult(TangentVector(s, g.base), "tolerance", 0, 0.0)
    target = norm_r0 * min(norm_r0**opts.theta, opts.kappa_tcg)

    m_val = 0.0
    m_cauchy = None
    reason = "max-inner"
    iters = 0
    for j in range(max_inner):
        iters = j + 1
        Hd = hess(d)
        dHd = float(np.sum(d * Hd))
        rd = float(np.sum(r * d))
        if j == 0:
            tc = delta / norm_r0
            if dHd > 0.0:
                tc = min(rr / dHd, tc)
            m_cauchy = -tc * rr + 0.5 * tc * tc * dHd
        if dHd <= 0.0:
            tau = _to_boundary(s, d, delta)
            m_val += tau * rd + 0.5 * tau * tau * dHd
            s = s + tau * d
            reason = "negative-curvature"
            break
        alpha = rr / dHd
        s_try = s + alpha * d
        if float(np.linalg.norm(s_try)) >= delta:
            tau = _to_boundary(s, d, delta)
            m_val += tau * rd + 0.5 * tau * tau * dHd
            s = s + tau * d
            reason = "boundary"
            break
        dm = alpha * rd + 0.5 * alpha * alpha * dHd
        if dm >= 0.0:
            # inexact Hessians can break the exact-CG decrease identity;
            # keep the last good iterate rather than degrade the model
            reason = "model-increase"
            break
        s = s_try
        m_val += dm
        r = r + alpha * Hd
        rr_new = float(np.sum(r * r))
        if math.sqrt(rr_new) <= target:
            reason = "tolerance"
            break
        d = -r + (rr_new / rr) * d
        rr = rr_new

    assert m_cauchy is None or m_val <= m_cauchy + 1e-12 * max(1.0, abs(m_cauchy))
    return TcgResult(TangentVector(s, g.base), reason, iters, m_val)


def _compress_to_rank(cs, cost, cand, f_bound):
    """Drop numerically dead factor columns when an iterate collapses.

    Minimizers of the lifted cost frequently have lower rank than the
    factor is wide, so iterates approach the rank-deficient boundary
    where the quotient geometry (and its floating-point conditioning)
    breaks down.  Truncating the factor to its numerical rank and
    re-correcting feasibility continues the descent on a well-behaved
    narrower factor; the represented matrix Y Y^T changes only at the
    truncation level.  Returns a fresh workspace, or None when the
    compressed point is unusable or would raise the cost above f_bound.
    """
    live = np.any(cand.Y != 0.0, axis=0)
    if live.any() and not live.all():
        # exactly dead columns (zero padding) drop off without touching
        # the represented matrix or the cost at all
        try:
            ws = _Workspace(cs, cost, FactorPoint(cand.Y[:, live]))
            if ws.f <= f_bound:
                return ws
        except LowRankSdpError:
            pass
    U, s, _ = np.linalg.svd(cand.Y, full_matrices=False)
    r = int(np.count_nonzero(s > math.sqrt(GRAM_RTOL) * s[0])) if s[0] > 0.0 else 0
    if r < 1 or r >= cand.Y.shape[1]:
        return None
    try:
        Yc = cs.corrected(U[:, :r] * s[:r])
        ws = _Workspace(cs, cost, FactorPoint(Yc))
    except LowRankSdpError:
        return None
    if not ws.f <= f_bound:
        return None
    return ws


def _escape_line_search(cs, cost, point, Zarr, curvature, f0):
    """Backtracking search along a certified descent direction at a saddle.

    Starts at step 1 and halves, preferring the first step with
    sufficient second-order decrease f <= f0 + 1e-4 t^2 curvature
    (curvature < 0), falling back to the largest step with a plain
    decrease.  Returns (new point or None, cost, halvings).
    """
    t = 1.0
    fallback = None
    halvings = 0
    while t >= 2.0**-60:
        cand = retract(cs, point, t * Zarr)
        fc = cost.value(cand.Y)
        # strict inequality: when the demanded quadratic decrease
        # underflows (phantom curvature at the noise floor), a move that
        # changes nothing must not count as an escape
        if curvature is not None and curvature < 0.0 and fc < f0 + 1e-4 * t * t * curvature:
            return cand, fc, halvings
        if fallback is None and fc < f0:
            fallback = (cand, fc, halvings)
        t /= 2.0
        halvings += 1
    if fallback is not None:
        return fallback
    return None, f0, halvings


def minimize(cs, cost, Y0, opts=None, escape=None, escape_curvature=None):
    """Trust-region descent from Y0; returns (point, records, status).

    status is "Converged" when the Riemannian gradient norm reached
    grad_tol and "MaxIterations" otherwise.  Accepted costs are
    non-increasing by construction: a step is taken only when the model
    predicted a decrease, the (regularized) agreement ratio cleared
    rho_accept, and the candidate cost did not rise.

    escape, when given, is a direction of certified negative curvature
    (typically a padded eigenvector column after a rank increment) with
    escape_curvature its quadratic form value.  If the gradient at Y0 is
    already below tolerance, or Y0 is rank-deficient so the quotient
    gradient is undefined there, an Armijo backtracking search along
    escape runs before the trust-region loop.

    Iterates whose Gram matrix degenerates (the minimizer has lower rank
    than the factor is wide) are compressed to their numerical rank and
    the descent continues on the narrower factor; the returned point is
    padded back to the entry width with zero columns, so callers can
    read the collapse off its numerical rank.
    """
    if opts is None:
        opts = TrOptions()
    point = Y0 if isinstance(Y0, FactorPoint) else FactorPoint(Y0)
    width = point.Y.shape[1]
    records = []

    f0 = cost.value(point.Y)
    gtol = opts.grad_tol if opts.grad_tol is not None else 1e-8 * max(1.0, abs(f0))

    ws = None
    entry_grad = math.nan
    if escape is not None:
        Zesc = escape.Z if isinstance(escape, TangentVector) else np.asarray(escape, dtype=float)
        try:
            ws = _Workspace(cs, cost, point)
            entry_grad = ws.grad_norm
        except SingularGram:
            ws = None   # padded factor: treat the stationary point as critical
            entry_grad = 0.0
        records.append(
            TrStepRecord(0, f0, entry_grad, opts.delta0, math.nan, True, 0, "init")
        )
        if entry_grad <= gtol:
            moved, fc, halvings = _escape_line_search(
                cs, cost, point, Zesc, escape_curvature, f0
            )
            if moved is not None:
                # take the escape only if the loop can continue from it;
                # a move along near-span directions can itself be rank
                # deficient, in which case compress or stay put
                try:
                    ws = _Workspace(cs, cost, moved)
                except SingularGram:
                    ws = _compress_to_rank(cs, cost, moved, f0)
                if ws is not None:
                    point = ws.point
                    records.append(
                        TrStepRecord(
                            0, ws.f, ws.grad_norm, opts.delta0, math.nan, True, halvings, "escape"
                        )
                    )
    if ws is None:
        try:
            ws = _Workspace(cs, cost, point)
        except SingularGram:
            # no usable escape from a rank-deficient entry point (phantom
            # curvature at the certificate's noise floor); continue on
            # the compressed factor, which is typically already critical
            ws = _compress_to_rank(cs, cost, point, f0)
            if ws is None:
                raise
        point = ws.point
    if not records:
        records.append(
            TrStepRecord(0, ws.f, ws.grad_norm, opts.delta0, math.nan, True, 0, "init")
        )

    delta = opts.delta0
    status = "MaxIterations"

    for k in range(1, opts.max_outer + 1):
        if ws.grad_norm <= gtol:
            status = "Converged"
            break
        g = TangentVector(ws.grad_arr, ws.point)
        res = tcg_solve(lambda Z: _hess_arr(cs, cost, ws, Z), g, delta, opts)
        cand = retract(cs, ws.point, res.step.Z)
        f_cand = cost.value(cand.Y)
        pred = -res.model_value
        reg = _RHO_REG_FACTOR * max(1.0, abs(ws.f))
        rho = (ws.f - f_cand + reg) / (pred + reg) if pred > 0.0 else -math.inf
        accepted = pred > 0.0 and rho > opts.rho_accept and f_cand <= ws.f
        reason = res.stop_reason
        if accepted:
            try:
                ws = _Workspace(cs, cost, cand)
            except SingularGram:
                narrower = _compress_to_rank(cs, cost, cand, ws.f)
                if narrower is None:
                    accepted = False
                    rho = -math.inf
                else:
                    ws = narrower
                    reason = reason + "+compress"
            if accepted:
                point = ws.point
        if rho < 0.25:
            delta = delta / 4.0
        elif rho > 0.75 and res.stop_reason in ("boundary", "negative-curvature"):
            delta = min(2.0 * delta, opts.delta_max)
        records.append(
            TrStepRecord(k, ws.f, ws.grad_norm, delta, rho, accepted, res.iterations, reason)
        )
        if not accepted and 0.0 < pred <= reg:
            # The model decrease achievable inside the radius is below
            # the floating-point resolution of f, and shrinking the
            # radius only reduces it further, so no future candidate
            # can resolvably beat the incumbent; this happens at kinks
            # of nonsmooth costs where the gradient stalls above gtol.
            # (pred <= 0 is excluded: that rejection shrinks the radius
            # and may recover a usable model.)
            break
        if delta < opts.delta_min:
            # At a kink of a nonsmooth cost the gradient never falls
            # under gtol, every model step is rejected, and the radius
            # collapses geometrically; steps this short cannot change f
            # in floating point, so stop rather than burn max_outer.
            if ws.grad_norm <= gtol:
                status = "Converged"
            break
    else:
        if ws.grad_norm <= gtol:
            status = "Converged"

    if point.Y.shape[1] < width:
        pad = np.zeros((point.Y.shape[0], width - point.Y.shape[1]))
        point = FactorPoint(np.hstack([point.Y, pad]))
    return point, records, status
