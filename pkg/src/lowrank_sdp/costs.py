"""Cost models over the factored matrix X = Y Y^T.

Every model evaluates the lifted function f~(Y) = f(Y Y^T) and exposes

    value(Y)               f~(Y)
    euclidean_gradient(Y)  gradient of f~ in the flat n-by-p space
    hessian_vector(Y, Z)   directional derivative of that gradient
    gradient_x_apply(Y, W) action of the gradient of f at X = Y Y^T,
                           i.e. the symmetric matrix D with
                           euclidean_gradient = 2 D Y, applied to W
    smoothness             "smooth" or "nonsmooth"

The solver minimizes; models of maximization problems carry the sign
flip internally and the application layer negates reported values back.

Methods take plain ndarrays, not FactorPoint wrappers, because the
finite-difference stencils used for the nonsmooth Hessians evaluate the
gradient at points slightly off the feasible set.

Rank escalation pads factors with exactly zero columns.  Such dead
columns contribute nothing to X = Y Y^T, but changing the column count
changes BLAS blocking and summation order, which perturbs computed
values at roundoff level.  Every model therefore routes value and
gradient evaluation around dead columns, so padded and unpadded factors
give bit-identical results; the rank loop relies on this for exact cost
monotonicity across escalations.
"""

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch


def _fd_step(Y, Z):
    return 1e-6 * max(1.0, float(np.linalg.norm(Y))) / max(1.0, float(np.linalg.norm(Z)))


class CostModel:
    """Shared plumbing: shape checks and the finite-difference Hessian."""

    smoothness = "smooth"
    dim_n = None

    def _check(self, Y):
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 2 or Y.shape[0] != self.dim_n:
            raise DimensionMismatch(
                f"factor shape {Y.shape} does not match cost dimension {self.dim_n}"
            )
        return Y

    def value(self, Y):
        raise NotImplementedError

    def euclidean_gradient(self, Y):
        raise NotImplementedError

    def gradient_x_apply(self, Y, W):
        raise NotImplementedError

    def hessian_vector(self, Y, Z):
        """Central difference of the gradient; overridden when analytic."""
        Y = self._check(Y)
        Z = self._check(Z)
        h = _fd_step(Y, Z)
        gp = self.euclidean_gradient(Y + h * Z)
        gm = self.euclidean_gradient(Y - h * Z)
        return (gp - gm) / (2.0 * h)


class LinearCost(CostModel):
    """f(X) = Tr(A X) for a fixed symmetric matrix A (dense or sparse)."""

    def __init__(self, A):
        if not sp.issparse(A):
            A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatch("cost matrix must be square")
        asym = A - A.T
        gap = sp.linalg.norm(asym) if sp.issparse(asym) else np.linalg.norm(asym)
        scale = sp.linalg.norm(A) if sp.issparse(A) else np.linalg.norm(A)
        if gap > 1e-12 * max(1.0, scale):
            raise DimensionMismatch("cost matrix must be symmetric")
        self.A = A
        self.dim_n = A.shape[0]

    def value(self, Y):
        Y = self._check(Y)
        live = np.any(Y != 0.0, axis=0)
        if not live.all():
            return self.value(Y[:, live])
        return float(np.sum(Y * (self.A @ Y)))

    def euclidean_gradient(self, Y):
        Y = self._check(Y)
        live = np.any(Y != 0.0, axis=0)
        if not live.all():
            G = np.zeros_like(Y)
            G[:, live] = self.euclidean_gradient(Y[:, live])
            return G
        return 2.0 * (self.A @ Y)

    def hessian_vector(self, Y, Z):
        Z = self._check(Z)
        return 2.0 * (self.A @ Z)

    def gradient_x_apply(self, Y, W):
        return self.A @ W


class DspcaCost(CostModel):
    """Smoothed penalized PCA: f(X) = -Tr(Sigma X) + rho * sum_ij h(X_ij).

    h(x) = sqrt(x^2 + kappa^2) is the smooth absolute value; as kappa
    drops toward zero the model approaches the exact l1-penalized
    variance objective (in minimization form; the underlying problem
    maximizes Tr(Sigma X) - rho * sum |X_ij|).

    Sigma may be given directly or as a data matrix (Sigma = data^T data)
    which is kept factored so Sigma-products cost O(m n p) instead of
    O(n^2 p) when the sample count m is small.
    """

    def __init__(self, rho, kappa, sigma=None, data=None):
        if (sigma is None) == (data is None):
            raise DimensionMismatch("pass exactly one of sigma or data")
        if rho < 0:
            raise ValueError("rho must be nonnegative")
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        self.rho = float(rho)
        self.kappa = float(kappa)
        if sigma is not None:
            sigma = np.asarray(sigma, dtype=float)
            if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
                raise DimensionMismatch("sigma must be square")
            if np.linalg.norm(sigma - sigma.T) > 1e-12 * max(1.0, np.linalg.norm(sigma)):
                raise DimensionMismatch("sigma must be symmetric")
            self.sigma = sigma
            self.data = None
            self.dim_n = sigma.shape[0]
        else:
            data = np.asarray(data, dtype=float)
            if data.ndim != 2:
                raise DimensionMismatch("data must be a 2-D matrix")
            self.sigma = None
            self.data = data
            self.dim_n = data.shape[1]

    def _sigma_apply(self, V):
        if self.sigma is not None:
            return self.sigma @ V
        return self.data.T @ (self.data @ V)

    def _weights(self, Y):
        """X, entrywise slope G = X/h(X), and curvature kappa^2/h(X)^3."""
        X = Y @ Y.T
        hx = np.sqrt(X * X + self.kappa * self.kappa)
        return X, X / hx, (self.kappa * self.kappa) / hx**3

    def value(self, Y):
        Y = self._check(Y)
        live = np.any(Y != 0.0, axis=0)
        if not live.all():
            return self.value(Y[:, live])
        variance = float(np.sum(Y * self._sigma_apply(Y)))
        X = Y @ Y.T
        penalty = float(np.sqrt(X * X + self.kappa * self.kappa).sum())
        return -variance + self.rho * penalty

    def euclidean_gradient(self, Y):
        Y = self._check(Y)
        live = np.any(Y != 0.0, axis=0)
        if not live.all():
            G = np.zeros_like(Y)
            G[:, live] = self.euclidean_gradient(Y[:, live])
            return G
        out = -2.0 * self._sigma_apply(Y)
        if self.rho:
            _, G, _ = self._weights(Y)
            out += 2.0 * self.rho * (G @ Y)
        return out

    def hessian_vector(self, Y, Z):
        Y = self._check(Y)
        Z = self._check(Z)
        out = -2.0 * self._sigma_apply(Z)
        if self.rho:
            _, G, curv = self._weights(Y)
            W = Y @ Z.T + Z @ Y.T
            out += 2.0 * self.rho * (G @ Z + (curv * W) @ Y)
        return out

    def gradient_x_apply(self, Y, W):
        Y = self._check(Y)
        live = np.any(Y != 0.0, axis=0)
        if not live.all():
            return self.gradient_x_apply(Y[:, live], W)
        out = -self._sigma_apply(W)
        if self.rho:
            _, G, _ = self._weights(Y)
            out += self.rho * (G @ W)
        return out


class SpectralSpcaCost(CostModel):
    """Truncated spectral sparse-PCA cost (minimization form).

    For data columns a_i define B_i = a_i a_i^T - rho I on the sample
    space.  The model is f~(Y) = -sum_i traceplus(Y^T B_i Y) where
    traceplus sums the strictly positive eigenvalues.  Tie-breaking at
    zero eigenvalues excludes them, a one-sided subgradient convention;
    the Hessian is a central finite difference of the gradient.
    """

    smoothness = "nonsmooth"

    def __init__(self, data, rho):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2:
            raise DimensionMismatch("data must be a 2-D matrix")
        if rho <= 0:
            raise ValueError("rho must be positive")
        self.data = data
        self.rho = float(rho)
        self.dim_n = data.shape[0]   # the SDP variable lives on the sample space

    def _columns(self, Y):
        """Per-column eigendecompositions of M_i = v_i v_i^T - rho Y^T Y."""
        V = self.data.T @ Y                       # row i is v_i^T = a_i^T Y
        C = Y.T @ Y
        p = Y.shape[1]
        if p == 1:
            m = V[:, 0] ** 2 - self.rho * C[0, 0]
            return V, C, m.reshape(-1, 1), None
        thetas = np.empty((V.shape[0], p))
        bases = np.empty((V.shape[0], p, p))
        for i in range(V.shape[0]):
            M = np.outer(V[i], V[i]) - self.rho * C
            thetas[i], bases[i] = np.linalg.eigh(M)
        return V, C, thetas, bases

    # Dead-column routing matters doubly here: besides BLAS blocking
    # (module docstring), changing p switches between the scalar fast
    # path and the per-column eigensolver.

    def value(self, Y):
        Y = self._check(Y)
        live = np.any(Y != 0.0, axis=0)
        if not live.all():
            return self.value(Y[:, live]) if live.any() else 0.0
        _, _, thetas, _ = self._columns(Y)
        return -float(np.where(thetas > 0.0, thetas, 0.0).sum())

    def euclidean_gradient(self, Y):
        Y = self._check(Y)
        live = np.any(Y != 0.0, axis=0)
        if not live.all():
            G = np.zeros_like(Y)
            if live.any():
                G[:, live] = self.euclidean_gradient(Y[:, live])
            return G
        V, _, thetas, bases = self._columns(Y)
        n = V.shape[0]
        if bases is None:
            act = (thetas[:, 0] > 0.0).astype(float)
            S = act[:, None] * V
            psum_trace = act.sum()
            return -2.0 * (self.data @ S - self.rho * psum_trace * Y)
        S = np.empty_like(V)
        Psum = np.zeros((Y.shape[1], Y.shape[1]))
        for i in range(n):
            pos = thetas[i] > 0.0
            U = bases[i][:, pos]
            Pi = U @ U.T
            S[i] = Pi @ V[i]
            Psum += Pi
        return -2.0 * (self.data @ S - self.rho * (Y @ Psum))

    def gradient_x_apply(self, Y, W):
        """Action of the subgradient of f at X = Y Y^T.

        Uses the closed form -sum_i B_i T_i B_i with
        T_i = Y U_i diag(1/theta on positive eigenvalues) U_i^T Y^T,
        which satisfies the chain rule against euclidean_gradient.
        """
        Y = self._check(Y)
        live = np.any(Y != 0.0, axis=0)
        if not live.all():
            if live.any():
                return self.gradient_x_apply(Y[:, live], W)
            return np.zeros_like(np.asarray(W, dtype=float))
        W = np.asarray(W, dtype=float)
        if W.ndim == 1:
            W = W.reshape(-1, 1)
            squeeze = True
        else:
            squeeze = False
        V, _, thetas, bases = self._columns(Y)
        n = V.shape[0]
        YtW = Y.T @ W
        atW = self.data.T @ W                     # row i is a_i^T W
        out = np.zeros_like(W)
        for i in range(n):
            pos = thetas[i] > 0.0
            if not np.any(pos):
                continue
            if bases is None:
                D = np.array([[1.0 / thetas[i, 0]]])
            else:
                U = bases[i][:, pos]
                D = U @ np.diag(1.0 / thetas[i][pos]) @ U.T
            # B_i W = a_i (a_i^T W) - rho W, pushed through T_i and B_i again
            YtBW = np.outer(V[i], atW[i]) - self.rho * YtW
            mid = Y @ (D @ YtBW)
            out -= np.outer(self.data[:, i], self.data[:, i] @ mid) - self.rho * mid
        return out[:, 0] if squeeze else out


class HomotopyCost(CostModel):
    """Blend of the convex and concave sparse-PCA surrogates.

    f~(Y) = -[mu * f_cvx + (1 - mu) * f_ccv] where
    f_cvx = sum_i pos(a_i^T Y Y^T a_i - rho) and f_ccv is the truncated
    spectral sum of SpectralSpcaCost.  The two agree exactly on feasible
    rank-one factors; mu moves the blend from the concave surrogate
    (mu = 0) to the convex one (mu = 1), whose maximizers over the
    spectahedron sit at rank-one extreme points.
    """

    smoothness = "nonsmooth"

    def __init__(self, data, rho, mu):
        if not 0.0 <= mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        self._ccv = SpectralSpcaCost(data, rho)
        self.data = self._ccv.data
        self.rho = float(rho)
        self.mu = float(mu)
        self.dim_n = self.data.shape[0]

    def _cvx_scores(self, Y):
        V = self.data.T @ Y
        return V, np.sum(V * V, axis=1) - self.rho

    def cvx_value(self, Y):
        """f_cvx in maximization sense (nonnegative)."""
        _, s = self._cvx_scores(self._check(Y))
        return float(np.where(s > 0.0, s, 0.0).sum())

    def ccv_value(self, Y):
        """f_ccv in maximization sense."""
        return -self._ccv.value(Y)

    def value(self, Y):
        Y = self._check(Y)
        live = np.any(Y != 0.0, axis=0)
        if not live.all():
            return self.value(Y[:, live])
        return -(self.mu * self.cvx_value(Y)) + (1.0 - self.mu) * self._ccv.value(Y)

    def euclidean_gradient(self, Y):
        Y = self._check(Y)
        live = np.any(Y != 0.0, axis=0)
        if not live.all():
            G = np.zeros_like(Y)
            G[:, live] = self.euclidean_gradient(Y[:, live])
            return G
        V, s = self._cvx_scores(Y)
        act = (s > 0.0).astype(float)
        cvx_grad = 2.0 * (self.data @ (act[:, None] * V))
        return -self.mu * cvx_grad + (1.0 - self.mu) * self._ccv.euclidean_gradient(Y)

    def gradient_x_apply(self, Y, W):
        Y = self._check(Y)
        live = np.any(Y != 0.0, axis=0)
        if not live.all():
            return self.gradient_x_apply(Y[:, live], W)
        _, s = self._cvx_scores(Y)
        act = (s > 0.0).astype(float)
        atW = self.data.T @ np.asarray(W, dtype=float)
        cvx_part = self.data @ (act[:, None] * atW)
        return -self.mu * cvx_part + (1.0 - self.mu) * self._ccv.gradient_x_apply(Y, W)
