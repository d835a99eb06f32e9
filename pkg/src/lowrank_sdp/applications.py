"""Problem builders and post-processing for the two bundled applications.

Max-cut: the semidefinite bound min Tr(-L/4 X) over the elliptope, plus
random-hyperplane rounding of the factor to an actual cut.

Sparse PCA, three pipelines over the spectahedron:
  spca_dspca     smoothed l1-penalized variance maximization on the
                 covariance space, with a continuation that shrinks the
                 smoothing parameter kappa
  spca_spectral  truncated spectral relaxation on the sample space
  spca_homotopy  projection of a spectral solution onto rank one by
                 blending the concave cost with its convex counterpart,
                 mu ramped from 0 to 1

All solvers minimize internally; the reported objectives are flipped
back to the maximization sense of the underlying statistics problems.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .costs import DspcaCost, HomotopyCost, LinearCost, SpectralSpcaCost
from .errors import DimensionMismatch, HomotopyStalled
from .manifold import FactorPoint, elliptope, spectahedron
from .meta_solver import solve
from .trust_region import TrOptions, minimize


# ------------------------------------------------------------------ graphs


class Graph:
    """Weighted undirected graph, 0-based vertices, no self-loops.

    Edges are (i, j, weight) with i < j; duplicates are allowed and
    their weights add up in the Laplacian. Weights may be negative.
    """

    def __init__(self, n_vertices, edges):
        n = int(n_vertices)
        if n < 1:
            raise DimensionMismatch("graph needs at least one vertex")
        clean = []
        for i, j, w in edges:
            i, j, w = int(i), int(j), float(w)
            if i == j:
                raise DimensionMismatch(f"self-loop at vertex {i}")
            if i > j:
                i, j = j, i
            if not 0 <= i < j < n:
                raise DimensionMismatch(f"edge ({i}, {j}) outside 0..{n - 1}")
            if not np.isfinite(w):
                raise DimensionMismatch(f"edge ({i}, {j}) has non-finite weight")
            clean.append((i, j, w))
        self.n_vertices = n
        self.edges = clean
        self._lap = None

    @classmethod
    def from_adjacency(cls, W):
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise DimensionMismatch("adjacency matrix must be square")
        if not np.allclose(W, W.T):
            raise DimensionMismatch("adjacency matrix must be symmetric")
        n = W.shape[0]
        edges = [
            (i, j, W[i, j])
            for i in range(n)
            for j in range(i + 1, n)
            if W[i, j] != 0.0
        ]
        return cls(n, edges)

    @property
    def laplacian(self):
        """Sparse L = D - W; satisfies L @ ones = 0 by construction."""
        if self._lap is None:
            n = self.n_vertices
            if self.edges:
                ii = np.array([e[0] for e in self.edges])
                jj = np.array([e[1] for e in self.edges])
                ww = np.array([e[2] for e in self.edges])
                rows = np.concatenate([ii, jj, ii, jj])
                cols = np.concatenate([jj, ii, ii, jj])
                vals = np.concatenate([-ww, -ww, ww, ww])
                self._lap = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
            else:
                self._lap = sp.csr_matrix((n, n))
        return self._lap


def maxcut_bound(g, opts=None, seed=0):
    """Semidefinite upper bound on the maximum cut of g.

    Solves min Tr(A X) with A = -L/4 over the elliptope; the bound is
    the negated optimal value. Returns (meta result, bound).
    """
    cost = LinearCost(-0.25 * g.laplacian)
    res = solve(elliptope(g.n_vertices), cost, opts, seed=seed)
    return res, -res.objective


def maxcut_round(g, Y, trials=100, seed=0):
    """Best random-hyperplane rounding of a factor into an actual cut.

    Returns (assignment, cut_value) where assignment is a +-1 vector and
    cut_value sums the weights of edges whose endpoints disagree.
    """
    Y = Y.Y if isinstance(Y, FactorPoint) else np.asarray(Y, dtype=float)
    if trials < 1:
        raise ValueError("trials must be at least 1")
    ii = np.array([e[0] for e in g.edges], dtype=int)
    jj = np.array([e[1] for e in g.edges], dtype=int)
    ww = np.array([e[2] for e in g.edges], dtype=float)
    rng = np.random.default_rng(seed)
    best_cut, best_s = -np.inf, None
    for _ in range(trials):
        r = rng.standard_normal(Y.shape[1])
        s = np.where(Y @ r >= 0.0, 1.0, -1.0)
        cut = 0.5 * float(np.sum(ww * (1.0 - s[ii] * s[jj]))) if len(ww) else 0.0
        if cut > best_cut:
            best_cut, best_s = cut, s
    return best_s, best_cut


# -------------------------------------------------------------- sparse PCA


DEFAULT_KAPPAS = (1e-1, 1e-2, 1e-3, 1e-4)


class SpcaInstance:
    """Data matrix plus sparsity weight for the sparse-PCA pipelines.

    data has one column a_i per variable; rho_bar = max_i a_i^T a_i is
    the value of rho beyond which the spectral relaxation returns zero.
    kappa only matters for the smoothed (DSPCA) pipeline.
    """

    def __init__(self, data, rho, kappa=1e-4):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2:
            raise DimensionMismatch("data must be a 2-D matrix")
        if rho < 0:
            raise ValueError("rho must be nonnegative")
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        self.data = data
        self.rho = float(rho)
        self.kappa = float(kappa)
        self.rho_bar = float(np.max(np.sum(data * data, axis=0)))
        self.m_rows, self.n = data.shape

    @classmethod
    def at_fraction(cls, data, frac, kappa=1e-4):
        """Build with rho given as a fraction of the upper bound rho_bar."""
        inst = cls(data, 0.0, kappa)
        inst.rho = frac * inst.rho_bar
        return inst


@dataclass
class SparseComponent:
    """A recovered sparse principal direction.

    Exactly one of x (covariance space, n-vector) and z (sample space,
    m-vector) is set, depending on the pipeline. objective is in the
    maximization sense. lambda_max is the rank-one diagnostic of the
    matrix the component was extracted from (1 means exactly rank one).
    """

    pattern: np.ndarray
    objective: float
    cardinality: int
    lambda_max: float
    x: np.ndarray = None
    z: np.ndarray = None


def _dominant_direction(X):
    """Unit top eigenvector of a small symmetric PSD matrix, sign-fixed."""
    vals, vecs = np.linalg.eigh(X)
    v = vecs[:, -1]
    k = int(np.argmax(np.abs(v)))
    if v[k] < 0.0:
        v = -v
    return v, float(vals[-1])


def f_evd(data, rho, z):
    """Sparse-PCA objective of the rank-one candidate z z^T.

    Both spectral cost forms agree on rank-one matrices and equal
    sum_i ((a_i^T z)^2 - rho)_+.
    """
    scores = (data.T @ z) ** 2
    return float(np.maximum(scores - rho, 0.0).sum())


def spca_dspca(inst, opts=None, continuation=None, seed=0):
    """Smoothed l1-penalized sparse PCA on the covariance space.

    Runs the rank-escalation solver once per kappa in the continuation
    (strictly decreasing), warm-starting each solve from the previous
    solution. Returns the final meta result and the component extracted
    from the dominant eigenvector of X.
    """
    if continuation is None:
        head = [k for k in DEFAULT_KAPPAS[:-1] if k > inst.kappa]
        continuation = head + [inst.kappa]
    continuation = [float(k) for k in continuation]
    if any(b >= a for a, b in zip(continuation, continuation[1:])):
        raise ValueError("continuation kappas must be strictly decreasing")
    cs = spectahedron(inst.n)
    res, Y0 = None, None
    for kappa in continuation:
        cost = DspcaCost(rho=inst.rho, kappa=kappa, data=inst.data)
        res = solve(cs, cost, opts, seed=seed, Y0=Y0)
        Y0 = res.Y_star
    x, lam_max = _dominant_direction(res.X())
    pattern = np.abs(x) >= 1e-6 * np.abs(x).max()
    comp = SparseComponent(
        pattern=pattern,
        objective=-res.objective,
        cardinality=int(pattern.sum()),
        lambda_max=lam_max,
        x=x,
    )
    return res, comp


def spca_spectral(inst, opts=None, seed=0):
    """Truncated spectral sparse PCA on the sample space.

    Solves the relaxation over Z in the spectahedron of size m_rows,
    projects Z onto its dominant eigenvector z and reports the active
    pattern (a_i^T z)^2 >= rho with the rank-one objective f_evd.

    The rank-one stage starts from the dominant left singular vector of
    the data (the rho = 0 solution). A random start can fall into the
    region where every term of the truncated cost is clamped to zero;
    the cost is flat there and the solver would stop at once. The PCA
    direction always carries active terms because the dominant variance
    is at least rho_bar.
    """
    if inst.rho <= 0:
        raise ValueError("the spectral pipeline needs rho > 0")
    z0, _ = _dominant_direction(inst.data @ inst.data.T)
    cost = SpectralSpcaCost(inst.data, inst.rho)
    res = solve(spectahedron(inst.m_rows), cost, opts, seed=seed,
                Y0=z0.reshape(-1, 1))
    z, lam_max = _dominant_direction(res.X())
    scores = (inst.data.T @ z) ** 2
    pattern = scores >= inst.rho
    comp = SparseComponent(
        pattern=pattern,
        objective=f_evd(inst.data, inst.rho, z),
        cardinality=int(pattern.sum()),
        lambda_max=lam_max,
        z=z,
    )
    return res, comp


def spca_homotopy(inst, Z0, mus=None, opts=None):
    """Project a spectral-relaxation solution onto rank one by homotopy.

    For each mu in the nondecreasing schedule from 0 to 1 the blended
    cost (mu times convex, 1 - mu times concave) is re-optimized locally
    from the previous iterate, at the incoming rank only: the blend is
    nonconvex for mu > 0, so escalation certificates do not apply.

    Returns (final factor, trace) with one (mu, f_ccv, f_evd,
    lambda_max) row per step. Raises HomotopyStalled if the endpoint is
    not rank one to 1e-3. Warns if the endpoint objective falls more
    than 1e-6 below the plain dominant-eigenvector projection of Z0.
    """
    if mus is None:
        mus = np.linspace(0.0, 1.0, 21)   # steps of 0.05
    mus = [float(m) for m in mus]
    if not mus or abs(mus[0]) > 1e-12 or abs(mus[-1] - 1.0) > 1e-12:
        raise ValueError("mu schedule must run from 0 to 1")
    if any(b < a for a, b in zip(mus, mus[1:])):
        raise ValueError("mu schedule must be nondecreasing")
    if opts is None:
        opts = TrOptions()
    point = Z0 if isinstance(Z0, FactorPoint) else FactorPoint(Z0)
    cs = spectahedron(inst.m_rows)

    z0, _ = _dominant_direction(point.Y @ point.Y.T)
    fevd_start = f_evd(inst.data, inst.rho, z0)

    trace = []
    for mu in mus:
        cost = HomotopyCost(inst.data, inst.rho, mu)
        point, _, _ = minimize(cs, cost, point, opts)
        z, lam_max = _dominant_direction(point.Y @ point.Y.T)
        trace.append((mu, cost.ccv_value(point.Y), f_evd(inst.data, inst.rho, z), lam_max))

    lam_end = trace[-1][3]
    if lam_end < 1.0 - 1e-3:
        raise HomotopyStalled(
            f"endpoint lambda_max = {lam_end:.6f} is not rank one",
            context={"mu": 1.0, "lambda_max": lam_end},
        )
    if trace[-1][2] < fevd_start - 1e-6:
        warnings.warn(
            "homotopy endpoint underperforms the dominant-eigenvector "
            f"projection ({trace[-1][2]:.6g} < {fevd_start:.6g})"
        )
    return point, trace
