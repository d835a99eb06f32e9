"""Exception types shared across the package.

Every error raised by the solver stack derives from LowRankSdpError so
callers can catch one type at the boundary.  Errors raised deep inside a
run carry a ``context`` dict (rank, iteration, stage) attached by the
meta solver before re-raising.
"""


class LowRankSdpError(Exception):
    """Base class for all package errors."""

    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = dict(context) if context else {}

    def __str__(self):
        base = super().__str__()
        if self.context:
            extras = ", ".join(f"{k}={v}" for k, v in sorted(self.context.items()))
            return f"{base} [{extras}]"
        return base


class DimensionMismatch(LowRankSdpError):
    """Array shapes disagree with the constraint set or each other."""


class AssumptionViolation(LowRankSdpError):
    """Constraint matrices are not symmetric or have nonzero pairwise products."""


class InfeasibleStart(LowRankSdpError):
    """random_feasible could not correct a random draw onto the feasible set."""


class SingularGram(LowRankSdpError):
    """Y^T Y is numerically singular; the factor lost column rank."""


class DegenerateConstraint(LowRankSdpError):
    """Tr(Y^T A_i^2 Y) vanished; the multiplier for constraint i is undefined."""


class RetractionFailure(LowRankSdpError):
    """No feasibility-restoring correction exists for the attempted step."""


class BasePointMismatch(LowRankSdpError):
    """Two tangent vectors anchored at different base points were combined."""


class EigSolverNoConvergence(LowRankSdpError):
    """Iterative eigensolver failed to reach the requested residual.

    ``best_value`` and ``best_vector`` hold the last iterate when available.
    """

    def __init__(self, message, best_value=None, best_vector=None, context=None):
        super().__init__(message, context)
        self.best_value = best_value
        self.best_vector = best_vector


class HomotopyStalled(LowRankSdpError):
    """The homotopy endpoint is not numerically rank one."""


class ParseError(LowRankSdpError):
    """Malformed input file; carries the 1-based line number when known."""

    def __init__(self, message, line=None, context=None):
        super().__init__(message, context)
        self.line = line

    def __str__(self):
        base = super().__str__()
        if self.line is not None:
            return f"line {self.line}: {base}"
        return base


class SelfLoop(ParseError):
    """A graph file lists an edge joining a vertex to itself."""


class RaggedRows(ParseError):
    """Rows of a dense matrix file have inconsistent lengths."""


class NonFinite(ParseError):
    """A dense matrix file contains a NaN or infinity.

    ``row`` and ``col`` locate the offending entry (0-based).
    """

    def __init__(self, message, row=None, col=None, line=None, context=None):
        super().__init__(message, line=line, context=context)
        self.row = row
        self.col = col


class TraceIoError(LowRankSdpError):
    """Writing a trace or result file failed at the OS level."""
