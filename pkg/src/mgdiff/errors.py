"""Exception types shared across the package."""


class MgdiffError(Exception):
    """Base class for all package-specific errors."""


class NonDivisibleExtent(MgdiffError):
    """Domain extent is not an integer multiple of the requested step."""


class ParseError(MgdiffError):
    """Input file could not be parsed; the message carries the field locus."""


class NonPositiveRemoval(MgdiffError):
    """A diagonal removal entry sigma_t - sigma_s(g->g) is not positive."""


class AlignmentError(MgdiffError):
    """Mesh axis coordinates do not contain every region breakpoint."""


class DimensionMismatch(MgdiffError):
    """Vector or field layout does not match the operator layout."""


class NonSPD(MgdiffError):
    """Tridiagonal elimination hit a non-positive pivot."""


class DegenerateFissionSource(MgdiffError):
    """Inner product of successive fission sources vanished."""


class ZeroFissionNorm(MgdiffError):
    """Fission source has zero l1 norm; eigenvalue iteration cannot proceed."""


class MaxIterationsExceeded(MgdiffError):
    """Iteration budget exhausted.  Carries the best iterate and its report."""

    def __init__(self, message, state=None, report=None):
        super().__init__(message)
        self.state = state
        self.report = report


class NoProgress(MgdiffError):
    """A refinement step produced no new cells."""


class SingularLocalSystem(MgdiffError):
    """Local post-processing system is singular (degenerate cell)."""
