"""Exception types raised across the library.

Every error below derives from :class:`PrecisionLabError` so callers can
catch the whole family with one clause.  Estimator failures that are
recoverable (a bad grid point, a degenerate fit) are distinguished from
solver bugs (``Infeasible``, ``SolverStall``) which should never occur on
valid input.
"""


class PrecisionLabError(Exception):
    """Base class for all library errors."""


# --- linear algebra -------------------------------------------------------

class NotPositiveDefinite(PrecisionLabError):
    """Cholesky factorization hit a non-positive pivot."""


class ConvergenceFailure(PrecisionLabError):
    """An eigensolver exceeded its iteration cap."""


# --- data ingestion -------------------------------------------------------

class ParseError(PrecisionLabError):
    """Input file is malformed."""


class EmptyPanel(PrecisionLabError):
    """Fewer than two usable rows after cleaning."""


class NonPositivePrice(PrecisionLabError):
    """Log-returns require strictly positive prices."""


class HorizonTooLarge(PrecisionLabError):
    """Aggregation horizon exceeds the number of rows."""


# --- estimators -----------------------------------------------------------

class NonConvergence(PrecisionLabError):
    """Iterative solver hit its sweep cap without meeting tolerance."""


class DegenerateTarget(PrecisionLabError):
    """Shrinkage target is not symmetric positive definite."""


class DegenerateSpectrum(PrecisionLabError):
    """Spectrum carries no usable signal (e.g. a zero-variance column)."""


class SingularInput(PrecisionLabError):
    """Unpenalized likelihood maximization needs a nonsingular input."""


class ZeroResidualVariance(PrecisionLabError):
    """Exact collinearity: a nodewise regression has zero residual."""


class Infeasible(PrecisionLabError):
    """LP reported infeasible.  Cannot happen on valid input; solver bug."""


class SolverStall(PrecisionLabError):
    """LP solver stopped making progress."""


# --- tuning ---------------------------------------------------------------

class TooFewRows(PrecisionLabError):
    """Not enough rows for the requested fold count."""


class DegenerateWeights(PrecisionLabError):
    """Weight denominator is non-positive."""


class ZeroDiagonal(PrecisionLabError):
    """Precision diagonal must be strictly positive for scoring."""


class AllPointsFailed(PrecisionLabError):
    """Every grid point failed or was flagged degenerate."""


class BudgetExhausted(PrecisionLabError):
    """Search budget exhausted before the stopping rule fired."""


# --- portfolio / comparison -----------------------------------------------

class DegenerateDenominator(PrecisionLabError):
    """1' Theta 1 is at or below round-off; weights undefined."""


class DimensionMismatch(PrecisionLabError):
    """Operand shapes are inconsistent."""


class IncomparableSeries(PrecisionLabError):
    """Loss series being compared have unequal lengths."""


class DegenerateVariance(PrecisionLabError):
    """A bootstrap variance is zero where a nonzero one is required."""


class SeriesTooShort(PrecisionLabError):
    """Series too short for the requested lag order."""


# --- synthetic experiments -------------------------------------------------

class BadDimensions(PrecisionLabError):
    """Generator dimensions violate the divisibility precondition."""


class Unreachable(PrecisionLabError):
    """Sample-size cap hit before the target error was reached."""


class ProjectionNonConvergence(PrecisionLabError):
    """Alternating projection did not converge within its cap."""
