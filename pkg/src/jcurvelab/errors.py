"""Exception types shared across the package.

Every failure mode that callers are expected to catch has its own class;
anything else is a plain programming error and raises whatever the stdlib
or numpy would raise.
"""


class JCurveLabError(Exception):
    """Base class for all package-specific errors."""


# -- ambient geometry ---------------------------------------------------------

class NonSPD(JCurveLabError):
    """A metric failed symmetric positive-definiteness at a sampled point."""


class NotCorrectable(JCurveLabError):
    """A near-complex structure is too far from J**2 = -I to normalize."""


class OutOfDomain(JCurveLabError):
    """A requested point lies outside (or too close to the edge of) the chart box."""


class DegeneratePlane(JCurveLabError):
    """Two vectors span no 2-plane: Gram determinant below tolerance."""


class NonUnitVector(JCurveLabError):
    """A vector required to be g-unit is not."""


class NonPositiveScale(JCurveLabError):
    """Metric rescaling factor must be strictly positive."""


class NotImmersed(JCurveLabError):
    """An embedding Jacobian dropped rank at a sampled parameter."""


# -- charts and geodesics -----------------------------------------------------

class ChartFailure(JCurveLabError):
    """Normal-coordinate construction failed."""


class LeftDomain(JCurveLabError):
    """A geodesic or graph left the ambient chart box."""


class StepUnderflow(JCurveLabError):
    """Adaptive integration step shrank below the useful floor."""


class ShootingDiverged(JCurveLabError):
    """Newton shooting for a chart inverse failed to converge."""


# -- immersions ---------------------------------------------------------------

class DegenerateMetric(JCurveLabError):
    """Induced metric determinant below the immersion floor."""


class EmptyRegion(JCurveLabError):
    """An integration region contains no grid nodes."""


# -- solver -------------------------------------------------------------------

class IncompatibleCorners(JCurveLabError):
    """Mixed boundary data violates the corner compatibility condition."""


class EllipticityLost(JCurveLabError):
    """Smallest eigenvalue of the coefficient matrix fell below the floor."""


class MaxInnerIterations(JCurveLabError):
    """Relaxation sweeps exhausted before reaching the inner tolerance."""


class Diverged(JCurveLabError):
    """Outer fixed-point iteration is growing instead of contracting."""


class NotConverged(JCurveLabError):
    """An operation requires a converged solve outcome."""


# -- estimates ----------------------------------------------------------------

class NoRegularLevels(JCurveLabError):
    """Every candidate level of the distance function was near-critical."""


class NegativeF(JCurveLabError):
    """A density required to be non-negative has negative samples."""


class HypothesisFailed(JCurveLabError):
    """A check's hypotheses do not hold, so its conclusion is not testable."""


class RangeError(JCurveLabError):
    """Scalar argument outside the admissible interval."""


class UnresolvedCurvature(JCurveLabError):
    """Grid too coarse to resolve the curvature scale of the experiment."""


class PatchTooSmall(JCurveLabError):
    """The rescaled graphical patch has too few nodes to certify anything."""


# -- cli ----------------------------------------------------------------------

class MissingReport(JCurveLabError):
    """Plotting was pointed at a directory with no readable reports."""


class ParseError(JCurveLabError):
    """Config file rejected; message carries file, line, and key context."""
