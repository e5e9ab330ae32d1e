"""Exception hierarchy.

Three families matter to callers (and to the CLI exit-code mapping):
validation of inputs, hard size caps, and numerical failures inside
otherwise well-posed computations.
"""


class NlmotError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(NlmotError):
    """Inputs violate a documented precondition or schema."""


class CapError(NlmotError):
    """A hard size cap (enumeration, LP dimensions) was exceeded."""


class NumericalError(NlmotError):
    """A numerical routine could not meet its contract."""


# -- validation ------------------------------------------------------------

class QuantileOutOfRange(ValidationError):
    """Quantile levels outside [0, total mass]."""


class MomentOutOfRange(ValidationError):
    """Requested first moment is not attainable for the given mass."""


class NotProbability(ValidationError):
    """A measure expected to have unit mass does not."""


class CutOnAtom(ValidationError):
    """A discretization cut coincides with an atom of the measure."""


class NotConvexOrder(ValidationError):
    """The marginals are not in convex order."""


class NotTwoPoint(ValidationError):
    """The first marginal does not have exactly two support points."""


class NotNested(ValidationError):
    """Discretization levels do not refine each other."""


class MarginalMismatch(ValidationError):
    """Marginals of composed couplings do not line up."""


class DomainViolation(ValidationError):
    """Support touches a singularity or leaves the declared domain."""


class NotInvertible(ValidationError):
    """The concave gain function has no inverse."""


class DegenerateBound(ValidationError):
    """The canonical bound is non-positive; no portfolio exists."""


class SchemaError(ValidationError):
    """A JSON document does not match the expected schema."""


# -- caps ------------------------------------------------------------------

class SupportTooLarge(CapError):
    """Support size exceeds the enumeration cap."""


# -- numerical -------------------------------------------------------------

class ShadowInfeasible(NumericalError):
    """Accumulated drift made a shadow step infeasible."""


class NoRoot(NumericalError):
    """No root found for the dual slope equation."""


class Infeasible(NumericalError):
    """The linear program has no feasible point."""


class Unbounded(NumericalError):
    """The linear program is unbounded (internal error on bounded polytopes)."""
