"""
Named failures raised by the model layer.

Each one subclasses the builtin family used elsewhere (ValueError for bad geometry or input,
RuntimeError for numeric breakdown) so callers that only know the builtins still catch them.
"""


class DomainError(ValueError):
    """a point left the domain of a primitive or an inverse was requested outside an image"""


class NotInImage(ValueError):
    """no branch image contains the point"""


class NoGap(ValueError):
    """the two contracting rates are too close to separate a strong direction"""


class InfeasibleEpsilon(ValueError):
    """the requested flexibility bound cannot be met for this period"""


class SupportTooSmall(ValueError):
    pass


class GluingMismatch(ValueError):
    """a core is not homothetic near the boundary of its region"""


class ConstraintViolation(ValueError):
    """a prepared-family condition failed; the message names the condition"""


class ObstructionConflict(ValueError):
    pass


class GeometryInfeasible(ValueError):
    pass


class DepthInfeasible(ValueError):
    pass


class NotGraphRepresentable(ValueError):
    pass


class CostExceedsHomothety(ValueError):
    """the fragmentation count does not fit inside the homothetic region of the member"""


class UnivalenceViolation(ValueError):
    pass


class SupportCollision(ValueError):
    pass


class NumericFailure(RuntimeError):
    """an iteration failed to converge or produced non-finite values"""


class ScenarioError(ValueError):
    """the scenario, a saved report or a command line override is unusable input"""
