"""Exception hierarchy shared by all formsim modules."""


class FormsimError(Exception):
    """Base class for every error raised by this package."""


class ZeroEdge(FormsimError):
    """An edge has coincident endpoints, so its bearing is undefined."""


class ZeroVector(FormsimError):
    """A projector was requested for the zero vector."""


class DegenerateShape(FormsimError):
    """A motion-parameter space came out with an unexpected dimension."""


class Unreachable(FormsimError):
    """A calibration target cannot be realized within tolerance."""


class NonPositiveDistance(FormsimError):
    """A scheduled inter-agent distance is zero or negative."""


class EdgeCollapse(FormsimError):
    """Two neighboring agents collided during simulation."""


class DegenerateAlignment(FormsimError):
    """Shape alignment is ambiguous (rank-deficient cross-covariance)."""


class InsufficientDecay(FormsimError):
    """No decaying error segment exists to fit a convergence rate."""


class SchemaError(FormsimError):
    """A scenario document is malformed."""


class RigidityError(FormsimError):
    """A reference shape fails the required rigidity checks."""


class PositivityError(FormsimError):
    """A scaling schedule drives some distance to zero on the horizon."""
