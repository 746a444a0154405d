"""Exception hierarchy shared by the solver modules."""


class PipaError(Exception):
    """Base class for every error raised by this package."""


class SingularMatrixError(PipaError):
    pass


class DimensionError(PipaError, ValueError):
    pass


class InteriorityError(PipaError, ValueError):
    """A complementarity variable is not strictly positive."""


class SubproblemError(PipaError):
    """The direction-finding QP is infeasible, unbounded or did not finish."""


class LineSearchError(PipaError):
    pass


class PenaltyExponentError(PipaError):
    """No penalty exponent up to the cap gives sufficient model decrease."""


class RadiusCollapseError(PipaError):
    pass


class TraceTooShortError(PipaError, ValueError):
    pass
