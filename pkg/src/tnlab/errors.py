"""Exception hierarchy shared by all tnlab modules."""


class TnlabError(Exception):
    """Base class for every error raised by tnlab."""


class InvalidInputError(TnlabError, ValueError):
    """Malformed or out-of-contract input (shapes, non-finite entries, sizes)."""


class ModelEvaluationError(TnlabError, ArithmeticError):
    """A scalar model returned a non-finite value or was evaluated off its domain."""


class SingularityError(TnlabError, ZeroDivisionError):
    """Evaluation on the excluded level set a(v) = lambda1."""


class ConsistencyError(TnlabError, RuntimeError):
    """An algebraic identity that must hold exactly was violated numerically."""


class RankDeficiencyError(TnlabError, ValueError):
    """A least-squares fit was requested on a rank-deficient system."""


class WrongRegimeError(TnlabError, ValueError):
    """The input lies outside the regime an operation is defined for."""


class WrongRouteError(TnlabError, ValueError):
    """A degenerate-only routine was called with a nondegenerate system, or vice versa."""


class UnsupportedSizeError(TnlabError, ValueError):
    """Problem size exceeds what an exhaustive routine will enumerate."""
