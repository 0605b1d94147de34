"""Exception hierarchy shared by every loopworks module."""


class LoopworksError(Exception):
    """Base class for all library errors."""


class ChainError(LoopworksError):
    """Invalid chain specification."""


class NegativeWeight(ChainError):
    pass


class RowSumExceedsOne(ChainError):
    pass


class UnknownState(ChainError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class SingularInterior(ChainError):
    """``I - P_A`` (or a sub-domain version of it) is not invertible."""


class DomainError(LoopworksError, ValueError):
    """A numeric argument is outside the admissible range."""


class MaxStepsExceeded(LoopworksError):
    """A walk did not terminate within the step budget."""


class MaxRetriesExceeded(LoopworksError):
    pass


class TooLarge(LoopworksError):
    """An enumeration would exceed its size guard."""


class EndpointMismatch(LoopworksError, ValueError):
    pass


class NotExitPath(LoopworksError, ValueError):
    pass


class NotExitSaw(LoopworksError, ValueError):
    pass


class NotALoop(LoopworksError, ValueError):
    pass


class NotALoopAtX(NotALoop):
    pass


class DeadEnd(LoopworksError):
    """No admissible continuation for a Laplacian-walk step."""


class ZeroMass(LoopworksError):
    """The elementary-loop mass at a site is zero."""


class DomainMismatch(LoopworksError, ValueError):
    pass


class DisconnectedGraph(LoopworksError, ValueError):
    pass


class NonIntegerResult(LoopworksError, ArithmeticError):
    pass


class TrivialLoop(LoopworksError, ValueError):
    pass


class EmptyDistribution(LoopworksError, ValueError):
    pass


class UsageError(LoopworksError):
    pass
