"""Exception hierarchy shared by the solvers, the simulator and the CLI."""


class BcmError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(BcmError, ValueError):
    """Invalid model parameters.

    ``violations`` lists every violated constraint as ``(code, message)``
    pairs, not only the one that selected the exception class.
    """

    code = "InvalidParameter"

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [(self.code, message)])


class NonPositiveRate(ParameterError):
    code = "NonPositiveRate"


class ProbabilityOutOfRange(ParameterError):
    code = "ProbabilityOutOfRange"


class ZeroProcessors(ParameterError):
    code = "ZeroProcessors"


class NonExponentialService(ParameterError):
    code = "NonExponentialService"


class ChainError(BcmError):
    """Problems assembling or solving a Markov chain."""


class UnknownState(ChainError, KeyError):
    pass


class SelfLoop(ChainError, ValueError):
    pass


class TooLargeForDirect(ChainError):
    pass


class ReducibleChain(ChainError):
    pass


class NoConvergence(ChainError):
    pass


class NegativeTime(ChainError, ValueError):
    pass


class StateSpaceCapExceeded(ChainError):
    def __init__(self, message, reached=None):
        super().__init__(message)
        self.reached = reached


class InvalidConfig(BcmError, ValueError):
    pass


class AnalysisError(BcmError, ValueError):
    pass


class OutOfRangeAnbc(AnalysisError):
    pass


class DivisionByZero(AnalysisError, ZeroDivisionError):
    pass


class TooFewPoints(AnalysisError):
    pass


class MismatchedParams(AnalysisError):
    pass
