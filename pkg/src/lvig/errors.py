"""Exception hierarchy shared by all lvig modules."""


class LVError(Exception):
    """Base class for every error raised by lvig."""


class InvalidCommunity(LVError, ValueError):
    pass


class NumericalDomainError(LVError, ValueError):
    pass


class NoSolution(LVError):
    """No complementary feasible support exists for the LCP."""


class MultipleSolutions(LVError):
    """Support enumeration found two distinct LCP solutions."""

    def __init__(self, first, second):
        self.first = first
        self.second = second
        super().__init__(
            f"LCP has at least two solutions: support {first.support} and {second.support}"
        )


class VLAssumptionViolated(LVError):
    def __init__(self, message, community=None):
        self.community = community
        super().__init__(message)


class InternalConsistencyError(LVError):
    pass


class NotADAG(LVError):
    def __init__(self, cycle):
        self.cycle = cycle
        super().__init__(f"graph contains a cycle: {cycle}")


class PreconditionFailed(LVError):
    pass


class StiffnessError(LVError):
    pass


class AmbiguousCatalog(LVError):
    pass


class NotAnUnstableDirection(LVError):
    pass


class VerificationInconclusive(LVError):
    pass


class NotSymmetric(LVError, ValueError):
    pass
