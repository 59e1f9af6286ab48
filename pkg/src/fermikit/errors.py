"""Exception hierarchy shared by all fermikit modules."""


class FermikitError(Exception):
    """Base class for every error raised by fermikit."""


class NotHermitian(FermikitError, ValueError):
    pass


class DimensionMismatch(FermikitError, ValueError):
    pass


class NoConvergence(FermikitError, RuntimeError):
    pass


class InvalidProbabilities(FermikitError, ValueError):
    pass


class NotGradingStable(FermikitError, ValueError):
    pass


class CommutationFailed(FermikitError, ValueError):
    """Two representations do not graded-commute."""


class NotPositive(FermikitError, ValueError):
    pass


class NotFaithful(FermikitError, ValueError):
    pass


class NotCP(FermikitError, ValueError):
    pass


class NotCyclic(FermikitError, ValueError):
    pass


class StateMismatch(FermikitError, ValueError):
    """The map does not carry one state onto the other."""


class NotFullAlgebra(FermikitError, ValueError):
    pass


class OverlappingSets(FermikitError, ValueError):
    pass


class NotInAlgebra(FermikitError, ValueError):
    pass


class ScenarioError(FermikitError, ValueError):
    """Scenario file violates the schema; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message
