"""Exceptions raised across the package.

Every numerical failure is a subclass of ``NumericalFailure`` so the CLI can map
it to its own exit code; bad user input raises ``ValidationError``.
"""


class AtlasError(Exception):
    pass


class ValidationError(AtlasError, ValueError):
    pass


class NumericalFailure(AtlasError):
    pass


class AmbiguousPeriod(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class WrongPeriod(NumericalFailure):
    pass


class OutsideDomain(NumericalFailure):
    pass


class NotInBasin(NumericalFailure):
    pass


class OnCriticalOrbitRelation(NumericalFailure):
    pass


class DegenerateFiber(NumericalFailure):
    pass


class BranchJump(NumericalFailure):
    pass


class StepUnderflow(NumericalFailure):
    pass


class NoTrapFound(NumericalFailure):
    pass


class ResolutionExhausted(NumericalFailure):
    pass


class RayBifurcates(NumericalFailure):
    pass


class OutsideSpStar(NumericalFailure):
    pass


class ParabolicSuspect(NumericalFailure):
    def __init__(self, msg, point=None, multiplier=None):
        super().__init__(msg)
        self.point = point
        self.multiplier = multiplier


class GraphInvalid(NumericalFailure):
    def __init__(self, reason, detail=""):
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail


class ArrangementAmbiguous(NumericalFailure):
    pass


class SelectionFailed(NumericalFailure):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class OnGraph(NumericalFailure):
    pass


class TableauRuleViolation(AtlasError):
    """A tableau rule failed; the rules are theorems, so this is a bug."""


class NotHyperbolicABC(NumericalFailure):
    pass


class NotTypeD(NumericalFailure):
    pass


class ContinuationStall(NumericalFailure):
    def __init__(self, msg, last_s=None):
        super().__init__(msg)
        self.last_s = last_s
