"""Exception and warning types.

Every domain error derives from ``KicqedError`` so the CLI can map it to exit code 1.
"""


class KicqedError(Exception):
    pass


class InvalidCircuit(KicqedError, ValueError):
    pass


class MissingPair(InvalidCircuit):
    pass


class NonPositiveDefinite(InvalidCircuit):
    pass


class BranchNonPositive(InvalidCircuit):
    pass


class AsymmetricGround(InvalidCircuit):
    pass


class DegenerateSorting(KicqedError):
    pass


class ZeroModeAmbiguous(KicqedError):
    pass


class TruncationOverflow(KicqedError, ValueError):
    pass


class LabelingFailed(KicqedError):
    pass


class SingularComponent(KicqedError):
    pass


class NoOccupancy(KicqedError):
    pass


class LengthMismatch(KicqedError, ValueError):
    pass


class InvalidStochasticMatrix(KicqedError, ValueError):
    pass


class DegenerateFit(KicqedError):
    pass


class NotConverged(UserWarning):
    """Optimizer stopped on its evaluation budget; the result is still returned."""


class Underdetermined(UserWarning):
    pass


class IncompleteCapacitanceTable(UserWarning):
    pass


class MissingState(KicqedError):
    pass
