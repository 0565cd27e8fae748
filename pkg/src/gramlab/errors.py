"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class GramLabError(Exception):
    exit_code = 1


class ShapeMismatch(GramLabError, ValueError):
    pass


class NotPositiveDefinite(GramLabError, ValueError):
    pass


class NotSymmetric(GramLabError, ValueError):
    pass


class DegenerateInput(GramLabError, ValueError):
    pass


class ConstantInput(GramLabError, ValueError):
    pass


class DegenerateGram(GramLabError, ValueError):
    pass


class DegenerateLabels(GramLabError, ValueError):
    pass


class AssumptionViolated(GramLabError, ValueError):
    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__("assumption(s) violated: " + "; ".join(self.failed))


class NotHomogeneous(GramLabError, ValueError):
    pass


class ConfigInvalid(GramLabError, ValueError):
    exit_code = 2


class DataError(GramLabError):
    exit_code = 3


class DatasetMissing(DataError, FileNotFoundError):
    pass


class BadMagic(DataError, ValueError):
    pass


class TruncatedFile(DataError, ValueError):
    pass


class CountMismatch(DataError, ValueError):
    pass


class NumericalFailure(GramLabError, ArithmeticError):
    exit_code = 4


class NonFiniteValue(NumericalFailure, ValueError):
    pass


class AcceptanceFailure(GramLabError, AssertionError):
    exit_code = 5
