"""Exception hierarchy shared by every stablerules module."""


class StableRulesError(Exception):
    """Base class; ``module`` names the component that raised."""

    module = "core"

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class DataError(StableRulesError):
    """Bad input data. The CLI maps these to exit status 2."""


class DimensionMismatch(DataError, ValueError):
    pass


class InvalidValue(DataError, ValueError):
    pass


class InvalidLabel(DataError, ValueError):
    pass


class InvalidFraction(DataError, ValueError):
    pass


class EmptyDatabase(DataError):
    module = "mining"


class MissingSupportEntry(DataError, KeyError):
    module = "mining"

    def __str__(self):
        return StableRulesError.__str__(self)


class UnknownItem(DataError, KeyError):
    module = "mining"

    def __str__(self):
        return StableRulesError.__str__(self)


class EmptyRuleSet(DataError):
    module = "selection"


class BoundsInfeasible(DataError, ValueError):
    module = "selection"


class RankDeficient(DataError, ArithmeticError):
    module = "decorrelation"


class Singular(DataError, ArithmeticError):
    module = "models"


class TooFewStableColumns(DataError, ValueError):
    module = "synthesis"


class EmptySelection(DataError):
    module = "synthesis"


class EmptyInput(DataError, ValueError):
    module = "evaluation"


class TooFewSamples(DataError, ValueError):
    module = "evaluation"


class TooFewItems(DataError, ValueError):
    module = "evaluation"


class SchemaMismatch(DataError):
    module = "ingestion"


class ParseError(DataError):
    module = "ingestion"

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DegenerateColumn(DataError, ValueError):
    module = "ingestion"


class AllMissingColumn(DataError, ValueError):
    module = "ingestion"


class UnknownKey(StableRulesError, KeyError):
    module = "cli"

    def __init__(self, key):
        super().__init__(f"unknown configuration key {key!r}")
        self.key = key

    def __str__(self):
        return StableRulesError.__str__(self)


class ConfigTypeError(StableRulesError, TypeError):
    module = "cli"


class NonConvergence(StableRulesError, RuntimeError):
    """Iteration cap reached. ``result`` carries the best iterate when one exists."""

    def __init__(self, message, result=None, module=None):
        super().__init__(message)
        self.result = result
        if module:
            self.module = module
