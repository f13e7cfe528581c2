"""Exception hierarchy.

Every error carries the name of the module that raised it so the CLI can
report ``module: message`` diagnostics.
"""


class SpeclabError(Exception):
    module = "speclab"

    def __init__(self, message, module=None):
        super().__init__(message)
        if module is not None:
            self.module = module

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class DomainError(SpeclabError, ValueError):
    """A precondition on an argument is violated."""


class PotentialError(DomainError):
    """Sampled potential is invalid (NaN, or outside its weight sandwich)."""

    def __init__(self, message, index=None, x=None, module="grid_potential"):
        super().__init__(message, module)
        self.index = index
        self.x = x


class EmptySpectrumError(DomainError):
    pass


class NumericalError(SpeclabError, ArithmeticError):
    pass


class UnobservableError(NumericalError):
    def __init__(self, message, gram_min, module="observability"):
        super().__init__(message, module)
        self.gram_min = gram_min


class ConfigError(SpeclabError):
    module = "cli_harness"
