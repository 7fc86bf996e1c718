"""Exception and warning types shared across the package."""


class StratentError(Exception):
    """Base class for all errors raised by stratent."""

    kind = "error"


class ContractError(StratentError, ValueError):
    """An argument violates a documented precondition."""

    kind = "contract"


class ScopeError(ContractError):
    """The request is well formed but outside what is implemented."""

    kind = "scope"


class NumericError(StratentError, ArithmeticError):
    """A numerical procedure produced non-finite or divergent values."""

    kind = "numeric"


class SingularPointError(NumericError):
    """A chart has a vanishing area factor where a density is requested."""


class SamplingError(NumericError):
    """Rejection sampling accepted too few proposals."""


class ConfigError(StratentError):
    """Invalid configuration or measure description.

    ``path`` is the dotted location of the offending field, ``line`` the
    1-based line in the source file when known.
    """

    kind = "config"

    def __init__(self, message, path=None, line=None):
        self.message = message
        self.path = path
        self.line = line
        super().__init__(str(self))

    def __str__(self):
        loc = []
        if self.line is not None:
            loc.append(f"line {self.line}")
        if self.path:
            loc.append(self.path)
        prefix = f"{', '.join(loc)}: " if loc else ""
        return prefix + self.message


class StratentWarning(UserWarning):
    pass


class LipschitzBoundWarning(StratentWarning):
    """A sampled difference quotient exceeds the declared Lipschitz bound."""


class CarrierOverlapWarning(StratentWarning):
    """Sampled points of two carriers coincide."""


class WeightNormalizationWarning(StratentWarning):
    """Mixture weights were rescaled to sum to one."""
