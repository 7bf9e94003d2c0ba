"""Exception types shared across the package."""


class NashGameError(Exception):
    """Base class for all errors raised by nashgame."""


class ConfigError(NashGameError):
    """Bad or missing configuration (unknown catalog key, missing option, parse error)."""


class NumericError(NashGameError):
    """A computation produced a non-finite number."""


class DomainError(NashGameError):
    """A query or characteristic left the grid under the ``strict`` boundary policy."""


class StrategyError(NashGameError):
    """A feedback strategy returned a control outside its sample set."""


class PreconditionError(NashGameError):
    """An operation was called with arguments violating its documented precondition."""


class ConstructionError(NashGameError):
    """A constructive procedure (agreed trajectory, profile) could not be completed."""
