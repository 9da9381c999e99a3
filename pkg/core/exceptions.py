"""
Exception hierarchy shared by every app.

ConfigError subclasses map to exit code 2, ModelError subclasses to exit code 3.
"""


class AFCError(Exception):
    """Base class for simulator errors"""

    exit_code = 1


class ConfigError(AFCError):
    """Scenario or command-line configuration is invalid"""

    exit_code = 2


class ScenarioParseError(ConfigError):
    """A scenario key could not be parsed or validated"""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        location = ''
        if key is not None:
            location = f" (key '{key}'"
            location += f", line {line})" if line is not None else ')'
        super().__init__(f"{message}{location}")


class ModelError(AFCError):
    """Physical or numerical model rejected its inputs"""

    exit_code = 3


class DomainError(ModelError):
    pass


class GridError(ModelError):
    pass


class GridResolutionError(GridError):
    pass


class GridCoverageError(GridError):
    pass


class NoStorageWindowError(ModelError):
    pass


class UnsupportedPulseKindError(ModelError):
    pass


class UnreachableEfficiencyError(ModelError):
    pass


class PulseTooShortError(ModelError):
    pass


class DesignError(ModelError):
    pass


class NumericError(ModelError):
    pass


class DegenerateCrossingError(ModelError):
    pass


class SignalTooShortError(ModelError):
    pass


class AmbiguousWindowError(ModelError):
    pass


class TimelineError(ModelError):
    pass


class PulseMismatchError(ModelError):
    pass


class UndefinedOverlapError(ModelError):
    pass
