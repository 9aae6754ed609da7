"""Exception hierarchy shared by all rydmis modules."""


class RydmisError(Exception):
    """Base class for every error raised by this package."""


class GeometryError(RydmisError):
    """Invalid atom geometry (duplicate sites, spacing below the pair-potential floor, ...)."""


class ConfigError(RydmisError):
    """A configuration file or block failed validation.

    The message always starts with the dotted path of the offending field.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class EngineError(RydmisError):
    """A propagation run failed (step control, norm drift, size limits)."""


class AnalysisError(RydmisError):
    """Post-processing received data it cannot analyse."""
