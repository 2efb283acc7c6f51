"""Exception types shared across the package."""


class NavigationError(Exception):
    """Base class for navigation-stack failures."""


class DomainError(NavigationError):
    """A query left the region where an operation is defined."""


class TubeViolationError(NavigationError):
    """Tracking error reached the tube wall, where the barrier blows up."""


class PotentialSingularityError(NavigationError):
    """A potential-field denominator crossed zero."""


class ConfigError(NavigationError):
    """Bad scenario file; carries the offending field path when known."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(message if path is None else f"{path}: {message}")
