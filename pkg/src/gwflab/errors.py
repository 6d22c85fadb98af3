"""Exception hierarchy.

The CLI maps categories to exit codes: ConfigError -> 1, DomainError
(and subclasses) -> 2, ResourceLimitError / SamplingError -> 3.
"""


class GWFLabError(Exception):
    """Base class for all library errors."""


class ConfigError(GWFLabError):
    """Malformed or inconsistent configuration input."""


class DomainError(GWFLabError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class InvalidWordError(DomainError):
    """A symbolic word contains an index outside the alphabet."""


class HorizonError(DomainError):
    """A tree is too shallow for the requested section or depth."""


class NodeNotFoundError(DomainError):
    """A requested node is not present in the tree."""


class EmptySetError(DomainError):
    """An operation produced or received the empty compact set."""


class DegenerateFamilyError(DomainError):
    """A child-set family admits no infinite tree."""


class ResolutionError(DomainError):
    """A requested scale is below the certified resolution of a cloud."""


class PreconditionError(DomainError):
    """A verification precondition failed, as opposed to the check itself."""


class ResourceLimitError(GWFLabError):
    """A configured size cap would be exceeded; failing fast instead."""


class SamplingError(GWFLabError):
    """Rejection sampling exhausted its attempt budget."""
