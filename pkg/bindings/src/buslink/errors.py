"""Binding-level errors; engine errors pass through untouched."""


class BindingError(Exception):
    pass


class LibraryNotFound(BindingError):
    """The engine package is not importable in this environment."""


class VersionMismatch(BindingError):
    """The engine's interface manifest digest differs from the pinned one."""


class ActionOutOfBounds(BindingError):
    """An environment action leaves the declared action space."""
