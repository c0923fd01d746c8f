"""Thin in-process scripting layer over the swingbus engine.

Gives AI training programs numpy-array access to sampling, topology
(Y0/Y1/Y2), dynamic state set/get, and simulations without process
boundaries, plus a gym-style environment shell for dispatch control studies.
"""

from .env import RewardSpec, StabilityConstrainedDispatchEnv, make_env
from .errors import ActionOutOfBounds, BindingError, LibraryNotFound, VersionMismatch
from .session import Session, bind_all, interface_manifest, load_case, pinned_digest

__version__ = "0.1.0"

__all__ = [
    "ActionOutOfBounds",
    "BindingError",
    "LibraryNotFound",
    "RewardSpec",
    "Session",
    "StabilityConstrainedDispatchEnv",
    "VersionMismatch",
    "bind_all",
    "interface_manifest",
    "load_case",
    "make_env",
    "pinned_digest",
    "__version__",
]
