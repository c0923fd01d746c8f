"""Transient stability simulation engine with sampling and neural-device hooks.

The package is organized around a compiled sparse-kernel core (with a pure
Python fallback selected at import) and plain-numpy module layers:

- case:       static network description and canonical JSON round-trip
- sparse:     complex CSR matrices, minimum-degree ordering, LU factors
- network:    admittance assembly, fault staging, island detection
- powerflow:  Newton-Raphson AC power flow with PV-PQ switching
- dynamics:   alternating-approach time-domain simulation (trapezoidal)
- nn_runtime: feed-forward network loading/inference and derivative adapters
- sampling:   step-wise operating-point and contingency sampling, batch driver
- engine:     session facade (model / parameter / solution / function access)
- cli:        batch command-line entry points
"""

from ._backend import COMPILED, backend_name
from .case import PowerSystemCase, load_bundled

__version__ = "0.1.0"


def __getattr__(name):
    # EngineSession pulls in the full module graph; keep base import light
    if name == "EngineSession":
        from .engine import EngineSession

        return EngineSession
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


__all__ = [
    "COMPILED",
    "EngineSession",
    "PowerSystemCase",
    "backend_name",
    "load_bundled",
    "__version__",
]
