"""Kernel backend selection: compiled extension if available, else pure Python.

Set SWINGBUS_PURE=1 to force the pure-Python kernels (used by the benchmark
and by backend-parity tests).
"""

import os

if os.environ.get("SWINGBUS_PURE") == "1":
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as kernels

lu_factor = kernels.lu_factor
lu_solve_permuted = kernels.lu_solve_permuted
csr_matvec = kernels.csr_matvec
COMPILED = kernels.COMPILED


def backend_name() -> str:
    return "compiled" if COMPILED else "pure-python"
