"""Hot enumeration loops, compiled when possible.

The Cython extension ``_ckernels`` is preferred; if it has not been built (or
``SETREE_PURE_PYTHON=1`` is set) the pure-Python module is used instead.  Both
expose the same functions and produce identical results.
"""
import os

from setree._kernels import _pykernels as python_backend

compiled_backend = None
if os.environ.get("SETREE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from setree._kernels import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

two_level_si = _impl.two_level_si
best_two_level_partition = _impl.best_two_level_partition
subset_conductances = _impl.subset_conductances

__all__ = [
    "BACKEND",
    "best_two_level_partition",
    "compiled_backend",
    "python_backend",
    "subset_conductances",
    "two_level_si",
]
