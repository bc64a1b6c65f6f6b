"""Backend selection for the map-iteration kernels.

Prefers the compiled Cython extension; falls back to the NumPy
implementation when the extension was not built or when the environment
variable ``CPFOCK_PURE_PYTHON`` is set to a non-empty value.
"""

import os

from . import _kernels_py

if os.environ.get("CPFOCK_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

# The compiled triple loops beat BLAS only while the matrices are small
# enough that dispatch overhead dominates; above this edge the NumPy path
# (BLAS zgemm) wins outright.  Measured crossover on x86-64/OpenBLAS sits
# between d=8 (2.8x faster compiled) and d=16 (1.6x slower).
DENSE_CUTOFF = 12


def _pick(x):
    return _kernels_py if x.shape[0] >= DENSE_CUTOFF else _impl


def apply_map(a, x):
    return _pick(x).apply_map(a, x)


def apply_adjoint(a, x):
    return _pick(x).apply_adjoint(a, x)


def power_apply(a, x, k):
    return _pick(x).power_apply(a, x, k)


def cesaro_mean(a, x, k):
    return _pick(x).cesaro_mean(a, x, k)


def neumann_sum(a, x, k):
    return _pick(x).neumann_sum(a, x, k)


def power_traces(a, x, kmax):
    return _pick(x).power_traces(a, x, kmax)


def backend() -> str:
    """Name of the active kernel backend ("cython" or "python")."""
    return BACKEND
