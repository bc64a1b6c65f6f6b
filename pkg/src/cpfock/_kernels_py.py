"""NumPy implementation of the hot map-iteration kernels.

Reference implementation for the compiled extension in ``_kernels_cy.pyx``;
selected automatically when the extension is unavailable.  All functions take
a Kraus stack ``a`` of shape (n, d, d) and a matrix ``x`` of shape (d, d),
both complex128, and never mutate their inputs.
"""

import numpy as np


def apply_map(a, x):
    """Sum of a[k] @ x @ a[k]^* over k."""
    out = np.zeros_like(x)
    for ak in a:
        out += ak @ x @ ak.conj().T
    return out


def apply_adjoint(a, x):
    """Sum of a[k]^* @ x @ a[k] over k."""
    out = np.zeros_like(x)
    for ak in a:
        out += ak.conj().T @ x @ ak
    return out


def power_apply(a, x, k):
    """k-fold application of the map; k=0 returns a copy of x."""
    cur = x.copy()
    for _ in range(k):
        cur = apply_map(a, cur)
    return cur


def cesaro_mean(a, x, k):
    """(x + phi(x) + ... + phi^(k-1)(x)) / k."""
    acc = x.copy()
    cur = x
    for _ in range(k - 1):
        cur = apply_map(a, cur)
        acc += cur
    return acc / k


def neumann_sum(a, x, k):
    """x + phi(x) + ... + phi^(k-1)(x)."""
    acc = x.copy()
    cur = x
    for _ in range(k - 1):
        cur = apply_map(a, cur)
        acc += cur
    return acc


def power_traces(a, x, kmax):
    """Traces of phi^j(x) for j = 0..kmax, as a complex array."""
    out = np.empty(kmax + 1, dtype=np.complex128)
    cur = x.copy()
    out[0] = np.trace(cur)
    for j in range(1, kmax + 1):
        cur = apply_map(a, cur)
        out[j] = np.trace(cur)
    return out
