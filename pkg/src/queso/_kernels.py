"""Dense state-matrix kernels. numba-compiled when available; ``QUESO_NO_NUMBA=1`` forces numpy."""
from __future__ import annotations

import os

import numpy as np


def _want_numba() -> bool:
    return os.environ.get("QUESO_NO_NUMBA", "").strip().lower() not in ("1", "true", "yes", "on")


def apply_1q_numpy(st: np.ndarray, g: np.ndarray, q: int, n: int) -> np.ndarray:
    cols = st.shape[1]
    t = st.reshape((1 << q, 2, (1 << (n - 1 - q)) * cols))
    return np.einsum("ab,ibj->iaj", g, t).reshape(st.shape)


def apply_2q_numpy(st: np.ndarray, g: np.ndarray, q0: int, q1: int, n: int) -> np.ndarray:
    cols = st.shape[1]
    t = st.reshape((2,) * n + (cols,))
    g4 = g.reshape(2, 2, 2, 2)
    out = np.tensordot(g4, t, axes=([2, 3], [q0, q1]))
    # tensordot puts the gate axes first; move them back into place
    out = np.moveaxis(out, [0, 1], [q0, q1])
    return np.ascontiguousarray(out).reshape(st.shape)


try:
    if not _want_numba():
        raise ImportError("disabled by QUESO_NO_NUMBA")
    from numba import njit

    @njit(cache=False)
    def _apply_1q_jit(st, g, q, n):
        out = st.copy()
        s = n - 1 - q
        bit = 1 << s
        dim = st.shape[0]
        for i in range(dim):
            if i & bit:
                continue
            j = i | bit
            for c in range(st.shape[1]):
                a0 = st[i, c]
                a1 = st[j, c]
                out[i, c] = g[0, 0] * a0 + g[0, 1] * a1
                out[j, c] = g[1, 0] * a0 + g[1, 1] * a1
        return out

    @njit(cache=False)
    def _apply_2q_jit(st, g, q0, q1, n):
        out = st.copy()
        b0 = 1 << (n - 1 - q0)
        b1 = 1 << (n - 1 - q1)
        dim = st.shape[0]
        idx = np.empty(4, dtype=np.int64)
        for i in range(dim):
            if i & b0 or i & b1:
                continue
            idx[0] = i
            idx[1] = i | b1
            idx[2] = i | b0
            idx[3] = i | b0 | b1
            for c in range(st.shape[1]):
                for r in range(4):
                    acc = 0j
                    for k in range(4):
                        acc += g[r, k] * st[idx[k], c]
                    out[idx[r], c] = acc
        return out

    def apply_1q(st, g, q, n):
        return _apply_1q_jit(st, np.ascontiguousarray(g, dtype=np.complex128), q, n)

    def apply_2q(st, g, q0, q1, n):
        return _apply_2q_jit(st, np.ascontiguousarray(g, dtype=np.complex128), q0, q1, n)

    BACKEND = "numba"
except ImportError:
    apply_1q = apply_1q_numpy
    apply_2q = apply_2q_numpy
    BACKEND = "numpy"
