"""Compare the numba and numpy state-propagation kernels used by the matrix oracle.

Run: python3 benchmarks/bench_kernels.py [--qubits 10] [--repeat 20]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from queso import _kernels


def _random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--qubits", type=int, nargs="+", default=[4, 6, 8, 10])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    g1, g2 = _random_unitary(2, rng), _random_unitary(4, rng)
    fast = _kernels.BACKEND == "numba"
    if fast:
        # compile outside the timed region
        _kernels.apply_1q(np.eye(4, dtype=complex), g1, 0, 2)
        _kernels.apply_2q(np.eye(4, dtype=complex), g2, 0, 1, 2)
    print(f"compiled backend: {_kernels.BACKEND}")
    print(f"{'n':>3} {'kernel':>6} {'numpy ms':>10} {'numba ms':>10} {'max |diff|':>11}")
    for n in args.qubits:
        st = np.eye(1 << n, dtype=complex)
        cases = [("1q", lambda f: f(st, g1, n // 2, n), _kernels.apply_1q_numpy, _kernels.apply_1q),
                 ("2q", lambda f: f(st, g2, 0, n - 1, n), _kernels.apply_2q_numpy, _kernels.apply_2q)]
        for label, call, ref, jit in cases:
            t_np = min(timeit.repeat(lambda: call(ref), number=1, repeat=args.repeat)) * 1e3
            if fast:
                t_jit = min(timeit.repeat(lambda: call(jit), number=1, repeat=args.repeat)) * 1e3
                diff = float(np.abs(call(ref) - call(jit)).max())
                print(f"{n:>3} {label:>6} {t_np:>10.3f} {t_jit:>10.3f} {diff:>11.2e}")
            else:
                print(f"{n:>3} {label:>6} {t_np:>10.3f} {'n/a':>10} {'n/a':>11}")


if __name__ == "__main__":
    main()
