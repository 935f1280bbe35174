"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--fixtures h4,h6,h8] [--repeat 3]

Times one first-order Trotter step, one Hamiltonian application and the
assembly of the sector Hamiltonian for each fixture, and checks that both
backends agree.
"""

import argparse
import time

import numpy as np

from teqsci import kernels
from teqsci.cli import fixture_path
from teqsci.integrals import load_fcidump
from teqsci.pauli import jordan_wigner
from teqsci.statevec import SectorBasis, hartree_fock_state


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(h, basis, psi):
    def trotter(k):
        def run():
            v = psi.copy()
            k.trotter(v, h.x_masks, h.z_masks, h.coeffs, 0.1, 1)
            return v
        return run

    return {
        "trotter step": trotter,
        "apply H": lambda k: lambda: k.apply_sum(psi, *h.grouped),
        "assemble sector H": lambda k: lambda: k.assemble(basis.states, *h.grouped)[2],
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--fixtures", default="h4,h6,h8")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        compiled = kernels.get_backend("cython")
    except ImportError:
        raise SystemExit("compiled extension not built; run `pip install -e .` first")
    numpy_k = kernels.get_backend("numpy")
    print(f"{'fixture':8} {'kernel':18} {'numpy s':>10} {'cython s':>10} {'speedup':>8}")
    for name in args.fixtures.split(","):
        mh = load_fcidump(fixture_path(name))
        h = jordan_wigner(mh)
        basis = SectorBasis.build(h.n_qubits, mh.n_alpha, mh.n_beta)
        rng = np.random.default_rng(0)
        psi = hartree_fock_state(h.n_qubits, mh.n_alpha, mh.n_beta).amplitudes.copy()
        psi[basis.states] += 0.01 * rng.normal(size=basis.dimension)
        psi /= np.linalg.norm(psi)
        for label, make in cases(h, basis, psi).items():
            t_np, a = best_of(make(numpy_k), args.repeat)
            t_cy, b = best_of(make(compiled), args.repeat)
            if label != "assemble sector H":
                assert np.allclose(a, b, atol=1e-10), (name, label)
            print(f"{name:8} {label:18} {t_np:10.4f} {t_cy:10.4f} {t_np / t_cy:8.1f}")


if __name__ == "__main__":
    main()
