"""Gate counts for one first-order Trotter step and their size scaling.

Each non-identity Pauli rotation ``exp(-i theta P)`` of weight ``p`` costs
``2(p-1)`` CNOTs (a parity ladder in and out) and one R_z, assuming
all-to-all connectivity and no circuit simplification.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import DegenerateFit
from .pauli import PauliSum

T_GRID = tuple(round(0.2 * k, 10) for k in range(1, 11))


@dataclass(frozen=True)
class GateCount:
    n_qubits: int
    n_cnot: int
    n_rz: int
    n_pauli_terms: int

    def __add__(self, other: GateCount) -> GateCount:
        return GateCount(
            max(self.n_qubits, other.n_qubits),
            self.n_cnot + other.n_cnot,
            self.n_rz + other.n_rz,
            self.n_pauli_terms + other.n_pauli_terms,
        )


def count_gates(h: PauliSum) -> GateCount:
    """Per-step CNOT and R_z tallies; identity terms cost nothing."""
    w = h.weights.astype(np.int64)
    active = w[w > 0]
    return GateCount(h.n_qubits, int(np.sum(2 * (active - 1))), int(active.size), len(h))


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r_squared: float

    def __call__(self, n):
        return self.prefactor * np.asarray(n, dtype=float) ** self.exponent


def fit_power_law(sizes: Sequence[float], counts: Sequence[float]) -> PowerLawFit:
    """Least squares on ``(log n, log count)``.

    Raises:
        DegenerateFit: fewer than 4 points, a non-positive value, or all
            sizes equal.
    """
    x = np.asarray(sizes, dtype=float)
    y = np.asarray(counts, dtype=float)
    if x.size < 4 or x.size != y.size:
        raise DegenerateFit(f"need at least 4 matched points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DegenerateFit("sizes and counts must be positive")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise DegenerateFit("all sizes are equal")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(slope), float(math.exp(intercept)), r2)


@dataclass(frozen=True)
class RatioRow:
    name: str
    n_qubits: int
    r_te: int
    r_gs: int
    t_opt: float

    @property
    def ratio(self) -> float:
        return self.r_te / self.r_gs


def ratio_scan(
    hamiltonians: Iterable[tuple[str, object]],
    tolerance: float = 1e-3,
    times: Sequence[float] = T_GRID,
) -> list[RatioRow]:
    """``R_TE / R_GS`` for each ``(name, MolecularHamiltonian)``.

    ``R_TE`` uses exact evolution of the Hartree-Fock state at the time in
    ``times`` that minimizes it.
    """
    from .pauli import jordan_wigner
    from .qsci import r_gs, r_te
    from .statevec import SectorBasis, evolve_exact, fci_ground_state, hartree_fock_state

    rows = []
    for name, mh in hamiltonians:
        h = jordan_wigner(mh)
        basis = SectorBasis.build(h.n_qubits, mh.n_alpha, mh.n_beta)
        e, gs = fci_ground_state(h, basis)
        hf = hartree_fock_state(h.n_qubits, mh.n_alpha, mh.n_beta)
        best = None
        for t in times:
            r = r_te(h, evolve_exact(h, hf, t, basis), basis, e, tolerance)
            if best is None or r < best[0]:
                best = (r, t)
        rows.append(RatioRow(name, h.n_qubits, best[0], r_gs(h, basis, gs, e, tolerance), best[1]))
    return rows


def write_gate_csv(out: IO[str], counts: Iterable[GateCount]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n_q", "n_pauli_terms", "n_cnot", "n_rz"])
    for g in counts:
        w.writerow([g.n_qubits, g.n_pauli_terms, g.n_cnot, g.n_rz])


def write_ratio_csv(out: IO[str], rows: Iterable[RatioRow]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["n_q", "R_TE", "R_GS", "ratio"])
    for r in rows:
        w.writerow([r.n_qubits, r.r_te, r.r_gs, repr(r.ratio)])
