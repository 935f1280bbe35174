"""State vectors, particle-number sectors and time evolution.

Trotterized evolution acts on the full ``2**n`` vector, since single Pauli
rotations need not conserve particle number. Exact evolution and the FCI
oracle work inside one ``(n_up, n_down)`` sector, where the Hamiltonian is
assembled as a sparse ``D x D`` matrix.
"""

from __future__ import annotations

import math
import struct
import weakref
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Literal

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import (
    CapacityError,
    ConvergenceError,
    DimensionMismatch,
    NormalizationError,
    SectorError,
    SectorLeak,
)
from .pauli import PauliSum

NORM_TOL = 1e-9
KRYLOV_TOL = 1e-12
KRYLOV_MAX_DIM = 64
DENSE_LIMIT = 4096

EVEN_MASK = int("01" * 32, 2)  # spin-up qubits 0, 2, 4, ...
ODD_MASK = EVEN_MASK << 1


def spin_counts(states) -> tuple[np.ndarray, np.ndarray]:
    """Spin-up and spin-down electron counts of basis integers."""
    s = np.asarray(states, dtype=np.int64)
    return (
        np.bitwise_count(s & np.int64(EVEN_MASK & 0x7FFFFFFFFFFFFFFF)).astype(np.int64),
        np.bitwise_count(s & np.int64(ODD_MASK & 0x7FFFFFFFFFFFFFFF)).astype(np.int64),
    )


@dataclass
class StateVector:
    """Amplitudes over the ``2**n_qubits`` computational basis states."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        n = a.shape[0].bit_length() - 1
        if a.ndim != 1 or a.shape[0] != 1 << n:
            raise DimensionMismatch(f"amplitude array of shape {a.shape} is not 2**n long")
        self.amplitudes = a

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.shape[0].bit_length() - 1

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> StateVector:
        a = np.zeros(1 << n_qubits, dtype=np.complex128)
        a[index] = 1.0
        return cls(a)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> StateVector:
        return StateVector(self.amplitudes.copy())

    def check_normalized(self, tol: float = NORM_TOL):
        n = self.norm()
        if abs(n - 1.0) > tol:
            raise NormalizationError(f"state norm {n!r} differs from 1 by more than {tol}")

    def to_bytes(self) -> bytes:
        """Little-endian ``uint64`` length then complex64 amplitude pairs."""
        a = self.amplitudes.astype("<c8")
        return struct.pack("<Q", a.shape[0]) + a.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> StateVector:
        (n,) = struct.unpack_from("<Q", data)
        a = np.frombuffer(data, dtype="<c8", count=n, offset=8)
        return cls(a.astype(np.complex128))


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Sorted basis integers with ``n_up`` even and ``n_down`` odd qubits set."""

    n_qubits: int
    n_up: int
    n_down: int
    states: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, n_qubits: int, n_up: int, n_down: int) -> SectorBasis:
        n_orb = n_qubits // 2
        if n_qubits % 2 or not (0 <= n_up <= n_orb and 0 <= n_down <= n_orb):
            raise CapacityError(f"no ({n_up}, {n_down}) sector on {n_qubits} qubits")
        ups = [sum(1 << (2 * p) for p in c) for c in combinations(range(n_orb), n_up)]
        downs = [sum(1 << (2 * p + 1) for p in c) for c in combinations(range(n_orb), n_down)]
        states = np.sort(np.add.outer(np.array(ups, np.int64), np.array(downs, np.int64)).ravel())
        states.setflags(write=False)
        return cls(n_qubits, n_up, n_down, states)

    @classmethod
    def for_state(cls, psi: StateVector, tol: float = 1e-14) -> SectorBasis:
        """Sector holding all of ``psi``'s weight; ``SectorError`` if mixed."""
        support = np.flatnonzero(np.abs(psi.amplitudes) > tol)
        up, down = spin_counts(support)
        pairs = set(zip(up.tolist(), down.tolist()))
        if len(pairs) != 1:
            raise SectorError(f"state has support in sectors {sorted(pairs)}")
        ((n_up, n_down),) = pairs
        return cls.build(psi.n_qubits, n_up, n_down)

    @property
    def dimension(self) -> int:
        return int(self.states.shape[0])

    def __len__(self) -> int:
        return self.dimension

    @cached_property
    def index(self) -> dict[int, int]:
        return {int(s): i for i, s in enumerate(self.states)}

    def positions(self, mus) -> np.ndarray:
        """Positions of basis integers in ``states``; -1 where absent."""
        mus = np.asarray(mus, dtype=np.int64)
        pos = np.searchsorted(self.states, mus)
        pos_c = np.minimum(pos, self.dimension - 1)
        return np.where(self.states[pos_c] == mus, pos_c, -1)

    def contains(self, mus) -> np.ndarray:
        up, down = spin_counts(mus)
        return (up == self.n_up) & (down == self.n_down)

    def restrict(self, psi: StateVector) -> np.ndarray:
        return psi.amplitudes[self.states]

    def embed(self, amps) -> StateVector:
        a = np.zeros(1 << self.n_qubits, dtype=np.complex128)
        a[self.states] = amps
        return StateVector(a)


@dataclass(frozen=True)
class EvolutionPlan:
    """How to evolve: exactly, or by ``n_step`` first-order Trotter steps."""

    mode: Literal["exact", "trotter1"]
    time: float
    n_step: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "trotter1"):
            raise ValueError(f"unknown evolution mode {self.mode!r}")
        if self.mode == "trotter1" and self.n_step < 1:
            raise ValueError("Trotter evolution needs n_step >= 1")

    @classmethod
    def exact(cls, t: float) -> EvolutionPlan:
        return cls("exact", float(t))

    @classmethod
    def trotter(cls, t: float, dt: float) -> EvolutionPlan:
        """Plan with ``n_step = t / dt``, which must be integral to 1e-9."""
        if t == 0:
            return cls("trotter1", 0.0, 1)
        n = round(t / dt)
        if n < 1 or abs(n * dt - t) > 1e-9:
            raise ValueError(f"t={t} is not an integer multiple of dt={dt}")
        return cls("trotter1", float(t), int(n))

    @property
    def dt(self) -> float | None:
        return self.time / self.n_step if self.mode == "trotter1" else None

    def as_dict(self) -> dict:
        d = {"mode": self.mode, "time": self.time}
        if self.mode == "trotter1":
            d.update(n_step=self.n_step, dt=self.dt)
        return d


def hartree_fock_state(n_qubits: int, n_up: int, n_down: int) -> StateVector:
    """Lowest ``n_up`` even and lowest ``n_down`` odd qubits occupied."""
    if n_up < 0 or n_down < 0 or max(n_up, n_down) > n_qubits // 2 or n_up + n_down > n_qubits:
        raise CapacityError(f"cannot place ({n_up}, {n_down}) electrons on {n_qubits} qubits")
    index = sum(1 << (2 * p) for p in range(n_up)) + sum(1 << (2 * p + 1) for p in range(n_down))
    return StateVector.basis(n_qubits, index)


def hartree_fock_index(n_up: int, n_down: int) -> int:
    return sum(1 << (2 * p) for p in range(n_up)) + sum(1 << (2 * p + 1) for p in range(n_down))


def evolve_trotter1(h: PauliSum, psi: StateVector, plan: EvolutionPlan) -> StateVector:
    """``(prod_j exp(-i w_j P_j dt))**n_step`` applied to ``psi``.

    Terms are applied in the canonical ``PauliSum`` order. The result is not
    renormalized.
    """
    if plan.mode != "trotter1":
        raise ValueError("plan is not a Trotter plan")
    if psi.n_qubits != h.n_qubits:
        raise DimensionMismatch(f"{psi.n_qubits}-qubit state, {h.n_qubits}-qubit Hamiltonian")
    psi.check_normalized(1e-10)
    out = psi.amplitudes.copy()
    if plan.time != 0:
        kernels.trotter(out, h.x_masks, h.z_masks, h.coeffs, plan.dt, plan.n_step)
    return StateVector(out)


_SECTOR_CACHE: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def build_sector_hamiltonian(h: PauliSum, basis: SectorBasis) -> sp.csr_matrix:
    """Sparse ``<a|H|b>`` over the sector; real when the integrals are real.

    Raises:
        SectorLeak: some term maps a sector state outside the sector.
    """
    key = (basis.n_qubits, basis.n_up, basis.n_down)
    cache = _SECTOR_CACHE.setdefault(h, {})
    if key in cache:
        return cache[key]
    if basis.n_qubits != h.n_qubits:
        raise DimensionMismatch("basis and Hamiltonian qubit counts differ")
    rows, cols, vals, n_leak = kernels.assemble(basis.states, *h.grouped)
    if n_leak:
        raise SectorLeak(f"{n_leak} matrix elements leave the ({basis.n_up}, {basis.n_down}) sector")
    vals = _maybe_real(vals)
    d = basis.dimension
    m = sp.csr_matrix((vals, (rows, cols)), shape=(d, d))
    m.sum_duplicates()
    cache[key] = m
    return m


def _maybe_real(vals, tol=1e-12):
    vals = np.asarray(vals)
    if np.iscomplexobj(vals) and (vals.size == 0 or np.max(np.abs(vals.imag)) <= tol):
        return np.ascontiguousarray(vals.real)
    return vals


def krylov_expm(matvec, v: np.ndarray, t: float, tol: float = KRYLOV_TOL,
                max_dim: int = KRYLOV_MAX_DIM) -> np.ndarray:
    """``exp(-i A t) v`` for Hermitian ``A`` by restarted Lanczos steps.

    Each step builds an orthonormal Krylov basis with full
    reorthogonalization and accepts the largest time step whose a posteriori
    error estimate ``beta_m |[exp(-i T tau)]_{m,0}|`` is below ``tol``; when
    the full ``max_dim`` basis cannot reach ``tol`` the step is halved.
    """
    w = np.asarray(v, dtype=np.complex128).copy()
    beta0 = np.linalg.norm(w)
    if beta0 == 0 or t == 0:
        return w
    sign = 1.0 if t > 0 else -1.0
    remaining = abs(float(t))
    n = w.shape[0]
    m_cap = min(max_dim, n)
    for _ in range(10_000):
        if remaining <= 0:
            return w
        nrm = np.linalg.norm(w)
        V = np.zeros((m_cap + 1, n), dtype=np.complex128)
        alpha = np.zeros(m_cap)
        beta = np.zeros(m_cap)
        V[0] = w / nrm
        tau = remaining
        accepted = None
        for j in range(m_cap):
            u = matvec(V[j])
            alpha[j] = np.vdot(V[j], u).real
            u = u - alpha[j] * V[j] - (beta[j - 1] * V[j - 1] if j else 0)
            for _ in range(2):
                u -= V[: j + 1].T @ (V[: j + 1].conj() @ u)
            beta[j] = np.linalg.norm(u)
            m = j + 1
            evals, evecs = scipy.linalg.eigh_tridiagonal(alpha[:m], beta[: m - 1])
            breakdown = beta[j] <= 1e-14 * max(1.0, abs(alpha[: m]).max())
            # shrink tau until the error estimate is met, only on the last allowed size
            while True:
                coef = evecs @ (np.exp(-1j * sign * evals * tau) * evecs[0].conj())
                err = 0.0 if breakdown else beta[j] * abs(coef[-1])
                if err <= tol or m < m_cap and not breakdown:
                    break
                tau /= 2
                if tau < remaining * 1e-12:
                    raise ConvergenceError("Krylov propagator cannot meet tolerance")
            if err <= tol:
                accepted = (m, coef)
                break
            V[j + 1] = u / beta[j]
        if accepted is None:
            raise ConvergenceError("Krylov propagator did not converge")
        m, coef = accepted
        w = nrm * (coef @ V[:m])
        remaining -= tau
    raise ConvergenceError("Krylov propagator exceeded step budget")


def evolve_exact(h: PauliSum, psi: StateVector, t: float, basis: SectorBasis | None = None) -> StateVector:
    """``exp(-i H t) psi`` inside the sector of ``psi``.

    Raises:
        SectorError: ``psi`` has support in more than one sector.
    """
    if psi.n_qubits != h.n_qubits:
        raise DimensionMismatch(f"{psi.n_qubits}-qubit state, {h.n_qubits}-qubit Hamiltonian")
    if basis is None:
        basis = SectorBasis.for_state(psi)
    else:
        outside = np.delete(psi.amplitudes, basis.states)
        if outside.size and np.max(np.abs(outside)) > 1e-14:
            raise SectorError("state has support outside the given sector")
    if t == 0:
        return psi.copy()
    H = build_sector_hamiltonian(h, basis)
    v = basis.restrict(psi)
    return basis.embed(krylov_expm(H.dot, v, t))


def evolve(h: PauliSum, psi: StateVector, plan: EvolutionPlan, basis: SectorBasis | None = None) -> StateVector:
    if plan.mode == "exact":
        return evolve_exact(h, psi, plan.time, basis)
    return evolve_trotter1(h, psi, plan)


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude entry is real positive."""
    v = np.asarray(v)
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def lowest_eigenpair(H, v0=None) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of a Hermitian matrix, dense or sparse.

    Dense LAPACK up to ``DENSE_LIMIT`` rows, implicitly restarted Lanczos
    (ARPACK) above.
    """
    n = H.shape[0]
    if n <= DENSE_LIMIT:
        dense = H.toarray() if sp.issparse(H) else np.asarray(H)
        w, v = scipy.linalg.eigh(dense, subset_by_index=[0, 0])
        return float(w[0]), fix_phase(v[:, 0])
    try:
        w, v = spla.eigsh(H, k=1, which="SA", tol=1e-13, v0=v0, maxiter=20 * n)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(str(exc)) from None
    return float(w[0]), fix_phase(v[:, 0])


def fci_ground_state(h: PauliSum, basis: SectorBasis) -> tuple[float, np.ndarray]:
    """Exact lowest energy in the sector and its normalized sector amplitudes."""
    H = build_sector_hamiltonian(h, basis)
    v0 = np.ones(basis.dimension) / math.sqrt(basis.dimension)
    return lowest_eigenpair(H, v0=v0)
