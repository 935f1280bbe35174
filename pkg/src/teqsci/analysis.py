"""Diagnostics for the time-evolved measurement distribution.

* ``p_mu_curve`` / ``p_mu_curves`` -- ``P_mu(t) = |<mu|psi(t)>|^2`` by exact
  sector evolution.
* ``class_averaged_curves`` -- mean ``P_mu(t)`` per excitation-order group.
* ``scaling_exponent`` -- log-log slope of a small-t power law.
* ``SpectralData`` / ``infinite_time_average`` -- eigenbasis decomposition of
  ``P_mu(t)`` and its long-time mean ``sum_n |c_n^I|^2 |c_n^mu|^2``.
* ``series_expansion_check`` -- small-t power series of ``P_mu(t)`` in the
  moments ``<mu|H^k|psi_I>`` against exact evolution.
* ``trotter_diagnostics`` -- infidelity and energy drift of first-order
  Trotter evolution.
"""

from __future__ import annotations

import csv
import hashlib
import math
import warnings
import weakref
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, NamedTuple, Sequence

import numpy as np
import scipy.linalg

import scipy.sparse as sp

from . import kernels
from .errors import (
    CapacityError,
    DimensionMismatch,
    DivergenceWarning,
    InsufficientData,
    NormalizationError,
    SectorError,
    SectorLeak,
)
from .pauli import PauliSum, expectation
from .sampler import SelectionPolicy, select
from .statevec import (
    EvolutionPlan,
    SectorBasis,
    StateVector,
    build_sector_hamiltonian,
    evolve_trotter1,
    hartree_fock_index,
    krylov_expm,
)

FULL_EIG_LIMIT = 6000
SERIES_TOL = 1e-6
PROB_FLOOR = 1e-14
NORM_TOL = 1e-9

# Excitation-order groups that share a leading small-t power (t^2, t^4, t^6).
ORDER_GROUPS = {"1-2": (1, 2), "3-4": (3, 4), "5-6": (5, 6)}


def excitation_order(mu, mu_hf: int):
    """Electrons moved out of the reference occupation, both spins together."""
    occ = np.asarray(mu, dtype=np.uint64) & np.uint64(~mu_hf & ((1 << 64) - 1))
    out = np.bitwise_count(occ).astype(np.int64)
    return int(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ExcitationClass:
    order: int
    members: tuple[int, ...]


def classify(states: Iterable[int], mu_hf: int) -> dict[int, ExcitationClass]:
    states = np.asarray(list(states), dtype=np.int64)
    orders = excitation_order(states, mu_hf) if states.size else np.zeros(0, dtype=np.int64)
    orders = np.atleast_1d(orders)
    return {
        int(l): ExcitationClass(int(l), tuple(states[orders == l].tolist()))
        for l in np.unique(orders)
    }


class FullSpace:
    """The whole register, for Hamiltonians that do not conserve a sector."""

    def __init__(self, n_qubits: int):
        self.n_qubits = n_qubits
        self.states = np.arange(1 << n_qubits, dtype=np.int64)
        self.dimension = self.states.size

    def positions(self, mus) -> np.ndarray:
        return np.asarray(mus, dtype=np.int64)

    def contains(self, mus) -> np.ndarray:
        return np.ones(np.shape(mus), dtype=bool)

    def restrict(self, psi: StateVector) -> np.ndarray:
        return psi.amplitudes

    def embed(self, amps) -> StateVector:
        return StateVector(np.asarray(amps, dtype=np.complex128))


def evolution_space(h: PauliSum, psi: StateVector):
    """``(space, H restricted to it)``: the sector of ``psi`` when ``h``
    conserves it, the full register otherwise."""
    try:
        basis = SectorBasis.for_state(psi)
        return basis, build_sector_hamiltonian(h, basis)
    except (SectorError, SectorLeak, CapacityError):
        space = FullSpace(h.n_qubits)
        rows, cols, vals, _ = kernels.assemble(space.states, *h.grouped)
        return space, sp.csr_matrix((vals, (rows, cols)), shape=(space.dimension,) * 2)


def _evolve(space, H, psi: StateVector, t: float) -> StateVector:
    v = space.restrict(psi)
    return space.embed(v if t == 0 else krylov_expm(H.dot, v, t))


def p_mu_curves(h: PauliSum, psi_i: StateVector, mus: Sequence[int], times: Sequence[float]) -> np.ndarray:
    """``P[k, j] = |<mus[j]|psi(times[k])>|^2`` under exact evolution."""
    space, H = evolution_space(h, psi_i)
    mus = np.asarray(mus, dtype=np.int64)
    out = np.empty((len(times), mus.size))
    for k, t in enumerate(times):
        out[k] = np.abs(_evolve(space, H, psi_i, float(t)).amplitudes[mus]) ** 2
    return out


def p_mu_curve(h: PauliSum, psi_i: StateVector, mu: int, times: Sequence[float]) -> list[float]:
    return p_mu_curves(h, psi_i, [mu], times)[:, 0].tolist()


@dataclass(frozen=True)
class ClassCurves:
    times: tuple[float, ...]
    groups: Mapping[str, tuple[int, ...]]
    mean_p: Mapping[str, np.ndarray]

    def slopes(self) -> dict[str, float]:
        return {g: scaling_exponent(self.times, p) for g, p in self.mean_p.items() if len(self.groups[g])}

    def rows(self):
        for g, p in self.mean_p.items():
            for t, v in zip(self.times, p):
                yield t, g, float(v)


def class_averaged_curves(
    h: PauliSum,
    psi_i: StateVector,
    times: Sequence[float],
    r: int = 850,
    t_rank: float = 1.0,
    groups: Mapping[str, Sequence[int]] = ORDER_GROUPS,
) -> ClassCurves:
    """Arithmetic mean of ``P_mu(t)`` over each group of excitation orders.

    Members are the ``r`` most probable configurations of ``psi(t_rank)``,
    split by excitation order relative to the largest-amplitude configuration
    of ``psi_i``.
    """
    space, H = evolution_space(h, psi_i)
    mu_ref = int(np.argmax(np.abs(psi_i.amplitudes)))
    ranked = select(_evolve(space, H, psi_i, t_rank), SelectionPolicy.top_amplitude(r))
    classes = classify(ranked, mu_ref)
    members = {
        g: tuple(m for l in orders if l in classes for m in classes[l].members)
        for g, orders in groups.items()
    }
    every = sorted({m for ms in members.values() for m in ms})
    col = {m: j for j, m in enumerate(every)}
    p = p_mu_curves(h, psi_i, every, times)
    mean = {
        g: (p[:, [col[m] for m in ms]].mean(axis=1) if ms else np.full(len(times), np.nan))
        for g, ms in members.items()
    }
    return ClassCurves(tuple(float(t) for t in times), members, mean)


def scaling_exponent(times: Sequence[float], probabilities: Sequence[float]) -> float:
    """Least-squares slope of ``log P`` against ``log t``.

    Raises:
        InsufficientData: fewer than 4 points, or a probability at or below 1e-14.
    """
    t = np.asarray(times, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    if t.size < 4 or t.size != p.size:
        raise InsufficientData(f"need at least 4 matched points, got {t.size}")
    if np.any(t <= 0) or not np.all(p > PROB_FLOOR):
        raise InsufficientData("times must be positive and probabilities above 1e-14")
    slope, _ = np.polyfit(np.log(t), np.log(p), 1)
    return float(slope)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Full eigendecomposition of the sector Hamiltonian seen from ``psi_I``.

    ``vectors[i, n] = <mu_i|psi_n>`` with ``mu_i = basis.states[i]``.
    """

    basis: SectorBasis | FullSpace
    energies: np.ndarray
    overlaps_initial: np.ndarray
    vectors: np.ndarray

    @classmethod
    def compute(cls, h: PauliSum, psi_i: StateVector, basis: SectorBasis | None = None) -> SpectralData:
        """Raises:
            CapacityError: the space is larger than ``FULL_EIG_LIMIT``.
        """
        if basis is None:
            basis, H = evolution_space(h, psi_i)
        else:
            H = build_sector_hamiltonian(h, basis)
        if basis.dimension > FULL_EIG_LIMIT:
            raise CapacityError(f"dimension {basis.dimension} > {FULL_EIG_LIMIT}")
        H = H.toarray()
        energies, vectors = scipy.linalg.eigh(H)
        c_i = vectors.conj().T @ basis.restrict(psi_i)
        total = float(np.sum(np.abs(c_i) ** 2))
        if abs(total - 1) > NORM_TOL:
            raise NormalizationError(f"initial-state weight in the eigenbasis is {total!r}")
        return cls(basis, energies, c_i, vectors)

    def basis_overlaps(self, mu: int) -> np.ndarray:
        """``c_n^mu`` for every eigenstate ``n``."""
        return self.vectors[int(self.basis.positions([mu])[0])]

    def p_mu(self, mu: int, t: float) -> float:
        return float(abs(np.sum(np.exp(-1j * self.energies * t) * self.overlaps_initial * self.basis_overlaps(mu))) ** 2)

    def ground_fidelity(self) -> float:
        return float(abs(self.overlaps_initial[0]) ** 2)


def infinite_time_average(spec: SpectralData, mus: Iterable[int] | None = None) -> dict[int, float]:
    """Long-time mean ``sum_n |c_n^I|^2 |c_n^mu|^2`` for each ``mu``.

    ``mus=None`` covers the whole sector. Degenerate eigenvalues are treated
    as distinct, which is exact only for a non-degenerate spectrum.
    """
    w = np.abs(spec.overlaps_initial) ** 2
    pbar = (np.abs(spec.vectors) ** 2) @ w
    if mus is None:
        return dict(zip(spec.basis.states.tolist(), pbar.tolist()))
    mus = list(mus)
    return dict(zip(mus, pbar[spec.basis.positions(mus)].tolist()))


def infinite_time_state(spec: SpectralData) -> StateVector:
    """State whose Born distribution is the long-time average (for selection)."""
    pbar = (np.abs(spec.vectors) ** 2) @ (np.abs(spec.overlaps_initial) ** 2)
    return spec.basis.embed(np.sqrt(pbar / pbar.sum()))


class SeriesCheck(NamedTuple):
    series: float
    exact: float
    residual: float


_moment_cache: weakref.WeakKeyDictionary = weakref.WeakKeyDictionary()


def _moment_vectors(h: PauliSum, psi_i: StateVector, k_max: int):
    """``(space, [H^k psi_I for k = 0..k_max])``, cached per ``(h, psi_I)``."""
    key = hashlib.sha1(psi_i.amplitudes.tobytes()).hexdigest()
    per_h = _moment_cache.setdefault(h, {})
    if key not in per_h:
        space, H = evolution_space(h, psi_i)
        per_h[key] = (space, H, [space.restrict(psi_i)])
    space, H, vecs = per_h[key]
    while len(vecs) <= k_max:
        vecs.append(H @ vecs[-1])
    return space, vecs[: k_max + 1]


def moments(h: PauliSum, psi_i: StateVector, mu: int, k_max: int) -> np.ndarray:
    """``<mu|H^k|psi_I>`` for ``k = 0..k_max``; entry 0 is ``b_mu``."""
    space, vecs = _moment_vectors(h, psi_i, k_max)
    if not space.contains([mu])[0]:
        return np.zeros(k_max + 1, dtype=np.complex128)
    pos = int(space.positions([mu])[0])
    return np.array([v[pos] for v in vecs], dtype=np.complex128)


def _series_value(m: np.ndarray, t: float, max_power: int) -> float:
    """Expanded-square series of ``P_mu(t)`` keeping every term up to ``t**max_power``.

    Terms: ``|b_mu|^2``; the cross terms with ``b_mu`` (``t^k``); the squared
    moments (``t^2k``); products of distinct moments (``t^(2k+k')``).
    ``m[k] = <mu|H^k|psi_I>`` is needed for ``k <= max_power``.
    """
    fact = [math.factorial(k) for k in range(max_power + 1)]
    b = m[0]
    # <psi_I|H^k|mu> = conj(<mu|H^k|psi_I>) for Hermitian H
    val = abs(b) ** 2
    for k in range(1, max_power + 1):
        val += 2 * t**k * ((1j) ** k * b * np.conj(m[k])).real / fact[k]
    for k in range(1, max_power // 2 + 1):
        val += t ** (2 * k) * abs(m[k]) ** 2 / fact[k] ** 2
        for kp in range(1, max_power - 2 * k + 1):
            val += 2 * t ** (2 * k + kp) * ((1j) ** kp * m[k] * np.conj(m[k + kp])).real / (fact[k] * fact[k + kp])
    return float(val)


def series_expansion_check(h: PauliSum, psi_i: StateVector, mu: int, t: float, k_max: int) -> SeriesCheck:
    """Small-t series of ``P_mu(t)`` through ``t**(2 k_max)`` against exact evolution.

    The outer index of the squared-moment terms runs to ``k_max``; every other
    term is kept up to the same power of ``t``. Emits ``DivergenceWarning``
    when the next two orders are estimated to contribute more than 1e-6.
    """
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    top = 2 * k_max
    m = moments(h, psi_i, mu, top + 2)
    series = _series_value(m, t, top)
    estimate = abs(_series_value(m, t, top + 2) - series)
    if estimate > SERIES_TOL:
        warnings.warn(f"series truncation estimate {estimate:.2e} at t={t}, k_max={k_max}", DivergenceWarning, stacklevel=2)
    exact = p_mu_curve(h, psi_i, mu, [t])[0]
    return SeriesCheck(series, exact, abs(series - exact))


class TrotterDiagnostics(NamedTuple):
    infidelity: float
    energy_violation: float
    leaked_weight: float


def trotter_diagnostics(h: PauliSum, psi_i: StateVector, t: float, dt: float) -> TrotterDiagnostics:
    """Compare first-order Trotter to exact evolution at time ``t``.

    The Trotter state is projected onto the initial sector (when ``h``
    conserves one) and renormalized before the overlap; the weight removed is ``leaked_weight``. The energy
    violation is measured on the unprojected state against
    ``<psi_I|H|psi_I>``.
    """
    space, H = evolution_space(h, psi_i)
    psi_trot = evolve_trotter1(h, psi_i, EvolutionPlan.trotter(t, dt))
    psi_exact = _evolve(space, H, psi_i, t)
    inside = space.restrict(psi_trot)
    kept = float(np.vdot(inside, inside).real)
    overlap = np.vdot(inside, space.restrict(psi_exact)) / math.sqrt(kept)
    infid = max(0.0, 1.0 - abs(overlap) ** 2)
    e0 = expectation(h, psi_i)
    drift = abs(expectation(h, psi_trot) - e0)
    return TrotterDiagnostics(infid, drift, max(0.0, 1.0 - kept))


def _vector(x) -> np.ndarray:
    return x.amplitudes if isinstance(x, StateVector) else np.asarray(x, dtype=np.complex128)


def fidelity(psi_a, psi_b) -> float:
    """``|<a|b>|^2`` for normalized states of equal length.

    Raises:
        NormalizationError: either norm differs from 1 by more than 1e-9.
    """
    a, b = _vector(psi_a), _vector(psi_b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"lengths {a.size} and {b.size}")
    for name, v in (("first", a), ("second", b)):
        n = np.linalg.norm(v)
        if abs(n - 1) > NORM_TOL:
            raise NormalizationError(f"{name} state has norm {n!r}")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


def hf_fidelity(gs_amplitudes, basis: SectorBasis) -> float:
    """Weight of the Hartree-Fock configuration in a sector ground state."""
    pos = basis.positions([hartree_fock_index(basis.n_up, basis.n_down)])[0]
    return float(abs(np.asarray(gs_amplitudes)[pos]) ** 2)


def write_pmu_csv(out: IO[str], curves: ClassCurves) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t", "class", "mean_p"])
    for t, g, v in curves.rows():
        w.writerow([repr(t), g, repr(v)])


def write_trotter_csv(out: IO[str], rows: Iterable[tuple[float, TrotterDiagnostics]]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["dt", "infidelity", "energy_violation", "leaked_weight"])
    for dt, d in rows:
        w.writerow([repr(float(dt)), repr(d.infidelity), repr(d.energy_violation), repr(d.leaked_weight)])
