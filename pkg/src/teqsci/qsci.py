"""Selected configuration interaction on measured subspaces.

Workflows:

* ``run_single_time`` -- evolve the initial state to one time, select.
* ``run_time_average`` -- evolve to each time of a grid, sample each with
  the same shot budget, pool the counts and keep the R most frequent.
* ``run_gs_qsci`` -- select from the exact ground state (reference).
* ``find_threshold_R`` -- smallest R meeting an energy tolerance.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import CapacityError, NotReached
from .pauli import PauliSum
from .sampler import (
    RNG_ALGORITHM,
    SelectionPolicy,
    merge,
    rank,
    sample,
    select,
)
from .statevec import (
    DENSE_LIMIT,
    EvolutionPlan,
    SectorBasis,
    StateVector,
    evolve,
    evolve_trotter1,
    fix_phase,
    lowest_eigenpair,
)

log = logging.getLogger(__name__)

GRID_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Subspace:
    """Ordered distinct basis integers spanning the CI space."""

    members: tuple[int, ...]

    def __post_init__(self):
        members = tuple(int(m) for m in self.members)
        if not members:
            raise ValueError("subspace must not be empty")
        if len(set(members)) != len(members):
            raise ValueError("subspace members must be distinct")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def index(self) -> dict[int, int]:
        return {m: k for k, m in enumerate(self.members)}

    def as_array(self) -> np.ndarray:
        return np.array(self.members, dtype=np.int64)


@dataclass
class SubspaceResult:
    subspace: Subspace
    energy: float
    eigenvector: np.ndarray
    energy_error: float | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return len(self.subspace)

    def to_dict(self) -> dict:
        v = np.asarray(self.eigenvector)
        vec = v.real.tolist() if not np.iscomplexobj(v) else [[z.real, z.imag] for z in v.tolist()]
        return {
            "energy_hartree": self.energy,
            "energy_error_hartree": self.energy_error,
            "energy_error_mha": None if self.energy_error is None else self.energy_error * 1e3,
            "r": self.r,
            "subspace": list(self.subspace.members),
            "eigenvector": vec,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)


@dataclass(frozen=True)
class TimeGrid:
    """Times ``t_start, t_start + spacing, ..., t_end``."""

    t_start: float
    t_end: float
    spacing: float

    def __post_init__(self):
        if self.t_end < self.t_start:
            raise ValueError("t_end precedes t_start")
        if self.t_end > self.t_start:
            if self.spacing <= 0:
                raise ValueError("spacing must be positive")
            steps = (self.t_end - self.t_start) / self.spacing
            if abs(steps - round(steps)) > GRID_TOL:
                raise ValueError(f"({self.t_end} - {self.t_start}) / {self.spacing} is not integral")

    @property
    def m(self) -> int:
        if self.t_end == self.t_start:
            return 1
        return 1 + round((self.t_end - self.t_start) / self.spacing)

    @property
    def times(self) -> list[float]:
        return [self.t_start + k * self.spacing for k in range(self.m)]

    def as_dict(self) -> dict:
        return {"t_start": self.t_start, "t_end": self.t_end, "spacing": self.spacing, "m": self.m}


def project_hamiltonian(h: PauliSum, s: Subspace | Sequence[int], sparse: bool = False):
    """``H_S[k, l] = <mu_k|H|mu_l>`` over the subspace members, in order."""
    members = s.as_array() if isinstance(s, Subspace) else np.asarray(s, dtype=np.int64)
    r = members.shape[0]
    rows, cols, vals, _ = kernels.assemble(members, *h.grouped)
    if np.iscomplexobj(vals) and (vals.size == 0 or np.max(np.abs(vals.imag)) <= 1e-12):
        vals = vals.real
    if sparse:
        m = sp.csr_matrix((vals, (rows, cols)), shape=(r, r))
        m.sum_duplicates()
        return m
    out = np.zeros((r, r), dtype=vals.dtype)
    np.add.at(out, (rows, cols), vals)
    return out


def diagonalize_subspace(h_s) -> tuple[float, np.ndarray]:
    """Lowest eigenpair; dense up to 4096 rows, Lanczos (ARPACK) above."""
    return lowest_eigenpair(h_s)


def subspace_energy(h: PauliSum, members: Sequence[int]) -> tuple[float, np.ndarray]:
    big = len(members) > DENSE_LIMIT
    return diagonalize_subspace(project_hamiltonian(h, members, sparse=big))


def _result(h, members, e_exact, metadata) -> SubspaceResult:
    s = Subspace(members)
    energy, vec = subspace_energy(h, s.members)
    err = None if e_exact is None else energy - e_exact
    return SubspaceResult(s, energy, vec, err, metadata)


def _initial_sector(psi: StateVector) -> tuple[int, int]:
    b = SectorBasis.for_state(psi)
    return b.n_up, b.n_down


def _resolve_policy(policy: SelectionPolicy, plan_mode: str, psi_i, post_select, shots) -> SelectionPolicy:
    if shots is not None and policy.mode == "top_amplitude":
        policy = SelectionPolicy.top_r(policy.r, policy.sector)
    if post_select is None:
        post_select = plan_mode == "trotter1"
    if post_select and policy.sector is None:
        policy = policy.with_sector(_initial_sector(psi_i))
    return policy


def run_single_time(
    h: PauliSum,
    psi_i: StateVector,
    plan: EvolutionPlan,
    policy: SelectionPolicy,
    shots: tuple[int, int] | None = None,
    e_exact: float | None = None,
    post_select: bool | None = None,
) -> SubspaceResult:
    """QSCI on ``exp(-iHt) psi_i`` (exact or Trotterized).

    Without ``shots`` the configurations are ranked by amplitude; with
    ``shots=(n_shots, seed)`` they are sampled. Sector post-selection defaults
    on for Trotterized evolution and off for exact evolution.
    """
    policy = _resolve_policy(policy, plan.mode, psi_i, post_select, shots)
    psi = evolve(h, psi_i, plan)
    meta = {"workflow": "te-single", "evolution": plan.as_dict(), "policy": policy.as_dict()}
    if shots is None:
        if policy.mode != "top_amplitude":
            raise ValueError("statevector mode needs a top_amplitude policy")
        members = select(psi, policy)
    else:
        n_shots, seed = shots
        record = sample(psi, n_shots, seed)
        members = select(record, policy)
        meta.update(n_shots=n_shots, seed=seed, rng=RNG_ALGORITHM, n_distinct=len(record))
    return _result(h, members, e_exact, meta)


def evolve_on_grid(h: PauliSum, psi_i: StateVector, grid: TimeGrid, dt: float | None):
    """Yield ``(t_k, psi(t_k))`` along the grid.

    Trotterized states are advanced incrementally, which equals evolving
    from zero because every step applies the same product formula.
    """
    if dt is None:
        for t in grid.times:
            yield t, evolve(h, psi_i, EvolutionPlan.exact(t))
        return
    psi = psi_i
    t_prev = 0.0
    for t in grid.times:
        if t > t_prev:
            psi = evolve_trotter1(h, psi, EvolutionPlan.trotter(t - t_prev, dt))
        yield t, psi
        t_prev = t


def run_time_average(
    h: PauliSum,
    psi_i: StateVector,
    grid: TimeGrid,
    dt: float | None,
    policy: SelectionPolicy,
    shots_per_time: int,
    seed: int,
    e_exact: float | None = None,
    post_select: bool | None = None,
) -> SubspaceResult:
    """Pool ``shots_per_time`` samples from every grid time, keep the top R.

    ``dt=None`` evolves exactly; otherwise first-order Trotter with step ``dt``.
    Time ``k`` samples with RNG key derived from ``(seed, k)``.
    """
    states = [psi for _, psi in evolve_on_grid(h, psi_i, grid, dt)]
    return time_average_from_states(h, psi_i, states, grid, dt, policy, shots_per_time, seed, e_exact, post_select)


def time_average_from_states(
    h: PauliSum,
    psi_i: StateVector,
    states: Sequence[StateVector],
    grid: TimeGrid,
    dt: float | None,
    policy: SelectionPolicy,
    shots_per_time: int,
    seed: int,
    e_exact: float | None = None,
    post_select: bool | None = None,
) -> SubspaceResult:
    """``run_time_average`` on states already evolved along ``grid``, so
    repeated seeds share one evolution."""
    if len(states) != grid.m:
        raise ValueError(f"{len(states)} states for a grid of {grid.m} times")
    mode = "exact" if dt is None else "trotter1"
    policy = _resolve_policy(policy, mode, psi_i, post_select, shots_per_time)
    pooled = merge(sample(psi, shots_per_time, seed, time_index=k) for k, psi in enumerate(states))
    members = select(pooled, policy)
    meta = {
        "workflow": "te-average",
        "grid": grid.as_dict(),
        "evolution": {"mode": mode, "dt": dt},
        "policy": policy.as_dict(),
        "shots_per_time": shots_per_time,
        "n_shots": pooled.n_shots,
        "seed": seed,
        "rng": RNG_ALGORITHM,
        "n_distinct": len(pooled),
    }
    return _result(h, members, e_exact, meta)


def ranked_amplitudes(basis: SectorBasis, amplitudes) -> np.ndarray:
    """Sector states by descending ``|amplitude|**2``, ties by ascending integer."""
    from .sampler import PROB_DECIMALS

    p = np.round(np.abs(np.asarray(amplitudes)) ** 2, PROB_DECIMALS)
    return rank(basis.states.copy(), p)


def run_gs_qsci(
    h: PauliSum,
    basis: SectorBasis,
    gs_amplitudes,
    r: int,
    e_exact: float | None = None,
) -> SubspaceResult:
    """QSCI from the exact ground state: its ``r`` largest configurations."""
    if not 1 <= r <= basis.dimension:
        raise CapacityError(f"R={r} outside [1, {basis.dimension}]")
    members = ranked_amplitudes(basis, gs_amplitudes)[:r].tolist()
    return _result(h, members, e_exact, {"workflow": "gs-qsci", "r": r})


def find_threshold_R(
    error_fn: Callable[[int], float],
    tolerance: float,
    r_max: int,
    consecutive: int = 3,
) -> int:
    """Smallest R whose error, and that of the next ``consecutive - 1`` values,
    is below ``tolerance``.

    Exponential bracketing locates a passing R, then bisection narrows the
    window and a final linear scan downward confirms minimality under the
    same rule. Non-monotonic errors seen along the way are logged.

    Raises:
        NotReached: the error is not below tolerance at ``r_max``.
    """
    cache: dict[int, float] = {}

    def err(r: int) -> float:
        if r not in cache:
            cache[r] = float(error_fn(r))
        return cache[r]

    def ok(r: int) -> bool:
        return all(err(q) < tolerance for q in range(r, min(r + consecutive, r_max + 1)))

    if err(r_max) >= tolerance:
        raise NotReached(f"error {err(r_max):.3g} >= {tolerance} at R={r_max}")
    lo, hi = 0, 1
    while hi < r_max and not ok(hi):
        lo, hi = hi, min(2 * hi, r_max)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    while hi > 1 and ok(hi - 1):
        hi -= 1
    seen = sorted(cache)
    for a, b in zip(seen, seen[1:]):
        if cache[b] > cache[a] + 1e-12:
            log.info("non-monotonic error: R=%d -> %.3e, R=%d -> %.3e", a, cache[a], b, cache[b])
    return hi


def truncated_gs_initial_state(
    h: PauliSum, basis: SectorBasis, gs_amplitudes, r_i: int
) -> tuple[StateVector, float]:
    """Lowest state of ``H`` in the span of the ``r_i`` largest ground-state
    configurations, embedded in the full register, and its energy."""
    if not 1 <= r_i <= basis.dimension:
        raise CapacityError(f"R_I={r_i} outside [1, {basis.dimension}]")
    members = ranked_amplitudes(basis, gs_amplitudes)[:r_i]
    energy, vec = subspace_energy(h, members.tolist())
    amps = np.zeros(1 << basis.n_qubits, dtype=np.complex128)
    amps[members] = fix_phase(vec)
    return StateVector(amps), energy


def top_amplitude_errors(h: PauliSum, psi: StateVector, rs: Sequence[int], e_exact: float,
                         sector: tuple[int, int] | None = None) -> dict[int, float]:
    """Energy error for each R when the R largest amplitudes of ``psi`` are kept."""
    ranked = select(psi, SelectionPolicy.top_amplitude(max(rs), sector))
    return {r: subspace_energy(h, ranked[:r])[0] - e_exact for r in rs}


def energy_error_fn(h: PauliSum, ranked: Sequence[int], e_exact: float) -> Callable[[int], float]:
    ranked = list(ranked)

    def fn(r: int) -> float:
        return subspace_energy(h, ranked[:r])[0] - e_exact

    return fn


def r_gs(h: PauliSum, basis: SectorBasis, gs_amplitudes, e_exact: float, tolerance: float = 1e-3) -> int:
    """Smallest ground-state-selected subspace reaching ``tolerance``."""
    ranked = ranked_amplitudes(basis, gs_amplitudes)
    return find_threshold_R(energy_error_fn(h, ranked, e_exact), tolerance, basis.dimension)


def r_te(h: PauliSum, psi_t: StateVector, basis: SectorBasis, e_exact: float, tolerance: float = 1e-3) -> int:
    """Same as ``r_gs`` for configurations ranked by a time-evolved state."""
    ranked = select(psi_t, SelectionPolicy.top_amplitude(basis.dimension, (basis.n_up, basis.n_down)))
    return find_threshold_R(energy_error_fn(h, ranked, e_exact), tolerance, len(ranked))


def shots_per_time(total_shots: int, grid: TimeGrid) -> int:
    """Equal per-time budget, rounded to the nearest integer."""
    return max(1, int(math.floor(total_shots / grid.m + 0.5)))
