"""Projective measurement simulation and configuration selection.

Shots are drawn from the Born distribution with numpy's Philox-4x64
counter-based generator. A draw of ``n_shots`` is split into chunks of at
most ``chunk_size`` shots; chunk ``c`` of time index ``k`` uses the key
``seed ^ c ^ (k << 32)``.

Selection ranks configurations by count (or probability for a state
vector), descending, with ties broken by ascending basis integer.
Probabilities are rounded to ``PROB_DECIMALS`` places before ranking so that
numerically degenerate configurations tie exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping

import numpy as np

from .errors import EmptySelection, NormalizationError
from .statevec import StateVector, spin_counts

RNG_ALGORITHM = "numpy.random.Philox(4x64-10)"
PROB_DECIMALS = 12
DEFAULT_CHUNK = 1 << 24


def derive_seed(seed: int, chunk: int = 0, time_index: int = 0) -> int:
    return (int(seed) ^ int(chunk) ^ (int(time_index) << 32)) & ((1 << 64) - 1)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & ((1 << 64) - 1)))


@dataclass(frozen=True)
class ShotRecord:
    """Measured basis integers with their counts."""

    counts: Mapping[int, int]
    n_shots: int
    n_qubits: int = 0

    def __post_init__(self):
        counts = {int(k): int(v) for k, v in sorted(self.counts.items()) if v}
        if sum(counts.values()) != self.n_shots:
            raise ValueError(f"counts sum to {sum(counts.values())}, n_shots is {self.n_shots}")
        if self.n_qubits and counts and (min(counts) < 0 or max(counts) >= 1 << self.n_qubits):
            raise ValueError("measured integer outside the register")
        object.__setattr__(self, "counts", counts)

    def frequencies(self) -> dict[int, float]:
        return {k: v / self.n_shots for k, v in self.counts.items()}

    def __len__(self) -> int:
        return len(self.counts)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_qubits": self.n_qubits,
                "n_shots": self.n_shots,
                "counts": {str(k): v for k, v in self.counts.items()},
            }
        )

    @classmethod
    def from_json(cls, text: str) -> ShotRecord:
        d = json.loads(text)
        return cls({int(k): v for k, v in d["counts"].items()}, d["n_shots"], d.get("n_qubits", 0))


def sample(
    psi: StateVector,
    n_shots: int,
    seed: int,
    *,
    time_index: int = 0,
    chunk_size: int = DEFAULT_CHUNK,
) -> ShotRecord:
    """Draw ``n_shots`` computational-basis measurements of ``psi``.

    Raises:
        NormalizationError: ``psi`` is not normalized to 1e-9.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be at least 1")
    p = psi.probabilities()
    total = p.sum()
    if abs(total - 1.0) > 1e-9:
        raise NormalizationError(f"probabilities sum to {total!r}")
    p = p / total
    counts = np.zeros(p.shape[0], dtype=np.int64)
    remaining, chunk = n_shots, 0
    while remaining:
        n = min(remaining, chunk_size)
        counts += make_rng(derive_seed(seed, chunk, time_index)).multinomial(n, p)
        remaining -= n
        chunk += 1
    nz = np.flatnonzero(counts)
    return ShotRecord(dict(zip(nz.tolist(), counts[nz].tolist())), n_shots, psi.n_qubits)


def merge(records: Iterable[ShotRecord]) -> ShotRecord:
    """Concatenate measurement results: counts and shot totals add."""
    records = list(records)
    n_qubits = {r.n_qubits for r in records if r.n_qubits}
    if len(n_qubits) > 1:
        raise ValueError(f"records cover different register sizes {sorted(n_qubits)}")
    counts: dict[int, int] = {}
    for r in records:
        for k, v in r.counts.items():
            counts[k] = counts.get(k, 0) + v
    return ShotRecord(counts, sum(r.n_shots for r in records), n_qubits.pop() if n_qubits else 0)


@dataclass(frozen=True)
class SelectionPolicy:
    """How to pick the subspace from measurement data or amplitudes.

    ``mode`` is ``"top_r"`` (R most frequent), ``"all_distinct"`` or
    ``"top_amplitude"`` (R largest ``|amplitude|**2``). ``sector`` is an
    optional ``(n_up, n_down)`` filter applied before ranking.
    """

    mode: Literal["top_r", "all_distinct", "top_amplitude"]
    r: int | None = None
    sector: tuple[int, int] | None = None
    tie_break: str = field(default="ascending", init=False)

    def __post_init__(self):
        if self.mode not in ("top_r", "all_distinct", "top_amplitude"):
            raise ValueError(f"unknown selection mode {self.mode!r}")
        if self.mode != "all_distinct" and (self.r is None or self.r < 1):
            raise ValueError(f"{self.mode} needs R >= 1")
        if self.sector is not None:
            object.__setattr__(self, "sector", tuple(int(s) for s in self.sector))

    @classmethod
    def top_r(cls, r: int, sector=None) -> SelectionPolicy:
        return cls("top_r", r, sector)

    @classmethod
    def all_distinct(cls, sector=None) -> SelectionPolicy:
        return cls("all_distinct", None, sector)

    @classmethod
    def top_amplitude(cls, r: int, sector=None) -> SelectionPolicy:
        return cls("top_amplitude", r, sector)

    def with_sector(self, sector) -> SelectionPolicy:
        return SelectionPolicy(self.mode, self.r, sector)

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "r": self.r,
            "sector": list(self.sector) if self.sector else None,
            "tie_break": self.tie_break,
        }


def sector_mask(states, sector) -> np.ndarray:
    up, down = spin_counts(states)
    return (up == sector[0]) & (down == sector[1])


def rank(states: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """States ordered by descending weight, ties by ascending integer."""
    order = np.lexsort((states, -weights))
    return states[order]


def select(source: ShotRecord | StateVector, policy: SelectionPolicy) -> list[int]:
    """Ordered list of distinct basis integers forming the subspace.

    Raises:
        EmptySelection: nothing survives the sector filter.
    """
    if policy.mode == "top_amplitude":
        if not isinstance(source, StateVector):
            raise TypeError("top_amplitude selection needs a StateVector")
        p = np.round(source.probabilities(), PROB_DECIMALS)
        states = np.flatnonzero(p > 0).astype(np.int64)
        weights = p[states]
    else:
        if not isinstance(source, ShotRecord):
            raise TypeError(f"{policy.mode} selection needs a ShotRecord")
        states = np.fromiter(source.counts.keys(), dtype=np.int64, count=len(source.counts))
        weights = np.fromiter(source.counts.values(), dtype=np.int64, count=len(source.counts))
    if policy.sector is not None:
        keep = sector_mask(states, policy.sector)
        states, weights = states[keep], weights[keep]
    if states.size == 0:
        raise EmptySelection("no configuration survives selection")
    ordered = rank(states, weights)
    if policy.mode != "all_distinct":
        ordered = ordered[: policy.r]
    return ordered.tolist()
