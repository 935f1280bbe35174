"""Pauli strings, Pauli sums and the Jordan-Wigner transform.

A Pauli string on ``n`` qubits is a pair of bit masks ``(x_mask, z_mask)``:
qubit ``j`` carries X if only bit ``j`` of ``x_mask`` is set, Z if only the
``z_mask`` bit is set and Y if both are. The operator is
``i**popcount(x & z) * X**x Z**z`` so that it is Hermitian.

Jordan-Wigner convention: spin orbital ``2p`` is orbital ``p`` spin up and
``2p + 1`` is orbital ``p`` spin down; qubit 0 is the least significant bit and

    c+_j = 1/2 (X_j - i Y_j) Z_{j-1} ... Z_0.

Terms of a ``PauliSum`` are merged, terms with ``|w| < DROP_TOL`` removed,
and the rest sorted by ``(weight, x_mask, z_mask)``. The Trotter kernel
applies terms in exactly this order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import DimensionMismatch, NonHermitianResidue, NormalizationError

DROP_TOL = 1e-12
IMAG_TOL = 1e-9
_PHASES = (1, 1j, -1, -1j)
_LABEL = re.compile(r"([IXYZ])(\d+)")


@dataclass(frozen=True, order=True)
class PauliString:
    x_mask: int
    z_mask: int
    n_qubits: int

    @property
    def weight(self) -> int:
        return (self.x_mask | self.z_mask).bit_count()

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    @property
    def label(self) -> str:
        parts = []
        for q in range(self.n_qubits):
            x, z = (self.x_mask >> q) & 1, (self.z_mask >> q) & 1
            if x or z:
                parts.append(("Y" if z else "X") if x else "Z")
                parts[-1] += str(q)
        return " ".join(parts) if parts else "I"

    @classmethod
    def from_label(cls, label: str, n_qubits: int) -> PauliString:
        """Parse labels like ``"X0 Z1 Y3"``; ``"I"`` or ``""`` is the identity."""
        x = z = 0
        for op, q in _LABEL.findall(label):
            q = int(q)
            if q >= n_qubits:
                raise ValueError(f"qubit {q} out of range for {n_qubits} qubits")
            if op in "XY":
                x |= 1 << q
            if op in "ZY":
                z |= 1 << q
        return cls(x, z, n_qubits)

    def apply(self, nu: int) -> tuple[int, complex]:
        return apply_to_basis(self, nu)


def apply_to_basis(p: PauliString, nu: int) -> tuple[int, complex]:
    """Return ``(nu', phase)`` with ``P|nu> = phase |nu'>``."""
    ny = (p.x_mask & p.z_mask).bit_count()
    sign = -1 if (p.z_mask & nu).bit_count() & 1 else 1
    return nu ^ p.x_mask, _PHASES[ny & 3] * sign


def _canonical(x, z, c, n_qubits, drop_tol=DROP_TOL):
    """Merge duplicate strings, drop tiny terms, sort by (weight, x, z)."""
    x = np.asarray(x, dtype=np.int64)
    z = np.asarray(z, dtype=np.int64)
    c = np.asarray(c)
    if x.size == 0:
        return x, z, np.zeros(0)
    order = np.lexsort((z, x))
    x, z, c = x[order], z[order], c[order]
    new = np.ones(x.shape[0], dtype=bool)
    new[1:] = (x[1:] != x[:-1]) | (z[1:] != z[:-1])
    starts = np.flatnonzero(new)
    c = np.add.reduceat(c, starts)
    x, z = x[starts], z[starts]
    if np.iscomplexobj(c):
        if c.size and np.max(np.abs(c.imag)) > IMAG_TOL:
            raise NonHermitianResidue(f"Pauli coefficient with imaginary part {np.max(np.abs(c.imag)):.3g}")
        c = c.real
    keep = np.abs(c) >= drop_tol
    x, z, c = x[keep], z[keep], c[keep]
    weight = np.bitwise_count(x | z)
    order = np.lexsort((z, x, weight))
    return x[order], z[order], np.ascontiguousarray(c[order], dtype=float)


class PauliSum:
    """Real-weighted sum of Pauli strings ``H = sum_j w_j P_j``; immutable."""

    def __init__(self, x_masks, z_masks, coeffs, n_qubits: int, drop_tol: float = DROP_TOL):
        if n_qubits > 62:
            raise ValueError("at most 62 qubits are supported")
        x, z, c = _canonical(x_masks, z_masks, coeffs, n_qubits, drop_tol)
        limit = 1 << n_qubits
        if x.size and (x.max() >= limit or z.max() >= limit or x.min() < 0 or z.min() < 0):
            raise ValueError(f"Pauli mask outside {n_qubits} qubits")
        for a in (x, z, c):
            a.setflags(write=False)
        self.x_masks, self.z_masks, self.coeffs = x, z, c
        self.n_qubits = n_qubits

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[float, PauliString]], n_qubits: int) -> PauliSum:
        terms = list(terms)
        return cls(
            [p.x_mask for _, p in terms],
            [p.z_mask for _, p in terms],
            [w for w, _ in terms],
            n_qubits,
        )

    @classmethod
    def from_text(cls, text: str, n_qubits: int) -> PauliSum:
        terms = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            coeff, _, label = line.partition(" ")
            terms.append((float(coeff), PauliString.from_label(label, n_qubits)))
        return cls.from_terms(terms, n_qubits)

    def to_text(self) -> str:
        """One ``coeff label`` line per term, in canonical order."""
        return "".join(f"{float(w)!r} {p.label}\n" for w, p in self.terms)

    @property
    def terms(self) -> list[tuple[float, PauliString]]:
        return [
            (float(w), PauliString(int(x), int(z), self.n_qubits))
            for x, z, w in zip(self.x_masks, self.z_masks, self.coeffs)
        ]

    def __len__(self) -> int:
        return int(self.coeffs.shape[0])

    def __add__(self, other: PauliSum) -> PauliSum:
        if other.n_qubits != self.n_qubits:
            raise DimensionMismatch("qubit counts differ")
        return PauliSum(
            np.concatenate([self.x_masks, other.x_masks]),
            np.concatenate([self.z_masks, other.z_masks]),
            np.concatenate([self.coeffs, other.coeffs]),
            self.n_qubits,
        )

    @property
    def weights(self) -> np.ndarray:
        return np.bitwise_count(self.x_masks | self.z_masks)

    @property
    def identity_coeff(self) -> float:
        ident = (self.x_masks == 0) & (self.z_masks == 0)
        return float(self.coeffs[ident].sum())

    @cached_property
    def grouped(self):
        """Terms grouped by ``x_mask``: ``(gx, offsets, zs, cs)``.

        ``cs`` carries ``w * i**popcount(x & z)`` so that the contribution of a
        group to ``<v ^ x|H|v>`` is ``sum_j cs[j] * (-1)**popcount(zs[j] & v)``.
        """
        order = np.lexsort((self.z_masks, self.x_masks))
        x, z, w = self.x_masks[order], self.z_masks[order], self.coeffs[order]
        ny = np.bitwise_count(x & z) & 3
        cs = w * np.array(_PHASES)[ny]
        new = np.ones(x.shape[0], dtype=bool)
        new[1:] = x[1:] != x[:-1]
        starts = np.flatnonzero(new)
        offsets = np.append(starts, x.shape[0]).astype(np.int64)
        return x[starts].copy(), offsets, z.copy(), np.ascontiguousarray(cs, dtype=complex)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Return ``H psi`` on the full ``2**n`` space."""
        psi = np.ascontiguousarray(psi, dtype=complex)
        if psi.shape != (1 << self.n_qubits,):
            raise DimensionMismatch(f"state of length {psi.shape} for {self.n_qubits} qubits")
        return kernels.apply_sum(psi, *self.grouped)

    def to_matrix(self) -> np.ndarray:
        """Dense ``2**n x 2**n`` matrix; for small systems and tests only."""
        dim = 1 << self.n_qubits
        rows, cols, vals, _ = kernels.assemble(np.arange(dim), *self.grouped)
        m = np.zeros((dim, dim), dtype=complex)
        np.add.at(m, (rows, cols), vals)
        return m


def _ladder_strings(modes: np.ndarray, dagger: bool):
    """The two ``X**x Z**z`` strings (with weights) composing each ladder op."""
    e = np.left_shift(np.int64(1), modes)
    low = e - 1
    # c+ = X_j (1 + Z_j)/2 * Z_{<j},  c = X_j (1 - Z_j)/2 * Z_{<j}
    return ((e, low, 0.5), (e, low | e, 0.5 if dagger else -0.5))


def jordan_wigner_fermion(
    terms: Sequence[tuple[complex, Sequence[tuple[int, bool]]]] | None,
    n_qubits: int,
    *,
    coeffs: np.ndarray | None = None,
    modes: np.ndarray | None = None,
    daggers: Sequence[bool] | None = None,
    constant: float = 0.0,
) -> PauliSum:
    """Jordan-Wigner transform of a sum of fermionic operator products.

    Either pass ``terms`` as ``[(coeff, [(mode, is_dagger), ...]), ...]`` with
    products read left to right, or the vectorized form: ``coeffs`` (N,),
    ``modes`` (N, k) and ``daggers`` (k,) for N products of the same pattern.
    """
    if terms is not None:
        out = PauliSum([0], [0], [constant], n_qubits)
        by_pattern: dict[tuple, list] = {}
        for coeff, ops in terms:
            key = tuple(d for _, d in ops)
            by_pattern.setdefault(key, []).append((coeff, [m for m, _ in ops]))
        for pattern, items in by_pattern.items():
            c = np.array([it[0] for it in items], dtype=complex)
            m = np.array([it[1] for it in items], dtype=np.int64).reshape(len(items), len(pattern))
            out = out + jordan_wigner_fermion(None, n_qubits, coeffs=c, modes=m, daggers=pattern)
        return out

    coeffs = np.asarray(coeffs, dtype=complex)
    modes = np.asarray(modes, dtype=np.int64)
    n, k = modes.shape
    if k == 0:
        return PauliSum([0], [0], [coeffs.sum() + constant], n_qubits)
    if modes.size and (modes.min() < 0 or modes.max() >= n_qubits):
        raise ValueError("fermion mode outside qubit range")
    # running product as complex weight * X**x Z**z
    xs = [np.zeros(n, np.int64)]
    zs = [np.zeros(n, np.int64)]
    ws = [coeffs]
    for col in range(k):
        new_x, new_z, new_w = [], [], []
        for ex, ez, ew in _ladder_strings(modes[:, col], bool(daggers[col])):
            for x, z, w in zip(xs, zs, ws):
                # (X^x1 Z^z1)(X^x2 Z^z2) = (-1)^|z1 & x2| X^(x1^x2) Z^(z1^z2)
                sign = 1 - 2 * (np.bitwise_count(z & ex) & 1).astype(np.int64)
                new_x.append(x ^ ex)
                new_z.append(z ^ ez)
                new_w.append(w * (ew * sign))
        xs, zs, ws = new_x, new_z, new_w
    x = np.concatenate(xs)
    z = np.concatenate(zs)
    w = np.concatenate(ws)
    # X^x Z^z = (-i)^|x & z| P(x, z)
    w = w * np.array([1, -1j, -1, 1j])[np.bitwise_count(x & z) & 3]
    x = np.append(x, 0)
    z = np.append(z, 0)
    w = np.append(w, constant)
    return PauliSum(x, z, w, n_qubits)


def jordan_wigner(h, drop_tol: float = DROP_TOL) -> PauliSum:
    """Qubit Hamiltonian of a ``MolecularHamiltonian`` on ``2 * n_orbitals`` qubits."""
    n = h.n_orbitals
    nq = 2 * n
    parts = []

    p, q = np.nonzero(h.one_body)
    if p.size:
        c = h.one_body[p, q]
        for s in (0, 1):
            parts.append((c, np.stack([2 * p + s, 2 * q + s], axis=1), (True, False)))

    p, q, r, s_ = np.nonzero(h.two_body)
    if p.size:
        c = 0.5 * h.two_body[p, q, r, s_]
        for sig in (0, 1):
            for tau in (0, 1):
                m = np.stack([2 * p + sig, 2 * q + tau, 2 * r + tau, 2 * s_ + sig], axis=1)
                ok = (m[:, 0] != m[:, 1]) & (m[:, 2] != m[:, 3])
                parts.append((c[ok], m[ok], (True, True, False, False)))

    xs, zs, ws = [np.zeros(1, np.int64)], [np.zeros(1, np.int64)], [np.array([h.core_energy], complex)]
    for c, m, daggers in parts:
        part = jordan_wigner_fermion(None, nq, coeffs=c, modes=m, daggers=daggers)
        xs.append(part.x_masks)
        zs.append(part.z_masks)
        ws.append(part.coeffs.astype(complex))
    return PauliSum(np.concatenate(xs), np.concatenate(zs), np.concatenate(ws), nq, drop_tol=drop_tol)


def expectation(h: PauliSum, psi) -> float:
    """``<psi|H|psi>`` for a normalized state vector.

    Raises:
        NormalizationError: ``psi`` is not normalized to 1e-10.
        NonHermitianResidue: imaginary part above 1e-9.
    """
    amps = np.ascontiguousarray(getattr(psi, "amplitudes", psi), dtype=complex)
    norm = np.vdot(amps, amps).real
    if abs(norm - 1.0) > 1e-10:
        raise NormalizationError(f"state norm^2 = {norm!r}")
    val = np.vdot(amps, h.apply(amps))
    if abs(val.imag) > IMAG_TOL:
        raise NonHermitianResidue(f"<H> has imaginary part {val.imag:.3g}")
    return float(val.real)
