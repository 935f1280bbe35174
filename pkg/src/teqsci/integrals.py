"""FCIDUMP reading and writing and the molecular Hamiltonian data model.

The electronic Hamiltonian is

    H = E_core + sum_{pq,s} h_pq c+_{ps} c_{qs}
        + 1/2 sum_{pqrs,s,t} V_pqrs c+_{ps} c+_{qt} c_{rt} c_{ss}

with ``V`` stored in physicists' order matching that operator string, so
``V[p, q, r, s] = (ps|qr)`` in the chemists' notation used by FCIDUMP files.
Orbitals are real; complex integrals are rejected.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

import numpy as np

from .errors import ParseError

SYMMETRY_TOL = 1e-10

_HEADER_END = re.compile(r"&END|/", re.IGNORECASE)
_KEY = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*([^=]*?)(?=,?\s*[A-Za-z_][A-Za-z0-9_]*\s*=|$)", re.S)


@dataclass(frozen=True, eq=False)
class MolecularHamiltonian:
    """One- and two-body integrals plus core energy, in Hartree.

    ``one_body`` has shape ``(n, n)`` and ``two_body`` shape ``(n, n, n, n)``
    in physicists' order (see module docstring). Arrays are made read-only.
    """

    n_orbitals: int
    n_alpha: int
    n_beta: int
    core_energy: float
    one_body: np.ndarray
    two_body: np.ndarray

    def __post_init__(self):
        n = self.n_orbitals
        h1 = np.array(self.one_body, dtype=float)
        h2 = np.array(self.two_body, dtype=float)
        if h1.shape != (n, n) or h2.shape != (n, n, n, n):
            raise ValueError(f"integral shapes {h1.shape}, {h2.shape} do not match n_orbitals={n}")
        h1.setflags(write=False)
        h2.setflags(write=False)
        object.__setattr__(self, "one_body", h1)
        object.__setattr__(self, "two_body", h2)
        object.__setattr__(self, "core_energy", float(self.core_energy))

    @property
    def n_electrons(self) -> int:
        return self.n_alpha + self.n_beta

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_orbitals

    def chemists_eri(self) -> np.ndarray:
        """Two-electron integrals as ``eri[i, j, k, l] = (ij|kl)``."""
        # V[p,q,r,s] = (ps|qr)  =>  (ij|kl) = V[i,k,l,j]
        return self.two_body.transpose(0, 3, 1, 2)

    @classmethod
    def from_chemists(cls, n_alpha, n_beta, core_energy, one_body, eri):
        eri = np.asarray(eri, dtype=float)
        return cls(
            n_orbitals=eri.shape[0],
            n_alpha=n_alpha,
            n_beta=n_beta,
            core_energy=core_energy,
            one_body=one_body,
            two_body=eri.transpose(0, 2, 3, 1),
        )

    def allclose(self, other: MolecularHamiltonian, atol: float = 1e-12) -> bool:
        return (
            self.n_orbitals == other.n_orbitals
            and self.n_alpha == other.n_alpha
            and self.n_beta == other.n_beta
            and abs(self.core_energy - other.core_energy) <= atol
            and np.allclose(self.one_body, other.one_body, rtol=0, atol=atol)
            and np.allclose(self.two_body, other.two_body, rtol=0, atol=atol)
        )


@dataclass(frozen=True)
class HermiticityViolation:
    p: int
    q: int
    delta: float = 0.0

    def __eq__(self, other):
        return isinstance(other, HermiticityViolation) and (self.p, self.q) == (other.p, other.q)


@dataclass(frozen=True)
class PermSymmetryViolation:
    symmetry: str
    index: tuple
    delta: float = 0.0

    def __eq__(self, other):
        return isinstance(other, PermSymmetryViolation) and self.symmetry == other.symmetry


@dataclass(frozen=True)
class ElectronCountViolation:
    n_electrons: int
    capacity: int


# (name, permutation of chemists' indices (ij|kl))
_ERI_SYMMETRIES = (
    ("(ij|kl)=(ji|kl)", (1, 0, 2, 3)),
    ("(ij|kl)=(ij|lk)", (0, 1, 3, 2)),
    ("(ij|kl)=(kl|ij)", (2, 3, 0, 1)),
)


def validate(h: MolecularHamiltonian, tol: float = SYMMETRY_TOL) -> list:
    """Return invariant violations of ``h``; empty when all hold."""
    out = []
    h1 = h.one_body
    diff = np.abs(h1 - h1.T)
    for p, q in zip(*np.nonzero(np.triu(diff > tol, k=1))):
        out.append(HermiticityViolation(int(p), int(q), float(diff[p, q])))
    eri = h.chemists_eri()
    for name, perm in _ERI_SYMMETRIES:
        d = np.abs(eri - eri.transpose(perm))
        if d.size and d.max() > tol:
            idx = np.unravel_index(int(np.argmax(d)), d.shape)
            out.append(PermSymmetryViolation(name, tuple(int(i) for i in idx), float(d.max())))
    cap = 2 * h.n_orbitals
    if h.n_electrons > cap or h.n_alpha < 0 or h.n_beta < 0:
        out.append(ElectronCountViolation(h.n_electrons, cap))
    return out


def _parse_header(text: str) -> tuple[dict, str]:
    start = text.upper().find("&FCI")
    if start < 0:
        raise ParseError("missing &FCI namelist header")
    m = _HEADER_END.search(text, start + 4)
    if m is None:
        raise ParseError("unterminated FCIDUMP header")
    body = text[start + 4 : m.start()]
    fields = {}
    for key, value in _KEY.findall(body):
        fields[key.upper()] = value.strip().rstrip(",")
    for key in ("NORB", "NELEC"):
        if key not in fields:
            raise ParseError(f"header lacks {key}")
    try:
        ints = {k: int(fields[k]) for k in ("NORB", "NELEC", "MS2") if k in fields}
    except ValueError as exc:
        raise ParseError(f"bad header value: {exc}") from None
    return ints, text[m.end() :]


def parse_fcidump(source: str | TextIO) -> MolecularHamiltonian:
    """Parse FCIDUMP text (or an open text stream).

    Indices in the file are 1-based; every stored integral is expanded to all
    of its real-orbital symmetry partners.

    Raises:
        ParseError: malformed header or body line, or complex integrals.
        IndexError: orbital index outside ``[1, NORB]``.
        ValueError: non-finite integral value.
    """
    text = source if isinstance(source, str) else source.read()
    header, body = _parse_header(text)
    norb, nelec, ms2 = header["NORB"], header["NELEC"], header.get("MS2", 0)
    if norb < 1 or nelec < 0 or (nelec + ms2) % 2:
        raise ParseError(f"inconsistent header NORB={norb} NELEC={nelec} MS2={ms2}")
    n_alpha, n_beta = (nelec + ms2) // 2, (nelec - ms2) // 2

    h1 = np.zeros((norb, norb))
    eri = np.zeros((norb, norb, norb, norb))
    core = 0.0
    for lineno, line in enumerate(body.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if "(" in line:
            raise ParseError(f"line {lineno}: complex integrals are not supported")
        parts = line.replace(",", " ").split()
        if len(parts) != 5:
            raise ParseError(f"line {lineno}: expected 'value i j k l', got {line!r}")
        try:
            value = float(parts[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(x) for x in parts[1:])
        except ValueError:
            raise ParseError(f"line {lineno}: cannot parse {line!r}") from None
        if not math.isfinite(value):
            raise ValueError(f"line {lineno}: non-finite integral {parts[0]}")
        for idx in (i, j, k, l):
            if not 0 <= idx <= norb:
                raise IndexError(f"line {lineno}: orbital index {idx} outside [1, {norb}]")
        i, j, k, l = i - 1, j - 1, k - 1, l - 1
        if i < 0 and j < 0 and k < 0 and l < 0:
            core = value
        elif k < 0 and l < 0:
            if j < 0:
                continue  # orbital energy line, not part of the Hamiltonian
            h1[i, j] = h1[j, i] = value
        elif min(i, j, k, l) < 0:
            raise ParseError(f"line {lineno}: mixed zero/non-zero indices {line!r}")
        else:
            for a, b, c, d in ((i, j, k, l), (k, l, i, j)):
                eri[a, b, c, d] = eri[b, a, c, d] = eri[a, b, d, c] = eri[b, a, d, c] = value
    return MolecularHamiltonian.from_chemists(n_alpha, n_beta, core, h1, eri)


def load_fcidump(path: str | Path) -> MolecularHamiltonian:
    with open(path) as f:
        return parse_fcidump(f)


def dump_fcidump(h: MolecularHamiltonian) -> str:
    """Serialize to FCIDUMP text, one line per symmetry-unique non-zero integral."""
    n = h.n_orbitals
    out = io.StringIO()
    out.write(f" &FCI NORB={n},NELEC={h.n_electrons},MS2={h.n_alpha - h.n_beta},\n")
    out.write("  ORBSYM=" + ",".join("1" * n) + ",\n  ISYM=1,\n &END\n")
    eri = h.chemists_eri()
    for i in range(n):
        for j in range(i + 1):
            for k in range(n):
                for l in range(k + 1):
                    if i * (i + 1) // 2 + j < k * (k + 1) // 2 + l:
                        continue
                    v = eri[i, j, k, l]
                    if v != 0.0:
                        out.write(f"{float(v)!r} {i + 1} {j + 1} {k + 1} {l + 1}\n")
    for i in range(n):
        for j in range(i + 1):
            v = h.one_body[i, j]
            if v != 0.0:
                out.write(f"{float(v)!r} {i + 1} {j + 1} 0 0\n")
    out.write(f"{h.core_energy!r} 0 0 0 0\n")
    return out.getvalue()
