import functools

import numpy as np
import pytest

from teqsci.cli import fixture_path
from teqsci.integrals import load_fcidump
from teqsci.pauli import jordan_wigner
from teqsci.statevec import SectorBasis, fci_ground_state, hartree_fock_state


class System:
    """A fixture molecule with its qubit Hamiltonian, sector and FCI solution."""

    def __init__(self, name):
        self.name = name
        self.mh = load_fcidump(fixture_path(name))
        self.h = jordan_wigner(self.mh)
        self.n_qubits = self.h.n_qubits
        self.basis = SectorBasis.build(self.n_qubits, self.mh.n_alpha, self.mh.n_beta)
        self.hf = hartree_fock_state(self.n_qubits, self.mh.n_alpha, self.mh.n_beta)

    @functools.cached_property
    def fci(self):
        return fci_ground_state(self.h, self.basis)

    @property
    def e_fci(self):
        return self.fci[0]

    @property
    def gs(self):
        return self.fci[1]


@functools.lru_cache(maxsize=None)
def system(name) -> System:
    return System(name)


@pytest.fixture(scope="session")
def h2():
    return system("h2")


@pytest.fixture(scope="session")
def h4():
    return system("h4")


@pytest.fixture(scope="session")
def h6():
    return system("h6")


def random_state(rng, n_qubits, states=None):
    """Normalized random complex vector, optionally supported on ``states``."""
    from teqsci.statevec import StateVector

    a = np.zeros(1 << n_qubits, dtype=complex)
    idx = np.arange(1 << n_qubits) if states is None else np.asarray(states)
    a[idx] = rng.normal(size=idx.size) + 1j * rng.normal(size=idx.size)
    return StateVector(a / np.linalg.norm(a))


# criterion id -> list of (check name, passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, name: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((name, bool(passed), detail))
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[cid]
        ok = all(p for _, p, _ in checks)
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {cid} ({sum(p for _, p, _ in checks)}/{len(checks)} checks)")
        for name, p, detail in checks:
            tr.write_line(f"    {'ok  ' if p else 'FAIL'} {name}: {detail}")
