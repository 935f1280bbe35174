import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teqsci.errors import NonHermitianResidue, NormalizationError
from teqsci.integrals import MolecularHamiltonian
from teqsci.pauli import (
    PauliString,
    PauliSum,
    apply_to_basis,
    expectation,
    jordan_wigner,
    jordan_wigner_fermion,
)

from conftest import random_state
from test_integrals import symmetric_eri

PAULI = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1, -1]),
}


def kron_label(label, n):
    """Dense matrix of a label like 'X0 Z2'; qubit 0 is the least significant bit."""
    ops = ["I"] * n
    if label != "I":
        for tok in label.split():
            ops[int(tok[1:])] = tok[0]
    m = np.eye(1)
    for q in reversed(range(n)):
        m = np.kron(m, PAULI[ops[q]])
    return m


def annihilator(j, n):
    """Fock-space c_j with the sign of occupied modes below j."""
    dim = 1 << n
    m = np.zeros((dim, dim))
    for v in range(dim):
        if v >> j & 1:
            m[v ^ (1 << j), v] = (-1) ** bin(v & ((1 << j) - 1)).count("1")
    return m


def fock_hamiltonian(mh):
    n = 2 * mh.n_orbitals
    c = [annihilator(j, n) for j in range(n)]
    cd = [a.T for a in c]
    H = mh.core_energy * np.eye(1 << n)
    norb = mh.n_orbitals
    for p in range(norb):
        for q in range(norb):
            for s in range(2):
                H += mh.one_body[p, q] * cd[2 * p + s] @ c[2 * q + s]
    for p in range(norb):
        for q in range(norb):
            for r in range(norb):
                for t in range(norb):
                    v = mh.two_body[p, q, r, t]
                    if v == 0:
                        continue
                    for s in range(2):
                        for u in range(2):
                            H += 0.5 * v * cd[2 * p + s] @ cd[2 * q + u] @ c[2 * r + u] @ c[2 * t + s]
    return H


def random_molecule(seed, norb):
    rng = np.random.default_rng(seed)
    h1 = rng.normal(size=(norb, norb))
    return MolecularHamiltonian.from_chemists(1, 1, 0.3, h1 + h1.T, 0.1 * symmetric_eri(rng, norb))


def test_label_round_trip():
    p = PauliString.from_label("X0 Y2 Z3", 4)
    assert p.label == "X0 Y2 Z3"
    assert p.weight == 3
    assert PauliString(0, 0, 3).label == "I"


@settings(max_examples=60, deadline=None)
@given(x=st.integers(0, 15), z=st.integers(0, 15), nu=st.integers(0, 15))
def test_basis_action_matches_dense(x, z, nu):
    p = PauliString(x, z, 4)
    m = kron_label(p.label, 4)
    out, phase = apply_to_basis(p, nu)
    col = m[:, nu]
    assert np.flatnonzero(col).tolist() == [out]
    assert col[out] == pytest.approx(phase)


def test_number_operator_example():
    s = jordan_wigner_fermion([(1.0, [(0, True), (0, False)])], 1)
    assert s.to_text() == PauliSum.from_text("0.5 I\n-0.5 Z0", 1).to_text()


def test_hopping_example():
    s = jordan_wigner_fermion([(1.0, [(0, True), (2, False)]), (1.0, [(2, True), (0, False)])], 3)
    want = PauliSum.from_text("0.5 X0 Z1 X2\n0.5 Y0 Z1 Y2", 3)
    assert np.allclose(s.to_matrix(), want.to_matrix())
    assert len(s) == 2


def test_h2_fixture_matches_fock_oracle(h2):
    assert np.allclose(h2.h.to_matrix(), fock_hamiltonian(h2.mh), atol=1e-12)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_three_orbital_matches_fock_oracle(seed):
    mh = random_molecule(seed, 3)
    assert np.allclose(jordan_wigner(mh).to_matrix(), fock_hamiltonian(mh), atol=1e-11)


def test_jw_is_hermitian_and_number_conserving(h4):
    m = h4.h.to_matrix()
    assert np.allclose(m, m.conj().T, atol=1e-12)
    n_op = sum(annihilator(j, 8).T @ annihilator(j, 8) for j in range(8))
    assert np.allclose(m @ n_op, n_op @ m, atol=1e-10)


def test_h4_term_count(h4):
    assert len(h4.h) == 185


def test_canonical_merge_and_order():
    s = PauliSum([1, 0, 1, 3], [0, 0, 0, 0], [0.25, 1.0, 0.25, 1e-14], 2)
    assert [(p.label, w) for w, p in s.terms] == [("I", 1.0), ("X0", 0.5)]


def test_imaginary_residue_rejected():
    with pytest.raises(NonHermitianResidue):
        PauliSum([1], [0], [0.5j], 1)


def test_text_round_trip(h4):
    again = PauliSum.from_text(h4.h.to_text(), h4.n_qubits)
    assert np.array_equal(again.x_masks, h4.h.x_masks)
    assert np.array_equal(again.coeffs, h4.h.coeffs)


def test_addition_concatenates(h4):
    half = PauliSum(h4.h.x_masks, h4.h.z_masks, 0.5 * h4.h.coeffs, h4.n_qubits)
    assert np.allclose((half + half).to_matrix(), h4.h.to_matrix())


def test_apply_matches_matrix(h4):
    psi = random_state(np.random.default_rng(3), h4.n_qubits)
    assert np.allclose(h4.h.apply(psi.amplitudes), h4.h.to_matrix() @ psi.amplitudes, atol=1e-12)


def test_expectation_of_hf_is_real(h4):
    e = expectation(h4.h, h4.hf)
    m = h4.h.to_matrix()
    idx = int(np.flatnonzero(h4.hf.amplitudes)[0])
    assert e == pytest.approx(m[idx, idx].real, abs=1e-12)


def test_expectation_needs_normalized_state(h4):
    with pytest.raises(NormalizationError):
        expectation(h4.h, 2 * h4.hf.amplitudes)
