import io
import math
import warnings

import numpy as np
import pytest

from teqsci.analysis import (
    SpectralData,
    classify,
    excitation_order,
    fidelity,
    infinite_time_average,
    p_mu_curve,
    p_mu_curves,
    scaling_exponent,
    series_expansion_check,
    trotter_diagnostics,
    write_pmu_csv,
    write_trotter_csv,
    class_averaged_curves,
    hf_fidelity,
)
from teqsci.errors import DivergenceWarning, InsufficientData, NormalizationError
from teqsci.pauli import PauliSum
from teqsci.statevec import StateVector, hartree_fock_index

from conftest import system

ONE_QUBIT_X = PauliSum.from_text("1.0 X0", 1)


def test_excitation_order():
    hf = hartree_fock_index(2, 2)
    assert excitation_order(hf, hf) == 0
    assert excitation_order(hf ^ 0b1 ^ 0b10000, hf) == 1
    assert excitation_order(0b11110000, hf) == 4
    groups = classify([hf, 0b11110000, hf ^ 0b1 ^ 0b10000], hf)
    assert {k: v.members for k, v in groups.items()} == {0: (hf,), 1: (hf ^ 0b10001,), 4: (0b11110000,)}


def test_p_mu_of_hf_at_zero(h4):
    mu = int(np.flatnonzero(h4.hf.amplitudes)[0])
    assert p_mu_curve(h4.h, h4.hf, mu, [0.0])[0] == pytest.approx(1.0)


def test_p_mu_one_qubit_closed_form():
    ts = [0.05, 0.3, 1.0]
    got = p_mu_curve(ONE_QUBIT_X, StateVector.basis(1, 0), 1, ts)
    assert np.allclose(got, np.sin(ts) ** 2, atol=1e-12)


def test_probabilities_sum_to_one(h4):
    p = p_mu_curves(h4.h, h4.hf, h4.basis.states, [0.3, 1.0, 2.5])
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_scaling_exponent_exact_power():
    t = np.array([0.1, 0.2, 0.3, 0.4])
    assert scaling_exponent(t, t**4) == pytest.approx(4.0, abs=1e-9)


@pytest.mark.parametrize("t, p", [([0.1, 0.2, 0.3], [1, 2, 3]), ([0.1, 0.2, 0.3, 0.4], [1, 1, 0, 1])])
def test_scaling_exponent_rejects_bad_data(t, p):
    with pytest.raises(InsufficientData):
        scaling_exponent(t, p)


def test_spectral_decomposition_reproduces_evolution(h4):
    spec = SpectralData.compute(h4.h, h4.hf)
    assert np.sum(np.abs(spec.overlaps_initial) ** 2) == pytest.approx(1.0, abs=1e-9)
    mu = int(h4.basis.states[5])
    assert spec.p_mu(mu, 1.3) == pytest.approx(p_mu_curve(h4.h, h4.hf, mu, [1.3])[0], abs=1e-10)


def test_infinite_time_average_sums_to_one(h4):
    pbar = infinite_time_average(SpectralData.compute(h4.h, h4.hf))
    assert sum(pbar.values()) == pytest.approx(1.0, abs=1e-9)


def test_infinite_time_average_diagonal_hamiltonian():
    h = PauliSum.from_text("0.3 Z0\n-0.7 Z1\n0.2 Z0 Z1", 2)
    a = np.zeros(4, complex)
    a[0b01] = 1.0
    spec = SpectralData.compute(h, StateVector(a))
    assert infinite_time_average(spec, [0b01]) == {0b01: pytest.approx(1.0)}


def test_infinite_time_average_matches_long_time_mean(h4):
    spec = SpectralData.compute(h4.h, h4.hf)
    mu = int(h4.basis.states[3])
    ts = np.linspace(0, 4000, 20001)
    mean = np.mean([spec.p_mu(mu, t) for t in ts])
    assert mean == pytest.approx(infinite_time_average(spec, [mu])[mu], abs=2e-3)


def test_series_at_zero_time(h4):
    mu = int(np.flatnonzero(h4.hf.amplitudes)[0])
    s = series_expansion_check(h4.h, h4.hf, mu, 0.0, 3)
    assert s.series == pytest.approx(1.0) and s.exact == pytest.approx(1.0)


def test_series_one_qubit():
    s = series_expansion_check(ONE_QUBIT_X, StateVector.basis(1, 0), 1, 0.1, 4)
    assert s.series == pytest.approx(math.sin(0.1) ** 2, abs=1e-8)


def test_series_double_excitation_h4(h4):
    hf = hartree_fock_index(2, 2)
    doubles = [int(m) for m in h4.basis.states if excitation_order(int(m), hf) == 2]
    mu = doubles[np.random.default_rng(0).integers(len(doubles))]
    assert series_expansion_check(h4.h, h4.hf, mu, 0.3, 8).residual < 1e-6


def test_series_residual_shrinks_with_order(h4):
    mu = int(h4.basis.states[5])  # symmetry-allowed, nonzero moments
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DivergenceWarning)
        res = [series_expansion_check(h4.h, h4.hf, mu, 0.4, k).residual for k in range(2, 12)]
    floor = 1e-13
    for a, b in zip(res, res[1:]):
        assert b <= a or b < floor


def test_series_warns_when_truncated_too_early(h4):
    mu = int(h4.basis.states[5])  # symmetry-allowed, nonzero moments
    with pytest.warns(DivergenceWarning):
        series_expansion_check(h4.h, h4.hf, mu, 2.0, 2)


def test_trotter_diagnostics_single_term():
    d = trotter_diagnostics(PauliSum.from_text("0.4 X0 X1", 2), StateVector.basis(2, 0), 1.0, 0.5)
    assert d.infidelity < 1e-12 and d.energy_violation < 1e-12


def test_trotter_diagnostics_commuting_terms():
    h = PauliSum.from_text("0.4 Z0\n0.3 Z0 Z1\n-0.2 Z1", 2)
    a = np.zeros(4, complex)
    a[0b01] = 1.0
    d = trotter_diagnostics(h, StateVector(a), 1.0, 0.25)
    assert d.infidelity <= 1e-12 and d.energy_violation <= 1e-12


def test_trotter_diagnostics_converge(h4):
    coarse = trotter_diagnostics(h4.h, h4.hf, 1.0, 0.2)
    fine = trotter_diagnostics(h4.h, h4.hf, 1.0, 0.1)
    assert fine.infidelity < coarse.infidelity
    assert fine.energy_violation < coarse.energy_violation


def test_fidelity_basics():
    a, b = StateVector.basis(2, 0), StateVector.basis(2, 3)
    assert fidelity(a, a) == pytest.approx(1.0)
    assert fidelity(a, b) == 0.0
    with pytest.raises(NormalizationError):
        fidelity(a, 2 * b.amplitudes)


def test_fidelity_constant_under_evolution(h4):
    from teqsci.statevec import evolve_exact

    gs = h4.basis.embed(h4.gs)
    f0 = fidelity(gs, h4.hf)
    for t in (0.7, 2.0):
        assert fidelity(gs, evolve_exact(h4.h, h4.hf, t)) == pytest.approx(f0, abs=1e-9)


def test_hf_fidelity_decreases_along_chain():
    f = [hf_fidelity(system(n).gs, system(n).basis) for n in ("h4", "h6", "h8")]
    assert f[0] > f[1] > f[2]


def test_csv_emitters(h4):
    cc = class_averaged_curves(h4.h, h4.hf, [0.1, 0.2], r=20)
    buf = io.StringIO()
    write_pmu_csv(buf, cc)
    assert buf.getvalue().splitlines()[0] == "t,class,mean_p"
    buf = io.StringIO()
    write_trotter_csv(buf, [(0.1, trotter_diagnostics(h4.h, h4.hf, 0.2, 0.1))])
    assert buf.getvalue().splitlines()[0] == "dt,infidelity,energy_violation,leaked_weight"
