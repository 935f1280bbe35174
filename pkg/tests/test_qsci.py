import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teqsci.errors import CapacityError, NotReached
from teqsci.qsci import (
    Subspace,
    TimeGrid,
    find_threshold_R,
    project_hamiltonian,
    r_gs,
    ranked_amplitudes,
    run_gs_qsci,
    run_single_time,
    run_time_average,
    shots_per_time,
    subspace_energy,
    truncated_gs_initial_state,
)
from teqsci.sampler import SelectionPolicy
from teqsci.statevec import EvolutionPlan, build_sector_hamiltonian

from conftest import system


def test_subspace_rejects_duplicates_and_empty():
    with pytest.raises(ValueError):
        Subspace((1, 1))
    with pytest.raises(ValueError):
        Subspace(())


def test_dense_and_sparse_projection_agree(h6):
    members = h6.basis.states[::5].tolist()
    dense = project_hamiltonian(h6.h, members)
    sparse = project_hamiltonian(h6.h, members, sparse=True).toarray()
    assert np.max(np.abs(dense - sparse)) < 1e-12


def test_projection_matches_full_matrix_block(h4):
    members = [int(m) for m in h4.basis.states[[0, 3, 7, 20, 35]]]
    full = h4.h.to_matrix()
    assert np.max(np.abs(project_hamiltonian(h4.h, members) - full[np.ix_(members, members)])) < 1e-12


def test_projection_matches_sector_matrix(h6):
    pos = np.arange(0, h6.basis.dimension, 7)
    members = h6.basis.states[pos].tolist()
    sector = build_sector_hamiltonian(h6.h, h6.basis).toarray()
    assert np.max(np.abs(project_hamiltonian(h6.h, members) - sector[np.ix_(pos, pos)])) < 1e-12


def test_full_sector_recovers_fci(h4):
    e, _ = subspace_energy(h4.h, h4.basis.states.tolist())
    assert e == pytest.approx(h4.e_fci, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), r=st.integers(1, 36))
def test_variational_bound_and_monotonicity(seed, r):
    h4 = system("h4")
    order = np.random.default_rng(seed).permutation(h4.basis.states).tolist()
    e_small, _ = subspace_energy(h4.h, order[:r])
    assert e_small >= h4.e_fci - 1e-12
    if r < 36:
        e_big, _ = subspace_energy(h4.h, order[: r + 1])
        assert e_big <= e_small + 1e-12


def test_gs_qsci_error_nonincreasing_in_r(h6):
    errs = [run_gs_qsci(h6.h, h6.basis, h6.gs, r, h6.e_fci).energy_error for r in (10, 40, 85, 200)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))
    assert errs[-1] >= -1e-12


def test_gs_qsci_capacity(h4):
    with pytest.raises(CapacityError):
        run_gs_qsci(h4.h, h4.basis, h4.gs, 37)


def test_ranked_amplitudes_puts_hf_first(h4):
    assert ranked_amplitudes(h4.basis, h4.gs)[0] == int(np.flatnonzero(h4.hf.amplitudes)[0])


def test_find_threshold_simple():
    errs = {r: 1.0 / r for r in range(1, 101)}
    assert find_threshold_R(errs.__getitem__, 0.1, 100) == 11


def test_find_threshold_requires_consecutive_passes():
    # dips below at 5 but not at 6
    def err(r):
        return 0.0 if r == 5 or r >= 9 else 1.0

    assert find_threshold_R(err, 0.5, 20) == 9


def test_find_threshold_not_reached():
    with pytest.raises(NotReached):
        find_threshold_R(lambda r: 1.0, 0.5, 10)


@settings(max_examples=40, deadline=None)
@given(errs=st.lists(st.floats(0, 1), min_size=3, max_size=60), tol=st.floats(0.05, 0.95))
def test_find_threshold_matches_linear_scan_on_monotone(errs, tol):
    errs = sorted(errs, reverse=True)
    n = len(errs)
    fn = lambda r: errs[r - 1]
    if errs[-1] >= tol:
        with pytest.raises(NotReached):
            find_threshold_R(fn, tol, n)
        return
    want = next(r for r in range(1, n + 1) if errs[r - 1] < tol)
    assert find_threshold_R(fn, tol, n) == want


def test_r_gs_small_chain(h4):
    r = r_gs(h4.h, h4.basis, h4.gs, h4.e_fci)
    assert subspace_energy(h4.h, ranked_amplitudes(h4.basis, h4.gs)[:r].tolist())[0] - h4.e_fci < 1e-3
    assert subspace_energy(h4.h, ranked_amplitudes(h4.basis, h4.gs)[: r - 1].tolist())[0] - h4.e_fci >= 1e-3


def test_single_time_statevector_vs_many_shots(h4):
    # R values that do not split a degenerate spin pair
    plan = EvolutionPlan.exact(1.0)
    for r in (7, 9):
        a = run_single_time(h4.h, h4.hf, plan, SelectionPolicy.top_amplitude(r), e_exact=h4.e_fci)
        b = run_single_time(h4.h, h4.hf, plan, SelectionPolicy.top_r(r), shots=(10**7, 1), e_exact=h4.e_fci)
        assert set(a.subspace.members) == set(b.subspace.members)


def test_trotter_post_selection_stays_in_sector(h4):
    res = run_single_time(h4.h, h4.hf, EvolutionPlan.trotter(1.0, 0.25), SelectionPolicy.all_distinct(),
                          shots=(20000, 5), e_exact=h4.e_fci)
    assert np.all(h4.basis.contains(res.subspace.members))
    assert res.metadata["policy"]["sector"] == [2, 2]
    assert res.energy >= h4.e_fci - 1e-12


def test_seeded_run_is_byte_deterministic(h4):
    grid = TimeGrid(0.5, 1.5, 0.5)
    runs = [
        run_time_average(h4.h, h4.hf, grid, 0.1, SelectionPolicy.top_r(10), 3000, 42, h4.e_fci).to_json()
        for _ in range(2)
    ]
    assert runs[0] == runs[1]


def test_time_grid():
    g = TimeGrid(1.0, 2.0, 0.1)
    assert g.m == 11
    assert g.times[-1] == pytest.approx(2.0)
    assert shots_per_time(885_000, g) == 80455
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, 0.3)


def test_truncated_initial_state(h6):
    psi, e_i = truncated_gs_initial_state(h6.h, h6.basis, h6.gs, 20)
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)
    assert e_i > h6.e_fci
    assert np.count_nonzero(psi.amplitudes) <= 20
