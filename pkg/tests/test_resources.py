import io

import numpy as np
import pytest

from teqsci.errors import DegenerateFit
from teqsci.pauli import PauliSum
from teqsci.resources import (
    GateCount,
    count_gates,
    fit_power_law,
    ratio_scan,
    write_gate_csv,
    write_ratio_csv,
)

from conftest import system


def test_single_terms():
    assert count_gates(PauliSum.from_text("0.3 Z2", 3)) == GateCount(3, 0, 1, 1)
    assert count_gates(PauliSum.from_text("0.3 X0 Y1 Z2 X3", 4)) == GateCount(4, 6, 1, 1)


def test_identity_costs_nothing():
    g = count_gates(PauliSum.from_text("1.5 I\n0.2 Z0 Z1", 2))
    assert (g.n_cnot, g.n_rz, g.n_pauli_terms) == (2, 1, 2)


def test_per_term_rule(h6):
    w = h6.h.weights
    assert count_gates(h6.h).n_cnot == sum(2 * (int(p) - 1) for p in w if p > 0)


def test_h6_golden(h6):
    assert count_gates(h6.h) == GateCount(12, 9972, 918, 919)


def test_additive_over_concatenation(h4):
    a = PauliSum.from_text("0.1 X0 X1\n0.2 Z3", 8)
    b = PauliSum.from_text("0.4 Y0 Z1 Y2 Z5", 8)
    assert count_gates(a) + count_gates(b) == count_gates(a + b)


def test_fit_exact_power():
    n = np.array([4, 8, 12, 16, 20])
    fit = fit_power_law(n, 3.0 * n**5)
    assert fit.exponent == pytest.approx(5.0, abs=1e-9)
    assert fit.prefactor == pytest.approx(3.0)
    assert fit.r_squared == pytest.approx(1.0)


@pytest.mark.parametrize("n, c", [([1, 2, 3], [1, 2, 3]), ([2, 2, 2, 2], [1, 2, 3, 4]), ([1, 2, 3, 4], [1, 0, 1, 1])])
def test_fit_rejects_degenerate(n, c):
    with pytest.raises(DegenerateFit):
        fit_power_law(n, c)


def test_ratio_scan_small_chains():
    rows = ratio_scan([("h4", system("h4").mh), ("h6", system("h6").mh)])
    assert rows[0].ratio == pytest.approx(1.0, abs=0.1)
    assert 0.9 <= rows[1].ratio <= 1.4
    assert rows[1].r_gs == 85


def test_csv_headers(h4):
    buf = io.StringIO()
    write_gate_csv(buf, [count_gates(h4.h)])
    assert buf.getvalue().splitlines() == ["n_q,n_pauli_terms,n_cnot,n_rz", "8,185,1328,184"]
    buf = io.StringIO()
    write_ratio_csv(buf, ratio_scan([("h4", h4.mh)]))
    assert buf.getvalue().splitlines()[0] == "n_q,R_TE,R_GS,ratio"
