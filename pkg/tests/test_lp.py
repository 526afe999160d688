import dataclasses
import math

import numpy as np
import pytest
from scipy import sparse
from scipy.optimize import linprog

from poolbounds._validation import CapacityError
from poolbounds.bounds import b_k_estimate, greedy_dual_bound
from poolbounds.combinatorics import PositiveModel
from poolbounds.lp import (
    LinearProgram,
    brute_force_min_design,
    build_dual,
    build_primal,
    check_certificate,
    greedy_dual_certificate,
    solve_small,
)

U = PositiveModel.uniform_k
Bern = PositiveModel.bernoulli


def highs_value(lp):
    A = lp.A.toarray()
    sign = np.array([1.0 if s == "<=" else -1.0 for s in lp.senses])
    c = lp.c if lp.direction == "min" else -lp.c
    res = linprog(c, A_ub=A * sign[:, None], b_ub=lp.b * sign, method="highs")
    assert res.status == 0
    return res.fun if lp.direction == "min" else -res.fun


def toy(direction, c, rows, senses, b):
    A = sparse.csr_array(np.array(rows, dtype=float))
    names = tuple(f"x_{k}" for k in range(len(c)))
    return LinearProgram(direction, np.array(c, float), A, tuple(senses), np.array(b, float), names,
                         tuple(f"r_{r}" for r in range(len(b))))


class TestBuilders:
    def test_counts_n3(self):
        p = build_primal(3, 2, U(3, 1))
        assert (p.num_variables, p.num_constraints) == (14, 15)
        d = build_dual(3, 2, U(3, 1))
        assert d.num_variables == 15
        assert sum(r.startswith("pattern_") for r in d.row_names) == 4
        assert sum(r.startswith("gain_") for r in d.row_names) == 10

    @pytest.mark.parametrize("n", [0, 1, 7, 20])
    def test_variable_count_formula(self, n):
        assert build_primal(n, 3, U(n, 0)).num_variables == (n + 1) + (n + 1) * (n + 2) // 2

    def test_binomials_exact(self):
        n = 12
        p = build_primal(n, 4, Bern(n, 2.0))
        A = p.A.toarray()
        col = {name: k for k, name in enumerate(p.names)}
        for i in range(n + 1):
            row = p.row_names.index(f"cover_{i}")
            for j in range(i, n + 1):
                assert A[row, col[f"w_{i}_{j}"]] == math.comb(n - i, j - i)
        budget = p.row_names.index("budget")
        assert [A[budget, col[f"w_{j}"]] for j in range(n + 1)] == [math.comb(n, j) for j in range(n + 1)]

    def test_separating_witness(self):
        n = 4
        for v, feasible in ((4, True), (3, False)):
            p = build_primal(n, v, U(n, 2))
            x = np.zeros(p.num_variables)
            col = {name: k for k, name in enumerate(p.names)}
            for j in range(n + 1):
                x[col[f"w_{j}"]] = 1.0
                x[col[f"w_{j}_{j}"]] = 1.0
            Ax = p.A @ x
            ok = all((a <= b + 1e-12) if s == "<=" else (a >= b - 1e-12) for a, s, b in zip(Ax, p.senses, p.b))
            assert ok == feasible
            assert p.c @ x == 0.0

    def test_dual_zero_feasible(self):
        d = build_dual(5, 2, Bern(5, 1.0))
        assert (d.A @ np.zeros(d.num_variables) <= d.b).all()

    def test_finite_at_cap(self):
        p = build_primal(400, 30, Bern(400, 2.0))
        assert np.isfinite(p.A.data).all()
        with pytest.raises(CapacityError):
            build_primal(401, 3, U(401, 1))

    def test_lp_export(self):
        text = build_primal(2, 1, U(2, 1)).to_lp_format()
        assert text.startswith("Minimize\n obj:")
        assert "budget: w_0 + 2 w_1 + w_2 <= 2" in text
        assert "closed_1_2: - w_2 + w_1_2 <= 0" in text
        dual = build_dual(2, 1, U(2, 1)).to_lp_format()
        assert dual.startswith("Maximize\n obj: - 2 v + v_0 + v_1 + v_2")
        assert text.rstrip().endswith("End")


class TestSolver:
    def test_toy_optimal(self):
        r = solve_small(toy("max", [3, 2], [[1, 1], [1, 3]], ["<=", "<="], [4, 6]))
        assert r.status == "optimal"
        assert r.value == pytest.approx(12.0)

    def test_toy_infeasible(self):
        r = solve_small(toy("min", [1, 1], [[1, 1], [1, 1]], ["<=", ">="], [1, 2]))
        assert r.status == "infeasible"

    def test_toy_unbounded(self):
        r = solve_small(toy("max", [1, 0], [[0, 1]], ["<="], [1]))
        assert r.status == "unbounded"

    def test_negative_rhs_and_equality(self):
        r = solve_small(toy("min", [1, 2], [[-1, -1], [1, -1]], ["<=", "="], [-3, 1]))
        assert r.value == pytest.approx(4.0)
        assert r.x == pytest.approx([2.0, 1.0])

    def test_capacity(self):
        with pytest.raises(CapacityError):
            solve_small(build_primal(20, 3, U(20, 1)))

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_strong_duality_and_highs(self, n):
        for v in range(0, 4):
            for m in (U(n, 1), U(n, min(2, n)), Bern(n, 1.0)):
                primal = solve_small(build_primal(n, v, m)).value
                dual = solve_small(build_dual(n, v, m)).value
                assert primal == pytest.approx(dual, abs=1e-8)
                assert primal == pytest.approx(highs_value(build_primal(n, v, m)), abs=1e-8)

    def test_enough_patterns_gives_zero(self):
        for n in (2, 4, 6):
            assert solve_small(build_primal(n, n, Bern(n, 1.0))).value == pytest.approx(0.0, abs=1e-12)

    def test_deterministic(self):
        lp = build_primal(6, 3, Bern(6, 2.0))
        a, b = solve_small(lp), solve_small(lp)
        assert a.value == b.value and np.array_equal(a.x, b.x)

    @pytest.mark.parametrize("k", [1, 2, 3, 5, 6])
    def test_above_closed_form_floor(self, k):
        n = 12
        for v in (1, 3, 5, 8):
            value = solve_small(build_primal(n, v, U(n, k))).value
            assert value >= b_k_estimate(n, v, k).value - 1e-8


class TestCertificate:
    def test_hand_values(self):
        cert = greedy_dual_certificate(10, 3, U(10, 2))
        assert cert.v_i[2] == 2.0
        assert cert.v == pytest.approx(1 / 15, rel=1e-15)
        assert cert.objective == pytest.approx(22 / 15, abs=1e-12)
        report = check_certificate(cert, 10, 3, U(10, 2))
        assert report.feasible
        assert report.tight == [[2, 2], [2, 3]]
        assert report.loose_expected_tight == []

    def test_zero_when_patterns_suffice(self):
        cert = greedy_dual_certificate(10, 6, U(10, 2))
        assert cert.objective == 0.0 and cert.v == 0.0 and not cert.v_ij

    @pytest.mark.parametrize("n", [10, 50, 200])
    def test_matches_bound_module(self, n):
        for v in (2, 7, 13, 20):
            for m in (U(n, 3), Bern(n, 2.0)):
                assert greedy_dual_certificate(n, v, m).objective == pytest.approx(
                    greedy_dual_bound(n, v, m).value, abs=1e-12, rel=1e-12
                )

    def test_half_v_violates_at_argmax(self):
        cert = greedy_dual_certificate(10, 3, U(10, 2))
        broken = dataclasses.replace(cert, v=cert.v / 2)
        report = check_certificate(broken, 10, 3, U(10, 2))
        assert not report.feasible
        pattern = [x for x in report.violations if x["constraint"] == "pattern"]
        assert greedy_dual_bound(10, 3, U(10, 2)).details["argmax_j"] in [x["j"] for x in pattern]

    def test_zero_certificate_feasible(self):
        cert = greedy_dual_certificate(10, 3, U(10, 2))
        zero = dataclasses.replace(cert, v=0.0, v_i=np.zeros(11), v_ij={}, objective=0.0)
        assert check_certificate(zero, 10, 3, U(10, 2)).feasible

    def test_dimension_mismatch(self):
        cert = greedy_dual_certificate(10, 3, U(10, 2))
        with pytest.raises(ValueError):
            check_certificate(cert, 11, 3, U(11, 2))

    def test_below_lp_optimum(self):
        for n in range(2, 9):
            for v in range(0, 5):
                for m in (U(n, 1), U(n, 2), Bern(n, 1.5)):
                    cert = greedy_dual_certificate(n, v, m).objective
                    assert cert <= solve_small(build_primal(n, v, m)).value + 1e-8


class TestBruteForce:
    def test_single_pool(self):
        value, design = brute_force_min_design(3, 1, U(3, 1))
        assert value == pytest.approx(4 / 3, abs=1e-12)
        assert design.incidence.sum() in (1, 2)

    def test_enough_pools(self):
        value, design = brute_force_min_design(3, 3, U(3, 1))
        assert value == 0.0

    def test_capacity(self):
        with pytest.raises(CapacityError):
            brute_force_min_design(8, 3, U(8, 1))

    def test_relaxation_below_designs(self):
        for n in range(1, 5):
            for v in range(0, 3):
                for m in (U(n, 1), U(n, min(2, n)), Bern(n, 1.0)):
                    lp = solve_small(build_primal(n, v, m)).value
                    assert lp <= brute_force_min_design(n, v, m)[0] + 1e-8
