"""Acceptance suite: one test per criterion, each logged as PASS or FAIL."""

import contextlib
import io
import math
from fractions import Fraction

import mpmath
import numpy as np

from poolbounds.bounds import (
    entropy_bound,
    expected_unresolved_random,
    greedy_dual_bound,
    lower_threshold_pools,
    poisson_upper,
    recommend_design,
    tail_lower_bound,
    two_stage_lower,
)
from poolbounds.cli import main
from poolbounds.combinatorics import PositiveModel, s_of_i
from poolbounds.decode import candidate_positives, positive_pools
from poolbounds.design import PoolDesign, generate_bernoulli_design
from poolbounds.lp import (
    brute_force_min_design,
    build_primal,
    check_certificate,
    greedy_dual_certificate,
    solve_small,
)
from poolbounds.simulate import (
    bisection_search,
    estimate_random_design_unresolved,
    expected_unresolved_exact,
    run_campaign,
)

from acceptance_log import criterion
from oracles import binary_entropy_bits_mp, closure_bruteforce, random_design_exhaustive, poisson_series_mp

U = PositiveModel.uniform_k
Bern = PositiveModel.bernoulli

# frozen from the arbitrary-precision oracle (p=2, beta=0.2, eps=1)
THRESHOLD_ROWS = {
    10**4: dict(v_lower=2, two_stage_lower=0.0, v_rec=283, q_rec=0.24106892000685640033,
                poisson_upper=0.16320978486169717659, entropy_bound=27.460526282630790102),
    10**5: dict(v_lower=3, two_stage_lower=0.0, v_rec=401, q_rec=0.21223713860709640313,
                poisson_upper=0.041771591338078897565, entropy_bound=34.104642176558371252),
    10**6: dict(v_lower=4, two_stage_lower=0.0, v_rec=538, q_rec=0.19006115651385114056,
                poisson_upper=0.0092830284452125908247, entropy_bound=40.748524335034269616),
}


def test_01_closure_oracle_equivalence():
    with criterion(1, "closure decoding equals brute-force closure on 1000 random pairs", limit=10):
        rng = np.random.default_rng(101)
        for _ in range(1000):
            n = int(rng.integers(1, 13))
            v = int(rng.integers(0, 9))
            inc = rng.random((n, v)) < rng.uniform(0.1, 0.8)
            P = [x for x in range(n) if rng.random() < rng.uniform(0.0, 0.6)]
            d = PoolDesign(inc)
            got = candidate_positives(d, positive_pools(d, P))
            assert got == closure_bruteforce(inc.astype(int).tolist(), P)


def test_02_random_design_expectation():
    with criterion(2, "exact random-design expectation and Monte Carlo agreement", limit=60):
        value = expected_unresolved_random(3, 2, 0.5, Bern(3, 1.5)).value
        assert abs(value - 0.802734375) <= 1e-12
        assert random_design_exhaustive(3, 2, Fraction(1, 2), Fraction(3, 2)) == Fraction(411, 512)
        model = Bern(50, 2.0)
        est = estimate_random_design_unresolved(50, 10, 0.2, model, 100_000, 2024)
        exact = expected_unresolved_random(50, 10, 0.2, model).value
        # the exact side carries no sampling error
        assert abs(est.mean - exact) <= 3 * est.std_error, (est, exact)


def test_03_duality_sandwich():
    with criterion(3, "greedy certificate <= LP optimum <= best physical design", limit=300):
        for n in range(1, 5):
            for v in range(0, 3):
                models = [U(n, 1), Bern(n, 1.0)] + ([U(n, 2)] if n >= 2 else [])
                for m in models:
                    cert = greedy_dual_certificate(n, v, m).objective
                    value = solve_small(build_primal(n, v, m)).value
                    best = brute_force_min_design(n, v, m)[0]
                    assert cert <= value + 1e-8, (n, v, m)
                    assert value <= best + 1e-8, (n, v, m)
        cert = greedy_dual_certificate(3, 1, U(3, 1)).objective
        value = solve_small(build_primal(3, 1, U(3, 1))).value
        best = brute_force_min_design(3, 1, U(3, 1))[0]
        assert abs(best - 4 / 3) <= 1e-8
        assert cert <= value + 1e-8 <= 4 / 3 + 2e-8


def test_04_certificate_feasibility_grid():
    with criterion(4, "greedy certificates feasible and tight on the (n, v, prior) grid", limit=60):
        for n in (10, 50, 200):
            models = [U(n, k) for k in range(2, 6)] + [Bern(n, float(p)) for p in (1, 2, 5)]
            for v in range(2, 21):
                for m in models:
                    report = check_certificate(greedy_dual_certificate(n, v, m), n, v, m)
                    assert report.feasible, (n, v, m, report.violations[:3])
                    assert not report.loose_expected_tight, (n, v, m)


def test_05_hand_value():
    with criterion(5, "greedy dual bound at n=10, v=3, uniform k=2 is 22/15"):
        r = greedy_dual_bound(10, 3, U(10, 2))
        assert abs(r.value - 22 / 15) <= 1e-12
        assert s_of_i(10, 2, 3) == 4
        cert = greedy_dual_certificate(10, 3, U(10, 2))
        assert abs(cert.v - 1 / 15) <= 1e-15
        assert solve_small(build_primal(10, 3, U(10, 2))).value >= 22 / 15 - 1e-12


def test_06_threshold_floor():
    with criterion(6, "s(i) > n / 2**(v/i) over the n, i, v grid (exact integers)", limit=30):
        checked = 0
        for n in [round(10 ** (2 + e / 2)) for e in range(9)]:
            for i in range(1, 41):
                for v in range(1, 201):
                    s = s_of_i(n, i, v)
                    if s <= n:
                        # s > n 2^(-v/i)  <=>  s^i 2^v > n^i
                        assert s**i * 2**v > n**i, (n, i, v, s)
                        checked += 1
        assert checked > 0


def test_07_poisson_dominance():
    with criterion(7, "Poisson upper bound dominates the exact random-design expectation", limit=10):
        rng = np.random.default_rng(707)
        for _ in range(100):
            n = int(rng.integers(1, 3000))
            v = int(rng.integers(0, 200))
            q = float(rng.uniform(0, 1))
            p = float(rng.uniform(0.01, min(n, 20)))
            upper = poisson_upper(n, v, q, p).value
            assert upper >= expected_unresolved_random(n, v, q, Bern(n, p)).value
        # the truncated series plus its tail still covers the full sum
        for n, v, q, p in ((3, 2, 0.5, 1.5), (50, 10, 0.2, 2.0), (1000, 80, 0.1, 7.5)):
            assert poisson_upper(n, v, q, p).value >= float(poisson_series_mp(n, v, q, p)) * (1 - 1e-15)


def test_08_threshold_table_trend():
    with criterion(8, "threshold table cells match the oracle and follow the trends", limit=10):
        lower, upper = [], []
        for n, row in THRESHOLD_ROWS.items():
            v = lower_threshold_pools(n, 0.2)
            assert v == row["v_lower"]
            lo = two_stage_lower(n, v, 2.0, 0.2).value
            assert abs(lo - row["two_stage_lower"]) <= 1e-9
            v_rec, q_rec = recommend_design(n, 1.0)
            assert v_rec == row["v_rec"]
            assert abs(q_rec - row["q_rec"]) <= 1e-9
            up = poisson_upper(n, v_rec, q_rec, 2.0).value
            assert abs(up - row["poisson_upper"]) <= 1e-9
            assert abs(entropy_bound(Bern(n, 2.0)).value - row["entropy_bound"]) <= 1e-9
            lower.append(lo)
            upper.append(up)
        assert all(b >= a for a, b in zip(lower, lower[1:]))
        assert all(b <= a for a, b in zip(upper, upper[1:]))


def test_09_bisection_baseline():
    with criterion(9, "bisection uses at most 2|P| ceil(log2 n) tests and recovers P", limit=30):
        for n in (8, 64, 1024):
            rng = np.random.default_rng(900 + n)
            d = math.ceil(math.log2(n))
            for _ in range(10_000):
                P = set(np.flatnonzero(rng.random(n) < rng.uniform(0, 0.25)).tolist())
                tests, found = bisection_search(n, P)
                assert found == P
                assert tests <= max(1, 2 * len(P) * d), (n, sorted(P), tests)


def test_10_empirical_tail():
    with criterion(10, "empirical tail of unresolved negatives respects the mean-based bound", limit=60):
        design = generate_bernoulli_design(200, 20, 0.2, 10)
        model = Bern(200, 2.0)
        mu = expected_unresolved_exact(design, model)
        m = 10_000
        stats = run_campaign(design, model, m, 1, 10)
        for t in (1, 2, 5, 10):
            freq = stats.exceed_count(t) / m
            sigma = math.sqrt(freq * (1 - freq) / m)
            assert freq >= tail_lower_bound(mu, 200, t) - 5 * sigma, (t, freq, mu)


def _capture(argv):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(argv)
    assert code == 0, argv
    return buf.getvalue()


def test_11_determinism(tmp_path):
    with criterion(11, "seeded commands are byte-identical across runs and worker counts"):
        design = tmp_path / "d.json"
        _capture(["design", "--n", "200", "--v", "20", "--q", "0.2", "--seed", "5", "--output", str(design)])
        first = design.read_bytes()
        _capture(["design", "--n", "200", "--v", "20", "--q", "0.2", "--seed", "5", "--output", str(design)])
        assert design.read_bytes() == first
        commands = [
            ["campaign", "--design", str(design), "--prior", "bernoulli:2", "--instances", "10000",
             "--threshold", "5", "--seed", "1"],
            ["simulate", "--design", str(design), "--prior", "bernoulli:2", "--trials", "50000", "--seed", "7"],
            ["simulate", "--n", "50", "--v", "10", "--q", "0.2", "--prior", "uniform-k:2", "--trials", "20000",
             "--seed", "3"],
            ["design", "--n", "500", "--eps", "1", "--seed", "9"],
        ]
        for argv in commands:
            outs = []
            for workers in (1, 8, 1, 8):
                extra = ["--workers", str(workers)] if argv[0] != "design" else []
                outs.append(_capture(argv + extra))
            assert len(set(outs)) == 1, argv[0]
        unseeded = [
            ["table", "--sweep-n", "1e4,1e5,1e6", "--p", "2", "--beta", "0.2", "--eps", "1"],
            ["lp", "--n", "3", "--v", "2", "--prior", "uniform-k:1", "--certify", "--solve", "--bruteforce"],
        ]
        for argv in unseeded:
            assert _capture(argv) == _capture(argv)


def test_12_entropy_bound():
    with criterion(12, "entropy bound matches log2 C(n, k) and n h2(p/n)"):
        assert abs(entropy_bound(U(10, 2)).value - math.log2(45)) <= 1e-12
        n = 10**4
        expected = float(n * binary_entropy_bits_mp(mpmath.mpf(2) / n))
        assert abs(entropy_bound(Bern(n, 2.0)).value - expected) <= 1e-12
