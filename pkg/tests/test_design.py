import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import binom

from poolbounds.design import (
    PoolDesign,
    design_stats,
    generate_bernoulli_design,
    singleton_design,
)

D4 = PoolDesign([[1, 0, 0], [1, 1, 0], [0, 1, 1], [0, 0, 1]])


class TestGenerate:
    def test_extreme_probabilities(self):
        assert not generate_bernoulli_design(7, 5, 0.0, 3).incidence.any()
        assert generate_bernoulli_design(7, 5, 1.0, 3).incidence.all()

    def test_popcount_in_central_interval(self):
        d = generate_bernoulli_design(100, 20, 0.3, 7)
        lo, hi = binom.ppf([0.00005, 0.99995], 2000, 0.3)
        assert lo <= d.incidence.sum() <= hi

    @pytest.mark.parametrize("q", [-0.1, 1.5])
    def test_rejects_bad_q(self, q):
        with pytest.raises(ValueError):
            generate_bernoulli_design(3, 3, q, 0)

    def test_deterministic(self):
        a = generate_bernoulli_design(50, 30, 0.25, 99)
        b = generate_bernoulli_design(50, 30, 0.25, 99)
        assert a == b
        assert a != generate_bernoulli_design(50, 30, 0.25, 100)

    def test_rows_independent_of_n(self):
        # rows come from per-object counter blocks
        small = generate_bernoulli_design(10, 12, 0.5, 4)
        big = generate_bernoulli_design(40, 12, 0.5, 4)
        assert np.array_equal(big.incidence[:10], small.incidence)

    def test_frozen_bits(self):
        # pins the generator so a silent RNG change is caught
        d = generate_bernoulli_design(3, 8, 0.5, 2024)
        assert d.rows() == FROZEN_ROWS

    def test_cellwise_frequency(self):
        total = np.zeros((10, 10))
        for seed in range(10_000):
            total += generate_bernoulli_design(10, 10, 0.5, seed).incidence
        freq = total / 10_000
        sigma = np.sqrt(0.25 / 10_000)
        assert np.all(np.abs(freq - 0.5) <= 5 * sigma)


FROZEN_ROWS = ["11000100", "00001110", "01110000"]


class TestSingleton:
    def test_identity(self):
        d = singleton_design(3)
        assert d.v == 3
        assert np.array_equal(d.incidence, np.eye(3, dtype=bool))

    def test_empty(self):
        d = singleton_design(0)
        assert (d.n, d.v) == (0, 0)

    @pytest.mark.parametrize("n", [1, 5, 17])
    def test_no_non_singleton_pools(self, n):
        assert design_stats(singleton_design(n)).non_singleton_pool_count == 0


class TestStats:
    def test_singleton(self):
        st_ = design_stats(singleton_design(5))
        assert st_.pool_sizes == (1,) * 5
        assert st_.non_singleton_pool_count == 0

    def test_four_object_example(self):
        s = design_stats(D4)
        assert s.pool_sizes == (2, 2, 2)
        assert s.non_singleton_pool_count == 3
        assert s.empty_signature_objects == 0

    def test_all_zero(self):
        s = design_stats(PoolDesign(np.zeros((4, 2), dtype=bool)))
        assert s.empty_signature_objects == 4
        assert s.non_singleton_pool_count == 0


class TestSerialization:
    def test_schema(self):
        doc = json.loads(D4.to_json())
        assert doc == {"n": 4, "v": 3, "rows": ["100", "110", "011", "001"]}

    def test_round_trip_random(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            n, v = rng.integers(0, 30, size=2)
            d = PoolDesign(rng.random((n, v)) < rng.random())
            back = PoolDesign.from_json(d.to_json())
            assert back == d
            assert back.incidence.shape == (n, v)

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "d.json"
        D4.save(path)
        assert PoolDesign.load(path) == D4

    @pytest.mark.parametrize(
        "doc",
        [
            {"n": 2, "v": 2, "rows": ["01"]},
            {"n": 1, "v": 2, "rows": ["012"]},
            {"n": 1, "v": 2, "rows": ["0x"]},
            {"n": 1, "rows": ["01"]},
        ],
    )
    def test_malformed(self, doc):
        with pytest.raises(ValueError):
            PoolDesign.from_dict(doc)

    def test_immutable(self):
        with pytest.raises(ValueError):
            D4.incidence[0, 0] = False

    @given(st.lists(st.lists(st.booleans(), min_size=4, max_size=4), max_size=12))
    def test_signatures_pack_rows(self, rows):
        d = PoolDesign(np.array(rows, dtype=bool).reshape(len(rows), 4))
        for x, sig in enumerate(d.signatures):
            assert {y for y in range(4) if sig >> y & 1} == d.signature(x)
