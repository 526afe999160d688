"""Sampling, Monte Carlo estimation and campaign statistics.

Instance ``r`` of a run with seed ``s`` always draws row ``r`` of the
positive stream for ``s``, so results do not depend on how instances are
split into chunks or across worker threads.  Tallies are accumulated as
Python integers, which makes aggregation exact and order free.
"""

import bisect
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _rng
from ._validation import CapacityError, check_count, check_seed
from .decode import _index_set, unresolved_counts
from .design import PoolDesign, design_stats

ENUMERATION_MAX_SETS = 10**6
ENUMERATION_MAX_BERNOULLI_N = 20
# signatures larger than this make inclusion-exclusion too expensive
_MAX_SIGNATURE_FOR_EXACT = 18
_CHUNK_CELLS = 1 << 21


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    trials: int
    method: str = "monte-carlo"

    def to_dict(self):
        return {"mean": self.mean, "std_error": self.std_error, "trials": self.trials, "method": self.method}


@dataclass
class CampaignStats:
    instances: int
    per_instance_individual_tests: np.ndarray
    per_instance_unresolved: np.ndarray
    mean_individual_tests: float
    std_error_individual_tests: float
    threshold: int
    exceed: int
    design_non_singleton_pools: int

    def exceed_count(self, t):
        """Instances with at least ``t`` unresolved negatives."""
        return int((self.per_instance_unresolved >= t).sum())

    def to_dict(self):
        return {
            "instances": self.instances,
            "design_non_singleton_pools": self.design_non_singleton_pools,
            "mean_individual_tests": self.mean_individual_tests,
            "std_error_individual_tests": self.std_error_individual_tests,
            "threshold": self.threshold,
            "exceed_count": self.exceed,
            "per_instance_individual_tests": self.per_instance_individual_tests.tolist(),
            "per_instance_unresolved": self.per_instance_unresolved.tolist(),
        }


def _check_sampleable(model):
    if model.kind == "explicit":
        raise ValueError("sampling from an explicit prior is not supported")


def _positives_from_uniforms(model, u):
    m, n = u.shape
    if model.kind == "bernoulli":
        return u < (model.p / n if n else 0.0)
    k = model.k
    X = np.zeros((m, n), dtype=bool)
    if k == n:
        X[:] = True
    elif k:
        # the k smallest uniforms form a uniform k-subset
        idx = np.argpartition(u, k - 1, axis=1)[:, :k]
        X[np.arange(m)[:, None], idx] = True
    return X


def sample_positive_matrix(model, seed, start, stop):
    """Positive sets of instances ``start:stop`` as a boolean (m, n) matrix."""
    _check_sampleable(model)
    seed = check_seed(seed)
    u = _rng.uniform_rows(_rng.POSITIVE_STREAM, seed, model.n, start, stop)
    return _positives_from_uniforms(model, u)


def sample_positives(model, seed, instance_index):
    instance_index = check_count(instance_index, "instance_index")
    row = sample_positive_matrix(model, seed, instance_index, instance_index + 1)[0]
    return frozenset(np.flatnonzero(row).tolist())


def _chunks(total, width):
    return _rng.chunk_bounds(total, max(1, min(8192, _CHUNK_CELLS // max(width, 1))))


def _map(fn, chunks, workers):
    workers = check_count(workers, "workers", 1)
    if workers == 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, chunks))


def _moments(parts):
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    return s1, s2


def _mean_and_se(s1, s2, trials):
    mean = Fraction(s1, trials)
    if trials < 2:
        return float(mean), 0.0
    var = Fraction(trials * s2 - s1 * s1, trials * (trials - 1))
    return float(mean), math.sqrt(var / trials)


def _avoid_probabilities(model):
    """f[m] = Prob(P misses a fixed set of m objects), m = 0..n."""
    n = model.n
    m = np.arange(n + 1, dtype=np.float64)
    if model.kind == "bernoulli":
        r = model.p / n if n else 0.0
        if r == 1.0:
            return (m == 0).astype(np.float64)
        return np.exp(m * math.log1p(-r))
    sizes = [model.k] if model.kind == "uniform-k" else [i for i, w in enumerate(model.weights) if w > 0]
    weights = [1.0] if model.kind == "uniform-k" else [model.weights[i] for i in sizes]
    out = np.zeros(n + 1)
    for k, w in zip(sizes, weights):
        # C(n - m, k) / C(n, k) via its ratio recurrence in m
        f = np.zeros(n + 1)
        f[0] = 1.0
        for j in range(n):
            f[j + 1] = f[j] * (n - j - k) / (n - j) if n - j - k > 0 else 0.0
        out += w * f
    return out


def _exact_by_inclusion_exclusion(design, model):
    inc = design.incidence
    n = design.n
    avoid = _avoid_probabilities(model)
    total = []
    for y in range(n):
        pools = np.flatnonzero(inc[y])
        s = len(pools)
        # hit pattern of every other object restricted to g(y)
        h = inc[:, pools].astype(np.int64) @ (1 << np.arange(s, dtype=np.int64))
        h = np.delete(h, y)
        zeta = np.bincount(h, minlength=1 << s).astype(np.int64)
        # zeta[T] becomes the number of objects whose pattern is inside T
        for b in range(s):
            bit = 1 << b
            idx = np.arange(1 << s)
            sel = idx[(idx & bit) != 0]
            zeta[sel] += zeta[sel ^ bit]
        full = (1 << s) - 1
        masks = np.arange(1 << s)
        # objects meeting T are those whose pattern is not inside full ^ T
        meeting = (n - 1) - zeta[full ^ masks]
        signs = np.where(np.array([bin(t).count("1") & 1 for t in range(1 << s)]) == 1, -1.0, 1.0)
        total.append(math.fsum((signs * avoid[meeting + 1]).tolist()))
    return math.fsum(total)


def _enumerate_sets(model):
    n = model.n
    if model.kind == "bernoulli":
        r = model.p / n if n else 0.0
        for start, stop in _rng.chunk_bounds(1 << n, 1 << 14):
            codes = np.arange(start, stop, dtype=np.int64)
            X = ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
            size = X.sum(axis=1)
            yield X, (r**size) * ((1.0 - r) ** (n - size))
        return
    combos = itertools.combinations(range(n), model.k)
    weight = 1.0 / math.comb(n, model.k)
    while True:
        block = list(itertools.islice(combos, 1 << 14))
        if not block:
            return
        X = np.zeros((len(block), n), dtype=bool)
        if model.k:
            X[np.arange(len(block))[:, None], np.array(block)] = True
        yield X, np.full(len(block), weight)


def enumeration_feasible(model):
    if model.kind == "bernoulli":
        return model.n <= ENUMERATION_MAX_BERNOULLI_N
    if model.kind == "uniform-k":
        return math.comb(model.n, model.k) <= ENUMERATION_MAX_SETS
    return False


def expected_unresolved_exact(design, model):
    """Exact d~ of a fixed design: sum over P of Prob(P) |closure(P) \\ P|.

    Uses per-object inclusion-exclusion over the pools of its signature,
    falling back to listing every positive set when a signature is too
    large and the set count allows it.
    """
    if model.n != design.n:
        raise ValueError(f"prior is over {model.n} objects, design has {design.n}")
    n = design.n
    if n == 0:
        return 0.0
    widest = int(design.incidence.sum(axis=1).max()) if design.v else 0
    if widest <= _MAX_SIGNATURE_FOR_EXACT:
        return max(0.0, _exact_by_inclusion_exclusion(design, model))
    if not enumeration_feasible(model):
        raise CapacityError(
            f"exact d~ needs signatures of at most {_MAX_SIGNATURE_FOR_EXACT} pools "
            f"or an enumerable prior; widest signature has {widest}"
        )
    terms = []
    for X, w in _enumerate_sets(model):
        terms.extend((w * unresolved_counts(design, X)).tolist())
    return math.fsum(terms)


def estimate_expected_unresolved(design, model, trials, seed, workers=1):
    """Mean unresolved negatives of a fixed design under ``model``.

    Small priors are enumerated exactly (``std_error`` 0); otherwise
    ``trials`` seeded instances are sampled.
    """
    trials = check_count(trials, "trials", 1)
    seed = check_seed(seed)
    if model.n != design.n:
        raise ValueError(f"prior is over {model.n} objects, design has {design.n}")
    if enumeration_feasible(model):
        return Estimate(expected_unresolved_exact(design, model), 0.0, trials, "exact")
    _check_sampleable(model)

    def work(bounds):
        X = sample_positive_matrix(model, seed, *bounds)
        u = unresolved_counts(design, X)
        return int(u.sum()), int((u * u).sum())

    s1, s2 = _moments(_map(work, _chunks(trials, design.n), workers))
    mean, se = _mean_and_se(s1, s2, trials)
    return Estimate(mean, se, trials)


def estimate_random_design_unresolved(n, v, q, model, trials, seed, workers=1):
    """Monte Carlo d~ where every trial draws a fresh random design too."""
    n = check_count(n, "n")
    v = check_count(v, "v")
    trials = check_count(trials, "trials", 1)
    seed = check_seed(seed)
    if model.n != n:
        raise ValueError(f"prior is over {model.n} objects, expected {n}")
    _check_sampleable(model)

    def work(bounds):
        start, stop = bounds
        inc = _rng.uniform_rows(_rng.RANDOM_DESIGN_STREAM, seed, n * v, start, stop).reshape(-1, n, v) < q
        u = _rng.uniform_rows(_rng.DESIGN_POSITIVE_STREAM, seed, n, start, stop)
        X = _positives_from_uniforms(model, u)
        Y = np.einsum("mx,mxy->my", X.astype(np.float64), inc.astype(np.float64)) > 0
        cand = ~(inc & ~Y[:, None, :]).any(axis=2)
        c = cand.sum(axis=1, dtype=np.int64) - X.sum(axis=1, dtype=np.int64)
        return int(c.sum()), int((c * c).sum())

    s1, s2 = _moments(_map(work, _chunks(trials, n * max(v, 1)), workers))
    mean, se = _mean_and_se(s1, s2, trials)
    return Estimate(mean, se, trials)


def bisection_search(n, P):
    """Adaptive halving search; returns (tests used, positives found).

    Test everything still unclassified; if positive, halve down to one
    positive, discarding halves that test negative, and start again.
    """
    n = check_count(n, "n")
    P = _index_set(P, n, "object")
    remaining = list(range(n))
    hidden = sorted(P)
    found = set()
    tests = 0

    def pool_positive(lo, hi):
        # any positive among remaining[lo:hi]; both lists stay sorted
        a = bisect.bisect_left(hidden, remaining[lo])
        return a < len(hidden) and hidden[a] <= remaining[hi - 1]

    while remaining:
        tests += 1
        if not pool_positive(0, len(remaining)):
            break
        # the block under search is always a contiguous run remaining[lo:hi]
        lo, hi = 0, len(remaining)
        while hi - lo > 1:
            mid = lo + (hi - lo) // 2
            tests += 1
            if pool_positive(lo, mid):
                hi = mid
            else:
                del remaining[lo:mid]
                hi -= mid - lo
        x = remaining.pop(lo)
        hidden.remove(x)
        found.add(x)
    return tests, frozenset(found)


def bisection_baseline(n, P):
    return bisection_search(n, P)[0]


def run_campaign(design, model, instances, threshold, seed, workers=1):
    """Two-stage campaign: all pools once, then every candidate individually."""
    if not isinstance(design, PoolDesign):
        raise TypeError("design must be a PoolDesign")
    instances = check_count(instances, "instances")
    threshold = check_count(threshold, "threshold")
    seed = check_seed(seed)
    if model.n != design.n:
        raise ValueError(f"prior is over {model.n} objects, design has {design.n}")
    _check_sampleable(model)

    def work(bounds):
        X = sample_positive_matrix(model, seed, *bounds)
        u = unresolved_counts(design, X)
        return u + X.sum(axis=1, dtype=np.int64), u

    parts = _map(work, _chunks(instances, design.n), workers)
    tests = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, dtype=np.int64)
    unresolved = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, dtype=np.int64)
    if instances:
        mean, se = _mean_and_se(int(tests.sum()), int((tests * tests).sum()), instances)
    else:
        mean, se = 0.0, 0.0
    return CampaignStats(
        instances=instances,
        per_instance_individual_tests=tests,
        per_instance_unresolved=unresolved,
        mean_individual_tests=mean,
        std_error_individual_tests=se,
        threshold=threshold,
        exceed=int((unresolved >= threshold).sum()),
        design_non_singleton_pools=design_stats(design).non_singleton_pool_count,
    )
