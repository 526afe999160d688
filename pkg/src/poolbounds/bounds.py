"""Closed-form bounds on the expected number of unresolved negatives.

Lower bounds come from the greedy dual solution of the symmetric LP
relaxation and from the fixed-size estimate built on it; upper bounds
come from random designs where every cell is set with probability q.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import NumericalError, check_count, check_real
from .combinatorics import LN2, PositiveModel, log_binomial, pmf, s_of_i, support

# beyond this many (i, j) cells the ratio products switch to lgamma
_DIRECT_RATIO_BUDGET = 20_000_000


@dataclass(frozen=True)
class BoundReport:
    name: str
    value: float
    params: dict
    direction: str
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "name": self.name,
            "direction": self.direction,
            "value": self.value,
            "params": dict(self.params),
            "details": dict(self.details),
        }


def _check_model(model, n):
    if model.n != n:
        raise ValueError(f"prior is over {model.n} objects, expected {n}")


def _log_ratio_falling(j, i, n):
    """log((j)_i / (n)_i) for an int array j >= i."""
    out = np.zeros(j.shape)
    if i * j.size <= _DIRECT_RATIO_BUDGET:
        for t in range(i):
            out += np.log1p((j - n) / (n - t))
        return out
    from scipy.special import gammaln

    return gammaln(j + 1.0) - gammaln(j - i + 1.0) - (math.lgamma(n + 1) - math.lgamma(n - i + 1))


def greedy_dual_bound(n, v, model, tail=1e-15):
    """Objective of the greedy dual solution; a lower bound on d~ for any design.

    Size classes carrying less than ``tail`` total prior mass are dropped,
    which zeroes their dual variables and can only weaken the bound.
    """
    n = check_count(n, "n")
    v = check_count(v, "v")
    _check_model(model, n)
    sizes, probs = support(model, tail)
    s = [s_of_i(n, int(i), v) for i in sizes]
    gain = math.fsum(float(p) * (si - int(i)) for i, p, si in zip(sizes, probs, s))
    top = max(s)
    penalty_by_j = np.zeros(max(top, 1))
    log_S = v * LN2
    for i, p, si in zip(sizes, probs, s):
        i = int(i)
        if si <= i or p == 0.0:
            continue
        j = np.arange(i, si)
        # S * (j)_i / (n)_i stays below 1 on this range, so exp is safe
        scaled = np.exp(log_S + _log_ratio_falling(j, i, n))
        penalty_by_j[i:si] += scaled * (p * (si - j))
    j_star = int(np.argmax(penalty_by_j))
    penalty = float(penalty_by_j[j_star])
    return BoundReport(
        name="greedy_dual",
        value=gain - penalty,
        params={"n": n, "v": v, "prior": model.to_dict()},
        direction="lower",
        details={"argmax_j": j_star, "gain": gain, "penalty": penalty, "tail": tail},
    )


def b_k_estimate(n, v, k):
    """s(k)(1 - 4/k) - k, the closed-form floor on the fixed-size dual value.

    Can be negative (vacuous) for small k; callers clamp.
    """
    n = check_count(n, "n")
    v = check_count(v, "v")
    k = check_count(k, "k", 1)
    if k > n:
        raise ValueError(f"k must be <= n, got k={k}, n={n}")
    s = s_of_i(n, k, v)
    return BoundReport(
        name="b_k_estimate",
        value=s * (1.0 - 4.0 / k) - k,
        params={"n": n, "v": v, "k": k},
        direction="lower",
        details={"s_k": s},
    )


def conditioning_size(n, beta):
    """Number of positives the two-stage lower bound conditions on."""
    x = beta * math.log(n) / math.log(math.log(n))
    return max(2, int(math.floor(x + 0.5)))


def lower_threshold_pools(n, beta):
    """Largest v covered by the two-stage lower bound at rate beta."""
    n = check_count(n, "n", 16)
    beta = check_real(beta, "beta", 0.0, 0.5, low_open=True, high_open=True)
    ln = math.log(n)
    return int(math.floor(beta**2 * ln * math.log2(n) / math.log(ln)))


def two_stage_lower(n, v, p, beta, estimate="closed-form"):
    """p(k) * b_k with k ~ beta ln n / ln ln n, for a Bernoulli(p) prior.

    ``estimate="closed-form"`` uses :func:`b_k_estimate`;
    ``estimate="greedy"`` uses the greedy dual bound of the size-k point
    prior, which is never weaker than the closed form.
    """
    n = check_count(n, "n", 16)
    v = check_count(v, "v")
    beta = check_real(beta, "beta", 0.0, 0.5, low_open=True, high_open=True)
    prior = PositiveModel.bernoulli(n, p)
    k = min(conditioning_size(n, beta), n)
    p_k = pmf(prior, k)
    if estimate == "closed-form":
        b_k = b_k_estimate(n, v, k).value
    elif estimate == "greedy":
        b_k = greedy_dual_bound(n, v, PositiveModel.uniform_k(n, k)).value
    else:
        raise ValueError(f"unknown estimate {estimate!r}")
    return BoundReport(
        name="two_stage_lower",
        value=max(0.0, p_k * b_k),
        params={"n": n, "v": v, "p": prior.p, "beta": beta},
        direction="lower",
        details={"k": k, "p_k": p_k, "b_k": b_k, "estimate": estimate},
    )


def expected_unresolved_random(n, v, q, model, tail=1e-15):
    """Exact mean of d~ over random designs with cell probability q.

    Size classes outside the prior's ``tail`` mass are skipped, an absolute
    error of at most ``n * tail``.
    """
    n = check_count(n, "n")
    v = check_count(v, "v")
    q = check_real(q, "q", 0.0, 1.0)
    _check_model(model, n)
    sizes, probs = support(model, tail)
    terms = []
    for i, p in zip(sizes.tolist(), probs.tolist()):
        if v == 0:
            factor = 1.0
        else:
            # probability a fixed negative object is covered by the positives
            hit = q * (1.0 - q) ** i
            factor = 0.0 if hit >= 1.0 else math.exp(v * math.log1p(-hit))
        terms.append(p * (n - i) * factor)
    return BoundReport(
        name="expected_unresolved_random",
        value=math.fsum(terms),
        params={"n": n, "v": v, "q": q, "prior": model.to_dict()},
        direction="exact",
    )


def poisson_upper(n, v, q, p, rel_tol=1e-12):
    """Poisson-series upper bound on d~ for random designs, Bernoulli(p).

    The series is cut once its analytic tail drops below ``rel_tol`` of the
    partial sum, and that tail is added back so the result stays an upper
    bound.
    """
    n = check_count(n, "n")
    v = check_count(v, "v")
    q = check_real(q, "q", 0.0, 1.0)
    p = check_real(p, "p", 0.0)
    log_p = math.log(p) if p > 0 else -math.inf
    log_terms = []
    log_partial = -math.inf
    i = 0
    while True:
        log_weight = (i * log_p if i else 0.0) - math.lgamma(i + 1)
        # sum_{m >= i} p^m/m! <= e^p p^i/i!
        log_tail = log_weight + p
        if log_partial > -math.inf and log_tail < math.log(rel_tol) + log_partial:
            break
        lt = log_weight - q * (1.0 - q) ** i * v
        log_terms.append(lt)
        top = max(log_partial, lt)
        if top > -math.inf:
            log_partial = top + math.log(math.exp(log_partial - top) + math.exp(lt - top))
        i += 1
        if i > 1_000_000:
            raise NumericalError("Poisson series failed to converge")
    top = max(log_terms)
    partial = math.exp(top) * math.fsum(math.exp(x - top) for x in log_terms)
    tail = n * math.exp(log_tail)
    return BoundReport(
        name="poisson_upper",
        value=n * partial + tail,
        params={"n": n, "v": v, "q": q, "p": p},
        direction="upper",
        details={"terms": i, "tail_bound": tail},
    )


def recommend_design(n, eps):
    """Pool count and inclusion probability of the random-design recipe."""
    n = check_count(n, "n", 16)
    eps = check_real(eps, "eps", 0.0, low_open=True)
    ln = math.log(n)
    lnln = math.log(ln)
    q = lnln / ln
    v = int(math.ceil(math.exp(1.0 + eps) * ln * ln / lnln))
    return v, q


def _binary_entropy_bits(x):
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -(x * math.log2(x) + (1.0 - x) * math.log1p(-x) / LN2)


def entropy_bound(model):
    """Shannon entropy (bits) of the positive set: the information bound."""
    n = model.n
    if model.kind == "uniform-k":
        value = log_binomial(n, model.k) / LN2
    elif model.kind == "bernoulli":
        value = n * _binary_entropy_bits(model.p / n) if n else 0.0
    else:
        value = math.fsum(
            w * (log_binomial(n, i) / LN2 - math.log2(w)) for i, w in enumerate(model.weights) if w > 0
        )
    return BoundReport(
        name="entropy_bound",
        value=float(value),
        params={"prior": model.to_dict()},
        direction="lower",
    )


def tail_lower_bound(mean, n, t):
    """Lower bound on Prob(unresolved >= t) from the mean, since unresolved <= n."""
    n = check_count(n, "n", 1)
    t = check_real(t, "t", 0.0)
    if t >= n:
        raise ValueError(f"threshold t must be < n, got t={t}, n={n}")
    mean = check_real(mean, "mean", 0.0, float(n))
    return min(1.0, max(0.0, (mean - t) / (n - t)))


def threshold_table(ns, p, beta, eps, estimate="closed-form"):
    """One row per n: lower-bound side at v_lower, upper side at the recipe."""
    rows = []
    for n in ns:
        v_lower = lower_threshold_pools(n, beta)
        lower = two_stage_lower(n, v_lower, p, beta, estimate=estimate)
        v_rec, q_rec = recommend_design(n, eps)
        rows.append(
            {
                "n": n,
                "v_lower": v_lower,
                "two_stage_lower": lower.value,
                "v_rec": v_rec,
                "q_rec": q_rec,
                "poisson_upper": poisson_upper(n, v_rec, q_rec, p).value,
                "entropy_bound": entropy_bound(PositiveModel.bernoulli(n, p)).value,
            }
        )
    return rows
