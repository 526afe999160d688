"""Exact and log-domain combinatorial arithmetic.

Log-domain values are floats (or :class:`LogValue`) holding natural
logarithms, with ``LOG_ZERO = -inf`` standing for the logarithm of zero.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_count, check_real

LOG_ZERO = -math.inf
LN2 = math.log(2.0)

# below this size math.comb is cheap and log(comb) is correctly rounded
_EXACT_BINOMIAL_MAX_N = 1000
_SHORT_PRODUCT_MAX_K = 2000
# exact big-integer comparisons inside s_of_i stay cheap below this many bits
_EXACT_BITS_LIMIT = 20000
_EPS = np.finfo(float).eps


class LogValue(float):
    """Natural log of a nonnegative quantity.

    Behaves as a float; ``exact`` holds the integer being logged when it
    was computed exactly (None otherwise).
    """

    def __new__(cls, value, exact=None):
        obj = super().__new__(cls, value)
        obj.exact = exact
        return obj

    def __repr__(self):
        return f"LogValue({float(self)!r}, exact={self.exact!r})"


def log_add(a, b):
    """log(exp(a) + exp(b)) without overflow."""
    if a == LOG_ZERO:
        return b
    if b == LOG_ZERO:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def log_sum(values):
    """Order-insensitive log of a sum of exponentials."""
    values = [x for x in values if x != LOG_ZERO]
    if not values:
        return LOG_ZERO
    top = max(values)
    return top + math.log(math.fsum(math.exp(x - top) for x in values))


def log_binomial(n, k):
    """Natural log of C(n, k); ``LOG_ZERO`` when k > n.

    For n <= 1000 the result also carries the exact coefficient in
    ``.exact``.
    """
    n = check_count(n, "n")
    k = check_count(k, "k")
    if k > n:
        return LogValue(LOG_ZERO, 0)
    k = min(k, n - k)
    if n <= _EXACT_BINOMIAL_MAX_N:
        c = math.comb(n, k)
        return LogValue(math.log(c), c)
    if k <= _SHORT_PRODUCT_MAX_K:
        # lgamma(n + 1) alone carries ~1e-9 absolute error at n = 1e6
        return LogValue(math.fsum(math.log(n - t) for t in range(k)) - math.lgamma(k + 1))
    return LogValue(math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1))


def falling_factorial(s, i):
    """Exact (s)_i = s (s-1) ... (s-i+1); zero when s < i."""
    s = check_count(s, "s")
    i = check_count(i, "i")
    return math.perm(s, i)


def log_falling_factorial(s, i):
    if i > s:
        return LOG_ZERO
    if i == 0:
        return 0.0
    return math.lgamma(s + 1) - math.lgamma(s - i + 1)


def _exceeds(s, n, i, log2_S, log_n_i):
    """Whether (s)_i * 2**log2_S > (n)_i, exactly where it matters."""
    if s < i:
        return False
    a = math.lgamma(s + 1)
    b = math.lgamma(s - i + 1)
    scaled = log2_S * LN2
    diff = (a - b) + scaled - log_n_i
    # lgamma carries a few ulps of its own magnitude; anything inside this
    # band is decided by exact arithmetic or conservatively
    band = 64 * _EPS * (abs(a) + abs(b) + 2 * abs(log_n_i) + abs(scaled)) + 1e-12
    if diff > band:
        return True
    if diff < -band:
        return False
    if float(log2_S).is_integer() and i * math.log2(n + 1) + abs(log2_S) <= _EXACT_BITS_LIMIT:
        shift = int(log2_S)
        lhs, rhs = math.perm(s, i), math.perm(n, i)
        if shift >= 0:
            return (lhs << shift) > rhs
        return lhs > (rhs << -shift)
    # smaller s only weakens a lower bound built from it
    return True


def s_of_i(n, i, log2_S):
    """Smallest s >= i with (s)_i > (n)_i / 2**log2_S, or n + 1 if none.

    The budget ``S = 2**log2_S`` is never formed explicitly, so pool counts
    in the hundreds are fine.  Uses binary search since (s)_i is
    nondecreasing in s.
    """
    n = check_count(n, "n")
    i = check_count(i, "i")
    log2_S = check_real(log2_S, "log2_S")
    if i > n:
        raise ValueError(f"i must be <= n, got i={i}, n={n}")
    log_n_i = math.lgamma(n + 1) - math.lgamma(n - i + 1)
    lo, hi = i, n + 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _exceeds(mid, n, i, log2_S, log_n_i):
            hi = mid
        else:
            lo = mid + 1
    return lo


@dataclass(frozen=True)
class PositiveModel:
    """Exchangeable prior on the positive set of ``n`` objects.

    Build instances with :meth:`bernoulli`, :meth:`uniform_k` or
    :meth:`explicit` rather than the raw constructor.
    """

    kind: str
    n: int
    p: float | None = None
    k: int | None = None
    weights: tuple | None = None

    def __post_init__(self):
        n = check_count(self.n, "n")
        object.__setattr__(self, "n", n)
        if self.kind == "bernoulli":
            object.__setattr__(self, "p", check_real(self.p, "p", 0.0, float(n)))
        elif self.kind == "uniform-k":
            k = check_count(self.k, "k")
            if k > n:
                raise ValueError(f"k must be <= n, got k={k}, n={n}")
            object.__setattr__(self, "k", k)
        elif self.kind == "explicit":
            w = tuple(check_real(x, "weight", 0.0) for x in self.weights)
            if len(w) != n + 1:
                raise ValueError(f"explicit prior needs n + 1 = {n + 1} weights, got {len(w)}")
            if abs(math.fsum(w) - 1.0) > 1e-12:
                raise ValueError(f"explicit weights must sum to 1, got {math.fsum(w)!r}")
            object.__setattr__(self, "weights", w)
        else:
            raise ValueError(f"unknown prior kind {self.kind!r}")

    @classmethod
    def bernoulli(cls, n, p):
        """Each object positive independently with probability p / n."""
        return cls("bernoulli", n, p=p)

    @classmethod
    def uniform_k(cls, n, k):
        """Uniformly random k-subset (the point prior on |P| = k)."""
        return cls("uniform-k", n, k=k)

    @classmethod
    def explicit(cls, weights):
        """Arbitrary size distribution; weights[i] = Prob(|P| = i)."""
        weights = tuple(weights)
        return cls("explicit", len(weights) - 1, weights=weights)

    def mean_size(self):
        if self.kind == "bernoulli":
            return self.p
        if self.kind == "uniform-k":
            return float(self.k)
        return math.fsum(i * w for i, w in enumerate(self.weights))

    def to_dict(self):
        out = {"kind": self.kind, "n": self.n}
        if self.kind == "bernoulli":
            out["p"] = self.p
        elif self.kind == "uniform-k":
            out["k"] = self.k
        else:
            out["weights"] = list(self.weights)
        return out


def pmf_log(model, i):
    """Log of Prob(|P| = i) under ``model``."""
    i = check_count(i, "i")
    n = model.n
    if i > n:
        raise ValueError(f"i must be <= n, got i={i}, n={n}")
    if model.kind == "uniform-k":
        return 0.0 if i == model.k else LOG_ZERO
    if model.kind == "explicit":
        w = model.weights[i]
        return math.log(w) if w > 0 else LOG_ZERO
    r = model.p / n if n else 0.0
    if r == 0.0:
        return 0.0 if i == 0 else LOG_ZERO
    if r == 1.0:
        return 0.0 if i == n else LOG_ZERO
    return log_binomial(n, i) + i * math.log(r) + (n - i) * math.log1p(-r)


def pmf(model, i):
    return math.exp(pmf_log(model, i))


def support(model, tail=1e-15):
    """Sizes carrying all but ``tail`` of the prior mass, with their pmf.

    Returns ``(sizes, probs)`` as numpy arrays in increasing size order.
    Each discarded tail holds at most ``tail / 2`` mass.
    """
    n = model.n
    if model.kind == "uniform-k":
        return np.array([model.k]), np.array([1.0])
    if model.kind == "explicit":
        sizes = [i for i, w in enumerate(model.weights) if w > 0]
        return np.array(sizes, dtype=int), np.array([model.weights[i] for i in sizes])
    r = model.p / n if n else 0.0
    if r == 0.0:
        return np.array([0]), np.array([1.0])
    if r == 1.0:
        return np.array([n]), np.array([1.0])
    half = tail / 2
    odds = r / (1 - r)
    mode = min(n, int(math.floor((n + 1) * r)))
    hi = mode
    while hi < n:
        # terms beyond the mode shrink geometrically with this ratio
        ratio = (n - hi - 1) / (hi + 2) * odds
        nxt = pmf(model, hi + 1)
        if ratio < 1 and nxt / (1 - ratio) < half:
            break
        hi += 1
    lo = mode
    while lo > 0:
        ratio = (lo - 1) / (n - lo + 2) / odds
        prv = pmf(model, lo - 1)
        if ratio < 1 and prv / (1 - ratio) < half:
            break
        lo -= 1
    sizes = np.arange(lo, hi + 1)
    return sizes, np.array([pmf(model, int(i)) for i in sizes])
