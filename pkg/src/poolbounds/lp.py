"""The symmetric LP relaxation of optimal pool design and its dual.

Primal variables are ``w_j`` (how closed the j-subsets are) and
``w_i_j`` (how much of each i-subset is covered by a closed j-superset);
the pattern budget is ``S = 2**v``.  The dual has ``v``, ``v_i`` and
``v_i_j``.  Besides the builders this module holds an independent
evaluation of the greedy dual certificate, a feasibility checker, a small
dense simplex solver and a brute-force search over physical designs.
"""

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import sparse

from ._validation import CapacityError, NumericalError, check_count
from .combinatorics import pmf, s_of_i, support
from .design import PoolDesign
from .simulate import expected_unresolved_exact

MAX_LP_OBJECTS = 400
MAX_CERTIFICATE_OBJECTS = 1000
MAX_SIMPLEX_SIZE = 200
BRUTE_FORCE_LIMIT = 10**7
PIVOT_TOL = 1e-10
CHECK_RTOL = 1e-9


@dataclass(frozen=True)
class LinearProgram:
    """``direction`` c.x subject to ``A x (sense) b`` and x >= 0."""

    direction: str
    c: np.ndarray
    A: sparse.csr_array
    senses: tuple
    b: np.ndarray
    names: tuple
    row_names: tuple

    def __post_init__(self):
        m, k = self.A.shape
        if len(self.c) != k or len(self.names) != k:
            raise ValueError("objective and variable names must match the column count")
        if len(self.b) != m or len(self.senses) != m or len(self.row_names) != m:
            raise ValueError("right-hand sides and senses must match the row count")
        if self.direction not in ("min", "max"):
            raise ValueError(f"direction must be 'min' or 'max', got {self.direction!r}")
        if not (np.isfinite(self.c).all() and np.isfinite(self.b).all() and np.isfinite(self.A.data).all()):
            raise ValueError("linear program data must be finite")

    @property
    def num_variables(self):
        return self.A.shape[1]

    @property
    def num_constraints(self):
        return self.A.shape[0]

    def to_lp_format(self):
        """CPLEX LP text; variables keep their w_j / w_i_j / v_i_j names."""

        def expr(coefs):
            parts = []
            for name, a in coefs:
                sign = "-" if a < 0 else "+"
                mag = "" if abs(a) == 1 else f"{abs(a):.17g} "
                parts.append(f"{sign} {mag}{name}")
            text = " ".join(parts) if parts else "0 " + self.names[0]
            return text[2:] if text.startswith("+ ") else text

        lines = ["Maximize" if self.direction == "max" else "Minimize"]
        lines.append(" obj: " + expr([(nm, a) for nm, a in zip(self.names, self.c.tolist()) if a != 0]))
        lines.append("Subject To")
        A = self.A.tocsr().copy()
        A.sort_indices()
        for r in range(A.shape[0]):
            lo, hi = A.indptr[r], A.indptr[r + 1]
            coefs = [(self.names[j], a) for j, a in zip(A.indices[lo:hi].tolist(), A.data[lo:hi].tolist())]
            lines.append(f" {self.row_names[r]}: {expr(coefs)} {self.senses[r]} {self.b[r]:.17g}")
        lines.append("End")
        return "\n".join(lines) + "\n"


def _check_size(n, v_pools, model):
    n = check_count(n, "n")
    v_pools = check_count(v_pools, "v_pools")
    if model.n != n:
        raise ValueError(f"prior is over {model.n} objects, expected {n}")
    if n > MAX_LP_OBJECTS:
        raise CapacityError(f"LP builders handle n <= {MAX_LP_OBJECTS}, got {n}")
    return n, v_pools


def _budget(n, v_pools):
    # beyond 2**n patterns the budget no longer binds
    return float(2 ** min(v_pools, n))


def _pairs(n):
    return [(i, j) for i in range(n + 1) for j in range(i, n + 1)]


def build_primal(n, v_pools, model):
    n, v_pools = _check_size(n, v_pools, model)
    pairs = _pairs(n)
    col = {("w", j): j for j in range(n + 1)}
    for t, pair in enumerate(pairs):
        col[pair] = n + 1 + t
    names = [f"w_{j}" for j in range(n + 1)] + [f"w_{i}_{j}" for i, j in pairs]
    probs = [pmf(model, i) for i in range(n + 1)]
    c = np.zeros(len(names))
    for i, j in pairs:
        c[col[(i, j)]] = probs[i] * math.comb(n - i, j - i) * (j - i)
    rows, cols, vals, senses, b, row_names = [], [], [], [], [], []

    def add(entries, sense, rhs, name):
        r = len(senses)
        for k, a in entries:
            rows.append(r)
            cols.append(k)
            vals.append(a)
        senses.append(sense)
        b.append(rhs)
        row_names.append(name)

    add([(col[("w", j)], float(math.comb(n, j))) for j in range(n + 1)], "<=", _budget(n, v_pools), "budget")
    for i in range(n + 1):
        add([(col[(i, j)], float(math.comb(n - i, j - i))) for j in range(i, n + 1)], ">=", 1.0, f"cover_{i}")
    for i, j in pairs:
        add([(col[(i, j)], 1.0), (col[("w", j)], -1.0)], "<=", 0.0, f"closed_{i}_{j}")
    A = sparse.csr_array((vals, (rows, cols)), shape=(len(senses), len(names)))
    return LinearProgram("min", c, A, tuple(senses), np.array(b), tuple(names), tuple(row_names))


def build_dual(n, v_pools, model):
    n, v_pools = _check_size(n, v_pools, model)
    pairs = _pairs(n)
    names = ["v"] + [f"v_{i}" for i in range(n + 1)] + [f"v_{i}_{j}" for i, j in pairs]
    pair_col = {pair: n + 2 + t for t, pair in enumerate(pairs)}
    probs = [pmf(model, i) for i in range(n + 1)]
    c = np.zeros(len(names))
    c[0] = -_budget(n, v_pools)
    c[1:n + 2] = 1.0
    rows, cols, vals, b, row_names = [], [], [], [], []
    r = 0
    for j in range(n + 1):
        for i in range(j + 1):
            rows.append(r)
            cols.append(pair_col[(i, j)])
            vals.append(1.0)
        rows.append(r)
        cols.append(0)
        vals.append(-float(math.comb(n, j)))
        b.append(0.0)
        row_names.append(f"pattern_{j}")
        r += 1
    for i, j in pairs:
        coef = float(math.comb(n - i, j - i))
        rows += [r, r]
        cols += [1 + i, pair_col[(i, j)]]
        vals += [coef, -1.0]
        b.append(probs[i] * coef * (j - i))
        row_names.append(f"gain_{i}_{j}")
        r += 1
    A = sparse.csr_array((vals, (rows, cols)), shape=(r, len(names)))
    return LinearProgram("max", c, A, ("<=",) * r, np.array(b), tuple(names), tuple(row_names))


@dataclass(frozen=True)
class DualCertificate:
    n: int
    v_pools: int
    v: float
    v_i: np.ndarray
    v_ij: dict
    objective: float
    s: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "n": self.n,
            "v_pools": self.v_pools,
            "objective": self.objective,
            "v": self.v,
            "v_i": self.v_i.tolist(),
            "v_ij": [[i, j, x] for (i, j), x in sorted(self.v_ij.items())],
        }


def greedy_dual_certificate(n, v_pools, model, tail=1e-15):
    """The greedy dual solution, built term by term from exact ratios.

    Size classes outside the prior's ``tail`` mass get v_i = 0, which keeps
    the certificate feasible.
    """
    n = check_count(n, "n")
    v_pools = check_count(v_pools, "v_pools")
    if model.n != n:
        raise ValueError(f"prior is over {model.n} objects, expected {n}")
    if n > MAX_CERTIFICATE_OBJECTS:
        raise CapacityError(f"certificates are built for n <= {MAX_CERTIFICATE_OBJECTS}, got {n}")
    sizes, probs = support(model, tail)
    v_i = np.zeros(n + 1)
    v_ij = {}
    s = {}
    column = {}
    for i, p in zip(sizes.tolist(), probs.tolist()):
        si = s_of_i(n, i, v_pools)
        s[i] = si
        if p == 0.0 or si <= i:
            continue
        v_i[i] = p * (si - i)
        falling_n = math.perm(n, i)
        for j in range(i, min(si, n + 1)):
            v_ij[(i, j)] = math.comb(n - i, j - i) * p * (si - j)
            share = float(Fraction(math.perm(j, i), falling_n)) * p * (si - j)
            column[j] = column.get(j, 0.0) + share
    v = max(column.values()) if column else 0.0
    cost = math.ldexp(v, v_pools) if v > 0 else 0.0
    return DualCertificate(
        n=n,
        v_pools=v_pools,
        v=v,
        v_i=v_i,
        v_ij=v_ij,
        objective=math.fsum(v_i.tolist()) - cost,
        s=s,
    )


@dataclass(frozen=True)
class CertificateReport:
    feasible: bool
    violations: list
    tight: list
    loose_expected_tight: list
    objective: float

    def to_dict(self):
        return {
            "feasible": self.feasible,
            "objective": self.objective,
            "violations": self.violations,
            "tight_pairs": self.tight,
            "loose_expected_tight": self.loose_expected_tight,
        }


def _violated(lhs, rhs, scale):
    return lhs - rhs > CHECK_RTOL * max(1.0, scale)


def check_certificate(cert, n, v_pools, model):
    """Check every dual constraint at relative slack 1e-9.

    Also lists the pairs i <= j < s(i) where the gain constraint is tight,
    and any such pair where it unexpectedly is not.
    """
    n = check_count(n, "n")
    v_pools = check_count(v_pools, "v_pools")
    v_i = np.asarray(cert.v_i, dtype=np.float64)
    if v_i.shape != (n + 1,) or cert.n != n:
        raise ValueError(f"certificate is sized for n={cert.n}, expected n={n}")
    if model.n != n:
        raise ValueError(f"prior is over {model.n} objects, expected {n}")
    bad_keys = [k for k in cert.v_ij if not 0 <= k[0] <= k[1] <= n]
    if bad_keys:
        raise ValueError(f"v_ij index {bad_keys[0]} outside 0 <= i <= j <= n")
    violations = []
    if cert.v < 0:
        violations.append({"constraint": "nonnegative", "variable": "v", "slack": cert.v})
    for i in np.flatnonzero(v_i < 0).tolist():
        violations.append({"constraint": "nonnegative", "variable": f"v_{i}", "slack": float(v_i[i])})
    for (i, j), x in sorted(cert.v_ij.items()):
        if x < 0:
            violations.append({"constraint": "nonnegative", "variable": f"v_{i}_{j}", "slack": x})

    column = [[] for _ in range(n + 1)]
    for (i, j), x in cert.v_ij.items():
        column[j].append(x)
    for j in range(n + 1):
        lhs = math.fsum(column[j])
        rhs = math.comb(n, j) * cert.v
        if _violated(lhs, rhs, max(abs(lhs), abs(rhs))):
            violations.append({"constraint": "pattern", "j": j, "slack": rhs - lhs})

    tight, loose = [], []
    s_map = {i: s_of_i(n, i, v_pools) for i in range(n + 1)}
    for i in range(n + 1):
        p = pmf(model, i)
        for j in range(i, n + 1):
            coef = math.comb(n - i, j - i)
            lhs = coef * float(v_i[i]) - cert.v_ij.get((i, j), 0.0)
            rhs = p * coef * (j - i)
            scale = max(abs(coef * float(v_i[i])), abs(rhs))
            if _violated(lhs, rhs, scale):
                violations.append({"constraint": "gain", "i": i, "j": j, "slack": rhs - lhs})
            elif v_i[i] > 0 and j < s_map[i]:
                if abs(lhs - rhs) <= CHECK_RTOL * max(1.0, scale):
                    tight.append([i, j])
                else:
                    loose.append([i, j])
    return CertificateReport(not violations, violations, tight, loose, cert.objective)


@dataclass(frozen=True)
class LPResult:
    status: str
    value: float | None
    x: np.ndarray | None
    iterations: int

    def to_dict(self):
        return {
            "status": self.status,
            "value": self.value,
            "x": None if self.x is None else self.x.tolist(),
            "iterations": self.iterations,
        }


def _pivot(T, r, k):
    T[r] /= T[r, k]
    col = T[:, k].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _simplex(T, basis, cost_row, allowed, max_iter):
    """Bland-rule primal simplex on tableau T whose row ``cost_row`` holds reduced costs."""
    m = len(basis)
    it = 0
    while True:
        reduced = T[cost_row, :-1]
        entering = next((k for k in allowed if reduced[k] < -PIVOT_TOL), None)
        if entering is None:
            return "optimal", it
        colv = T[:m, entering]
        best, leave = None, None
        for r in range(m):
            if colv[r] > PIVOT_TOL:
                ratio = T[r, -1] / colv[r]
                if best is None or ratio < best - 1e-12 or (abs(ratio - best) <= 1e-12 and basis[r] < basis[leave]):
                    best, leave = ratio, r
        if leave is None:
            return "unbounded", it
        _pivot(T, leave, entering)
        basis[leave] = entering
        it += 1
        if it > max_iter:
            raise NumericalError("simplex iteration limit reached")


def solve_small(lp):
    """Dense two-phase simplex with Bland's rule.

    The returned optimum is re-verified against a dual solution computed
    from the final basis; any disagreement raises NumericalError.
    """
    k, m = lp.num_variables, lp.num_constraints
    if k > MAX_SIMPLEX_SIZE or m > MAX_SIMPLEX_SIZE:
        raise CapacityError(f"solve_small handles at most {MAX_SIMPLEX_SIZE} variables and constraints, got {k} x {m}")
    A = lp.A.toarray()
    b = lp.b.astype(np.float64).copy()
    c = lp.c.astype(np.float64) * (1.0 if lp.direction == "min" else -1.0)
    senses = list(lp.senses)
    # slack/surplus columns, one per inequality row
    S = np.zeros((m, m))
    for r, sense in enumerate(senses):
        if sense == "<=":
            S[r, r] = 1.0
        elif sense == ">=":
            S[r, r] = -1.0
        elif sense != "=":
            raise ValueError(f"unknown constraint sense {sense!r}")
    flip = b < 0
    A[flip] *= -1
    S[flip] *= -1
    b[flip] *= -1
    Afull = np.hstack([A, S])
    ncols = k + m
    basis = [-1] * m
    artificial = []
    for r in range(m):
        if S[r, r] > 0:
            basis[r] = k + r
        else:
            basis[r] = ncols + len(artificial)
            artificial.append(r)
    na = len(artificial)
    T = np.zeros((m + 2, ncols + na + 1))
    T[:m, :ncols] = Afull
    for t, r in enumerate(artificial):
        T[r, ncols + t] = 1.0
    T[:m, -1] = b
    T[m, :k] = c
    # phase-one objective: sum of artificials, priced out of the basis
    T[m + 1, ncols:ncols + na] = 1.0
    for r in artificial:
        T[m + 1] -= T[r]
    max_iter = 50 * (ncols + na + m) + 1000
    status, it1 = _simplex(T, basis, m + 1, list(range(ncols + na)), max_iter)
    if T[m + 1, -1] < -1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
        return LPResult("infeasible", None, None, it1)
    # drive leftover zero-level artificials out of the basis
    for r in range(m):
        if basis[r] >= ncols:
            cand = next((j for j in range(ncols) if abs(T[r, j]) > PIVOT_TOL), None)
            if cand is not None:
                _pivot(T, r, cand)
                basis[r] = cand
    T[:, ncols:ncols + na] = 0.0
    # rows whose artificial could not leave are redundant
    keep = [r for r in range(m) if basis[r] < ncols]
    status, it2 = _simplex_restricted(T, basis, keep, m, ncols, max_iter)
    it = it1 + it2
    if status == "unbounded":
        return LPResult("unbounded", None, None, it)
    x = np.zeros(ncols)
    for r in keep:
        x[basis[r]] = T[r, -1]
    x = np.maximum(x, 0.0)
    value = float(c @ x[:k])
    _verify(Afull, b, c, x, [basis[r] for r in keep], keep, k, value)
    sign = 1.0 if lp.direction == "min" else -1.0
    return LPResult("optimal", sign * value, x[:k], it)


def _simplex_restricted(T, basis, keep, m, ncols, max_iter):
    sub = np.vstack([T[keep], T[m:m + 1]])
    sub_basis = [basis[r] for r in keep]
    sub = np.hstack([sub[:, :ncols], sub[:, -1:]])
    status, it = _simplex(sub, sub_basis, len(keep), list(range(ncols)), max_iter)
    for t, r in enumerate(keep):
        T[r, :ncols] = sub[t, :ncols]
        T[r, -1] = sub[t, -1]
        basis[r] = sub_basis[t]
    return status, it


def _verify(Afull, b, c, x, basic_cols, rows, k, value):
    scale = max(1.0, float(np.abs(b).max(initial=0.0)), float(np.abs(c).max(initial=0.0)))
    resid = Afull @ x - b
    if np.abs(resid).max(initial=0.0) > 1e-7 * scale * max(1.0, float(np.abs(x).max(initial=0.0))):
        raise NumericalError("simplex solution fails primal feasibility")
    cfull = np.concatenate([c, np.zeros(Afull.shape[1] - k)])
    B = Afull[np.ix_(rows, basic_cols)]
    try:
        y = np.linalg.solve(B.T, cfull[basic_cols])
    except np.linalg.LinAlgError as exc:
        raise NumericalError("final basis is singular") from exc
    full_y = np.zeros(Afull.shape[0])
    full_y[rows] = y
    reduced = cfull - Afull.T @ full_y
    if reduced.min(initial=0.0) < -1e-7 * scale:
        raise NumericalError("simplex solution fails dual feasibility")
    if abs(full_y @ b - value) > 1e-7 * max(1.0, abs(value)):
        raise NumericalError("primal and dual objectives disagree")


def brute_force_min_design(n, v_pools, model):
    """Smallest exact d~ over every design with ``v_pools`` pools.

    Designs are enumerated up to relabelling objects, which leaves d~
    unchanged under an exchangeable prior.  Returns ``(value, design)``.
    """
    n = check_count(n, "n")
    v_pools = check_count(v_pools, "v_pools")
    if model.n != n:
        raise ValueError(f"prior is over {model.n} objects, expected {n}")
    if (2**v_pools) ** n > BRUTE_FORCE_LIMIT:
        raise CapacityError(f"(2**v)**n = {(2 ** v_pools) ** n} designs exceeds {BRUTE_FORCE_LIMIT}")
    patterns = [[(code >> y) & 1 for y in range(v_pools)] for code in range(2**v_pools)]
    best, best_design = None, None
    for combo in itertools.combinations_with_replacement(range(2**v_pools), n):
        design = PoolDesign(np.array([patterns[c] for c in combo], dtype=bool).reshape(n, v_pools))
        value = expected_unresolved_exact(design, model)
        if best is None or value < best - 1e-12:
            best, best_design = value, design
    return best, best_design
