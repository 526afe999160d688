"""Closure decoding of first-stage pool results.

Given the positive set P, the positive pools are the union of the
signatures of P, and the candidate positives are every object whose
signature lies inside that union.  The map P -> candidates is a closure
(extensive, monotone, idempotent).

Single instances use frozensets; the ``*_matrix`` variants take one
instance per row of a boolean matrix and are what the simulators use.
"""

from dataclasses import dataclass

import numpy as np


def _index_set(indices, bound, what):
    items = [int(i) for i in indices]
    out = frozenset(items)
    if len(out) != len(items):
        raise ValueError(f"{what} indices must be unique")
    bad = [i for i in out if not 0 <= i < bound]
    if bad:
        raise ValueError(f"{what} index {min(bad)} out of range [0, {bound})")
    return out


@dataclass(frozen=True)
class ScreenOutcome:
    positives: frozenset
    outcome: frozenset
    candidates: frozenset
    unresolved_count: int
    second_stage_tests: int

    def to_dict(self):
        return {
            "positives": sorted(self.positives),
            "positive_pools": sorted(self.outcome),
            "candidates": sorted(self.candidates),
            "unresolved_count": self.unresolved_count,
            "second_stage_tests": self.second_stage_tests,
        }


def positive_pools(design, P):
    """Pools that contain at least one member of P."""
    P = _index_set(P, design.n, "object")
    if not P:
        return frozenset()
    hit = design.incidence[sorted(P)].any(axis=0)
    return frozenset(np.flatnonzero(hit).tolist())


def candidate_positives(design, outcome):
    """Objects whose signature is a subset of the positive pools."""
    outcome = _index_set(outcome, design.v, "pool")
    negative = np.ones(design.v, dtype=bool)
    negative[sorted(outcome)] = False
    ruled_out = design.incidence[:, negative].any(axis=1)
    return frozenset(np.flatnonzero(~ruled_out).tolist())


def screen(design, P):
    P = _index_set(P, design.n, "object")
    outcome = positive_pools(design, P)
    candidates = candidate_positives(design, outcome)
    return ScreenOutcome(
        positives=P,
        outcome=outcome,
        candidates=candidates,
        unresolved_count=len(candidates) - len(P),
        second_stage_tests=len(candidates),
    )


def positive_pools_matrix(design, X):
    """Row-wise positive pools for a boolean (m, n) matrix of positive sets."""
    X = np.asarray(X, dtype=bool)
    if X.ndim != 2 or X.shape[1] != design.n:
        raise ValueError(f"expected shape (m, {design.n}), got {X.shape}")
    return (X.astype(np.float64) @ design.incidence.astype(np.float64)) > 0


def candidates_matrix(design, Y):
    """Row-wise candidate sets for a boolean (m, v) matrix of pool outcomes."""
    Y = np.asarray(Y, dtype=bool)
    if Y.ndim != 2 or Y.shape[1] != design.v:
        raise ValueError(f"expected shape (m, {design.v}), got {Y.shape}")
    # a candidate has no pool among the negative ones
    hits = (~Y).astype(np.float64) @ design.incidence.T.astype(np.float64)
    return hits == 0


def unresolved_counts(design, X):
    """|closure(P) \\ P| for every row P of X, as an int64 vector."""
    X = np.asarray(X, dtype=bool)
    cand = candidates_matrix(design, positive_pools_matrix(design, X))
    return cand.sum(axis=1, dtype=np.int64) - X.sum(axis=1, dtype=np.int64)
