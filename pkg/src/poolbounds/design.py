"""Pool designs: construction, statistics and the JSON design file."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _rng
from ._validation import check_count, check_probability, check_seed


class PoolDesign:
    """Object/pool incidence structure.

    ``incidence[x, y]`` is True iff object ``x`` sits in pool ``y``; row
    ``x`` is the signature g(x).  Instances are immutable.
    """

    def __init__(self, incidence):
        arr = np.array(incidence, dtype=bool, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"incidence must be 2-dimensional, got shape {arr.shape}")
        arr.flags.writeable = False
        self._incidence = arr

    @property
    def incidence(self):
        return self._incidence

    @property
    def n(self):
        return self._incidence.shape[0]

    @property
    def v(self):
        return self._incidence.shape[1]

    @property
    def signatures(self):
        """Each row packed into an int, bit y set iff the object is in pool y."""
        weights = [1 << y for y in range(self.v)]
        return [sum(w for w, bit in zip(weights, row) if bit) for row in self._incidence.tolist()]

    def pool(self, y):
        return frozenset(np.flatnonzero(self._incidence[:, y]).tolist())

    def signature(self, x):
        return frozenset(np.flatnonzero(self._incidence[x]).tolist())

    def rows(self):
        return ["".join("1" if b else "0" for b in row) for row in self._incidence.tolist()]

    def to_dict(self):
        return {"n": self.n, "v": self.v, "rows": self.rows()}

    def to_json(self):
        return json.dumps(self.to_dict(), separators=(", ", ": "))

    @classmethod
    def from_dict(cls, doc):
        for key in ("n", "v", "rows"):
            if key not in doc:
                raise ValueError(f"design document is missing {key!r}")
        n = check_count(doc["n"], "n")
        v = check_count(doc["v"], "v")
        rows = doc["rows"]
        if not isinstance(rows, list) or len(rows) != n:
            raise ValueError(f"design document needs {n} rows")
        incidence = np.zeros((n, v), dtype=bool)
        for x, row in enumerate(rows):
            if not isinstance(row, str) or len(row) != v or set(row) - {"0", "1"}:
                raise ValueError(f"row {x} must be a {v}-character 0/1 string")
            incidence[x] = [c == "1" for c in row]
        return cls(incidence)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def __eq__(self, other):
        if not isinstance(other, PoolDesign):
            return NotImplemented
        return self._incidence.shape == other._incidence.shape and bool(
            np.array_equal(self._incidence, other._incidence)
        )

    def __hash__(self):
        return hash((self._incidence.shape, np.packbits(self._incidence).tobytes()))

    def __repr__(self):
        return f"PoolDesign(n={self.n}, v={self.v})"


@dataclass(frozen=True)
class DesignStats:
    pool_sizes: tuple
    non_singleton_pool_count: int
    empty_signature_objects: int

    def to_dict(self):
        return {
            "pool_sizes": list(self.pool_sizes),
            "non_singleton_pool_count": self.non_singleton_pool_count,
            "empty_signature_objects": self.empty_signature_objects,
        }


def generate_bernoulli_design(n, v, q, seed):
    """Random design with every cell set independently with probability q.

    Cell (x, y) is drawn from counter block x of the design stream, so the
    result depends only on (n, v, q, seed).
    """
    n = check_count(n, "n")
    v = check_count(v, "v")
    q = check_probability(q, "q")
    seed = check_seed(seed)
    return PoolDesign(_rng.uniform_rows(_rng.DESIGN_STREAM, seed, v, 0, n) < q)


def singleton_design(n):
    """One pool per object, which leaves nothing for the second stage."""
    n = check_count(n, "n")
    return PoolDesign(np.eye(n, dtype=bool))


def design_stats(design):
    inc = design.incidence
    sizes = inc.sum(axis=0)
    return DesignStats(
        pool_sizes=tuple(int(s) for s in sizes),
        non_singleton_pool_count=int((sizes >= 2).sum()),
        empty_signature_objects=int((~inc.any(axis=1)).sum()),
    )
