"""scikit-learn style wrapper around a pool design and closure decoding.

Rows of ``X`` are positive sets encoded as 0/1 indicator vectors over the
``n`` objects.  ``fit`` only fixes the design (its pools never depend on
the data, just on ``n``), ``transform`` runs the pooled tests and
``predict`` returns the candidate positives left for the second stage.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .bounds import recommend_design
from .decode import candidates_matrix, positive_pools_matrix, unresolved_counts
from .design import PoolDesign, generate_bernoulli_design


def _indicator_matrix(X, n=None):
    X = check_array(X, dtype=None, ensure_min_samples=1, ensure_min_features=0)
    if not np.isin(X, (0, 1)).all():
        raise ValueError("X must hold 0/1 indicators")
    X = X.astype(bool)
    if n is not None and X.shape[1] != n:
        raise ValueError(f"X has {X.shape[1]} columns, the design covers {n} objects")
    return X


class ClosureScreen(TransformerMixin, BaseEstimator):
    """First-stage pooled screen with closure decoding.

    Parameters
    ----------
    n_pools : int or None
        Number of random pools.  ``None`` takes the recipe value for ``eps``.
    q : float or None
        Cell probability of the random design; ``None`` follows the recipe.
    eps : float
        Slack of the random-design recipe, used when n_pools or q is None.
    seed : int
        Seed of the design stream.
    design : PoolDesign or None
        Fixed design to use instead of drawing one.
    """

    def __init__(self, n_pools=None, q=None, eps=1.0, seed=0, design=None):
        self.n_pools = n_pools
        self.q = q
        self.eps = eps
        self.seed = seed
        self.design = design

    def fit(self, X, y=None):
        X = _indicator_matrix(X)
        n = X.shape[1]
        if self.design is not None:
            if not isinstance(self.design, PoolDesign):
                raise TypeError("design must be a PoolDesign")
            if self.design.n != n:
                raise ValueError(f"design covers {self.design.n} objects, X has {n} columns")
            self.design_ = self.design
        else:
            v, q = self.n_pools, self.q
            if v is None or q is None:
                v_rec, q_rec = recommend_design(n, self.eps)
                v = v_rec if v is None else v
                q = q_rec if q is None else q
            self.design_ = generate_bernoulli_design(n, v, q, self.seed)
        self.n_features_in_ = n
        self.n_pools_ = self.design_.v
        return self

    def transform(self, X):
        """Pool outcomes, one boolean row of length n_pools_ per instance."""
        check_is_fitted(self, "design_")
        return positive_pools_matrix(self.design_, _indicator_matrix(X, self.n_features_in_))

    def decode(self, Y):
        check_is_fitted(self, "design_")
        Y = check_array(Y, dtype=None, ensure_min_features=0)
        return candidates_matrix(self.design_, Y.astype(bool))

    def predict(self, X):
        """Candidate positives for each positive set in X."""
        return self.decode(self.transform(X))

    def unresolved(self, X):
        check_is_fitted(self, "design_")
        return unresolved_counts(self.design_, _indicator_matrix(X, self.n_features_in_))

    def score(self, X, y=None):
        """Negative mean number of unresolved negatives (higher is better)."""
        return -float(self.unresolved(X).mean())
