"""Shared test helpers: independent enumeration oracles for trio choice."""

import itertools
import math

import numpy as np

from trionet import PropensityMatrix, TrioWeightRule


def oracle_probs(w: np.ndarray, chooser: int, rule: TrioWeightRule) -> np.ndarray:
    """Brute-force trio distribution, independent of the implementation's
    candidate tables, factor ordering, and cumulative-sum sampling."""
    n = w.shape[0]
    others = [v for v in range(n) if v != chooser]
    vals = []
    for j, k in itertools.combinations(others, 2):
        if rule is TrioWeightRule.CHOOSER_ONLY:
            vals.append(w[chooser, j] * w[chooser, k])
        elif rule is TrioWeightRule.SEQUENTIAL:
            total = w[chooser].sum()
            vals.append(
                (w[chooser, j] / total) * (w[chooser, k] / (total - w[chooser, j]))
                + (w[chooser, k] / total) * (w[chooser, j] / (total - w[chooser, k]))
            )
        else:
            trio = sorted((chooser, j, k))
            factors = []
            for r, s in itertools.combinations(trio, 2):
                if rule is TrioWeightRule.SYMMETRIZED:
                    factors.append((w[r, s] + w[s, r]) / 2.0)
                else:
                    factors.append(w[r, s])
            vals.append(math.prod(factors))
    arr = np.array(vals)
    return arr / arr.sum()


def random_matrix(rng: np.random.Generator, n: int) -> PropensityMatrix:
    w = rng.uniform(0.2, 5.0, (n, n))
    np.fill_diagonal(w, 0.0)
    return PropensityMatrix(w)
