"""Combinatorial index tables for trio enumeration, cached per population size.

All trios are triples of distinct agents 0..N-1, stored sorted ascending and
ordered lexicographically.  The same canonical ordering is shared by the pure
NumPy sampling path and the compiled kernels so that both consume an identical
random stream and produce bitwise-identical trajectories.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from typing import NamedTuple

import numpy as np


class TrioTables(NamedTuple):
    """Index tables over the C(N,3) trios of a population of size N."""

    trios: np.ndarray        # (T, 3) int64, rows sorted ascending, lex order
    pair_rows: np.ndarray    # (T, 3) int64, row index of the pairs (a,b),(a,c),(b,c)
    pair_cols: np.ndarray    # (T, 3) int64, column index of the same pairs
    cand: np.ndarray         # (N, M) int64, ids of trios containing agent i, M = C(N-1,2)
    cand_others: np.ndarray  # (N, M, 2) int64, the two non-chooser members, ascending


@lru_cache(maxsize=None)
def trio_tables(n_agents: int) -> TrioTables:
    if n_agents < 4:
        raise ValueError(f"population size must be at least 4, got {n_agents}")
    trios = np.array(list(combinations(range(n_agents), 3)), dtype=np.int64)
    t = len(trios)
    a, b, c = trios[:, 0], trios[:, 1], trios[:, 2]
    pair_rows = np.stack([a, a, b], axis=1)
    pair_cols = np.stack([b, c, c], axis=1)

    m = (n_agents - 1) * (n_agents - 2) // 2
    cand = np.empty((n_agents, m), dtype=np.int64)
    cand_others = np.empty((n_agents, m, 2), dtype=np.int64)
    for i in range(n_agents):
        ids = np.flatnonzero((trios == i).any(axis=1))
        cand[i] = ids
        others = trios[ids]
        others = others[others != i].reshape(m, 2)
        cand_others[i] = others

    return TrioTables(
        trios=np.ascontiguousarray(trios),
        pair_rows=np.ascontiguousarray(pair_rows),
        pair_cols=np.ascontiguousarray(pair_cols),
        cand=np.ascontiguousarray(cand),
        cand_others=np.ascontiguousarray(cand_others),
    )


@lru_cache(maxsize=None)
def all_stag_flags(n_agents: int, n_hare: int) -> np.ndarray:
    """Boolean flag per trio: True when every member is a stag hunter (id >= n_hare)."""
    tables = trio_tables(n_agents)
    return np.ascontiguousarray(tables.trios[:, 0] >= n_hare)
