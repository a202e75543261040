"""Compiled inner loops for long simulations.

One round: every propensity decays by (1 - x), then agents take turns in id
order; each agent samples a trio from the current matrix and the collusion
pays off immediately (every member reinforces her own row toward the other
two members).  Later agents in the same round therefore see the reinforcement
of earlier collusions.  The per-round total-weight recurrence
sum W(t+1) = (1-x) sum W(t) + 3N (Three's Company) is exact under this
scheme, the same as for a simultaneous batch update.

The kernels reproduce the pure NumPy path bit for bit: identical factor
ordering for trio weights, identical sequential cumulative sums, the same
inverse-CDF selection, and the same reinforcement order, so a trial run
through either path yields the same trajectory for the same uniform stream.
"""

from __future__ import annotations

import numpy as np
from numba import njit

RULE_LITERAL = 0
RULE_SYMMETRIZED = 1
RULE_CHOOSER_ONLY = 2
RULE_SEQUENTIAL = 3

ERR_OK = 0
ERR_DEGENERATE = 1

# Post-decay weights below this are flushed to exact zero.  Geometric decay
# otherwise parks entries on the smallest subnormal (which is a fixed point of
# multiplication by any factor above one half), leaving permanently denormal
# values that are both meaningless and extremely slow to compute with.
WEIGHT_FLOOR = 1e-300


@njit(cache=True, nogil=True, inline="always")
def _sample_one(w, pair_rows, pair_cols, cand, cand_others, rule, i, u, cum, recips):
    """Inverse-CDF draw of agent i's trio from the current matrix.

    Returns the global trio id, or -1 when the candidate table cannot be
    sampled (all-zero, or non-finite as SEQUENTIAL produces for a row with
    fewer than two positive partners).
    """
    m = cand.shape[1]
    n = w.shape[0]
    if rule == RULE_SEQUENTIAL:
        total_row = 0.0
        for v in range(n):
            total_row += w[i, v]
        for v in range(n):
            recips[v] = 1.0 / (total_row - w[i, v])
    acc = 0.0
    for j in range(m):
        if rule == RULE_SEQUENTIAL:
            o1 = cand_others[i, j, 0]
            o2 = cand_others[i, j, 1]
            wgt = (w[i, o1] * w[i, o2]) * (recips[o1] + recips[o2])
        elif rule == RULE_CHOOSER_ONLY:
            wgt = w[i, cand_others[i, j, 0]] * w[i, cand_others[i, j, 1]]
        else:
            t = cand[i, j]
            if rule == RULE_SYMMETRIZED:
                f0 = (w[pair_rows[t, 0], pair_cols[t, 0]] + w[pair_cols[t, 0], pair_rows[t, 0]]) * 0.5
                f1 = (w[pair_rows[t, 1], pair_cols[t, 1]] + w[pair_cols[t, 1], pair_rows[t, 1]]) * 0.5
                f2 = (w[pair_rows[t, 2], pair_cols[t, 2]] + w[pair_cols[t, 2], pair_rows[t, 2]]) * 0.5
            else:
                f0 = w[pair_rows[t, 0], pair_cols[t, 0]]
                f1 = w[pair_rows[t, 1], pair_cols[t, 1]]
                f2 = w[pair_rows[t, 2], pair_cols[t, 2]]
            wgt = (f0 * f1) * f2
        acc += wgt
        cum[j] = acc
    total = cum[m - 1]
    if not total > 0.0 or total == np.inf:
        return np.int64(-1)
    val = u * total
    pick = m - 1
    for j in range(m):
        if cum[j] > val:
            pick = j
            break
    return cand[i, pick]


@njit(cache=True, nogil=True)
def run_chunk_threes(
    w,
    uniforms,
    x,
    reward,
    trios,
    pair_rows,
    pair_cols,
    cand,
    cand_others,
    rule,
    union,
    choices_out,
):
    """Advance Three's Company by uniforms.shape[0] rounds.  Returns an error code."""
    k_steps, n = uniforms.shape
    cum = np.empty(cand.shape[1])
    recips = np.empty(n)
    one_minus = 1.0 - x
    for s in range(k_steps):
        for i in range(n):
            for j in range(n):
                wv = one_minus * w[i, j]
                if wv < WEIGHT_FLOOR:
                    wv = 0.0
                w[i, j] = wv
        for i in range(n):
            tid = _sample_one(
                w, pair_rows, pair_cols, cand, cand_others, rule, i, uniforms[s, i], cum, recips
            )
            if tid < 0:
                return ERR_DEGENERATE
            choices_out[s, i] = tid
            a = trios[tid, 0]
            b = trios[tid, 1]
            c = trios[tid, 2]
            w[a, b] += reward
            w[b, a] += reward
            w[a, c] += reward
            w[c, a] += reward
            w[b, c] += reward
            w[c, b] += reward
            union[a, b] = True
            union[a, c] = True
            union[b, c] = True
    return ERR_OK


@njit(cache=True, nogil=True)
def run_chunk_stag(
    w,
    uniforms,
    x,
    hare_reward,
    stag_reward,
    n_hare,
    visit_eps,
    track_visit,
    trios,
    pair_rows,
    pair_cols,
    cand,
    cand_others,
    all_stag,
    rule,
    union,
    choices_out,
):
    """Advance the Stag Hunt by uniforms.shape[0] rounds.

    Returns (error code, drop step): drop step is the first round index within
    this chunk at which, on the settled state before the round, every stag
    hunter's propensity share toward hare hunters is below ``visit_eps``
    (-1 when tracking is off or the threshold was not crossed).
    """
    k_steps, n = uniforms.shape
    cum = np.empty(cand.shape[1])
    recips = np.empty(n)
    one_minus = 1.0 - x
    drop_step = -1
    for s in range(k_steps):
        if track_visit and drop_step < 0:
            everyone_internal = True
            for i in range(n_hare, n):
                hare_mass = 0.0
                total = 0.0
                for v in range(n):
                    wv = w[i, v]
                    total += wv
                    if v < n_hare:
                        hare_mass += wv
                if not total > 0.0:
                    return ERR_DEGENERATE, drop_step
                if not hare_mass < visit_eps * total:
                    everyone_internal = False
                    break
            if everyone_internal:
                drop_step = s
        for i in range(n):
            for j in range(n):
                wv = one_minus * w[i, j]
                if wv < WEIGHT_FLOOR:
                    wv = 0.0
                w[i, j] = wv
        for i in range(n):
            tid = _sample_one(
                w, pair_rows, pair_cols, cand, cand_others, rule, i, uniforms[s, i], cum, recips
            )
            if tid < 0:
                return ERR_DEGENERATE, drop_step
            choices_out[s, i] = tid
            a = trios[tid, 0]
            b = trios[tid, 1]
            c = trios[tid, 2]
            stag_trio = all_stag[tid]
            if a < n_hare:
                w[a, b] += hare_reward
                w[a, c] += hare_reward
            elif stag_trio:
                w[a, b] += stag_reward
                w[a, c] += stag_reward
            if b < n_hare:
                w[b, a] += hare_reward
                w[b, c] += hare_reward
            elif stag_trio:
                w[b, a] += stag_reward
                w[b, c] += stag_reward
            if c < n_hare:
                w[c, a] += hare_reward
                w[c, b] += hare_reward
            elif stag_trio:
                w[c, a] += stag_reward
                w[c, b] += stag_reward
            union[a, b] = True
            union[a, c] = True
            union[b, c] = True
    return ERR_OK, drop_step
