"""Compiled inner loops for hypothetical map updates on a sorted 1-D universe."""
import numpy as np
from numba import njit


@njit(cache=True)
def _count(xs, lo, hi, eps):
    left = np.searchsorted(xs, lo - eps, side="left")
    right = np.searchsorted(xs, hi + eps, side="right")
    return left, right


@njit(cache=True)
def _support(xs, lo, hi, eps, cell):
    """Sorted-universe slice of ``[lo, hi]``, widened by ``cell`` unless the
    interval is a point."""
    if hi - lo > eps:
        return _count(xs, lo - cell, hi + cell, eps)
    return _count(xs, lo, hi, eps)


@njit(cache=True)
def removed_total(xs, lo, hi, before, radius, outcomes, eps):
    """Sum over outcomes and pairs of candidates removed by one hypothetical triplet."""
    total = 0
    for k in range(outcomes.shape[0]):
        c = outcomes[k]
        for j in range(lo.shape[0]):
            nlo = max(lo[j], c - radius[j])
            nhi = min(hi[j], c + radius[j])
            if nlo == lo[j] and nhi == hi[j]:
                continue
            left, right = _count(xs, nlo, nhi, eps)
            n = right - left if right > left else 0
            total += before[j] - n
    return total


@njit(cache=True)
def outcomes_that_expand(xs, unsafe_prefix, lo, hi, radius, outcomes, eps, cell):
    """For each outcome, whether some pair's tightened support becomes
    non-empty and free of unsafe points."""
    hit = np.zeros(outcomes.shape[0], dtype=np.bool_)
    for k in range(outcomes.shape[0]):
        c = outcomes[k]
        for j in range(lo.shape[0]):
            nlo = max(lo[j], c - radius[j])
            nhi = min(hi[j], c + radius[j])
            if nlo == lo[j] and nhi == hi[j]:
                continue
            left, right = _support(xs, nlo, nhi, eps, cell)
            if right > left and unsafe_prefix[right] == unsafe_prefix[left]:
                hit[k] = True
                break
    return hit


@njit(cache=True)
def hypothetical_growth(xs, order, in_safe, lo, hi, base_left, base_right, radius, c,
                        eps, cell, orig):
    """Growth of the safe fixed point (counting rows below ``orig``) after
    tightening every pair with a hypothetical outcome at ``c``.

    ``base_left``/``base_right`` are the current support slices of every
    pair; only pairs the outcome tightens are recounted.
    """
    n_rows, n_act = lo.shape
    n = xs.shape[0]
    left = base_left.copy()
    right = base_right.copy()
    for i in range(n_rows):
        if in_safe[i]:
            continue
        for j in range(n_act):
            nlo = max(lo[i, j], c - radius[i, j])
            nhi = min(hi[i, j], c + radius[i, j])
            if nlo == lo[i, j] and nhi == hi[i, j]:
                continue
            l, r = _support(xs, nlo, nhi, eps, cell)
            left[i, j] = l
            right[i, j] = r
    grown = in_safe.copy()
    prefix = np.zeros(n + 1, dtype=np.int64)
    changed = True
    while changed:
        changed = False
        for k in range(n):
            prefix[k + 1] = prefix[k] + (0 if grown[order[k]] else 1)
        add = np.zeros(n_rows, dtype=np.bool_)
        for i in range(n_rows):
            if grown[i]:
                continue
            for j in range(n_act):
                if right[i, j] > left[i, j] and prefix[right[i, j]] == prefix[left[i, j]]:
                    add[i] = True
                    break
        for i in range(n_rows):
            if add[i]:
                grown[i] = True
                changed = True
    total = 0
    for i in range(orig):
        if grown[i] and not in_safe[i]:
            total += 1
    return total
