"""Hot loops for the tolerance enumerator.

Everything here works on plain integers and numpy arrays so the same
source runs JIT-compiled under numba (the default when importable) or as
ordinary Python (set RELAYBFT_NO_NUMBA=1, or when numba is missing).
Process ids are 0-based and each matrix row is a bitmask with the
diagonal bit set; solvability semantics mirror ``relaybft.topology``.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly by the import
    if os.environ.get("RELAYBFT_NO_NUMBA"):
        raise ImportError
    from numba import njit

    def _jit(fn):
        return njit(cache=True, nogil=True)(fn)

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover
    def _jit(fn):
        return fn

    NUMBA_ENABLED = False


@_jit
def fill_in_masks(rows, n, in_masks):
    for q in range(n):
        m = 0
        for r in range(n):
            if r != q and (rows[r] >> q) & 1:
                m |= 1 << r
        in_masks[q] = m


@_jit
def pair_reach(rows, in_masks, n, p, q, rmask, strict, max_hops):
    if (rows[p] >> q) & 1:
        return True
    if max_hops < 2:
        return False
    legal = rmask & ~(1 << p) & ~(1 << q)
    if rows[p] & in_masks[q] & legal:
        return True
    if max_hops < 3:
        return False
    if strict:
        rt_p = rows[p] & in_masks[p] & legal
        if rt_p == 0:
            return False
        rt_q = rows[q] & in_masks[q] & legal
        if rt_q == 0:
            return False
        for r in range(n):
            if (rt_p >> r) & 1:
                if rows[r] & in_masks[r] & rt_q & ~(1 << r):
                    return True
        return False
    first = rows[p] & legal
    last = in_masks[q] & legal
    for r in range(n):
        if (first >> r) & 1:
            if rows[r] & last & ~(1 << r):
                return True
    return False


@_jit
def solvable(rows, in_masks, n, correct, quorum, strict, max_hops):
    """Existence of a quorum-sized group of correct processes with
    all-pairs reach, relays drawn from the whole correct set."""
    m = len(correct)
    if quorum > m:
        return False
    if quorum <= 1:
        return True
    rmask = 0
    for i in range(m):
        rmask |= 1 << correct[i]
    idx = np.empty(quorum, dtype=np.int64)
    for i in range(quorum):
        idx[i] = i
    while True:
        ok = True
        for a in range(quorum):
            if not ok:
                break
            for b in range(quorum):
                if a == b:
                    continue
                if not pair_reach(
                    rows, in_masks, n, correct[idx[a]], correct[idx[b]], rmask, strict, max_hops
                ):
                    ok = False
                    break
        if ok:
            return True
        i = quorum - 1
        while i >= 0 and idx[i] == m - quorum + i:
            i -= 1
        if i < 0:
            return False
        idx[i] += 1
        for j in range(i + 1, quorum):
            idx[j] = idx[j - 1] + 1


@_jit
def enumerate_link_combos(
    base_rows,
    n,
    correct,
    quorum,
    strict,
    max_hops,
    links_p,
    links_q,
    f,
    first,
    early_exit,
):
    """Count solvable choices of f faulty links from the link list.

    ``first`` fixes the first chosen link index (for chunked runs; -1
    enumerates everything).  With ``early_exit`` the scan stops at the
    first unsolvable choice.  Returns (processed, solvable_count,
    failing_flag) where failing_flag is 1 if a failure was seen.
    """
    L = len(links_p)
    rows = np.empty(n, dtype=np.int64)
    in_masks = np.empty(n, dtype=np.int64)
    processed = 0
    good = 0
    if f == 0:
        for i in range(n):
            rows[i] = base_rows[i]
        fill_in_masks(rows, n, in_masks)
        ok = solvable(rows, in_masks, n, correct, quorum, strict, max_hops)
        if ok:
            return 1, 1, 0
        return 1, 0, 1
    idx = np.empty(f, dtype=np.int64)
    lo = 0
    if first >= 0:
        idx[0] = first
        lo = 1
        for j in range(1, f):
            idx[j] = first + j
        if idx[f - 1] > L - 1:
            return 0, 0, 0
    else:
        for j in range(f):
            idx[j] = j
        if idx[f - 1] > L - 1:
            return 0, 0, 0
    failed = 0
    while True:
        for i in range(n):
            rows[i] = base_rows[i]
        for j in range(f):
            k = idx[j]
            rows[links_p[k]] &= ~(np.int64(1) << links_q[k])
        fill_in_masks(rows, n, in_masks)
        processed += 1
        if solvable(rows, in_masks, n, correct, quorum, strict, max_hops):
            good += 1
        else:
            failed = 1
            if early_exit:
                return processed, good, failed
        i = f - 1
        while i >= lo and idx[i] == L - f + i:
            i -= 1
        if i < lo:
            break
        idx[i] += 1
        for j in range(i + 1, f):
            idx[j] = idx[j - 1] + 1
    return processed, good, failed


@_jit
def sample_failures(
    base_rows_all,
    n,
    quorum,
    strict,
    max_hops,
    correct_sets,
    correct_lens,
    link_sets_p,
    link_sets_q,
):
    """Solvability over pre-sampled scenarios; returns (failures, first_bad)."""
    count = link_sets_p.shape[0]
    rows = np.empty(n, dtype=np.int64)
    in_masks = np.empty(n, dtype=np.int64)
    failures = 0
    first_bad = -1
    for s in range(count):
        for i in range(n):
            rows[i] = base_rows_all[s, i]
        for j in range(link_sets_p.shape[1]):
            rows[link_sets_p[s, j]] &= ~(np.int64(1) << link_sets_q[s, j])
        fill_in_masks(rows, n, in_masks)
        if not solvable(
            rows, in_masks, n, correct_sets[s, : correct_lens[s]], quorum, strict, max_hops
        ):
            failures += 1
            if first_bad < 0:
                first_bad = s
    return failures, first_bad


@_jit
def canonical_orbit_counts(
    n,
    proc_mask,
    link_masks_by_perm,
    quorum,
    strict,
    max_hops,
    links_p,
    links_q,
    f,
    perm_proc_masks,
):
    """Orbit-representative sweep used to validate symmetry reduction.

    ``link_masks_by_perm[k][i]`` is the image of link i under permutation
    k and ``perm_proc_masks[k]`` the image of the faulty-process mask.
    Counts every combo whose (process mask, link mask) pair is
    lexicographically minimal within its orbit, weighted by orbit size.
    Returns (total_weighted, solvable_weighted).
    """
    L = len(links_p)
    nperm = link_masks_by_perm.shape[0]
    rows = np.empty(n, dtype=np.int64)
    in_masks = np.empty(n, dtype=np.int64)
    correct = np.empty(n, dtype=np.int64)
    ncorrect = 0
    for p in range(n):
        if not (proc_mask >> p) & 1:
            correct[ncorrect] = p
            ncorrect += 1
    total = 0
    good = 0
    idx = np.empty(max(f, 1), dtype=np.int64)
    for j in range(f):
        idx[j] = j
    if f > 0 and idx[f - 1] > L - 1:
        return 0, 0
    while True:
        lmask = np.int64(0)
        for j in range(f):
            lmask |= np.int64(1) << idx[j]
        minimal = True
        stab = 0
        for k in range(nperm):
            pm = perm_proc_masks[k]
            im = np.int64(0)
            for j in range(f):
                im |= np.int64(1) << link_masks_by_perm[k, idx[j]]
            if pm < proc_mask or (pm == proc_mask and im < lmask):
                minimal = False
                break
            if pm == proc_mask and im == lmask:
                stab += 1
        if minimal:
            orbit = nperm // stab
            for i in range(n):
                rows[i] = np.int64((1 << n) - 1)
            for p in range(n):
                if (proc_mask >> p) & 1:
                    rows[p] = np.int64(1 << p)
                    for r in range(n):
                        if r != p:
                            rows[r] &= ~(np.int64(1) << p)
            for j in range(f):
                k = idx[j]
                rows[links_p[k]] &= ~(np.int64(1) << links_q[k])
            fill_in_masks(rows, n, in_masks)
            total += orbit
            if solvable(rows, in_masks, n, correct[:ncorrect], quorum, strict, max_hops):
                good += orbit
        if f == 0:
            break
        i = f - 1
        while i >= 0 and idx[i] == L - f + i:
            i -= 1
        if i < 0:
            break
        idx[i] += 1
        for j in range(i + 1, f):
            idx[j] = idx[j - 1] + 1
    return total, good
