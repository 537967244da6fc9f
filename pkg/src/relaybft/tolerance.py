"""Exhaustive fault-permutation boundary engine.

For a system of n processes, F faulty processes and f faulty directed
links, every choice of F processes (out of n) times every choice of f
links (out of all n*(n-1) directed links, overlaps with the faulty
processes' own links included) is one scenario.  A scenario is solvable
when some group of quorum-many correct processes has all-pairs delivery
through correct relays.  Exact integer counting over all scenarios yields
the solvable fraction per (F, f) and the three regions: ensured
(probability 1), probable (0 < p < 1) and impossible (p = 0).

Solvability is monotone (removing a faulty link never hurts), so the
ensured boundary - the largest f where every permutation is solvable -
is found by binary search with exhaustive certification at the probe
points.  Scenario spaces are partitioned by the first chosen link index
into independent chunks; counts merge by integer addition and are
independent of the chunking.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .topology import LinkMatrix, RelayPolicy, STRICT, f_max, quorum_size


class BudgetExceededError(RuntimeError):
    """Raised instead of starting a run whose scenario space is too large."""

    def __init__(self, estimate: int, budget: int):
        super().__init__(
            f"scenario space holds {estimate} permutations, above the budget of {budget}"
        )
        self.estimate = estimate
        self.budget = budget


@dataclass(frozen=True)
class Consensus:
    """Count scenarios where some quorum-sized correct group agrees."""

    quorum: int | None = None  # None: majority for the given n


@dataclass(frozen=True)
class Delivery:
    """Count scenarios where some group of `group_size` processes has
    all-pairs delivery (relays may be any correct process)."""

    group_size: int


Mode = Consensus | Delivery


@dataclass(frozen=True)
class ToleranceRecord:
    n: int
    faulty_process_count: int
    faulty_link_count: int
    total_permutations: int
    solvable_permutations: int

    @property
    def probability(self) -> Fraction:
        return Fraction(self.solvable_permutations, self.total_permutations)

    @property
    def region(self) -> str:
        if self.solvable_permutations == self.total_permutations:
            return "ensured"
        if self.solvable_permutations == 0:
            return "impossible"
        return "probable"

    def row(self) -> str:
        return "\t".join(
            str(x)
            for x in (
                self.n,
                self.faulty_process_count,
                self.faulty_link_count,
                self.total_permutations,
                self.solvable_permutations,
                f"{float(self.probability):.10f}",
                self.region,
            )
        )


RECORD_HEADER = "n\tF\tf\ttotal\tsolvable\tprobability\tregion"


def link_list(n: int) -> list[tuple[int, int]]:
    """All n*(n-1) directed off-diagonal links, 1-based, sorted."""
    return [(p, q) for p in range(1, n + 1) for q in range(1, n + 1) if p != q]


def _quorum_for(n: int, mode: Mode) -> int:
    if isinstance(mode, Delivery):
        if not 2 <= mode.group_size <= n:
            raise ValueError("delivery group size must be in [2, n]")
        return mode.group_size
    return mode.quorum if mode.quorum is not None else quorum_size(n)


def _link_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    links = link_list(n)
    lp = np.array([p - 1 for p, _ in links], dtype=np.int64)
    lq = np.array([q - 1 for _, q in links], dtype=np.int64)
    return lp, lq


def _base_rows(n: int, faulty: tuple[int, ...]) -> np.ndarray:
    m = LinkMatrix.fully_connected(n)
    for pid in faulty:
        m = m.apply_faulty_process(pid)
    return np.array(m.rows, dtype=np.int64)


def _count_one_fault_set(
    n: int,
    faulty: tuple[int, ...],
    f: int,
    quorum: int,
    policy: RelayPolicy,
    jobs: int | None,
    early_exit: bool = False,
) -> tuple[int, int, bool]:
    """(processed, solvable, any_failure) over all f-link choices."""
    lp, lq = _link_arrays(n)
    correct = np.array([p - 1 for p in range(1, n + 1) if p not in faulty], dtype=np.int64)
    base = _base_rows(n, faulty)
    strict = policy.variant == "strict"
    if not jobs or jobs <= 1 or f == 0:
        processed, good, failed = _kernels.enumerate_link_combos(
            base, n, correct, quorum, strict, policy.max_hops, lp, lq, f, -1, early_exit
        )
        return int(processed), int(good), bool(failed)
    # One chunk per admissible first link index; counts merge by addition.
    firsts = range(0, len(lp) - f + 1)
    processed = good = 0
    failed = False
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = [
            pool.submit(
                _kernels.enumerate_link_combos,
                base, n, correct, quorum, strict, policy.max_hops, lp, lq, f,
                first, early_exit,
            )
            for first in firsts
        ]
        for fut in futures:
            p_, g_, fl_ = fut.result()
            processed += int(p_)
            good += int(g_)
            failed = failed or bool(fl_)
    return processed, good, failed


def enumerate_record(
    n: int,
    F: int,
    f: int,
    policy: RelayPolicy = STRICT,
    mode: Mode = Consensus(),
    budget: int | None = None,
    jobs: int | None = None,
) -> ToleranceRecord:
    """Exact solvable count over every (faulty processes, faulty links) choice."""
    L = n * (n - 1)
    if isinstance(mode, Consensus) and F > f_max(n):
        raise ValueError(f"F={F} exceeds the tolerated maximum {f_max(n)} for n={n}")
    if not 0 <= f <= L:
        raise ValueError(f"f={f} outside [0, {L}]")
    total = math.comb(n, F) * math.comb(L, f)
    if budget is not None and total > budget:
        raise BudgetExceededError(total, budget)
    quorum = _quorum_for(n, mode)
    processed = good = 0
    for faulty in itertools.combinations(range(1, n + 1), F):
        p_, g_, _ = _count_one_fault_set(n, faulty, f, quorum, policy, jobs)
        processed += p_
        good += g_
    if processed != total:
        raise AssertionError(f"enumerated {processed} of {total} scenarios")
    return ToleranceRecord(n, F, f, total, good)


def sweep(
    n: int,
    policy: RelayPolicy = STRICT,
    F_values: tuple[int, ...] | None = None,
    f_values: tuple[int, ...] | None = None,
    mode: Mode = Consensus(),
    budget: int | None = None,
    jobs: int | None = None,
) -> list[ToleranceRecord]:
    """Records for every (F, f) pair; the data behind the tolerance figures."""
    L = n * (n - 1)
    if F_values is None:
        F_values = tuple(range(f_max(n) + 1))
    if f_values is None:
        f_values = tuple(range(L + 1))
    return [
        enumerate_record(n, F, f, policy, mode, budget, jobs)
        for F in F_values
        for f in f_values
    ]


def _has_failure(
    n: int, F: int, f: int, quorum: int, policy: RelayPolicy, jobs: int | None
) -> bool:
    for faulty in itertools.combinations(range(1, n + 1), F):
        _, _, failed = _count_one_fault_set(n, faulty, f, quorum, policy, jobs, early_exit=True)
        if failed:
            return True
    return False


def ensured_boundary(
    n: int,
    F: int,
    policy: RelayPolicy = STRICT,
    mode: Mode = Consensus(),
    budget: int | None = None,
    jobs: int | None = None,
) -> int:
    """Largest f where every permutation is solvable (-1 if none is)."""
    L = n * (n - 1)
    quorum = _quorum_for(n, mode)
    if isinstance(mode, Consensus) and F > f_max(n):
        raise ValueError(f"F={F} exceeds the tolerated maximum {f_max(n)} for n={n}")
    if budget is not None:
        # The certification pass at the boundary dominates the cost.
        worst = math.comb(n, F) * max(math.comb(L, k) for k in range(L + 1))
        if worst > budget:
            raise BudgetExceededError(worst, budget)
    # Monotone: a failing link set stays failing under supersets, so
    # "some permutation fails at f" is monotone in f.  Binary-search the
    # smallest failing f (L+1 plays "never fails"); the boundary is one less.
    lo, hi = 0, L + 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _has_failure(n, F, mid, quorum, policy, jobs):
            hi = mid
        else:
            lo = mid + 1
    return lo - 1


def delivery_tolerance(
    n: int,
    group_size: int,
    policy: RelayPolicy = STRICT,
    budget: int | None = None,
    jobs: int | None = None,
) -> int:
    """Largest f where every f-link permutation still serves some group
    of `group_size` processes with all-pairs delivery (no faulty processes)."""
    return ensured_boundary(n, 0, policy, Delivery(group_size), budget, jobs)


def sample_scenarios(
    n: int,
    F: int,
    f: int,
    samples: int,
    seed: int,
    policy: RelayPolicy = STRICT,
    mode: Mode = Consensus(),
) -> tuple[int, tuple[tuple[int, ...], tuple[tuple[int, int], ...]] | None]:
    """Random spot check: (#unsolvable samples, one counterexample or None).

    For spaces too large to enumerate; a zero failure count over many
    samples is evidence, not proof, that (F, f) sits in the ensured region.
    """
    rng = np.random.default_rng(seed)
    links = link_list(n)
    quorum = _quorum_for(n, mode)
    strict = policy.variant == "strict"
    base_rows_all = np.empty((samples, n), dtype=np.int64)
    correct_sets = np.full((samples, n), -1, dtype=np.int64)
    correct_lens = np.empty(samples, dtype=np.int64)
    link_p = np.empty((samples, f), dtype=np.int64)
    link_q = np.empty((samples, f), dtype=np.int64)
    chosen: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    for s in range(samples):
        faulty = tuple(sorted(rng.choice(n, size=F, replace=False) + 1)) if F else ()
        picks = tuple(sorted(rng.choice(len(links), size=f, replace=False))) if f else ()
        chosen.append((faulty, picks))
        base_rows_all[s] = _base_rows(n, faulty)
        corr = [p - 1 for p in range(1, n + 1) if p not in faulty]
        correct_lens[s] = len(corr)
        correct_sets[s, : len(corr)] = corr
        for j, k in enumerate(picks):
            link_p[s, j] = links[k][0] - 1
            link_q[s, j] = links[k][1] - 1
    failures, first_bad = _kernels.sample_failures(
        base_rows_all, n, quorum, strict, policy.max_hops,
        correct_sets, correct_lens, link_p, link_q,
    )
    example = None
    if failures:
        faulty, picks = chosen[int(first_bad)]
        example = (faulty, tuple(links[k] for k in picks))
    return int(failures), example


def symmetry_reduced_record(
    n: int,
    F: int,
    f: int,
    policy: RelayPolicy = STRICT,
    mode: Mode = Consensus(),
) -> ToleranceRecord:
    """Same counts as enumerate_record, obtained via orbit representatives.

    Every scenario orbit under process relabeling is counted once from its
    lexicographically minimal member, weighted by orbit size; solvability
    is relabeling-invariant, so totals must match the plain enumeration.
    """
    links = link_list(n)
    lp, lq = _link_arrays(n)
    index_of = {pq: i for i, pq in enumerate(links)}
    perms = list(itertools.permutations(range(1, n + 1)))
    link_maps = np.empty((len(perms), len(links)), dtype=np.int64)
    for k, perm in enumerate(perms):
        for i, (p, q) in enumerate(links):
            link_maps[k, i] = index_of[(perm[p - 1], perm[q - 1])]
    quorum = _quorum_for(n, mode)
    strict = policy.variant == "strict"
    total = good = 0
    for faulty in itertools.combinations(range(1, n + 1), F):
        pmask = np.int64(sum(1 << (p - 1) for p in faulty))
        perm_pmasks = np.array(
            [sum(1 << (perm[p - 1] - 1) for p in faulty) for perm in perms], dtype=np.int64
        )
        t_, g_ = _kernels.canonical_orbit_counts(
            n, pmask, link_maps, quorum, strict, policy.max_hops, lp, lq, f, perm_pmasks
        )
        total += int(t_)
        good += int(g_)
    return ToleranceRecord(n, F, f, total, good)
