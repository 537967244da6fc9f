"""Directed-link matrix and k-hop reachability.

The system's communication state is a boolean N x N matrix: cell (p, q) is
True when the one-way link from process p to process q delivers within the
synchrony bound.  Rows are senders.  Process indices are 1-based throughout
the public API; internally each row is a bitmask (bit q-1 = link p->q).

A message can be delivered directly, via one relay (2 hops) or via two
distinct relays (3 hops).  Relays must be correct processes: a faulty
process spoils every indirect path that relies on its participation.

Two 3-hop policies exist:

* ``relaxed`` - a plain directed path p -> r -> s -> q through two distinct
  correct relays suffices (the current rule; outbound and inbound helpers
  may differ).
* ``strict`` - the earlier, stronger rule under which all tolerance tables
  were computed: the sender needs a relay r linked both ways with it, the
  receiver a relay u linked both ways with it, r != u, and r and u linked
  both ways with each other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Literal

ProcessId = int


def f_max(n: int) -> int:
    """Largest tolerated number of faulty processes: floor((N-1)/2)."""
    return (n - 1) // 2


def quorum_size(n: int) -> int:
    """Agreement-group size: a majority, N - f_max(N) = floor(N/2)+1."""
    return n - f_max(n)


@dataclass(frozen=True)
class RelayPolicy:
    """Relay rule variant and a hop cap (1 = direct only, 3 = full)."""

    variant: Literal["strict", "relaxed"] = "strict"
    max_hops: int = 3

    def __post_init__(self) -> None:
        if self.variant not in ("strict", "relaxed"):
            raise ValueError(f"unknown relay policy variant {self.variant!r}")
        if self.max_hops not in (1, 2, 3):
            raise ValueError("max_hops must be 1, 2 or 3")


STRICT = RelayPolicy("strict")
RELAXED = RelayPolicy("relaxed")


@dataclass(frozen=True)
class LinkMatrix:
    """Immutable N x N boolean link matrix; diagonal is always True."""

    n: int
    rows: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.n < 3:
            raise ValueError("a system needs at least 3 processes")
        if not self.rows:
            full = (1 << self.n) - 1
            object.__setattr__(self, "rows", tuple(full for _ in range(self.n)))
        if len(self.rows) != self.n:
            raise ValueError("row count does not match n")
        for p, row in enumerate(self.rows):
            if not (row >> p) & 1:
                raise ValueError("diagonal cells must stay true")
            if row >> self.n:
                raise ValueError("row has bits beyond n")

    @classmethod
    def fully_connected(cls, n: int) -> "LinkMatrix":
        return cls(n)

    def link(self, p: ProcessId, q: ProcessId) -> bool:
        """State of the directed link p -> q (diagonal allowed, always True)."""
        self._check_pid(p)
        self._check_pid(q)
        return bool((self.rows[p - 1] >> (q - 1)) & 1)

    def without_links(self, links: Iterable[tuple[ProcessId, ProcessId]]) -> "LinkMatrix":
        """Copy with the given directed links marked faulty/asynchronous."""
        rows = list(self.rows)
        for p, q in links:
            self._check_pid(p)
            self._check_pid(q)
            if p == q:
                raise ValueError("self-links cannot be marked faulty")
            rows[p - 1] &= ~(1 << (q - 1))
        return LinkMatrix(self.n, tuple(rows))

    def without_link(self, p: ProcessId, q: ProcessId) -> "LinkMatrix":
        return self.without_links([(p, q)])

    def apply_faulty_process(self, i: ProcessId) -> "LinkMatrix":
        """Zero row i and column i (stop-failed process); diagonal stays True."""
        self._check_pid(i)
        rows = list(self.rows)
        rows[i - 1] = 1 << (i - 1)
        for p in range(self.n):
            if p != i - 1:
                rows[p] &= ~(1 << (i - 1))
        return LinkMatrix(self.n, tuple(rows))

    def faulty_links(self) -> frozenset[tuple[int, int]]:
        """All off-diagonal links currently marked faulty."""
        out = set()
        for p in range(self.n):
            for q in range(self.n):
                if p != q and not (self.rows[p] >> q) & 1:
                    out.add((p + 1, q + 1))
        return frozenset(out)

    def to_text(self) -> str:
        """Canonical text form: 'N=<n>' then N rows of '0'/'1', row=sender."""
        lines = [f"N={self.n}"]
        for p in range(self.n):
            lines.append("".join("1" if (self.rows[p] >> q) & 1 else "0" for q in range(self.n)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LinkMatrix":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("N="):
            raise ValueError("matrix text must start with 'N=<n>'")
        n = int(lines[0][2:])
        if len(lines) != n + 1:
            raise ValueError("matrix text has wrong row count")
        rows = []
        for p, ln in enumerate(lines[1:]):
            if len(ln) != n or set(ln) - {"0", "1"}:
                raise ValueError(f"bad matrix row {ln!r}")
            row = 0
            for q, ch in enumerate(ln):
                if ch == "1":
                    row |= 1 << q
            rows.append(row)
        return cls(n, tuple(rows))

    def _check_pid(self, p: ProcessId) -> None:
        if not 1 <= p <= self.n:
            raise ValueError(f"process index {p} outside [1, {self.n}]")

    def _in_mask(self, q0: int) -> int:
        """Bitmask of senders with a live link into q0 (0-based)."""
        m = 0
        for r in range(self.n):
            if r != q0 and (self.rows[r] >> q0) & 1:
                m |= 1 << r
        return m


def _mask(members: Iterable[ProcessId]) -> int:
    m = 0
    for p in members:
        m |= 1 << (p - 1)
    return m


def direct_reach(m: LinkMatrix, p: ProcessId, q: ProcessId) -> bool:
    """Direct channel state; p = q is rejected, not a channel query."""
    if p == q:
        raise ValueError("self-delivery is not a channel query")
    return m.link(p, q)


def two_hop_reach(m: LinkMatrix, p: ProcessId, q: ProcessId, relays: Iterable[ProcessId]) -> bool:
    """True iff some correct relay r (not p, q) has live p->r and r->q."""
    if p == q:
        raise ValueError("self-delivery is not a channel query")
    p0, q0 = p - 1, q - 1
    rmask = _mask(relays) & ~(1 << p0) & ~(1 << q0)
    return bool(m.rows[p0] & m._in_mask(q0) & rmask)


def three_hop_reach(m: LinkMatrix, p: ProcessId, q: ProcessId, relays: Iterable[ProcessId]) -> bool:
    """True iff distinct correct relays r, s chain p->r->s->q on live links."""
    if p == q:
        raise ValueError("self-delivery is not a channel query")
    p0, q0 = p - 1, q - 1
    rmask = _mask(relays) & ~(1 << p0) & ~(1 << q0)
    first = m.rows[p0] & rmask
    last = m._in_mask(q0) & rmask
    for r in range(m.n):
        if (first >> r) & 1 and m.rows[r] & last & ~(1 << r):
            return True
    return False


def strict_three_hop_reach(
    m: LinkMatrix, p: ProcessId, q: ProcessId, relays: Iterable[ProcessId]
) -> bool:
    """Round-trip 3-hop rule: p<->r, q<->u, r<->u with r != u, all correct."""
    if p == q:
        raise ValueError("self-delivery is not a channel query")
    p0, q0 = p - 1, q - 1
    rmask = _mask(relays) & ~(1 << p0) & ~(1 << q0)
    rt_p = m.rows[p0] & m._in_mask(p0) & rmask
    if not rt_p:
        return False
    rt_q = m.rows[q0] & m._in_mask(q0) & rmask
    if not rt_q:
        return False
    for r in range(m.n):
        if (rt_p >> r) & 1:
            sym = m.rows[r] & m._in_mask(r)  # partners linked both ways with r
            if sym & rt_q & ~(1 << r):
                return True
    return False


def reach(
    m: LinkMatrix,
    p: ProcessId,
    q: ProcessId,
    relays: Iterable[ProcessId],
    policy: RelayPolicy = STRICT,
) -> bool:
    """Delivery possible from p to q within the policy's hop budget."""
    if p == q:
        raise ValueError("self-delivery is not a channel query")
    if direct_reach(m, p, q):
        return True
    relays = list(relays)
    if policy.max_hops >= 2 and two_hop_reach(m, p, q, relays):
        return True
    if policy.max_hops >= 3:
        if policy.variant == "strict":
            return strict_three_hop_reach(m, p, q, relays)
        return three_hop_reach(m, p, q, relays)
    return False


def is_agreement_subset(
    m: LinkMatrix,
    correct: Iterable[ProcessId],
    quorum: int,
    policy: RelayPolicy = STRICT,
) -> bool:
    """Some group of >= quorum correct processes has all-pairs delivery.

    Relays may be any correct process, including ones outside the group.
    """
    if quorum < 1:
        raise ValueError("quorum must be at least 1")
    correct = sorted(set(correct))
    if quorum > len(correct):
        return False
    if quorum == 1:
        return True
    # All-pairs reach is preserved under taking subsets (relays unchanged),
    # so testing groups of exactly `quorum` members suffices.
    for group in itertools.combinations(correct, quorum):
        if all(
            reach(m, p, q, correct, policy)
            for p, q in itertools.permutations(group, 2)
        ):
            return True
    return False


def is_delivery_subset(m: LinkMatrix, policy: RelayPolicy = STRICT) -> bool:
    """All N processes can deliver to each other, directly or indirectly."""
    everyone = range(1, m.n + 1)
    return is_agreement_subset(m, everyone, m.n, policy)
