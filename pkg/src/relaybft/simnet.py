"""Seeded deterministic discrete-event network simulator.

Time is integer ticks.  MDTB (message delivery time bound) is half an RTTB;
processes start a round with per-process lags strictly below MDTB, correct
synchronous links deliver within [min_delay, MDTB] ticks, and faulty or
asynchronous links either drop an envelope or deliver it after 4*RTTB + 1
ticks (past every acceptance window) -- recipients cannot tell the two
apart within a round.  Envelopes carry a simulator-side hop count; an
envelope is handed to the state machine only when it arrives inside its
hop class's window (1 RTTB direct, 1.5 RTTB for 2 hops, 2 RTTB for 3 hops,
relative to the local phase start) and is discarded as late otherwise.

Everything is a pure function of (scenario, timing, policy, seed): lags,
delays and drop coins come from one seeded generator consumed in a fixed
order, and simultaneous deliveries are ordered by (destination, source,
originator, phase).
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, replace

from . import ARTIFACT_VERSION
from .protocol import START1, START2, Envelope, ProcessState
from .signing import DeterministicScheme, hash_bytes
from .topology import LinkMatrix, RelayPolicy, STRICT, quorum_size, strict_three_hop_reach


class ScenarioError(ValueError):
    pass


class VersionMismatchError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimingConfig:
    """Clock parameters in ticks; defaults give 1.5*RTTB an exact value."""

    mdtb_ticks: int = 10
    max_start_lag_ticks: int = 9
    min_delay_ticks: int = 1
    max_delay_ticks: int | None = None

    def __post_init__(self) -> None:
        if self.mdtb_ticks < 2:
            raise ScenarioError("mdtb_ticks must be at least 2")
        if not 0 <= self.max_start_lag_ticks < self.mdtb_ticks:
            raise ScenarioError("start lag bound must be below MDTB")
        if self.max_delay_ticks is None:
            object.__setattr__(self, "max_delay_ticks", self.mdtb_ticks)
        if not 1 <= self.min_delay_ticks <= self.max_delay_ticks <= self.mdtb_ticks:
            raise ScenarioError("delay range must sit inside [1, MDTB]")

    @property
    def rttb(self) -> int:
        return 2 * self.mdtb_ticks

    def window(self, hops: int) -> int | None:
        """Acceptance cutoff (ticks since local phase start) per hop count."""
        if hops == 1:
            return self.rttb
        if hops == 2:
            return self.rttb * 3 // 2
        if hops == 3:
            return 2 * self.rttb
        return None

    def round_close(self) -> int:
        return 4 * self.rttb


# -- fault strategies -------------------------------------------------------


@dataclass(frozen=True)
class Crash:
    """Stop-failed from the start: sends nothing, receives nothing."""


@dataclass(frozen=True)
class Omit:
    """Omits every send (own broadcasts and relays) to the target set."""

    targets: frozenset[int]


@dataclass(frozen=True)
class Delay:
    """Delays every send to the target set by a fixed number of ticks."""

    ticks: int
    targets: frozenset[int]


@dataclass(frozen=True)
class Equivocate:
    """Sends an alternate, separately signed Phase-One value to the targets."""

    alt_value: bytes
    targets: frozenset[int]


Strategy = Crash | Omit | Delay | Equivocate


@dataclass(frozen=True)
class FaultScenario:
    """Chosen faulty processes (with strategies) and faulty directed links."""

    n: int
    strategies: tuple[tuple[int, Strategy], ...] = ()
    faulty_links: frozenset[tuple[int, int]] = frozenset()
    start_lags: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.n < 3:
            raise ScenarioError("a round needs at least 3 processes")
        object.__setattr__(self, "strategies", tuple(sorted(self.strategies)))
        object.__setattr__(self, "faulty_links", frozenset(self.faulty_links))
        seen = set()
        for pid, strat in self.strategies:
            if not 1 <= pid <= self.n:
                raise ScenarioError(f"faulty process {pid} outside [1, {self.n}]")
            if pid in seen:
                raise ScenarioError(f"process {pid} has two strategies")
            seen.add(pid)
            targets = getattr(strat, "targets", frozenset())
            for t in targets:
                if not 1 <= t <= self.n or t == pid:
                    raise ScenarioError(f"bad strategy target {t} for process {pid}")
        for p, q in self.faulty_links:
            if not (1 <= p <= self.n and 1 <= q <= self.n) or p == q:
                raise ScenarioError(f"bad faulty link ({p}, {q})")
        if self.start_lags is not None and len(self.start_lags) != self.n:
            raise ScenarioError("start_lags must list one lag per process")

    @property
    def faulty_processes(self) -> frozenset[int]:
        return frozenset(pid for pid, _ in self.strategies)

    def strategy_of(self, pid: int) -> Strategy | None:
        for p, strat in self.strategies:
            if p == pid:
                return strat
        return None

    def link_matrix(self) -> LinkMatrix:
        """Worst-case equivalent matrix: faulty processes fully zeroed."""
        m = LinkMatrix.fully_connected(self.n).without_links(self.faulty_links)
        for pid in self.faulty_processes:
            m = m.apply_faulty_process(pid)
        return m

    # Canonical text: header, then strategy lines, then sorted link lines.
    def to_text(self) -> str:
        lines = [f"n={self.n}"]
        if self.start_lags is not None:
            lines.append("lags=" + ",".join(str(x) for x in self.start_lags))
        for pid, strat in self.strategies:
            if isinstance(strat, Crash):
                lines.append(f"process {pid} crash")
            elif isinstance(strat, Omit):
                lines.append(f"process {pid} omit {_targets_text(strat.targets)}")
            elif isinstance(strat, Delay):
                lines.append(f"process {pid} delay {strat.ticks} {_targets_text(strat.targets)}")
            elif isinstance(strat, Equivocate):
                lines.append(
                    f"process {pid} equivocate {strat.alt_value.hex()} {_targets_text(strat.targets)}"
                )
        for p, q in sorted(self.faulty_links):
            lines.append(f"link {p} {q}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FaultScenario":
        n = None
        lags = None
        strategies: list[tuple[int, Strategy]] = []
        links: set[tuple[int, int]] = set()
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("n="):
                n = int(line[2:])
            elif line.startswith("lags="):
                lags = tuple(int(x) for x in line[5:].split(","))
            elif line.startswith("process "):
                parts = line.split()
                pid, kind = int(parts[1]), parts[2]
                if kind == "crash":
                    strategies.append((pid, Crash()))
                elif kind == "omit":
                    strategies.append((pid, Omit(_parse_targets(parts[3]))))
                elif kind == "delay":
                    strategies.append((pid, Delay(int(parts[3]), _parse_targets(parts[4]))))
                elif kind == "equivocate":
                    strategies.append(
                        (pid, Equivocate(bytes.fromhex(parts[3]), _parse_targets(parts[4])))
                    )
                else:
                    raise ScenarioError(f"unknown strategy {kind!r}")
            elif line.startswith("link "):
                _, p, q = line.split()
                links.add((int(p), int(q)))
            else:
                raise ScenarioError(f"unparseable scenario line {line!r}")
        if n is None:
            raise ScenarioError("scenario text lacks an n= header")
        return cls(n=n, strategies=tuple(strategies), faulty_links=frozenset(links), start_lags=lags)


def _targets_text(targets: frozenset[int]) -> str:
    return ",".join(str(t) for t in sorted(targets)) if targets else "-"


def _parse_targets(text: str) -> frozenset[int]:
    if text == "-":
        return frozenset()
    return frozenset(int(x) for x in text.split(","))


# -- round reports ----------------------------------------------------------


@dataclass(frozen=True)
class ProcessReport:
    pid: int
    faulty: bool
    decided: bool
    decision_value: str | None  # hex digest
    contributors: tuple[int, ...]
    decision_time: int | None  # local ticks
    flags: tuple[int, ...]
    received_phase1: tuple[int, ...]
    received_phase2: tuple[int, ...]


@dataclass(frozen=True)
class RoundReport:
    version: str
    n: int
    seed: int
    policy: RelayPolicy
    scenario_text: str
    lags: tuple[int, ...]
    inputs: tuple[str, ...]  # hex, per process
    processes: tuple[ProcessReport, ...]
    sent: int
    delivered: int
    dropped: int
    late: int

    def to_text(self) -> str:
        lines = [
            f"version={self.version}",
            f"seed={self.seed}",
            f"policy={self.policy.variant}:{self.policy.max_hops}",
            f"lags={','.join(str(x) for x in self.lags)}",
            f"inputs={','.join(self.inputs)}",
            f"totals sent={self.sent} delivered={self.delivered} dropped={self.dropped} late={self.late}",
        ]
        for pr in self.processes:
            lines.append(
                "process {pid} faulty={f} decided={d} value={v} time={t} "
                "contributors={c} flags={fl} rcv1={r1} rcv2={r2}".format(
                    pid=pr.pid,
                    f=int(pr.faulty),
                    d=int(pr.decided),
                    v=pr.decision_value or "-",
                    t=pr.decision_time if pr.decision_time is not None else "-",
                    c=",".join(map(str, pr.contributors)) or "-",
                    fl=",".join(map(str, pr.flags)) or "-",
                    r1=",".join(map(str, pr.received_phase1)) or "-",
                    r2=",".join(map(str, pr.received_phase2)) or "-",
                )
            )
        lines.append("scenario:")
        lines.extend("  " + ln for ln in self.scenario_text.strip().splitlines())
        return "\n".join(lines) + "\n"

    def summary_row(self) -> str:
        deciders = sum(1 for p in self.processes if p.decided)
        values = {p.decision_value for p in self.processes if p.decided}
        return (
            f"n={self.n} seed={self.seed} deciders={deciders} "
            f"distinct_values={len(values)} sent={self.sent} delivered={self.delivered} "
            f"dropped={self.dropped} late={self.late}"
        )


# -- the event loop ---------------------------------------------------------

_DELIVERY, _TIMEOUT = 0, 1
_CLOSE = "CLOSE"


def run_round(
    scenario: FaultScenario,
    timing: TimingConfig = TimingConfig(),
    policy: RelayPolicy = STRICT,
    seed: int = 0,
) -> RoundReport:
    """Simulate one consensus round; a pure function of its arguments."""
    n = scenario.n
    rng = random.Random(seed)
    lags = scenario.start_lags or tuple(
        rng.randint(0, timing.max_start_lag_ticks) for _ in range(n)
    )
    if any(not 0 <= lag <= timing.max_start_lag_ticks for lag in lags):
        raise ScenarioError("start lags exceed the configured bound")

    scheme = DeterministicScheme(n, seed)
    inputs = {pid: hash_bytes(b"input:%d:%d" % (seed, pid))[:16] for pid in range(1, n + 1)}
    crashed = {pid for pid in range(1, n + 1) if isinstance(scenario.strategy_of(pid), Crash)}
    states: dict[int, ProcessState] = {
        pid: ProcessState(pid, n, scheme, inputs[pid], quorum_size(n))
        for pid in range(1, n + 1)
        if pid not in crashed
    }
    matrix = scenario.link_matrix() if policy.variant == "strict" else None

    totals = {"sent": 0, "delivered": 0, "dropped": 0, "late": 0}
    heap: list[tuple[int, int, int, int, int, int, int]] = []
    payloads: dict[int, tuple] = {}
    seq = 0

    def push(time: int, kind: int, dest: int, source: int, orig: int, phase: int, item) -> None:
        nonlocal seq
        seq += 1
        payloads[seq] = item
        heapq.heappush(heap, (time, kind, dest, source, orig, phase, seq))

    def send(env: Envelope, hops: int, now: int) -> None:
        strat = scenario.strategy_of(env.source)
        when = now
        if isinstance(strat, Omit) and env.destination in strat.targets:
            return
        if isinstance(strat, Delay) and env.destination in strat.targets:
            when = now + strat.ticks
        totals["sent"] += 1
        if env.destination in crashed:
            totals["dropped"] += 1
            return
        if (env.source, env.destination) not in scenario.faulty_links:
            arrival = when + rng.randint(timing.min_delay_ticks, timing.max_delay_ticks)
        else:
            # Faulty or asynchronous: dropped, or delivered past every window.
            if rng.random() < 0.5:
                totals["dropped"] += 1
                return
            arrival = when + 4 * timing.rttb + 1
        push(arrival, _DELIVERY, env.destination, env.source, env.originator, env.phase, (env, hops))

    def broadcast_phase1(pid: int, now: int) -> None:
        state = states[pid]
        strat = scenario.strategy_of(pid)
        if isinstance(strat, Equivocate):
            alt_digest = hash_bytes(strat.alt_value)
            alt_sig = scheme.sign(pid, alt_digest)
            for env in state.on_timeout(START1):
                if env.destination in strat.targets:
                    env = replace(env, payload=strat.alt_value, originator_sig=alt_sig)
                send(env, 1, now)
        else:
            for env in state.on_timeout(START1):
                send(env, 1, now)

    report_flags: dict[int, tuple[int, ...]] = {}
    decisions: dict[int, tuple] = {}

    for pid in range(1, n + 1):
        if pid in crashed:
            continue
        lag = lags[pid - 1]
        push(lag, _TIMEOUT, pid, 0, 0, 0, START1)
        push(lag + 2 * timing.rttb, _TIMEOUT, pid, 0, 0, 0, START2)
        push(lag + 4 * timing.rttb, _TIMEOUT, pid, 0, 0, 0, _CLOSE)

    while heap:
        time, kind, dest, _source, _orig, phase, sq = heapq.heappop(heap)
        item = payloads.pop(sq)
        if kind == _TIMEOUT:
            state = states[dest]
            if item == START1:
                broadcast_phase1(dest, time)
            elif item == START2:
                for env in state.on_timeout(START2):
                    send(env, 1, time)
            else:  # CLOSE
                d = state.try_decide()
                decisions[dest] = (d, 4 * timing.rttb if d is not None else None)
                report_flags[dest] = tuple(sorted(state.byzantine_flags))
            continue
        env, hops = item
        window = timing.window(hops)
        local = time - lags[dest - 1]
        phase_start = 0 if env.phase == 1 else 2 * timing.rttb
        if window is None or local - phase_start > window:
            totals["late"] += 1
            continue
        if matrix is not None and hops == 3 and not _strict_path_ok(matrix, env.originator, dest, scenario):
            # Pre-relaxation relay rule: a 3-hop delivery counts only when
            # the round-trip relay conditions hold; enforced by the referee.
            totals["late"] += 1
            continue
        totals["delivered"] += 1
        state = states[dest]
        for relay in state.on_received(env):
            send(relay, hops + 1, time)

    records = []
    for pid in range(1, n + 1):
        if pid in crashed:
            records.append(
                ProcessReport(pid, True, False, None, (), None, (), (), ())
            )
            continue
        state = states[pid]
        decision, dtime = decisions.get(pid, (None, None))
        records.append(
            ProcessReport(
                pid=pid,
                faulty=scenario.strategy_of(pid) is not None,
                decided=decision is not None,
                decision_value=decision.value.hex() if decision else None,
                contributors=tuple(sorted(decision.contributors)) if decision else (),
                decision_time=dtime,
                flags=report_flags.get(pid, ()),
                received_phase1=tuple(
                    sorted(o for o, ph in state.dedup if ph == 1)
                ),
                received_phase2=tuple(
                    sorted(o for o, ph in state.dedup if ph == 2)
                ),
            )
        )

    return RoundReport(
        version=ARTIFACT_VERSION,
        n=n,
        seed=seed,
        policy=policy,
        scenario_text=scenario.to_text(),
        lags=tuple(lags),
        inputs=tuple(inputs[pid].hex() for pid in range(1, n + 1)),
        processes=tuple(records),
        sent=totals["sent"],
        delivered=totals["delivered"],
        dropped=totals["dropped"],
        late=totals["late"],
    )


def _strict_path_ok(matrix: LinkMatrix, originator: int, dest: int, scenario: FaultScenario) -> bool:
    correct = [p for p in range(1, scenario.n + 1) if p not in scenario.faulty_processes]
    return strict_three_hop_reach(matrix, originator, dest, correct)


def replay(
    scenario: FaultScenario,
    timing: TimingConfig,
    policy: RelayPolicy,
    seed: int,
    version: str = ARTIFACT_VERSION,
) -> RoundReport:
    """Re-run a recorded round; refuses on an artifact version mismatch."""
    if version != ARTIFACT_VERSION:
        raise VersionMismatchError(
            f"report version {version} does not match artifact {ARTIFACT_VERSION}"
        )
    return run_round(scenario, timing, policy, seed)


def worst_case_figure1(n: int) -> tuple[FaultScenario, TimingConfig]:
    """Worst-case six-role topology: two processes joined only by 3-hop chains.

    Roles: 1 and 4 talk to each other exclusively through the relay chains
    1->2->6->4 and 4->5->3->1; every shorter route between them is faulty,
    and no round-trip relay pair exists for either (the strict rule fails
    while the relaxed rule succeeds).  Process 4 starts with the highest
    tolerated lag and every link delivers at the full MDTB.
    """
    if n < 6:
        raise ScenarioError("the worst case needs six distinct roles")
    dead = frozenset(
        {
            (1, 4), (4, 1),            # no direct channel either way
            (2, 4), (1, 3), (1, 5), (1, 6),  # no 2-hop route 1 -> 4
            (5, 1), (4, 3), (4, 2), (6, 1),  # no 2-hop route 4 -> 1
            (2, 1), (5, 4), (4, 6),    # no symmetric relay for 1 or 4
        }
    )
    timing = TimingConfig(min_delay_ticks=10, max_delay_ticks=10)
    lags = tuple(timing.max_start_lag_ticks if pid == 4 else 0 for pid in range(1, n + 1))
    return FaultScenario(n=n, faulty_links=dead, start_lags=lags), timing
