"""Per-process consensus state machine.

A round has two phases.  Phase One: every process broadcasts its input
value with its signature over the value's digest.  Phase Two: every
process broadcasts its vector of extended signatures (digest + signature
per originator) collected during Phase One, signed as a whole.  On first
receipt of any signed message a process re-multicasts it to everyone
except itself and the originator, which enacts the 2-hop and 3-hop
indirect channels.  Delivery timing and hop windows are the simulator's
concern; the state machine accepts any verified first receipt.

Equivocation (two different values carrying valid signatures from the
same originator) is detected either directly, from a conflicting
duplicate, or by cross-checking Phase-Two vectors; a detected equivocator
has its output slot erased for good and its two signed versions travel as
a proof pair inside subsequent vectors.

Deciding: at round close each process looks for the lexicographically
smallest majority group containing itself whose members' Phase-Two
vectors prove all-pairs receipt within the group, then certifies every
(originator, digest) entry those vectors agree on.  The decision value is
the digest of the certified list, so any two processes that certify from
the same group compute bit-identical values even when one of them holds
fewer raw inputs than the other (a verified digest relayed in a vector is
enough).  Conflicting certified versions exclude the originator; if a
locally flagged equivocator would still be certified the process refuses
to decide rather than risk diverging from peers that lack the evidence.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field

from .signing import DIGEST_LEN, ExtendedSignature, Signature, SignatureScheme, hash_bytes

MSGPHASE1 = 1
RTRNSMTD1 = 2
MSGPHASE2 = 3
RTRNSMTD2 = 4

_DIRECT_TYPES = (MSGPHASE1, MSGPHASE2)
_TYPE_PHASE = {MSGPHASE1: 1, RTRNSMTD1: 1, MSGPHASE2: 2, RTRNSMTD2: 2}

START1 = "START1"
START2 = "START2"


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class Envelope:
    """Wire message tuple (T, Is, Id, Io, m, Do)."""

    msg_type: int
    source: int
    destination: int
    originator: int
    payload: bytes
    originator_sig: Signature

    def __post_init__(self) -> None:
        if self.msg_type not in _TYPE_PHASE:
            raise ProtocolError(f"unknown message type {self.msg_type}")
        if (self.msg_type in _DIRECT_TYPES) != (self.source == self.originator):
            raise ProtocolError("originator must equal source exactly on direct messages")

    @property
    def phase(self) -> int:
        return _TYPE_PHASE[self.msg_type]


def _field(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


def encode_envelope(env: Envelope) -> bytes:
    """Canonical encoding: length-prefixed fields in declaration order."""
    sig = struct.pack(">I", env.originator_sig.signer) + env.originator_sig.data
    return b"".join(
        _field(part)
        for part in (
            bytes([env.msg_type]),
            struct.pack(">I", env.source),
            struct.pack(">I", env.destination),
            struct.pack(">I", env.originator),
            env.payload,
            sig,
        )
    )


def decode_envelope(data: bytes) -> Envelope:
    fields = []
    off = 0
    for _ in range(6):
        if off + 4 > len(data):
            raise ProtocolError("truncated envelope")
        (ln,) = struct.unpack_from(">I", data, off)
        off += 4
        fields.append(data[off : off + ln])
        if len(fields[-1]) != ln:
            raise ProtocolError("truncated envelope")
        off += ln
    if off != len(data):
        raise ProtocolError("trailing bytes after envelope")
    t, s, d, o, payload, sig = fields
    return Envelope(
        msg_type=t[0],
        source=struct.unpack(">I", s)[0],
        destination=struct.unpack(">I", d)[0],
        originator=struct.unpack(">I", o)[0],
        payload=payload,
        originator_sig=Signature(struct.unpack(">I", sig[:4])[0], sig[4:]),
    )


Phase2Entries = dict[int, tuple[ExtendedSignature, ...]]


def encode_phase2_entries(n: int, entries: Phase2Entries) -> bytes:
    """Canonical vector encoding covered by the sender's signature.

    Per process id in ascending order: a version count (0 absent, 1 normal,
    2 = equivocation proof pair), then digest + signature per version.
    """
    parts = [struct.pack(">I", n)]
    for pid in range(1, n + 1):
        versions = entries.get(pid, ())
        if len(versions) > 2:
            raise ProtocolError("an entry carries at most two signed versions")
        parts.append(bytes([len(versions)]))
        for ext in versions:
            if len(ext.digest) != DIGEST_LEN:
                raise ProtocolError("bad digest length in vector entry")
            parts.append(ext.digest)
            parts.append(_field(struct.pack(">I", ext.signature.signer) + ext.signature.data))
    return b"".join(parts)


def decode_phase2_entries(data: bytes) -> tuple[int, Phase2Entries]:
    if len(data) < 4:
        raise ProtocolError("truncated vector")
    (n,) = struct.unpack_from(">I", data, 0)
    off = 4
    entries: Phase2Entries = {}
    for pid in range(1, n + 1):
        if off >= len(data):
            raise ProtocolError("truncated vector")
        count = data[off]
        off += 1
        if count > 2:
            raise ProtocolError("an entry carries at most two signed versions")
        versions = []
        for _ in range(count):
            if off + DIGEST_LEN + 4 > len(data):
                raise ProtocolError("truncated vector entry")
            digest = data[off : off + DIGEST_LEN]
            off += DIGEST_LEN
            (ln,) = struct.unpack_from(">I", data, off)
            off += 4
            raw = data[off : off + ln]
            off += ln
            if len(raw) != ln or ln < 4:
                raise ProtocolError("truncated vector entry")
            versions.append(
                ExtendedSignature(digest, Signature(struct.unpack(">I", raw[:4])[0], raw[4:]))
            )
        if versions:
            entries[pid] = tuple(versions)
    if off != len(data):
        raise ProtocolError("trailing bytes after vector")
    return n, entries


@dataclass(frozen=True)
class Decision:
    """Agreed value: digest over the certified (pid, input digest) list."""

    value: bytes
    contributors: frozenset[int]


def decision_value(cert: dict[int, bytes]) -> bytes:
    body = b"decision:" + b"".join(
        struct.pack(">I", pid) + cert[pid] for pid in sorted(cert)
    )
    return hash_bytes(body)


@dataclass
class ProcessState:
    """One process's registers and bookkeeping for a single round."""

    pid: int
    n: int
    scheme: SignatureScheme
    input_value: bytes
    quorum: int

    output: dict[int, bytes] = field(default_factory=dict)  # R_out, write-once
    ext_sigs: dict[int, ExtendedSignature] = field(default_factory=dict)  # vector E
    conflicts: dict[int, tuple[ExtendedSignature, ExtendedSignature]] = field(default_factory=dict)
    received_p2: dict[int, Phase2Entries] = field(default_factory=dict)
    p2_payload_digest: dict[int, bytes] = field(default_factory=dict)
    dedup: set[tuple[int, int]] = field(default_factory=set)
    byzantine_flags: set[int] = field(default_factory=set)
    decided: Decision | None = None

    def __post_init__(self) -> None:
        digest = hash_bytes(self.input_value)
        own = ExtendedSignature(digest, self.scheme.sign(self.pid, digest))
        self.ext_sigs[self.pid] = own
        self.output[self.pid] = self.input_value

    # -- sending ----------------------------------------------------------

    def on_timeout(self, event: str) -> list[Envelope]:
        """START1/START2 broadcasts; anything else is rejected."""
        if event == START1:
            sig = self.ext_sigs[self.pid].signature
            return [
                Envelope(MSGPHASE1, self.pid, dest, self.pid, self.input_value, sig)
                for dest in self._peers()
            ]
        if event == START2:
            payload = encode_phase2_entries(self.n, self._vector_snapshot())
            sig = self.scheme.sign(self.pid, hash_bytes(payload))
            self.received_p2[self.pid] = self._vector_snapshot()
            return [
                Envelope(MSGPHASE2, self.pid, dest, self.pid, payload, sig)
                for dest in self._peers()
            ]
        raise ProtocolError(f"unknown timeout event {event!r}")

    def _peers(self) -> list[int]:
        return [p for p in range(1, self.n + 1) if p != self.pid]

    def _vector_snapshot(self) -> Phase2Entries:
        entries: Phase2Entries = {}
        for pid in range(1, self.n + 1):
            if pid in self.conflicts:
                entries[pid] = self.conflicts[pid]
            elif pid in self.ext_sigs:
                entries[pid] = (self.ext_sigs[pid],)
        return entries

    # -- receiving --------------------------------------------------------

    def on_received(self, env: Envelope) -> list[Envelope]:
        """Process one delivered envelope; returns relay envelopes."""
        if env.destination != self.pid:
            raise ProtocolError("envelope delivered to the wrong process")
        if env.originator == self.pid:
            return []  # own message echoed back via a relay; nothing to do
        h = hash_bytes(env.payload)
        if not self.scheme.verify(env.originator, h, env.originator_sig):
            return []  # value and signature do not match: ignored
        key = (env.originator, env.phase)
        if key in self.dedup:
            if env.phase == 1:
                # A second, differently-signed version is equivocation proof.
                self._note_version(
                    env.originator, ExtendedSignature(h, env.originator_sig), env.payload
                )
            elif self.p2_payload_digest.get(env.originator) not in (None, h):
                self.byzantine_flags.add(env.originator)
            return []
        self.dedup.add(key)
        if env.phase == 1:
            self._note_version(env.originator, ExtendedSignature(h, env.originator_sig), env.payload)
        else:
            self.p2_payload_digest[env.originator] = h
            self._process_vector(env.originator, env.payload)
        relay_type = RTRNSMTD1 if env.phase == 1 else RTRNSMTD2
        return [
            Envelope(relay_type, self.pid, dest, env.originator, env.payload, env.originator_sig)
            for dest in self._peers()
            if dest != env.originator
        ]

    def _note_version(self, pid: int, ext: ExtendedSignature, value: bytes | None = None) -> None:
        """Record a verified (digest, signature) version for pid's input."""
        if pid in self.conflicts:
            return  # two versions already prove the deceit
        held = self.ext_sigs.get(pid)
        if held is None:
            self.ext_sigs[pid] = ext
            if value is not None and pid not in self.byzantine_flags:
                self.output.setdefault(pid, value)
            return
        if held.digest == ext.digest:
            if value is not None and pid not in self.byzantine_flags:
                self.output.setdefault(pid, value)
            return
        # Two different digests, both correctly signed: equivocator.
        self.conflicts[pid] = (held, ext)
        self.byzantine_flags.add(pid)
        self.output.pop(pid, None)  # erased for the rest of the round

    def _process_vector(self, originator: int, payload: bytes) -> None:
        try:
            n, entries = decode_phase2_entries(payload)
        except ProtocolError:
            return
        if n != self.n:
            return
        verified: Phase2Entries = {}
        for pid, versions in entries.items():
            if not 1 <= pid <= self.n:
                continue
            good = tuple(
                ext
                for ext in versions
                if self.scheme.verify(pid, ext.digest, ext.signature)
            )
            # Drop duplicated digests inside a proof pair.
            if len(good) == 2 and good[0].digest == good[1].digest:
                good = good[:1]
            if good:
                verified[pid] = good
                for ext in good:
                    self._note_version(pid, ext)
        self.received_p2[originator] = verified

    # -- deciding ---------------------------------------------------------

    def try_decide(self) -> Decision | None:
        """Evaluate the decision rule at round close; sticky once set."""
        if self.decided is not None:
            return self.decided
        group = self._canonical_group()
        if group is None:
            return None
        cert = self._certify(group)
        if cert is None:
            return None
        self.decided = Decision(decision_value(cert), frozenset(cert))
        return self.decided

    def _canonical_group(self) -> tuple[int, ...] | None:
        if self.pid not in self.received_p2:
            return None
        senders = sorted(self.received_p2)
        if len(senders) < self.quorum:
            return None
        for group in itertools.combinations(senders, self.quorum):
            if self.pid not in group:
                continue
            if all(
                b in self.received_p2[a]
                for a, b in itertools.permutations(group, 2)
            ):
                return group
        return None

    def _certify(self, group: tuple[int, ...]) -> dict[int, bytes] | None:
        versions: dict[int, set[bytes]] = {}
        for member in group:
            for pid, exts in self.received_p2[member].items():
                versions.setdefault(pid, set()).update(ext.digest for ext in exts)
        cert = {pid: next(iter(ds)) for pid, ds in versions.items() if len(ds) == 1}
        if self.byzantine_flags & set(cert):
            return None  # local evidence the group's vectors cannot see
        return cert
