"""Pluggable digest and signature scheme with a deterministic test scheme.

The protocol only needs third-party verifiability: every process can check
that a digest was signed by the claimed originator.  The test scheme keeps
simulations fast and bit-reproducible by deriving one secret per process
from (run seed, process id) and signing with a keyed MAC over the digest;
a registry of per-process secrets plays the role of the public-key
directory.  A real asymmetric scheme can be dropped in behind the same
interface without touching protocol code.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

DIGEST_LEN = 32

Digest = bytes


@dataclass(frozen=True)
class Signature:
    """Signature bytes tagged with the claimed signer's process id."""

    signer: int
    data: bytes


@dataclass(frozen=True)
class ExtendedSignature:
    """Digest of a process's input plus that process's signature over it."""

    digest: Digest
    signature: Signature


def hash_bytes(payload: bytes) -> Digest:
    """System hash function: deterministic, fixed 32-byte output."""
    return hashlib.sha256(payload).digest()


class SignatureScheme:
    """Interface: hash, sign with own key, verify against any process."""

    def sign(self, signer: int, digest: Digest) -> Signature:
        raise NotImplementedError

    def verify(self, signer: int, digest: Digest, sig: Signature) -> bool:
        raise NotImplementedError


class DeterministicScheme(SignatureScheme):
    """Keyed-MAC scheme; key material derived from (seed, process id)."""

    def __init__(self, n: int, seed: int = 0):
        if n < 1:
            raise ValueError("need at least one process")
        self.n = n
        self.seed = seed
        self._secrets = {
            pid: hashlib.sha256(
                b"relaybft-key:%d:%d" % (seed, pid)
            ).digest()
            for pid in range(1, n + 1)
        }

    def sign(self, signer: int, digest: Digest) -> Signature:
        secret = self._secrets[signer]
        return Signature(signer, hmac.new(secret, digest, hashlib.sha256).digest())

    def verify(self, signer: int, digest: Digest, sig: Signature) -> bool:
        if sig.signer != signer or signer not in self._secrets:
            return False
        if not isinstance(sig.data, bytes) or not isinstance(digest, bytes):
            return False
        expected = hmac.new(self._secrets[signer], digest, hashlib.sha256).digest()
        return hmac.compare_digest(expected, sig.data)
