"""Hashing, Ed25519 signatures and the canonical field encoding.

Every digest and signature in the system is computed over the output of
:func:`canonical_encode`, so two implementations agree bit-for-bit as long as
they agree on field order.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from functools import lru_cache

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .errors import InvalidArgument

DIGEST_SIZE = 32
KEY_SIZE = 32
SEED_SIZE = 32
SIGNATURE_SIZE = 64

ZERO_DIGEST = bytes(DIGEST_SIZE)
ZERO_KEY = bytes(KEY_SIZE)
ZERO_SIGNATURE = bytes(SIGNATURE_SIZE)

MAX_TARGET = 2**256 - 1

_HEX_RE = re.compile(r"[0-9a-f]*")

_digest_calls = 0


def digest(data: bytes) -> bytes:
    """SHA-256 of ``data``. Every call is counted (see :class:`DigestCounter`)."""
    global _digest_calls
    _digest_calls += 1
    return hashlib.sha256(data).digest()


def digest_int(d: bytes) -> int:
    """A digest read as a 256-bit big-endian unsigned integer."""
    return int.from_bytes(d, "big")


class DigestCounter:
    """Counts :func:`digest` evaluations made inside a ``with`` block."""

    def __enter__(self):
        self._start = _digest_calls
        self._stop = None
        return self

    def __exit__(self, *exc):
        self._stop = _digest_calls
        return False

    @property
    def count(self) -> int:
        end = _digest_calls if self._stop is None else self._stop
        return end - self._start


def u64(n: int) -> bytes:
    if not 0 <= n < 2**64:
        raise InvalidArgument(f"value {n} does not fit in an unsigned 64-bit field")
    return n.to_bytes(8, "big")


def canonical_encode(fields) -> bytes:
    """Length-prefix each field (8-byte big-endian) and concatenate.

    ``str`` fields are UTF-8 encoded; everything else must be bytes-like.
    """
    out = bytearray()
    for field in fields:
        if isinstance(field, str):
            field = field.encode("utf-8")
        elif not isinstance(field, (bytes, bytearray, memoryview)):
            raise InvalidArgument(f"cannot encode field of type {type(field).__name__}")
        field = bytes(field)
        out += len(field).to_bytes(8, "big")
        out += field
    return bytes(out)


@dataclass(frozen=True)
class KeyPair:
    secret_key: bytes  # the 32-byte Ed25519 seed
    public_key: bytes

    def sign(self, message: bytes) -> bytes:
        return sign(self.secret_key, message)

    def to_dict(self) -> dict:
        return {"seed": self.secret_key.hex(), "public_key": self.public_key.hex()}

    @classmethod
    def from_dict(cls, data: dict) -> "KeyPair":
        kp = generate_keypair(from_hex(data["seed"], SEED_SIZE))
        if "public_key" in data and from_hex(data["public_key"], KEY_SIZE) != kp.public_key:
            raise InvalidArgument("key file public_key does not match its seed")
        return kp


@lru_cache(maxsize=4096)
def _private_key(seed: bytes) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(seed)


@lru_cache(maxsize=4096)
def _public_key(raw: bytes) -> Ed25519PublicKey:
    return Ed25519PublicKey.from_public_bytes(raw)


def generate_keypair(seed: bytes) -> KeyPair:
    if not isinstance(seed, (bytes, bytearray)) or len(seed) != SEED_SIZE:
        raise InvalidArgument(f"seed must be exactly {SEED_SIZE} bytes")
    seed = bytes(seed)
    public = _private_key(seed).public_key().public_bytes(
        serialization.Encoding.Raw, serialization.PublicFormat.Raw
    )
    return KeyPair(seed, public)


def seed_from_label(label: str) -> bytes:
    """Derive a 32-byte seed from a free-form label (simulation convenience)."""
    return digest(canonical_encode([b"seed", label]))


def sign(secret_key: bytes, message: bytes) -> bytes:
    if len(secret_key) != SEED_SIZE:
        raise InvalidArgument(f"secret key must be {SEED_SIZE} bytes")
    return _private_key(bytes(secret_key)).sign(bytes(message))


def verify(public_key: bytes, message: bytes, sig: bytes) -> bool:
    """True iff ``sig`` is valid for ``message``; malformed input gives False."""
    try:
        if len(public_key) != KEY_SIZE or len(sig) != SIGNATURE_SIZE:
            return False
        return _verify(bytes(public_key), bytes(message), bytes(sig))
    except (ValueError, TypeError):
        return False


# every simulated node re-checks the same signatures; the check is pure
@lru_cache(maxsize=1 << 16)
def _verify(public_key: bytes, message: bytes, sig: bytes) -> bool:
    try:
        _public_key(public_key).verify(sig, message)
    except (InvalidSignature, ValueError):
        return False
    return True


def to_hex(data: bytes) -> str:
    return bytes(data).hex()


def from_hex(text: str, length: int | None = None) -> bytes:
    """Strict lowercase-hex decoding; rejects anything ``to_hex`` would not emit."""
    if not isinstance(text, str) or len(text) % 2 or not _HEX_RE.fullmatch(text):
        raise InvalidArgument(f"not a lowercase hex string: {text!r:.80}")
    raw = bytes.fromhex(text)
    if length is not None and len(raw) != length:
        raise InvalidArgument(f"expected {length} bytes, got {len(raw)}")
    return raw
