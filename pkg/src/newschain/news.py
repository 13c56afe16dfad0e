"""Signed news records, hashed bag-of-words embedding and corroboration."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from types import MappingProxyType
from typing import Mapping, Optional

from . import crypto
from .crypto import KEY_SIZE, SIGNATURE_SIZE, canonical_encode, from_hex, u64
from .errors import IdentityMismatch, InvalidArgument, NotOnChain, RevokedError

MAX_NEWS_BYTES = 16384
EMBED_DIM = 1024


class Status(str, Enum):
    VERIFIED = "Verified"
    NON_VERIFIED = "NonVerified"
    REVOKED = "Revoked"


_STATUS_BYTE = {Status.NON_VERIFIED: b"\x00", Status.VERIFIED: b"\x01"}
_RECORD_FIELDS = (
    "publisher_name",
    "publisher_status",
    "publisher_key",
    "timestamp",
    "news_text",
    "signature",
)


@dataclass(frozen=True)
class NewsRecord:
    publisher_name: str
    publisher_status: Status
    publisher_key: bytes
    timestamp: int
    news_text: str
    signature: bytes

    def signing_payload(self) -> bytes:
        return signing_payload(
            self.publisher_name,
            self.publisher_status,
            self.publisher_key,
            self.timestamp,
            self.news_text,
        )

    @cached_property
    def digest(self) -> bytes:
        """Ledger leaf identity: digest(0x00 || encode(all six fields))."""
        return crypto.digest(b"\x00" + canonical_encode(self._fields()))

    def _fields(self) -> list:
        return [
            self.publisher_name,
            _STATUS_BYTE[self.publisher_status],
            self.publisher_key,
            u64(self.timestamp),
            self.news_text,
            self.signature,
        ]

    def to_dict(self) -> dict:
        return {
            "publisher_name": self.publisher_name,
            "publisher_status": self.publisher_status.value,
            "publisher_key": self.publisher_key.hex(),
            "timestamp": self.timestamp,
            "news_text": self.news_text,
            "signature": self.signature.hex(),
        }

    @classmethod
    def from_dict(cls, data) -> "NewsRecord":
        if not isinstance(data, dict) or tuple(data) != _RECORD_FIELDS:
            raise InvalidArgument("news record must carry exactly the six record fields, in order")
        name, status, text = data["publisher_name"], data["publisher_status"], data["news_text"]
        ts = data["timestamp"]
        if not isinstance(name, str) or not isinstance(text, str):
            raise InvalidArgument("publisher_name and news_text must be strings")
        if status not in (Status.VERIFIED.value, Status.NON_VERIFIED.value):
            raise InvalidArgument(f"bad publisher_status {status!r}")
        if type(ts) is not int or not 0 <= ts < 2**64:
            raise InvalidArgument("timestamp must be a non-negative 64-bit integer")
        return cls(
            name,
            Status(status),
            from_hex(data["publisher_key"], KEY_SIZE),
            ts,
            text,
            from_hex(data["signature"], SIGNATURE_SIZE),
        )


def signing_payload(name: str, status: Status, key: bytes, timestamp: int, text: str) -> bytes:
    if status not in _STATUS_BYTE:
        raise InvalidArgument(f"records cannot carry status {status}")
    return canonical_encode([name, _STATUS_BYTE[status], key, u64(timestamp), text])


def _check_text(text: str) -> None:
    if not isinstance(text, str) or not text:
        raise InvalidArgument("news text must be a nonempty string")
    if len(text.encode("utf-8")) > MAX_NEWS_BYTES:
        raise InvalidArgument(f"news text exceeds {MAX_NEWS_BYTES} bytes")


def sign_news(keypair, name: str, status: Status, text: str, timestamp: int) -> NewsRecord:
    """Low-level signer: no registry checks at all."""
    payload = signing_payload(name, status, keypair.public_key, timestamp, text)
    return NewsRecord(name, Status(status), keypair.public_key, timestamp, text, keypair.sign(payload))


def create_news(keypair, publisher, text: str, timestamp: int) -> NewsRecord:
    """The create-news contract: sign ``text`` under ``publisher``'s current status."""
    if publisher.status is Status.REVOKED:
        raise RevokedError(f"publisher {publisher.name!r} is revoked")
    if keypair.public_key not in publisher.public_keys:
        raise IdentityMismatch(f"key is not an identity of {publisher.name!r}")
    _check_text(text)
    return sign_news(keypair, publisher.name, publisher.status, text, timestamp)


def validate_news(record: NewsRecord, registry) -> tuple[bool, str]:
    try:
        _check_text(record.news_text)
    except InvalidArgument as exc:
        return False, str(exc)
    if not crypto.verify(record.publisher_key, record.signing_payload(), record.signature):
        return False, "signature does not verify"
    owner = registry.owner(record.publisher_key)
    if owner is None:
        return False, "publisher key is not registered"
    if owner.name != record.publisher_name:
        return False, "identity mismatch: key is enrolled to a different name"
    if owner.status is Status.REVOKED:
        return False, "publisher is revoked"
    if owner.status is not record.publisher_status:
        return False, f"stale status: record says {record.publisher_status.value}, registry says {owner.status.value}"
    return True, "ok"


# -- similarity -----------------------------------------------------------


def tokenize(text: str) -> list[str]:
    """Lowercase, then split on every non-alphanumeric code point."""
    tokens, current = [], []
    for ch in text.lower():
        if ch.isalnum():
            current.append(ch)
        elif current:
            tokens.append("".join(current))
            current = []
    if current:
        tokens.append("".join(current))
    return tokens


def token_index(token: str) -> int:
    return int.from_bytes(crypto.digest(b"tok" + token.encode("utf-8"))[:8], "big") % EMBED_DIM


@dataclass(frozen=True)
class SimilarityVector:
    counts: Mapping[int, int]  # sparse: component index -> count
    norm_sq: int

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm_sq)

    @property
    def components(self) -> list[int]:
        dense = [0] * EMBED_DIM
        for i, c in self.counts.items():
            dense[i] = c
        return dense


@lru_cache(maxsize=65536)
def embed(text: str) -> SimilarityVector:
    counts: dict[int, int] = {}
    for token in tokenize(text):
        i = token_index(token)
        counts[i] = counts.get(i, 0) + 1
    return SimilarityVector(MappingProxyType(counts), sum(c * c for c in counts.values()))


def semantic_similarity(a: SimilarityVector, b: SimilarityVector) -> float:
    if a.norm_sq == 0 or b.norm_sq == 0:
        return 0.0
    small, large = (a.counts, b.counts) if len(a.counts) <= len(b.counts) else (b.counts, a.counts)
    dot = sum(c * large.get(i, 0) for i, c in small.items())
    # one square root of an exact integer product, so identical vectors give exactly 1.0
    return min(1.0, dot / math.sqrt(a.norm_sq * b.norm_sq))


@dataclass(frozen=True)
class Match:
    record_digest: bytes
    score: float
    height: int


@dataclass(frozen=True)
class CorroborationResult:
    corroborated: bool
    best_match: Optional[Match]
    window_open: bool


def _same_publisher(a: NewsRecord, b: NewsRecord, registry) -> bool:
    if a.publisher_name == b.publisher_name:
        return True
    oa, ob = registry.owner(a.publisher_key), registry.owner(b.publisher_key)
    return oa is not None and ob is not None and oa.name == ob.name


def corroborate(record: NewsRecord, chain, registry, policy, head_height: int | None = None) -> CorroborationResult:
    """Look for a Verified outlet's similar story within +-W blocks of ``record``.

    ``head_height`` bounds the chain view (defaults to the chain head) so the
    outcome depends only on the prefix an epoch was closed at.
    """
    loc = chain.index.get(record.digest)
    head = chain.height if head_height is None else min(head_height, chain.height)
    if loc is None or loc[0] > head:
        raise NotOnChain("record is not on the chain")
    h = loc[0]
    vec = embed(record.news_text)
    best = None
    for height in range(max(1, h - policy.window_W), min(head, h + policy.window_W) + 1):
        for other in chain.blocks[height].records:
            if other.publisher_status is not Status.VERIFIED or _same_publisher(record, other, registry):
                continue
            score = semantic_similarity(vec, embed(other.news_text))
            if best is None or score > best.score:
                best = Match(other.digest, score, height)
    corroborated = best is not None and best.score >= policy.theta
    return CorroborationResult(corroborated, best, head < h + policy.window_W)
