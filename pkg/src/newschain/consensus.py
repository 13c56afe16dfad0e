"""Block production and admission: round-robin proof-of-authority and the PoW puzzle."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from . import crypto
from .crypto import KEY_SIZE, MAX_TARGET, ZERO_KEY, ZERO_SIGNATURE, canonical_encode, digest_int, from_hex, u64
from .errors import ConfigError, InvalidArgument, MiningExhausted
from .ledger import DEFAULT_MAX_BLOCK_RECORDS, Block, BlockHeader, Verdict, build_block, genesis_block
from .news import validate_news
from .registry import ReputationPolicy

DEFAULT_SKIP_TIMEOUT = 3


class Mode(str, Enum):
    POA = "PoA"
    POW = "PoW"


@dataclass(frozen=True)
class AuthoritySet:
    keys: tuple[bytes, ...]
    mode: Mode = Mode.POA

    def __post_init__(self):
        if self.mode is Mode.POA and not self.keys:
            raise InvalidArgument("proof-of-authority needs at least one authority")


@dataclass(frozen=True)
class GenesisConfig:
    mode: Mode = Mode.POA
    authorities: tuple[bytes, ...] = ()
    pow_target: int = 2**248
    max_block_records: int = DEFAULT_MAX_BLOCK_RECORDS
    skip_timeout: int = DEFAULT_SKIP_TIMEOUT
    policy: ReputationPolicy = field(default_factory=ReputationPolicy)

    def __post_init__(self):
        check_target(self.pow_target)
        if self.max_block_records < 1 or self.skip_timeout < 1:
            raise ConfigError("max_block_records and skip_timeout must be positive")

    def validate(self) -> "GenesisConfig":
        if self.mode is Mode.POA and not self.authorities:
            raise ConfigError("PoA genesis needs a nonempty authority list")
        return self

    @property
    def authority_set(self) -> AuthoritySet:
        return AuthoritySet(tuple(self.authorities), self.mode)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "authorities": [k.hex() for k in self.authorities],
            "pow_target": f"{self.pow_target:064x}",
            "max_block_records": self.max_block_records,
            "skip_timeout": self.skip_timeout,
            "policy": self.policy.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "GenesisConfig":
        try:
            target = data.get("pow_target", f"{2**248:064x}")
            return cls(
                Mode(data.get("mode", "PoA")),
                tuple(from_hex(k, KEY_SIZE) for k in data.get("authorities", [])),
                int(target, 16) if isinstance(target, str) else int(target),
                int(data.get("max_block_records", DEFAULT_MAX_BLOCK_RECORDS)),
                int(data.get("skip_timeout", DEFAULT_SKIP_TIMEOUT)),
                ReputationPolicy.from_dict(data.get("policy")),
            )
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad genesis configuration: {exc}") from exc

    def sentinel(self) -> bytes:
        """Genesis merkle root: commits every node to the same parameters."""
        body = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return crypto.digest(canonical_encode([b"genesis", body]))

    def genesis(self) -> Block:
        return genesis_block(self.sentinel())


def check_target(target: int) -> int:
    if not 0 < target <= MAX_TARGET:
        raise InvalidArgument("PoW target must satisfy 0 < target <= 2^256 - 1")
    return target


# -- proof of authority ---------------------------------------------------


def poa_slot_authority(height: int, authorities: Sequence[bytes]) -> bytes:
    if not authorities:
        raise InvalidArgument("authority set is empty")
    return authorities[height % len(authorities)]


def slot_skips(parent_timestamp: int, timestamp: int, skip_timeout: int) -> int:
    """Timed-out predecessors: every ``skip_timeout`` silent ticks hand the slot on."""
    return max(0, timestamp - parent_timestamp - 1) // skip_timeout


def slot_producer(height: int, parent_timestamp: int, timestamp: int, authorities: Sequence[bytes], skip_timeout: int) -> bytes:
    return poa_slot_authority(height + slot_skips(parent_timestamp, timestamp, skip_timeout), authorities)


# -- proof of work --------------------------------------------------------


def _record_digests(records) -> list[bytes]:
    return [r if isinstance(r, (bytes, bytearray)) else r.digest for r in records]


def pow_digest(nonce: int, prev_hash: bytes, record_digests: Sequence[bytes]) -> bytes:
    return crypto.digest(canonical_encode([u64(nonce), prev_hash, *record_digests]))


def pow_mine(prev_hash: bytes, records, target: int, max_iterations: int = 1 << 24) -> int:
    """Smallest nonce in [0, max_iterations) whose puzzle digest is below ``target``.

    ``records`` may be NewsRecords or their digests.
    """
    check_target(target)
    digests = _record_digests(records)
    if not digests:
        raise InvalidArgument("cannot mine an empty record list")
    for nonce in range(max_iterations):
        if digest_int(pow_digest(nonce, prev_hash, digests)) < target:
            return nonce
    raise MiningExhausted(f"no nonce below target within {max_iterations} attempts")


def pow_check(block: Block, target: int) -> bool:
    if not block.records:
        return False
    d = pow_digest(block.header.nonce, block.header.prev_hash, block.record_digests())
    return digest_int(d) < target


def mine_block(parent: BlockHeader, records, timestamp: int, target: int, max_iterations: int = 1 << 24) -> Block:
    records = tuple(records)
    nonce = pow_mine(parent.hash(), records, target, max_iterations)
    return build_block(parent, records, timestamp, nonce)


def produce_poa_block(parent: BlockHeader, records, timestamp: int, keypair) -> Block:
    block = build_block(parent, records, timestamp)
    return Block(block.header.signed_by(keypair), block.records)


# -- admission ------------------------------------------------------------


def validate_block(
    block: Block,
    parent: BlockHeader,
    registry,
    config: GenesisConfig,
    known_digests: Optional[Iterable[bytes]] = None,
    now: Optional[int] = None,
) -> Verdict:
    """Check ``block`` against its parent; the first failing rule is reported.

    1 height, 2 hash pointer, 3 timestamp, 4 merkle root / record count,
    5 record validity, 6 producer (PoA slot and signature, or PoW puzzle).
    ``known_digests`` holds record digests already on the parent's chain.
    """
    header = block.header
    if header.height != parent.height + 1:
        return Verdict(False, 1, f"height {header.height} does not follow {parent.height}")
    if header.prev_hash != parent.hash():
        return Verdict(False, 2, "prev_hash is not the parent header hash")
    if header.timestamp < parent.timestamp:
        return Verdict(False, 3, "timestamp precedes parent")
    if now is not None and header.timestamp > now:
        return Verdict(False, 3, "timestamp is in the future")
    if not 1 <= len(block.records) <= config.max_block_records:
        return Verdict(False, 4, f"record count {len(block.records)} outside [1, {config.max_block_records}]")
    if header.merkle_root != block.computed_root():
        return Verdict(False, 4, "merkle root mismatch")
    known = known_digests if known_digests is not None else ()
    seen = set()
    for pos, record in enumerate(block.records):
        d = record.digest
        if d in seen or d in known:
            return Verdict(False, 5, f"record {pos} is a duplicate")
        seen.add(d)
        ok, reason = validate_news(record, registry)
        if not ok:
            return Verdict(False, 5, f"record {pos}: {reason}")
    if config.mode is Mode.POA:
        if header.producer_key not in config.authorities:
            return Verdict(False, 6, "producer is not an authority")
        if not header.producer_sig_ok():
            return Verdict(False, 6, "producer signature invalid")
        expected = slot_producer(
            header.height, parent.timestamp, header.timestamp, config.authorities, config.skip_timeout
        )
        if header.producer_key != expected:
            return Verdict(False, 6, "producer is out of turn")
    else:
        if header.producer_key != ZERO_KEY or header.producer_sig != ZERO_SIGNATURE:
            return Verdict(False, 6, "PoW blocks carry no producer identity")
        if not pow_check(block, config.pow_target):
            return Verdict(False, 6, "nonce does not meet the PoW target")
    return Verdict(True)


def fork_choice(heads: Iterable[BlockHeader]) -> BlockHeader:
    """Highest head wins; equal heights go to the smaller header hash."""
    heads = list(heads)
    if not heads:
        raise InvalidArgument("fork choice needs at least one head")
    return min(heads, key=lambda h: (-h.height, h.hash()))
