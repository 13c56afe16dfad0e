"""Hash-pointer chain of news blocks, per-block Merkle trees and inclusion proofs."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from . import crypto
from .crypto import (
    DIGEST_SIZE,
    KEY_SIZE,
    SIGNATURE_SIZE,
    ZERO_DIGEST,
    ZERO_KEY,
    ZERO_SIGNATURE,
    canonical_encode,
    from_hex,
    u64,
)
from .errors import ChainForkError, ChainFormatError, InvalidArgument, InvalidBlock, NotOnChain
from .news import NewsRecord

DEFAULT_MAX_BLOCK_RECORDS = 64

_LEFT, _RIGHT = "left", "right"
_BLOCK_FIELDS = (
    "height",
    "prev_hash",
    "merkle_root",
    "timestamp",
    "nonce",
    "producer_key",
    "producer_sig",
    "records",
)


# -- merkle tree ----------------------------------------------------------


def _node(left: bytes, right: bytes) -> bytes:
    return crypto.digest(canonical_encode([b"\x01", left, right]))


def _levels(leaves: Sequence[bytes]) -> list[list[bytes]]:
    if not leaves:
        raise InvalidArgument("a merkle tree needs at least one leaf")
    levels = [list(leaves)]
    while len(levels[-1]) > 1:
        level = levels[-1]
        if len(level) % 2:
            level = level + [level[-1]]
        levels.append([_node(level[i], level[i + 1]) for i in range(0, len(level), 2)])
    return levels


def merkle_root(leaves: Sequence[bytes]) -> bytes:
    return _levels(leaves)[-1][0]


@dataclass(frozen=True)
class MerkleProof:
    leaf_index: int
    path: tuple[tuple[bytes, str], ...]  # (sibling digest, side of the sibling)

    def to_dict(self) -> dict:
        return {
            "leaf_index": self.leaf_index,
            "path": [{"sibling": s.hex(), "side": side} for s, side in self.path],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MerkleProof":
        path = []
        for step in data["path"]:
            if step["side"] not in (_LEFT, _RIGHT):
                raise InvalidArgument(f"bad proof side {step['side']!r}")
            path.append((from_hex(step["sibling"], DIGEST_SIZE), step["side"]))
        return cls(int(data["leaf_index"]), tuple(path))


def merkle_proof(leaves: Sequence[bytes], index: int) -> MerkleProof:
    if not 0 <= index < len(leaves):
        raise InvalidArgument(f"leaf index {index} out of range for {len(leaves)} leaves")
    path = []
    i = index
    for level in _levels(leaves)[:-1]:
        if i % 2:
            path.append((level[i - 1], _LEFT))
        else:
            # odd tail: the last node is paired with itself
            sibling = level[i + 1] if i + 1 < len(level) else level[i]
            path.append((sibling, _RIGHT))
        i //= 2
    return MerkleProof(index, tuple(path))


def verify_proof(leaf: bytes, proof: MerkleProof, root: bytes) -> bool:
    node = leaf
    for sibling, side in proof.path:
        if side == _LEFT:
            node = _node(sibling, node)
        elif side == _RIGHT:
            node = _node(node, sibling)
        else:
            return False
    return node == root


# -- blocks ---------------------------------------------------------------


@dataclass(frozen=True)
class BlockHeader:
    height: int
    prev_hash: bytes
    merkle_root: bytes
    timestamp: int
    nonce: int = 0
    producer_key: bytes = ZERO_KEY
    producer_sig: bytes = ZERO_SIGNATURE

    def hash(self) -> bytes:
        """Header hash; producer_sig is deliberately outside the preimage."""
        return crypto.digest(
            canonical_encode(
                [
                    u64(self.height),
                    self.prev_hash,
                    self.merkle_root,
                    u64(self.timestamp),
                    u64(self.nonce),
                    self.producer_key,
                ]
            )
        )

    def signing_payload(self) -> bytes:
        return canonical_encode(
            [
                u64(self.height),
                self.prev_hash,
                self.merkle_root,
                u64(self.timestamp),
                u64(self.nonce),
                self.producer_key,
                ZERO_SIGNATURE,
            ]
        )

    def signed_by(self, keypair) -> "BlockHeader":
        unsigned = replace(self, producer_key=keypair.public_key, producer_sig=ZERO_SIGNATURE)
        return replace(unsigned, producer_sig=keypair.sign(unsigned.signing_payload()))

    def producer_sig_ok(self) -> bool:
        return crypto.verify(self.producer_key, self.signing_payload(), self.producer_sig)

    def to_dict(self) -> dict:
        return {
            "height": self.height,
            "prev_hash": self.prev_hash.hex(),
            "merkle_root": self.merkle_root.hex(),
            "timestamp": self.timestamp,
            "nonce": self.nonce,
            "producer_key": self.producer_key.hex(),
            "producer_sig": self.producer_sig.hex(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BlockHeader":
        for name in ("height", "timestamp", "nonce"):
            value = data[name]
            if type(value) is not int or not 0 <= value < 2**64:
                raise InvalidArgument(f"{name} must be an unsigned 64-bit integer")
        return cls(
            data["height"],
            from_hex(data["prev_hash"], DIGEST_SIZE),
            from_hex(data["merkle_root"], DIGEST_SIZE),
            data["timestamp"],
            data["nonce"],
            from_hex(data["producer_key"], KEY_SIZE),
            from_hex(data["producer_sig"], SIGNATURE_SIZE),
        )


@dataclass(frozen=True)
class Block:
    header: BlockHeader
    records: tuple[NewsRecord, ...] = ()

    @property
    def height(self) -> int:
        return self.header.height

    def hash(self) -> bytes:
        return self.header.hash()

    def record_digests(self) -> list[bytes]:
        return [r.digest for r in self.records]

    def computed_root(self) -> bytes:
        return merkle_root(self.record_digests())

    def content_id(self) -> bytes:
        """Identifies header *and* record contents (tampered bodies differ)."""
        return crypto.digest(canonical_encode([self.hash(), *self.record_digests()]))

    def to_dict(self) -> dict:
        out = self.header.to_dict()
        out["records"] = [r.to_dict() for r in self.records]
        return out

    @classmethod
    def from_dict(cls, data) -> "Block":
        if not isinstance(data, dict) or tuple(data) != _BLOCK_FIELDS:
            raise InvalidArgument("block must carry exactly the block fields, in order")
        if not isinstance(data["records"], list):
            raise InvalidArgument("records must be a list")
        return cls(
            BlockHeader.from_dict(data),
            tuple(NewsRecord.from_dict(r) for r in data["records"]),
        )

    def to_line(self) -> str:
        return dump_json(self.to_dict())


def dump_json(obj) -> str:
    """The canonical JSON text used for all files and reports."""
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True)


def genesis_block(sentinel_root: bytes) -> Block:
    return Block(BlockHeader(0, ZERO_DIGEST, sentinel_root, 0))


def build_block(parent: BlockHeader, records: Iterable[NewsRecord], timestamp: int, nonce: int = 0) -> Block:
    records = tuple(records)
    header = BlockHeader(
        parent.height + 1,
        parent.hash(),
        merkle_root([r.digest for r in records]),
        timestamp,
        nonce,
    )
    return Block(header, records)


# -- chain ----------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    rule: Optional[int] = None
    reason: str = "ok"

    def __bool__(self) -> bool:
        return self.accepted


def structural_validator(block: Block, parent: BlockHeader) -> Verdict:
    if block.height != parent.height + 1:
        return Verdict(False, 1, "height is not parent height + 1")
    if not block.records:
        return Verdict(False, 4, "block carries no records")
    if block.header.merkle_root != block.computed_root():
        return Verdict(False, 4, "merkle root mismatch")
    return Verdict(True)


class Chain:
    """Blocks from genesis to head plus a digest -> (height, position) index."""

    def __init__(self, blocks: Iterable[Block] = ()):
        self.blocks: list[Block] = []
        self.index: dict[bytes, tuple[int, int]] = {}
        for block in blocks:
            self._push(block)

    def _push(self, block: Block) -> None:
        self.blocks.append(block)
        for pos, record in enumerate(block.records):
            self.index[record.digest] = (block.height, pos)

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return len(self.blocks) - 1

    def __len__(self) -> int:
        return len(self.blocks)

    def record(self, record_digest: bytes) -> NewsRecord:
        height, pos = self.index[record_digest]
        return self.blocks[height].records[pos]

    def header_hashes(self) -> set[bytes]:
        return {b.hash() for b in self.blocks}

    def pop(self) -> Block:
        """Roll back the head block (fork switch); its records leave the index."""
        if len(self.blocks) <= 1:
            raise InvalidArgument("cannot roll back the genesis block")
        block = self.blocks.pop()
        for record in block.records:
            self.index.pop(record.digest, None)
        return block

    def append(self, block: Block, validator: Callable | None = None) -> "Chain":
        return append_block(self, block, validator)

    def save(self, path) -> None:
        Path(path).write_text("".join(b.to_line() + "\n" for b in self.blocks), encoding="ascii")

    @classmethod
    def load(cls, path) -> "Chain":
        chain, failure = parse_chain_bytes(Path(path).read_bytes())
        if failure is not None:
            raise ChainFormatError(failure.detail, rule=failure.rule)
        return chain


def append_block(chain: Chain, block: Block, validator: Callable | None = None) -> Chain:
    parent = chain.head.header
    if block.header.prev_hash != parent.hash():
        raise ChainForkError(f"block {block.height} does not extend the current head")
    verdict = (validator or structural_validator)(block, parent)
    if not verdict:
        raise InvalidBlock(verdict.reason, rule=verdict.rule)
    chain._push(block)
    return chain


@dataclass(frozen=True)
class ChainReport:
    ok: bool
    height: Optional[int] = None
    rule: Optional[str] = None
    detail: str = ""

    def to_dict(self) -> dict:
        return {"ok": self.ok, "failed_height": self.height, "rule": self.rule, "detail": self.detail}


def _genesis_problem(header: BlockHeader, records) -> str | None:
    if header.height != 0:
        return "genesis height must be 0"
    if header.prev_hash != ZERO_DIGEST:
        return "genesis prev_hash must be zero"
    if records:
        return "genesis carries records"
    if header.producer_key != ZERO_KEY or header.producer_sig != ZERO_SIGNATURE:
        return "genesis producer fields must be zero"
    return None


def verify_chain(chain: Chain | Sequence[Block], pow_target: int | None = None) -> ChainReport:
    """Check linkage, merkle roots, record signatures and producer signatures."""
    from .consensus import pow_check  # local: consensus builds on ledger

    blocks = chain.blocks if isinstance(chain, Chain) else list(chain)
    if not blocks:
        return ChainReport(False, 0, "format", "empty chain")
    for i, block in enumerate(blocks):
        header = block.header
        if i == 0:
            problem = _genesis_problem(header, block.records)
            if problem:
                return ChainReport(False, 0, "genesis", problem)
            continue
        if header.height != i:
            return ChainReport(False, i, "height", f"height field is {header.height}")
        if header.prev_hash != blocks[i - 1].header.hash():
            return ChainReport(False, i, "prev_hash", "hash pointer does not match parent header")
        if not block.records:
            return ChainReport(False, i, "merkle_root", "block carries no records")
        if header.merkle_root != block.computed_root():
            return ChainReport(False, i, "merkle_root", "merkle root does not match records")
        for pos, record in enumerate(block.records):
            if not crypto.verify(record.publisher_key, record.signing_payload(), record.signature):
                return ChainReport(False, i, "record_signature", f"record {pos} signature invalid")
        if header.producer_key == ZERO_KEY:
            if header.producer_sig != ZERO_SIGNATURE:
                return ChainReport(False, i, "producer_signature", "signature without producer key")
        elif not header.producer_sig_ok():
            return ChainReport(False, i, "producer_signature", "producer signature invalid")
        if pow_target is not None and not pow_check(block, pow_target):
            return ChainReport(False, i, "pow", "nonce does not meet target")
    return ChainReport(True)


def parse_chain_bytes(data: bytes) -> tuple[Chain, Optional[ChainReport]]:
    """Parse a chain file strictly. Returns the parsed prefix and a failure, if any.

    Each line must be exactly the canonical serialization of the block it
    decodes to, so no byte of the file is semantically inert.
    """
    lines = data.split(b"\n")
    if lines[-1] != b"":
        return Chain(), ChainReport(False, len(lines) - 1, "format", "file does not end with a newline")
    blocks = []
    for height, raw in enumerate(lines[:-1]):
        try:
            text = raw.decode("ascii")
            block = Block.from_dict(json.loads(text))
        except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
            return Chain(blocks), ChainReport(False, height, "format", f"line {height}: {exc}"[:200])
        if block.to_line() != text:
            return Chain(blocks), ChainReport(False, height, "format", f"line {height} is not canonical")
        blocks.append(block)
    return Chain(blocks), None


def verify_chain_file(path, pow_target: int | None = None) -> ChainReport:
    chain, failure = parse_chain_bytes(Path(path).read_bytes())
    report = verify_chain(chain, pow_target) if chain.blocks else ChainReport(False, 0, "format", "empty chain")
    if failure is None:
        return report
    # the parsed prefix may already fail earlier than the unparseable line
    if not report.ok and report.height is not None and report.height < failure.height:
        return report
    return failure


# -- proof of truthfulness ------------------------------------------------


@dataclass(frozen=True)
class PoTCertificate:
    record_digest: bytes
    block_height: int
    merkle_proof: MerkleProof
    header: BlockHeader

    def to_dict(self) -> dict:
        return {
            "record_digest": self.record_digest.hex(),
            "block_height": self.block_height,
            "merkle_proof": self.merkle_proof.to_dict(),
            "header": self.header.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PoTCertificate":
        return cls(
            from_hex(data["record_digest"], DIGEST_SIZE),
            int(data["block_height"]),
            MerkleProof.from_dict(data["merkle_proof"]),
            BlockHeader.from_dict(data["header"]),
        )


def proof_of_truthfulness(chain: Chain, record_digest: bytes) -> PoTCertificate:
    loc = chain.index.get(record_digest)
    if loc is None:
        raise NotOnChain("news is not part of the blockchain")
    height, pos = loc
    block = chain.blocks[height]
    return PoTCertificate(record_digest, height, merkle_proof(block.record_digests(), pos), block.header)


def verify_truthfulness(cert: PoTCertificate, record_digest: bytes, trusted_header_hashes) -> bool:
    """One header hash plus len(path) node hashes."""
    if cert.header.hash() not in trusted_header_hashes:
        return False
    return verify_proof(record_digest, cert.merkle_proof, cert.header.merkle_root)


def proof_length(n: int) -> int:
    return 0 if n <= 1 else (n - 1).bit_length()
