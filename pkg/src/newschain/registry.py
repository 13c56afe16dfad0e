"""Publisher enrollment, aliases, revocation and the evolvable reputation set.

The registry is a single-writer state machine. Every mutating call appends an
entry to ``events``; :meth:`Registry.replay` rebuilds identical state from that
log, a trust directory and the chain the epoch updates were computed against.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional

from . import crypto
from .crypto import KEY_SIZE, SIGNATURE_SIZE, canonical_encode, from_hex
from .errors import (
    AlreadyEnrolled,
    InvalidArgument,
    NoSuchPublisher,
    RevokedError,
    VerificationFailed,
)
from .news import Status, corroborate

VOLUNTARY = "Voluntary"
ANOMALOUS = "Anomalous"

_ALLOWED = {
    (Status.NON_VERIFIED, Status.VERIFIED),
    (Status.NON_VERIFIED, Status.REVOKED),
    (Status.VERIFIED, Status.REVOKED),
}


@dataclass(frozen=True)
class ReputationPolicy:
    theta: float = 0.80
    window_W: int = 20
    epoch_E: int = 10
    T_promote: int = 5
    T_revoke: int = -3
    delta_corroborated: int = 1
    delta_unsupported: int = 1
    evaluation_period_P: int = 10

    def __post_init__(self):
        if not self.T_revoke < 0 < self.T_promote:
            raise InvalidArgument("policy needs T_revoke < 0 < T_promote")
        if not 0 < self.theta <= 1:
            raise InvalidArgument("theta must lie in (0, 1]")
        if self.epoch_E < 1 or self.window_W < 0 or self.evaluation_period_P < 1:
            raise InvalidArgument("epoch_E and evaluation_period_P must be positive, window_W non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping | None) -> "ReputationPolicy":
        data = dict(data or {})
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidArgument(f"unknown policy fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class PublisherRecord:
    name: str
    public_keys: list[bytes]
    status: Status
    reputation: int
    enrolled_at: int
    last_epoch_evaluated: int = 0
    revocation_reason: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "public_keys": [k.hex() for k in self.public_keys],
            "status": self.status.value,
            "reputation": self.reputation,
            "enrolled_at": self.enrolled_at,
            "last_epoch_evaluated": self.last_epoch_evaluated,
            "revocation_reason": self.revocation_reason,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PublisherRecord":
        return cls(
            data["name"],
            [from_hex(k, KEY_SIZE) for k in data["public_keys"]],
            Status(data["status"]),
            int(data["reputation"]),
            int(data["enrolled_at"]),
            int(data["last_epoch_evaluated"]),
            data.get("revocation_reason"),
        )

    def copy(self) -> "PublisherRecord":
        return PublisherRecord(
            self.name,
            list(self.public_keys),
            self.status,
            self.reputation,
            self.enrolled_at,
            self.last_epoch_evaluated,
            self.revocation_reason,
        )


@dataclass(frozen=True)
class Challenge:
    applicant_name: str
    nonce: bytes
    issued_at: int
    expires_at: int

    def to_dict(self) -> dict:
        return {
            "applicant_name": self.applicant_name,
            "nonce": self.nonce.hex(),
            "issued_at": self.issued_at,
            "expires_at": self.expires_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Challenge":
        return cls(data["applicant_name"], from_hex(data["nonce"], 32), int(data["issued_at"]), int(data["expires_at"]))


@dataclass
class EpochReport:
    epoch: int
    height: int
    deltas: dict[str, int] = field(default_factory=dict)
    promotions: list[str] = field(default_factory=list)
    revocations: list[str] = field(default_factory=list)
    deferred: int = 0

    @property
    def empty(self) -> bool:
        return not (self.deltas or self.promotions or self.revocations)

    def to_dict(self) -> dict:
        return asdict(self)


class TrustDirectory(dict):
    """Organization name -> known real-world public key. Treated as read-only."""

    @classmethod
    def from_json(cls, data: Mapping[str, str]) -> "TrustDirectory":
        return cls({name: from_hex(key, KEY_SIZE) for name, key in data.items()})

    def to_json(self) -> dict:
        return {name: key.hex() for name, key in self.items()}


def update_message(existing_key: bytes, label: str) -> bytes:
    return canonical_encode([b"update", existing_key, label])


def revoke_message(public_key: bytes) -> bytes:
    return canonical_encode([b"revoke", public_key])


class Registry:
    def __init__(self, directory: Mapping[str, bytes] | None = None, policy: ReputationPolicy | None = None):
        self.directory = TrustDirectory(directory or {})
        self.policy = policy or ReputationPolicy()
        self.publishers: dict[str, PublisherRecord] = {}
        self._key_owner: dict[bytes, str] = {}
        self.challenges: dict[str, list[Challenge]] = {}
        self.pending: list[bytes] = []  # record digests deferred while their window is open
        self.last_epoch = 0
        self.events: list[dict] = []
        self.transitions: list[tuple[str, str, str, int]] = []

    # -- lookups --------------------------------------------------------

    def owner(self, public_key: bytes) -> Optional[PublisherRecord]:
        name = self._key_owner.get(bytes(public_key))
        return None if name is None else self.publishers[name]

    def get(self, name: str) -> PublisherRecord:
        try:
            return self.publishers[name]
        except KeyError:
            raise NoSuchPublisher(f"no publisher named {name!r}") from None

    def _owner_or_raise(self, public_key: bytes) -> PublisherRecord:
        pub = self.owner(public_key)
        if pub is None:
            raise NoSuchPublisher("public key is not registered")
        return pub

    def _set_status(self, pub: PublisherRecord, status: Status, height: int) -> None:
        if (pub.status, status) not in _ALLOWED:
            raise AssertionError(f"illegal transition {pub.status.value} -> {status.value}")
        self.transitions.append((pub.name, pub.status.value, status.value, height))
        pub.status = status

    def _claim_key(self, pub: PublisherRecord, seed: bytes) -> bytes:
        key = crypto.generate_keypair(seed).public_key
        if key in self._key_owner:
            raise InvalidArgument("derived public key already belongs to a publisher")
        return key

    # -- contracts ------------------------------------------------------

    def issue_challenge(self, applicant_name: str, height: int = 0, nonce: bytes | None = None) -> Challenge:
        if not applicant_name:
            raise InvalidArgument("applicant name must be nonempty")
        nonce = os.urandom(32) if nonce is None else bytes(nonce)
        if len(nonce) != 32:
            raise InvalidArgument("challenge nonce must be 32 bytes")
        challenge = Challenge(applicant_name, nonce, height, height + self.policy.epoch_E)
        self.challenges.setdefault(applicant_name, []).append(challenge)
        self.events.append({"type": "challenge", "name": applicant_name, "nonce": nonce.hex(), "height": height})
        return challenge

    def enroll(
        self,
        name: str,
        challenge_response: bytes | None = None,
        seed: bytes | None = None,
        height: int = 0,
    ) -> PublisherRecord:
        """Register ``name`` and assign it a system keypair derived from ``seed``."""
        if seed is None:
            raise InvalidArgument("enrollment needs a key seed")
        public_key = crypto.generate_keypair(seed).public_key
        return self._enroll(name, challenge_response, public_key, height)

    def _enroll(self, name, response, public_key, height) -> PublisherRecord:
        if not name:
            raise InvalidArgument("publisher name must be nonempty")
        if name in self.publishers:
            raise AlreadyEnrolled(f"{name!r} is already enrolled")
        if public_key in self._key_owner:
            raise InvalidArgument("derived public key already belongs to a publisher")
        status = Status.NON_VERIFIED
        if response is not None:
            known = self.directory.get(name)
            match = None
            if known is not None:
                for ch in self.challenges.get(name, []):
                    if crypto.verify(known, ch.nonce, response):
                        match = ch
                        break
            if match is None:
                raise VerificationFailed("challenge response does not verify under the directory key")
            if height <= match.expires_at:
                status = Status.VERIFIED
        self.challenges.pop(name, None)
        score = self.policy.T_promote if status is Status.VERIFIED else 0
        pub = PublisherRecord(name, [public_key], status, score, height, height // self.policy.epoch_E)
        self.publishers[name] = pub
        self._key_owner[public_key] = name
        self.events.append(
            {
                "type": "enroll",
                "name": name,
                "public_key": public_key.hex(),
                "response": None if response is None else bytes(response).hex(),
                "height": height,
            }
        )
        return pub

    def update_identity(self, existing_public_key: bytes, proof: bytes, new_alias_label: str, seed: bytes) -> PublisherRecord:
        new_key = crypto.generate_keypair(seed).public_key
        return self._update(existing_public_key, proof, new_alias_label, new_key)

    def _update(self, existing_key, proof, label, new_key) -> PublisherRecord:
        pub = self._owner_or_raise(existing_key)
        if pub.status is Status.REVOKED:
            raise RevokedError(f"{pub.name!r} is revoked")
        if not crypto.verify(existing_key, update_message(existing_key, label), proof):
            raise VerificationFailed("update proof does not verify under the existing key")
        if new_key in self._key_owner:
            raise InvalidArgument("derived public key already belongs to a publisher")
        pub.public_keys.append(new_key)
        self._key_owner[new_key] = pub.name
        self.events.append(
            {
                "type": "alias",
                "existing_key": existing_key.hex(),
                "label": label,
                "proof": bytes(proof).hex(),
                "public_key": new_key.hex(),
            }
        )
        return pub

    def revoke_identity(
        self, public_key: bytes, reason: str = VOLUNTARY, signature: bytes | None = None, height: int = 0
    ) -> PublisherRecord:
        if reason != VOLUNTARY:
            raise InvalidArgument("only voluntary revocation can be requested; anomalies come from epoch_update")
        pub = self._owner_or_raise(public_key)
        if pub.status is Status.REVOKED:
            return pub
        if signature is None or not crypto.verify(public_key, revoke_message(public_key), signature):
            raise VerificationFailed("revocation must be signed by the key being revoked")
        self._revoke(pub, VOLUNTARY, height)
        self.events.append(
            {"type": "revoke", "public_key": bytes(public_key).hex(), "signature": bytes(signature).hex(), "height": height}
        )
        return pub

    def _revoke(self, pub: PublisherRecord, reason: str, height: int) -> None:
        self._set_status(pub, Status.REVOKED, height)
        pub.revocation_reason = reason

    # -- reputation -----------------------------------------------------

    def epoch_update(self, chain, height: int | None = None) -> EpochReport:
        """Close the epoch ending at ``height`` (default: chain head).

        Records from the closed epoch plus earlier deferrals are scored:
        corroborated ones immediately, uncorroborated ones only once their
        window has elapsed.
        """
        policy = self.policy
        height = chain.height if height is None else height
        if height <= 0 or height % policy.epoch_E or height > chain.height:
            raise InvalidArgument(f"height {height} is not an epoch boundary on this chain")
        epoch = height // policy.epoch_E
        if epoch <= self.last_epoch:
            raise InvalidArgument(f"epoch {epoch} was already closed")
        candidates = list(self.pending)
        for h in range(height - policy.epoch_E + 1, height + 1):
            candidates.extend(r.digest for r in chain.blocks[h].records)

        deltas: dict[str, int] = {}
        deferred = []
        for d in candidates:
            record = chain.record(d)
            pub = self.owner(record.publisher_key)
            if pub is None or pub.status is Status.REVOKED:
                continue
            result = corroborate(record, chain, self, policy, head_height=height)
            if result.corroborated:
                deltas[pub.name] = deltas.get(pub.name, 0) + policy.delta_corroborated
            elif result.window_open:
                deferred.append(d)
            else:
                deltas[pub.name] = deltas.get(pub.name, 0) - policy.delta_unsupported
        self.pending = deferred
        report = self.apply_reputation_deltas(deltas, epoch, height)
        report.deferred = len(deferred)
        self.events.append({"type": "epoch", "height": height})
        return report

    def apply_reputation_deltas(self, deltas: Mapping[str, int], epoch: int, height: int) -> EpochReport:
        """Add score deltas, then run promotion / revocation thresholds."""
        policy = self.policy
        report = EpochReport(epoch, height, {k: v for k, v in deltas.items() if v})
        for name, delta in deltas.items():
            pub = self.publishers[name]
            if pub.status is not Status.REVOKED:
                pub.reputation += delta
        for pub in self.publishers.values():
            if pub.status is Status.REVOKED:
                continue
            pub.last_epoch_evaluated = epoch
            if pub.status is Status.NON_VERIFIED and pub.reputation >= policy.T_promote:
                self._set_status(pub, Status.VERIFIED, height)
                report.promotions.append(pub.name)
            elif pub.reputation <= policy.T_revoke:
                self._revoke(pub, ANOMALOUS, height)
                report.revocations.append(pub.name)
            elif (
                pub.status is Status.NON_VERIFIED
                and epoch - pub.enrolled_at // policy.epoch_E >= policy.evaluation_period_P
            ):
                self._revoke(pub, ANOMALOUS, height)
                report.revocations.append(pub.name)
        self.last_epoch = max(self.last_epoch, epoch)
        return report

    # -- persistence ----------------------------------------------------

    def snapshot(self) -> list[dict]:
        return [p.to_dict() for p in self.publishers.values()]

    def snapshot_json(self) -> str:
        return json.dumps(self.snapshot(), separators=(",", ":"), sort_keys=True)

    def to_json(self) -> dict:
        return {
            "publishers": self.snapshot(),
            "challenges": [c.to_dict() for cs in self.challenges.values() for c in cs],
            "pending": [d.hex() for d in self.pending],
            "last_epoch": self.last_epoch,
            "events": self.events,
        }

    @classmethod
    def from_json(cls, data: dict, directory=None, policy=None) -> "Registry":
        reg = cls(directory, policy)
        for p in data["publishers"]:
            pub = PublisherRecord.from_dict(p)
            reg.publishers[pub.name] = pub
            for key in pub.public_keys:
                reg._key_owner[key] = pub.name
        for c in data["challenges"]:
            ch = Challenge.from_dict(c)
            reg.challenges.setdefault(ch.applicant_name, []).append(ch)
        reg.pending = [from_hex(d, 32) for d in data["pending"]]
        reg.last_epoch = int(data["last_epoch"])
        reg.events = list(data["events"])
        return reg

    def copy(self) -> "Registry":
        reg = Registry.__new__(Registry)
        reg.directory = self.directory
        reg.policy = self.policy
        reg.publishers = {n: p.copy() for n, p in self.publishers.items()}
        reg._key_owner = dict(self._key_owner)
        reg.challenges = {n: list(cs) for n, cs in self.challenges.items()}
        reg.pending = list(self.pending)
        reg.last_epoch = self.last_epoch
        reg.events = list(self.events)
        reg.transitions = list(self.transitions)
        return reg

    @classmethod
    def replay(cls, directory, events, chain=None, policy=None) -> "Registry":
        """Rebuild a registry from its event log (signatures are re-checked)."""
        reg = cls(directory, policy)
        for ev in events:
            kind = ev["type"]
            if kind == "challenge":
                reg.issue_challenge(ev["name"], ev["height"], from_hex(ev["nonce"], 32))
            elif kind == "enroll":
                response = None if ev["response"] is None else from_hex(ev["response"], SIGNATURE_SIZE)
                reg._enroll(ev["name"], response, from_hex(ev["public_key"], KEY_SIZE), ev["height"])
            elif kind == "alias":
                reg._update(
                    from_hex(ev["existing_key"], KEY_SIZE),
                    from_hex(ev["proof"], SIGNATURE_SIZE),
                    ev["label"],
                    from_hex(ev["public_key"], KEY_SIZE),
                )
            elif kind == "revoke":
                reg.revoke_identity(
                    from_hex(ev["public_key"], KEY_SIZE), VOLUNTARY, from_hex(ev["signature"], SIGNATURE_SIZE), ev["height"]
                )
            elif kind == "epoch":
                if chain is None:
                    raise InvalidArgument("replaying epoch events needs the chain")
                reg.epoch_update(chain, ev["height"])
            else:
                raise InvalidArgument(f"unknown registry event {kind!r}")
        return reg
