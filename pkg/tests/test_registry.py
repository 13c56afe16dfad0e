import json
import random
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import builders
from newschain.errors import AlreadyEnrolled, InvalidArgument, NoSuchPublisher, RevokedError, VerificationFailed
from newschain.news import Status
from newschain.registry import (
    ANOMALOUS,
    VOLUNTARY,
    Registry,
    ReputationPolicy,
    TrustDirectory,
    revoke_message,
    update_message,
)

def _org(name):
    return builders.keypair(f"org:{name}")


def test_challenge_nonces():
    reg = Registry()
    a, b = reg.issue_challenge("X"), reg.issue_challenge("X")
    assert a.nonce != b.nonce and len(a.nonce) == 32
    assert a.expires_at == a.issued_at + reg.policy.epoch_E
    with pytest.raises(InvalidArgument):
        reg.issue_challenge("")


def test_enroll_verified_and_plain():
    reg = Registry({"Times": _org("Times").public_key})
    ch = reg.issue_challenge("Times", 3)
    pub = reg.enroll("Times", _org("Times").sign(ch.nonce), builders.keypair("t").secret_key, 3)
    assert (pub.status, pub.reputation) == (Status.VERIFIED, 5)
    assert pub.public_keys == [builders.keypair("t").public_key]
    fresh = reg.enroll("Newcomer", None, builders.keypair("n").secret_key, 3)
    assert (fresh.status, fresh.reputation) == (Status.NON_VERIFIED, 0)
    with pytest.raises(AlreadyEnrolled):
        reg.enroll("Newcomer", None, builders.keypair("n2").secret_key, 3)
    with pytest.raises(InvalidArgument):
        reg.enroll("Other", None, builders.keypair("n").secret_key, 3)  # key already taken


def test_enroll_wrong_nonce_is_an_error():
    reg = Registry({"Times": _org("Times").public_key})
    reg.issue_challenge("Times")
    with pytest.raises(VerificationFailed):
        reg.enroll("Times", _org("Times").sign(b"\x00" * 32), builders.keypair("t").secret_key)
    with pytest.raises(VerificationFailed):
        reg.enroll("Unknown", _org("Times").sign(b"\x00" * 32), builders.keypair("u").secret_key)
    assert "Times" not in reg.publishers


def test_expired_challenge_falls_back():
    reg = Registry({"Times": _org("Times").public_key})
    ch = reg.issue_challenge("Times", 0)
    pub = reg.enroll("Times", _org("Times").sign(ch.nonce), builders.keypair("t").secret_key, ch.expires_at + 1)
    assert pub.status is Status.NON_VERIFIED and pub.reputation == 0


def test_challenge_is_single_use():
    reg = Registry({"Times": _org("Times").public_key})
    ch = reg.issue_challenge("Times", 0)
    sig = _org("Times").sign(ch.nonce)
    reg.enroll("Times", sig, builders.keypair("t").secret_key)
    assert "Times" not in reg.challenges
    with pytest.raises(AlreadyEnrolled):
        reg.enroll("Times", sig, builders.keypair("t2").secret_key)


def test_alias_examples(registry_and_keys):
    reg, keys = registry_and_keys
    kp = keys["Alpha"]
    sports = builders.keypair("alpha-sports")
    pub = reg.update_identity(kp.public_key, kp.sign(update_message(kp.public_key, "sports")), "sports", sports.secret_key)
    assert len(pub.public_keys) == 2 and reg.owner(sports.public_key) is pub
    assert (pub.status, pub.reputation) == (Status.VERIFIED, 5)
    other = keys["Beta"]
    with pytest.raises(VerificationFailed):
        reg.update_identity(kp.public_key, other.sign(update_message(kp.public_key, "x")), "x", builders.keypair("x").secret_key)
    with pytest.raises(NoSuchPublisher):
        reg.update_identity(b"\x07" * 32, bytes(64), "x", builders.keypair("x").secret_key)
    reg.revoke_identity(other.public_key, signature=other.sign(revoke_message(other.public_key)))
    with pytest.raises(RevokedError):
        reg.update_identity(other.public_key, other.sign(update_message(other.public_key, "y")), "y", builders.keypair("y").secret_key)


def test_revoke_examples(registry_and_keys):
    reg, keys = registry_and_keys
    kp = keys["Alpha"]
    alias = builders.keypair("alpha-2")
    reg.update_identity(kp.public_key, kp.sign(update_message(kp.public_key, "two")), "two", alias.secret_key)
    with pytest.raises(VerificationFailed):
        reg.revoke_identity(kp.public_key, signature=alias.sign(revoke_message(kp.public_key)))
    with pytest.raises(InvalidArgument):
        reg.revoke_identity(kp.public_key, ANOMALOUS)
    pub = reg.revoke_identity(alias.public_key, VOLUNTARY, alias.sign(revoke_message(alias.public_key)), 4)
    assert pub.status is Status.REVOKED and pub.revocation_reason == VOLUNTARY
    assert reg.owner(kp.public_key).status is Status.REVOKED
    before = json.dumps(pub.to_dict())
    assert json.dumps(reg.revoke_identity(kp.public_key).to_dict()) == before


def test_policy_validation_and_roundtrip():
    p = ReputationPolicy(window_W=3)
    assert ReputationPolicy.from_dict(p.to_dict()) == p
    assert ReputationPolicy.from_dict(None) == ReputationPolicy()
    for bad in ({"T_promote": 0}, {"theta": 1.5}, {"epoch_E": 0}, {"bogus": 1}):
        with pytest.raises(InvalidArgument):
            ReputationPolicy.from_dict(bad)


def test_directory_file_roundtrip():
    d = TrustDirectory({"A": b"\x01" * 32})
    assert TrustDirectory.from_json(json.loads(json.dumps(d.to_json()))) == d


# -- epochs ---------------------------------------------------------------

WORDS = [f"w{i}" for i in range(6)]


def _epoch_setup(policy, n_blocks, texts):
    reg, keys = builders.enrolled_registry(("Alpha", "Beta", "Gamma"), ("Alpha",), policy)
    chain = builders.build_chain(builders.pow_config(), reg, keys, n_blocks=n_blocks, per_block=3, texts=texts)
    return reg, keys, chain


def test_empty_epoch_changes_nothing():
    reg, keys = builders.enrolled_registry()
    chain = builders.build_chain(builders.pow_config(), reg, keys, n_blocks=10, per_block=1)
    # a registry that knows none of the epoch's publishers has nothing to score
    blank = Registry(reg.directory, reg.policy)
    report = blank.epoch_update(chain)
    assert report.empty and report.deferred == 0 and blank.snapshot_json() == "[]"


def test_epoch_boundary_checks():
    reg, keys = builders.enrolled_registry()
    chain = builders.build_chain(builders.pow_config(), reg, keys, n_blocks=10, per_block=1)
    with pytest.raises(InvalidArgument):
        reg.epoch_update(chain, 5)
    reg.epoch_update(chain)
    with pytest.raises(InvalidArgument):
        reg.epoch_update(chain, 10)


def test_five_corroborations_promote():
    policy = ReputationPolicy(window_W=2, epoch_E=5)
    # Alpha posts story i, Beta echoes it, Gamma posts noise
    texts = lambda c: [f"story {c // 3} harbor", f"story {c // 3} harbor", f"noise {c} {c}x"][c % 3]
    reg, keys, chain = _epoch_setup(policy, 5, texts)
    report = reg.epoch_update(chain)
    assert report.deltas["Beta"] == 5 and report.promotions == ["Beta"]
    assert reg.get("Beta").status is Status.VERIFIED and reg.get("Beta").reputation == 5
    assert report.deltas["Gamma"] == -3 and report.revocations == ["Gamma"]
    assert reg.get("Gamma").revocation_reason == ANOMALOUS
    assert report.deferred == 4  # Alpha and Gamma at heights 4 and 5: window still open
    assert [t for t in reg.transitions] == [("Beta", "NonVerified", "Verified", 5), ("Gamma", "NonVerified", "Revoked", 5)]


def test_promotion_timeout_revokes():
    texts = lambda c: "verified only" if c % 3 == 0 else f"unique {c}"
    reg, keys = builders.enrolled_registry(("Alpha", "Beta"), ("Alpha",), ReputationPolicy(window_W=0, epoch_E=1, evaluation_period_P=3, T_revoke=-100))
    chain = builders.build_chain(builders.pow_config(), reg, keys, n_blocks=3, per_block=1, texts=texts)
    for h in (1, 2, 3):
        reg.epoch_update(chain, h)
    beta = reg.get("Beta")
    assert beta.status is Status.REVOKED and beta.reputation == -1 and beta.revocation_reason == ANOMALOUS


def _oracle_match(a, b, theta):
    """Exact rational test of cos(a, b) >= theta on word counts."""
    ca, cb = Counter(a.lower().split()), Counter(b.lower().split())
    dot = sum(ca[t] * cb[t] for t in ca)
    na2, nb2 = sum(v * v for v in ca.values()), sum(v * v for v in cb.values())
    return bool(na2 and nb2) and dot >= 0 and Fraction(dot) ** 2 >= Fraction(str(theta)) ** 2 * na2 * nb2


@pytest.mark.parametrize("seed", range(4))
def test_score_accounting_matches_recount(seed):
    rng = random.Random(seed)
    policy = ReputationPolicy(window_W=3, epoch_E=4, T_promote=1000, T_revoke=-1000, evaluation_period_P=1000)
    made = {}

    def texts(c):
        made[c] = " ".join(rng.choice(WORDS) for _ in range(3))
        return made[c]

    reg, keys, chain = _epoch_setup(policy, 14, texts)
    last = 12
    for h in (4, 8, 12):
        reg.epoch_update(chain, h)
    expected = {"Alpha": policy.T_promote, "Beta": 0, "Gamma": 0}
    for height in range(1, last + 1):
        for rec in chain.blocks[height].records:
            lo, hi = max(1, height - policy.window_W), min(last, height + policy.window_W)
            peers = [o for hh in range(lo, hi + 1) for o in chain.blocks[hh].records if o.publisher_name == "Alpha"]
            hit = rec.publisher_name != "Alpha" and any(_oracle_match(rec.news_text, o.news_text, policy.theta) for o in peers)
            if hit:
                expected[rec.publisher_name] += 1
            elif height + policy.window_W <= last:
                expected[rec.publisher_name] -= 1
    assert {p.name: p.reputation for p in reg.publishers.values()} == expected


def test_replay_reproduces_snapshot():
    policy = ReputationPolicy(window_W=2, epoch_E=5)
    texts = lambda c: [f"story {c // 3} harbor", f"story {c // 3} harbor", f"noise {c} {c}x"][c % 3]
    reg, keys, chain = _epoch_setup(policy, 10, texts)
    alpha = keys["Alpha"]
    reg.update_identity(alpha.public_key, alpha.sign(update_message(alpha.public_key, "x")), "x", builders.keypair("ax").secret_key)
    reg.epoch_update(chain, 5)
    reg.epoch_update(chain, 10)
    again = Registry.replay(reg.directory, reg.events, chain, policy)
    assert again.snapshot_json() == reg.snapshot_json()
    assert json.dumps(again.to_json(), sort_keys=True) == json.dumps(reg.to_json(), sort_keys=True)
    assert Registry.from_json(json.loads(json.dumps(reg.to_json())), reg.directory, policy).snapshot_json() == reg.snapshot_json()


# -- random event sequences -----------------------------------------------

op_st = st.tuples(st.sampled_from(["enroll", "verify", "alias", "revoke", "delta"]), st.integers(0, 4), st.integers(-4, 6))


@settings(max_examples=300)
@given(st.lists(op_st, max_size=30))
def test_state_machine_soundness(ops):
    builders.check_soundness(builders.run_ops(ops))


@given(st.lists(op_st.filter(lambda o: o[0] != "delta"), max_size=20))
def test_identity_replay(ops):
    reg = builders.run_ops(ops)
    again = Registry.replay(reg.directory, reg.events)
    assert again.snapshot_json() == reg.snapshot_json()
