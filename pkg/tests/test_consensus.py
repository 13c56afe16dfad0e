import hashlib
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

import builders
from newschain.consensus import (
    GenesisConfig,
    Mode,
    fork_choice,
    mine_block,
    poa_slot_authority,
    pow_check,
    pow_digest,
    pow_mine,
    produce_poa_block,
    slot_producer,
    slot_skips,
    validate_block,
)
from newschain.crypto import MAX_TARGET, ZERO_DIGEST
from newschain.errors import ConfigError, InvalidArgument, MiningExhausted
from newschain.ledger import Block, BlockHeader, build_block
from newschain.news import create_news, sign_news
from newschain.registry import revoke_message

FIXED_DIGESTS = [hashlib.sha256(b"r%d" % i).digest() for i in range(3)]
NONCE_2_248 = 125  # independent hashlib search over the same preimage layout


def test_round_robin_examples():
    auth = [b"a", b"b", b"c"]
    assert poa_slot_authority(7, auth) == b"b"
    assert poa_slot_authority(0, auth) == b"a"
    assert all(poa_slot_authority(h, [b"x"]) == b"x" for h in range(5))
    with pytest.raises(InvalidArgument):
        poa_slot_authority(1, [])


@given(st.integers(1, 7), st.integers(1, 5), st.integers(0, 100))
def test_round_robin_fairness(n, m, start):
    auth = [bytes([i]) for i in range(n)]
    produced = [poa_slot_authority(h, auth) for h in range(start, start + n * m)]
    assert all(produced.count(a) == m for a in auth)


def test_slot_skips():
    assert [slot_skips(10, t, 3) for t in (10, 11, 13, 14, 16, 17)] == [0, 0, 0, 1, 1, 2]
    auth = [b"a", b"b", b"c"]
    assert slot_producer(4, 10, 11, auth, 3) == b"b"
    assert slot_producer(4, 10, 14, auth, 3) == b"c"


def test_pow_regression_fixture():
    assert pow_mine(ZERO_DIGEST, FIXED_DIGESTS, 2**248) == NONCE_2_248
    preimage = b"".join(len(f).to_bytes(8, "big") + f for f in [NONCE_2_248.to_bytes(8, "big"), ZERO_DIGEST, *FIXED_DIGESTS])
    assert pow_digest(NONCE_2_248, ZERO_DIGEST, FIXED_DIGESTS) == hashlib.sha256(preimage).digest()
    for n in range(NONCE_2_248):
        assert int.from_bytes(pow_digest(n, ZERO_DIGEST, FIXED_DIGESTS), "big") >= 2**248


def test_pow_edges():
    assert pow_mine(ZERO_DIGEST, FIXED_DIGESTS, MAX_TARGET) == 0
    with pytest.raises(MiningExhausted):
        pow_mine(ZERO_DIGEST, FIXED_DIGESTS, 1, max_iterations=1000)
    with pytest.raises(InvalidArgument):
        pow_mine(ZERO_DIGEST, [], MAX_TARGET)
    for bad in (0, MAX_TARGET + 1):
        with pytest.raises(InvalidArgument):
            pow_mine(ZERO_DIGEST, FIXED_DIGESTS, bad)


def test_pow_check_binding(registry_and_keys):
    reg, keys = registry_and_keys
    parent = builders.pow_config().genesis().header
    recs = [create_news(keys["Alpha"], reg.get("Alpha"), f"mined {i}", i) for i in range(3)]
    block = mine_block(parent, recs, 1, 2**248)
    assert pow_check(block, 2**248)
    bumped = Block(replace(block.header, nonce=block.header.nonce + 1), block.records)
    assert not pow_check(bumped, 2**248)
    other = create_news(keys["Alpha"], reg.get("Alpha"), "mined X", 0)
    assert not pow_check(Block(block.header, (other,) + block.records[1:]), 2**248)
    assert not pow_check(Block(block.header, ()), MAX_TARGET)


# -- validate_block -------------------------------------------------------


@pytest.fixture
def poa_setup(registry_and_keys):
    reg, keys = registry_and_keys
    config = builders.poa_config()
    chain = builders.build_chain(config, reg, keys, n_blocks=2)
    recs = [create_news(keys["Alpha"], reg.get("Alpha"), "next block story", 50)]
    parent = chain.head.header
    producer = {k.public_key: k for k in builders.authorities()}[slot_producer(3, parent.timestamp, parent.timestamp + 1, config.authorities, 3)]
    block = produce_poa_block(parent, recs, parent.timestamp + 1, producer)
    return reg, keys, config, chain, block


def test_honest_block_accepted(poa_setup):
    reg, keys, config, chain, block = poa_setup
    v = validate_block(block, chain.head.header, reg, config, chain.index)
    assert v.accepted and bool(v)
    assert validate_block(block, chain.head.header, reg, config, chain.index) == v


def _rule(poa_setup, block, **kw):
    reg, keys, config, chain, _ = poa_setup
    return validate_block(block, chain.head.header, reg, config, chain.index, **kw).rule


def test_rules_in_order(poa_setup):
    reg, keys, config, chain, block = poa_setup
    h = block.header
    assert _rule(poa_setup, Block(replace(h, height=9), block.records)) == 1
    assert _rule(poa_setup, Block(replace(h, prev_hash=ZERO_DIGEST), block.records)) == 2
    assert _rule(poa_setup, Block(replace(h, timestamp=h.timestamp - 5), block.records)) == 3
    assert _rule(poa_setup, block, now=h.timestamp - 1) == 3
    assert _rule(poa_setup, Block(h, ())) == 4
    assert _rule(poa_setup, Block(h, block.records + block.records)) == 4
    dup = chain.blocks[1].records[0]
    dup_block = build_block(chain.head.header, [dup], h.timestamp)
    assert _rule(poa_setup, dup_block) == 5


def test_non_authority_rejected(poa_setup):
    reg, keys, config, chain, block = poa_setup
    rogue = produce_poa_block(chain.head.header, block.records, block.header.timestamp, builders.keypair("rogue"))
    assert _rule(poa_setup, rogue) == 6
    forged = Block(replace(block.header, producer_sig=bytes(64)), block.records)
    assert _rule(poa_setup, forged) == 6
    wrong_turn = [k for k in builders.authorities() if k.public_key != block.header.producer_key][0]
    out_of_turn = produce_poa_block(chain.head.header, block.records, block.header.timestamp, wrong_turn)
    v = validate_block(out_of_turn, chain.head.header, reg, config, chain.index)
    assert (v.rule, v.reason) == (6, "producer is out of turn")


def test_revoked_record_rejected(poa_setup):
    reg, keys, config, chain, block = poa_setup
    kp = keys["Beta"]
    rec = create_news(kp, reg.get("Beta"), "written before revocation", 60)
    reg.revoke_identity(kp.public_key, signature=kp.sign(revoke_message(kp.public_key)))
    parent = chain.head.header
    candidate = produce_poa_block(parent, [rec], block.header.timestamp, {k.public_key: k for k in builders.authorities()}[block.header.producer_key])
    v = validate_block(candidate, parent, reg, config, chain.index)
    assert v.rule == 5 and "revoked" in v.reason


def test_pow_block_rules(registry_and_keys):
    reg, keys = registry_and_keys
    config = builders.pow_config(2**250)
    parent = config.genesis().header
    recs = [sign_news(keys["Alpha"], "Alpha", reg.get("Alpha").status, "pow story", 1)]
    block = mine_block(parent, recs, 1, config.pow_target)
    assert validate_block(block, parent, reg, config).accepted
    unmined = Block(replace(block.header, nonce=block.header.nonce + 1), block.records)
    assert not pow_check(unmined, config.pow_target)
    assert validate_block(unmined, parent, reg, config).rule == 6
    signed = Block(block.header.signed_by(builders.keypair("x")), block.records)
    assert validate_block(signed, parent, reg, config).rule == 6


# -- fork choice ----------------------------------------------------------


def _header(height, nonce):
    return BlockHeader(height, ZERO_DIGEST, ZERO_DIGEST, 0, nonce)


def test_fork_choice_examples():
    assert fork_choice([_header(5, 0), _header(7, 0)]).height == 7
    a, b = _header(7, 1), _header(7, 2)
    assert fork_choice([a, b]) == min([a, b], key=lambda h: h.hash())
    with pytest.raises(InvalidArgument):
        fork_choice([])


@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 50)), min_size=1, max_size=8), st.randoms())
def test_fork_choice_commutative_idempotent(specs, rnd):
    heads = [_header(h, n) for h, n in specs]
    choice = fork_choice(heads)
    shuffled = list(heads)
    rnd.shuffle(shuffled)
    assert fork_choice(shuffled) == choice
    assert fork_choice([choice, choice]) == choice
    assert fork_choice(heads + [choice]) == choice


# -- genesis --------------------------------------------------------------


def test_genesis_config_roundtrip():
    cfg = builders.poa_config(skip_timeout=5)
    again = GenesisConfig.from_dict(cfg.to_dict())
    assert again == cfg and again.sentinel() == cfg.sentinel()
    assert cfg.genesis().header.merkle_root == cfg.sentinel()
    assert builders.poa_config(2).sentinel() != cfg.sentinel()
    assert GenesisConfig.from_dict({"mode": "PoW"}).pow_target == 2**248


def test_genesis_config_errors():
    with pytest.raises(ConfigError):
        GenesisConfig(Mode.POA).validate()
    with pytest.raises(ConfigError):
        GenesisConfig.from_dict({"mode": "PoS"})
    with pytest.raises(ConfigError):
        GenesisConfig.from_dict({"authorities": ["XYZ"]})
    with pytest.raises(InvalidArgument):
        GenesisConfig(pow_target=0)
