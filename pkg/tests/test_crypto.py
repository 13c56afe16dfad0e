import hashlib

import pytest
from hypothesis import given
from hypothesis import strategies as st

from newschain import crypto
from newschain.crypto import DigestCounter, canonical_encode, from_hex, generate_keypair, sign, u64, verify
from newschain.errors import InvalidArgument

# RFC 8032 Ed25519 test vector "TEST 1"
RFC_SEED = "9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60"
RFC_PUB = "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a"
RFC_SIG = (
    "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065"
    "224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b"
)


def test_digest_known_answers():
    assert crypto.digest(b"").hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    assert crypto.digest(b"abc").hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def test_digest_counter():
    with DigestCounter() as c:
        crypto.digest(b"x")
        crypto.digest(b"y")
    crypto.digest(b"outside")
    assert c.count == 2


def test_canonical_encode_layout():
    assert canonical_encode(["ab", b"\x01"]) == b"\x00" * 7 + b"\x02ab" + b"\x00" * 7 + b"\x01\x01"
    assert canonical_encode([]) == b""
    with pytest.raises(InvalidArgument):
        canonical_encode([3])


@given(st.lists(st.binary(max_size=12), max_size=5), st.lists(st.binary(max_size=12), max_size=5))
def test_canonical_encode_injective(a, b):
    assert (canonical_encode(a) == canonical_encode(b)) == (a == b)


def test_u64_bounds():
    assert u64(1) == b"\x00" * 7 + b"\x01"
    with pytest.raises(InvalidArgument):
        u64(2**64)
    with pytest.raises(InvalidArgument):
        u64(-1)


def test_rfc8032_vector():
    kp = generate_keypair(bytes.fromhex(RFC_SEED))
    assert kp.public_key.hex() == RFC_PUB
    assert kp.sign(b"").hex() == RFC_SIG
    assert verify(kp.public_key, b"", bytes.fromhex(RFC_SIG))


def test_keypair_is_deterministic_and_seed_checked():
    seed = bytes(range(32))
    assert generate_keypair(seed) == generate_keypair(seed)
    for bad in (b"", bytes(31), bytes(33)):
        with pytest.raises(InvalidArgument):
            generate_keypair(bad)


@given(st.binary(min_size=32, max_size=32), st.binary(max_size=64), st.integers(0, 63))
def test_sign_verify_and_bitflip(seed, msg, pos):
    kp = generate_keypair(seed)
    sig = sign(kp.secret_key, msg)
    assert verify(kp.public_key, msg, sig)
    forged = bytearray(sig)
    forged[pos] ^= 0x01
    assert not verify(kp.public_key, msg, bytes(forged))
    assert not verify(kp.public_key, msg + b"!", sig)


def test_verify_rejects_malformed_input():
    kp = generate_keypair(bytes(32))
    sig = kp.sign(b"m")
    assert not verify(kp.public_key[:31], b"m", sig)
    assert not verify(kp.public_key, b"m", sig[:63])
    assert not verify(b"\xff" * 32, b"m", sig)


def test_keypair_file_roundtrip():
    kp = generate_keypair(bytes(range(32)))
    assert crypto.KeyPair.from_dict(kp.to_dict()) == kp
    bad = dict(kp.to_dict(), public_key="00" * 32)
    with pytest.raises(InvalidArgument):
        crypto.KeyPair.from_dict(bad)


def test_seed_from_label_independent_route():
    expected = hashlib.sha256((4).to_bytes(8, "big") + b"seed" + (3).to_bytes(8, "big") + b"abc").digest()
    assert crypto.seed_from_label("abc") == expected


@pytest.mark.parametrize("text", ["AB", "abc", "0x00", " 00", "zz"])
def test_from_hex_strict(text):
    with pytest.raises(InvalidArgument):
        from_hex(text)


def test_from_hex_length():
    assert from_hex("00ff", 2) == b"\x00\xff"
    with pytest.raises(InvalidArgument):
        from_hex("00", 2)
