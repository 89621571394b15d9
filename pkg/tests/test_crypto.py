import pytest

from pyoblivious.crypto import (OVERHEAD, ItemCodec, KeySpace, LogicalKey, SessionRandom, decrypt_value,
                                encrypt_value, fresh_nonce, generate_secret_key, obfuscate_key)
from pyoblivious.errors import AuthFailure, PlaintextTooLarge
from pyoblivious.server_store import KEY_SIZE

from conftest import ITEM_SIZE

def test_obfuscated_keys(rng):
    r1, r2 = fresh_nonce(rng), fresh_nonce(rng)
    k = LogicalKey.real("alice")

    assert obfuscate_key(r1, k, 0x21) == obfuscate_key(r1, k, 0x21)
    assert obfuscate_key(r1, k, 0x21) != obfuscate_key(r2, k, 0x21)
    assert obfuscate_key(r1, k, 0x21) != obfuscate_key(r1, LogicalKey.real("bob"), 0x21)
    assert len(obfuscate_key(r1, k)) == KEY_SIZE
    assert obfuscate_key(r1, k, 0x21)[0] == 0x21

def test_logical_keys():
    assert LogicalKey.dummy(7).index == 7
    assert LogicalKey.cell(3, 41).index == 41
    assert LogicalKey.decode(LogicalKey.real("x").encode()) == LogicalKey.real(b"x")
    assert LogicalKey.real("x").namespace == KeySpace.REAL
    with pytest.raises(ValueError):
        LogicalKey.dummy(0)
    with pytest.raises(ValueError):
        LogicalKey.real("x").index

def test_values_have_fixed_size(rng):
    K = generate_secret_key(rng)
    short = encrypt_value(K, b"", ITEM_SIZE, rng)
    full = encrypt_value(K, b"x" * (ITEM_SIZE - OVERHEAD), ITEM_SIZE, rng)

    assert len(short) == len(full) == ITEM_SIZE
    assert decrypt_value(K, short) == b""
    assert decrypt_value(K, full) == b"x" * (ITEM_SIZE - OVERHEAD)
    with pytest.raises(PlaintextTooLarge):
        encrypt_value(K, b"x" * (ITEM_SIZE - OVERHEAD + 1), ITEM_SIZE, rng)

def test_tampering_is_detected(rng):
    K = generate_secret_key(rng)
    c = bytearray(encrypt_value(K, b"secret", ITEM_SIZE, rng))
    c[-1] ^= 1
    with pytest.raises(AuthFailure):
        decrypt_value(K, bytes(c))
    with pytest.raises(AuthFailure):
        decrypt_value(generate_secret_key(rng), encrypt_value(K, b"secret", ITEM_SIZE, rng))

def test_codec_carries_logical_key(codec):
    lk = LogicalKey.real("alice")
    assert codec.open(codec.seal(lk, b"v1")) == (lk, b"v1")

    limited = ItemCodec(codec.secret_key, ITEM_SIZE, codec.rng, limit=20)
    capacity = limited.value_capacity(lk)
    limited.seal(lk, b"x" * capacity)
    with pytest.raises(PlaintextTooLarge):
        limited.seal(lk, b"x" * (capacity + 1))

def test_seeded_sessions_repeat():
    a, b = SessionRandom(5), SessionRandom(5)
    assert a.bytes(16) == b.bytes(16)
    assert a.spawn(1).bytes(8) == b.spawn(1).bytes(8)
    assert a.spawn(1).bytes(8) != a.spawn(2).bytes(8)
    assert SessionRandom(-1).deterministic is False

def test_fisher_yates_is_a_permutation(rng):
    assert sorted(rng.shuffle(list(range(50)))) == list(range(50))
