import math

import pytest

from pyoblivious.crypto import LogicalKey, fresh_nonce, obfuscate_key
from pyoblivious.errors import CountMismatch, InvalidConfig
from pyoblivious.server_store import ServerStore, namespace_range
from pyoblivious.shuffle import (BufferShuffle, OracleShuffle, Phase, make_shuffler, move_pass, prefix,
                                 rekey_pass, stage_items)

from conftest import ITEM_SIZE

def staged(store, codec, rng, n):
    items = [(LogicalKey.dummy(j), bytes([j])) for j in range(1, n + 1)]
    source = prefix(1, Phase.STAGING)
    stage_items(store, items, source, codec, rng)
    return namespace_range(source), items

def contents(store, codec, key_range):
    return dict(codec.open(v) for _, v in store.get_range(key_range.lo, key_range.hi, len(store)))

def test_namespace_prefixes():
    assert prefix(2, Phase.RESIDENT) == 0x20
    assert prefix(3, Phase.SHUFFLE_B) == 0x33
    with pytest.raises(ValueError):
        prefix(16, Phase.RESIDENT)

def test_staging_costs_one_message_per_group(store, codec, rng):
    staged(store, codec, rng, 10)
    assert store.stats().roundtrips == math.ceil(10 / store.message_size)
    assert len(store) == 10

def test_buffer_shuffle_moves_every_item(store, codec, rng):
    source, items = staged(store, codec, rng, 20)
    store.reset_stats()
    final = BufferShuffle(passes=3, rng=rng).shuffle(store, source, 20, codec)
    roundtrips = store.stats().roundtrips

    assert roundtrips == 3 * 2 * math.ceil(20 / store.message_size)
    assert final == namespace_range(prefix(1, Phase.SHUFFLE_A))
    assert contents(store, codec, final) == dict(items)
    assert len(store) == 20

def test_buffer_shuffle_alternates_phases(store, codec, rng):
    source, _ = staged(store, codec, rng, 8)
    final = BufferShuffle(passes=2, rng=rng).shuffle(store, source, 8, codec)
    assert final == namespace_range(prefix(1, Phase.SHUFFLE_B))

def test_writes_are_sorted_within_a_message(store, codec, rng):
    source, _ = staged(store, codec, rng, 12)
    store.reset_stats()
    BufferShuffle(passes=1, rng=rng).shuffle(store, source, 12, codec)
    by_message = {}
    for event in store.trace():
        if event.op.value == "put":
            by_message.setdefault(event.message, []).append(event.key)
    assert by_message
    for keys in by_message.values():
        assert keys == sorted(keys)

@pytest.mark.parametrize("kind", ["oracle", "buffer"])
def test_strategies_move_every_item(store, codec, rng, kind):
    source, items = staged(store, codec, rng, 9)
    final = make_shuffler(kind, 2, rng).shuffle(store, source, 9, codec)
    assert contents(store, codec, final) == dict(items)

def test_rekey_pass_uses_the_prf(store, codec, rng):
    source, items = staged(store, codec, rng, 7)
    r = fresh_nonce(rng)
    dest = prefix(1, Phase.RESIDENT)
    rekey_pass(store, source, 7, r, codec, dest)
    for lk, value in items:
        assert codec.open(store.get(obfuscate_key(r, lk, dest))) == (lk, value)

def test_short_source_is_detected(store, codec, rng):
    source, _ = staged(store, codec, rng, 5)
    with pytest.raises(CountMismatch):
        move_pass(store, source, 6, codec, prefix(1, Phase.SHUFFLE_A), rng)

def test_short_source_is_detected_by_the_oracle(store, codec, rng):
    source, _ = staged(store, codec, rng, 5)
    with pytest.raises(CountMismatch):
        OracleShuffle(rng=rng).shuffle(store, source, 6, codec)

def test_strategy_factory_and_settings(rng, codec):
    shuffler = make_shuffler("buffer", 5, rng)
    assert shuffler.passes == 5
    shuffler.set({"passes" : 2})
    assert shuffler.passes == 2
    assert shuffler.serialize()["parameters"]["passes"]["value"] == 2
    shuffler.reset()
    assert shuffler.passes == 5
    assert isinstance(make_shuffler("oracle", rng=rng), OracleShuffle)
    with pytest.raises(InvalidConfig):
        make_shuffler("riffle")
    with pytest.raises(InvalidConfig):
        shuffler.shuffle(ServerStore(1, ITEM_SIZE), namespace_range(0x11), 1, codec)
