import numpy as np
import pytest

from pyoblivious.crypto import SessionRandom
from pyoblivious.cuckoo import CuckooLayout, CuckooTable, MemoryCells, decode_cell, encode_cell
from pyoblivious.errors import CapacityExceeded, InvalidConfig

def table(capacity=32, seed=3):
    return CuckooTable(CuckooLayout(capacity), rng=SessionRandom(seed))

def occupied(t):
    return sum(decode_cell(v) is not None for v in t.cells.cells)

def test_layout_sizes():
    layout = CuckooLayout(10)
    assert layout.table_size == 13
    assert layout.num_cells == 30
    assert layout.stash_cells == [26, 27, 28, 29]
    assert layout.probe_width == 6
    assert layout.drain_width == 12
    assert layout.batch_width == 12
    assert CuckooLayout(169).num_cells == 444

def test_cells_encoding():
    assert decode_cell(encode_cell(b"k", b"v")) == (b"k", b"v")
    assert decode_cell(b"") is None

def test_put_get_remove():
    t = table()
    for i in range(20):
        t.put(f"k{i}".encode(), bytes([i]))
    assert len(t) == 20
    assert t.get(b"k7") == bytes([7])
    assert t.get(b"absent") is None
    assert t.get_many([b"k1", b"absent", b"k2"]) == [bytes([1]), None, bytes([2])]

    t.put(b"k7", b"seven")
    assert len(t) == 20
    assert t.get(b"k7") == b"seven"

    assert t.remove(b"k7") == b"seven"
    assert t.remove(b"k7") is None
    assert t.get(b"k7") is None
    assert len(t) == 19

def test_insert_into_empty_table_lands_in_t1():
    t = table()
    t.put(b"first", b"v")
    assert decode_cell(t.cells.cells[t.slots(b"first")[0]]) == (b"first", b"v")
    assert t.evictions == 0

def test_t1_collision_evicts_once():
    t = table(capacity=10)
    keys = [f"key{i}".encode() for i in range(200)]
    first = keys[0]
    second = next(k for k in keys[1:] if t.slots(k)[0] == t.slots(first)[0])

    t.put(first, b"1")
    t.put(second, b"2")
    a, b = t.slots(first)
    assert t.evictions == 1
    assert decode_cell(t.cells.cells[a]) == (second, b"2")
    assert decode_cell(t.cells.cells[b]) == (first, b"1")
    assert all(decode_cell(t.cells.cells[i]) is None for i in t.layout.stash_cells)

def test_operations_share_one_access_pattern():
    t = table()
    t.put(b"present", b"v")
    t.cells.trace.clear()
    t.get(b"present")
    t.get(b"absent")
    t.put(b"present", b"w")
    t.put(b"new", b"v")
    t.remove(b"absent")
    t.remove(b"present")

    widths = [len(access) for access in t.cells.trace]
    assert widths == [t.layout.probe_width, t.layout.drain_width] * 6
    stash = tuple(t.layout.stash_cells)
    assert all(access[2:] == stash for access in t.cells.trace[0::2])
    assert all(access[-t.layout.stash:] == stash for access in t.cells.trace[1::2])

def test_batched_lookup_is_one_round():
    t = table()
    t.cells.trace.clear()
    t.get_many([b"a", b"b", b"c"])
    assert [len(access) for access in t.cells.trace] == [3 * t.layout.probe_width]
    assert t.get_many([]) == []

def test_capacity_is_enforced():
    t = table(capacity=8)
    for i in range(8):
        t.put(bytes([i]), b"v")
    t.put(bytes([3]), b"replaced")
    with pytest.raises(CapacityExceeded):
        t.put(b"one too many", b"v")
    assert len(t) == 8
    with pytest.raises(CapacityExceeded):
        table(capacity=2).bulk_load([(b"a", b""), (b"b", b""), (b"c", b"")])

def test_bulk_load_rehash_and_drain():
    t = table(capacity=64)
    pairs = [(f"key{i}".encode(), f"value{i}".encode()) for i in range(64)]
    t.bulk_load(pairs)
    assert all(t.get(k) == v for k, v in pairs)

    seeds = t.seeds
    t.rehash()
    assert t.seeds != seeds
    assert t.rehashes == 1
    assert sorted(t.items()) == sorted(pairs)
    assert all(t.get(k) == v for k, v in pairs)

    assert sorted(t.drain()) == sorted(pairs)
    assert len(t) == 0
    assert t.get(b"key1") is None

def test_rehash_of_empty_table_only_reseeds():
    t = table()
    seeds = t.seeds
    t.rehash()
    assert t.seeds != seeds
    assert len(t) == 0 and occupied(t) == 0

def test_replay_matches_dict():
    t = table(capacity=512, seed=21)
    generator = np.random.default_rng(21)
    oracle = {}
    for _ in range(10**4):
        name = f"key{int(generator.integers(0, 600))}".encode()
        roll = generator.random()
        if roll < 0.4:
            value = generator.bytes(8)
            t.put(name, value)
            oracle[name] = value
        elif roll < 0.6:
            assert t.remove(name) == oracle.pop(name, None)
        else:
            assert t.get(name) == oracle.get(name)
        assert len(t) == len(oracle)
    assert occupied(t) == len(oracle)
    assert dict(t.items()) == oracle

def test_filling_to_capacity_rarely_rehashes():
    rehashed = 0
    for seed in range(100):
        t = CuckooTable(CuckooLayout(1000), rng=SessionRandom(seed))
        for i in range(1000):
            t.put(f"trial{seed}-key{i}".encode(), b"v")
        assert len(t) == occupied(t) == 1000
        rehashed += t.rehashes > 0
    assert rehashed <= 1

def test_inserts_write_few_cells():
    t = CuckooTable(CuckooLayout(10**4), rng=SessionRandom(5))
    for i in range(10**4):
        t.put(f"key{i}".encode(), b"v")
    assert t.inserts == 10**4
    assert t.cells.writes / t.inserts <= 3

def test_cell_store_must_match_layout():
    with pytest.raises(InvalidConfig):
        CuckooTable(CuckooLayout(10), cells=MemoryCells(5))
