import math

import pytest

from pyoblivious.analysis import traces_identical
from pyoblivious.cache import MemoryCache
from pyoblivious import square_root
from pyoblivious.crypto import KeySpace, LogicalKey
from pyoblivious.errors import CacheOverflow, InvalidConfig, KeyCollision, MissIntolerance
from pyoblivious.server_store import ServerStore
from pyoblivious.shuffle import BufferShuffle, passes
from pyoblivious.square_root import SquareRootStore, access_cost, rebuild_cost

from conftest import ITEM_SIZE

N, M = 20, 5

def layer(codec, n=N, M=M, passes=4):
    store = ServerStore(M, ITEM_SIZE)
    D = max(1, math.ceil(n / M))
    sr = SquareRootStore(store, 2, n, codec, MemoryCache(D), shuffler=BufferShuffle(passes=passes, rng=codec.rng))
    sr.build([(LogicalKey.real(f"k{i}"), bytes([i])) for i in range(n)])
    store.reset_stats()
    return sr

def test_build_places_items_and_dummies(codec):
    sr = layer(codec)
    assert len(sr.store) == N + sr.D
    assert sr.server_items == N + sr.D
    assert sr.D == 4

def test_access_costs_two_roundtrips(codec):
    sr = layer(codec)
    assert sr.access(LogicalKey.real("k3")) == bytes([3])
    stats = sr.store.stats()
    assert stats.roundtrips == 2
    assert stats.items_transferred == 1

def test_hits_look_like_misses(codec):
    sr = layer(codec)
    sr.access(LogicalKey.real("k1"))
    sr.store.reset_stats()
    sr.access(LogicalKey.real("k1"))
    hit = sr.store.trace()
    sr.store.reset_stats()
    sr.access(LogicalKey.real("k2"))
    miss = sr.store.trace()
    assert traces_identical(hit, miss)
    assert hit[0].key != miss[0].key

def test_updates_survive_rebuilds(codec):
    sr = layer(codec)
    sr.access(LogicalKey.real("k0"), b"new")
    for i in range(1, 3 * sr.D):
        sr.access(LogicalKey.real(f"k{i % N}"))
    assert sr.rebuilds >= 2
    assert sr.access(LogicalKey.real("k0")) == b"new"
    assert sr.access(LogicalKey.real("k5")) == bytes([5])

def test_nonce_collision_is_redrawn(codec, monkeypatch):
    real_fresh, real_obfuscate = square_root.fresh_nonce, passes.obfuscate_key
    nonces = iter([b"colliding nonce"])
    monkeypatch.setattr(square_root, "fresh_nonce", lambda rng: next(nonces, None) or real_fresh(rng))

    def obfuscate(r, k, namespace=0):
        # every dummy lands on one server key under the first nonce
        if r == b"colliding nonce" and k.namespace == KeySpace.DUMMY:
            return bytes([namespace]) + b"\x01" * 31
        return real_obfuscate(r, k, namespace)

    monkeypatch.setattr(passes, "obfuscate_key", obfuscate)
    sr = layer(codec)
    assert next(nonces, None) is None
    assert sr.state.r != b"colliding nonce"
    assert len(sr.store) == N + sr.D
    for i in range(3 * sr.D):
        assert sr.access(LogicalKey.real(f"k{i % N}")) == bytes([i % N])
    assert sr.rebuilds >= 2

def test_rebuild_cost_matches_closed_form(codec):
    sr = layer(codec, passes=3)
    for i in range(sr.D - 1):
        sr.access(LogicalKey.real(f"k{i}"))
    before = sr.store.stats()
    sr.access(LogicalKey.real("k10"))
    spent = sr.store.stats() - before
    model = rebuild_cost(N, sr.D, M, passes=3)

    assert sr.rebuilds == 1
    assert spent.roundtrips == 2 + model["roundtrips"]
    assert spent.items_transferred == 1 + model["items"]
    assert len(sr.store) == N + sr.D

def test_amortized_cost_over_whole_epochs(codec):
    sr = layer(codec)
    accesses = 3 * sr.D
    for i in range(accesses):
        sr.access(LogicalKey.real(f"k{(7 * i) % N}"))
    stats = sr.store.stats()
    model = access_cost(N, M)
    assert stats.roundtrips / accesses == pytest.approx(model["amortized_roundtrips"])
    assert stats.items_transferred / accesses == pytest.approx(model["amortized_items"])

def test_batched_access(codec):
    sr = layer(codec)
    keys = [LogicalKey.real("k1"), LogicalKey.real("k2"), LogicalKey.real("k1")]
    values = sr.access_many(keys, lambda values: [v + b"!" for v in values])
    assert values == [bytes([1]), bytes([2]), bytes([1])]
    assert sr.access(LogicalKey.real("k2")) == bytes([2]) + b"!"
    with pytest.raises(CacheOverflow):
        sr.access_many([LogicalKey.real(f"k{i}") for i in range(sr.D + 1)])

def test_unknown_key_is_an_error(codec):
    sr = layer(codec)
    with pytest.raises(MissIntolerance):
        sr.access(LogicalKey.real("absent"))

def test_configuration_errors(codec):
    store = ServerStore(M, ITEM_SIZE)
    with pytest.raises(InvalidConfig):
        SquareRootStore(store, 2, N, codec, MemoryCache(2))
    sr = SquareRootStore(store, 2, N, codec, MemoryCache(4))
    with pytest.raises(KeyCollision):
        sr.build([(LogicalKey.real("a"), b""), (LogicalKey.real("a"), b"")])

def test_tiny_layers_stay_in_memory(codec):
    store = ServerStore(8, ITEM_SIZE)
    sr = SquareRootStore(store, 2, 3, codec, MemoryCache(1))
    sr.build([(LogicalKey.real(f"k{i}"), b"v") for i in range(3)])
    assert sr.degenerate
    assert sr.access(LogicalKey.real("k2"), b"w") == b"v"
    assert sr.access(LogicalKey.real("k2")) == b"w"
    assert len(store) == 0

def test_drain_returns_real_items(codec):
    sr = layer(codec)
    sr.access(LogicalKey.real("k4"), b"x")
    items = dict(sr.drain())
    assert len(items) == N
    assert items[LogicalKey.real("k4")] == b"x"
    assert len(sr.store) == 0

def test_closed_forms():
    assert rebuild_cost(10**4, 100, 100)["roundtrips"] == 1011
    small = access_cost(10**4, 100)
    assert small["amortized_roundtrips"] == pytest.approx(12.11)
    assert small["amortized_items"] == pytest.approx(1012)
    assert small["requests"] == pytest.approx({"get" : 506, "put" : 506, "delete" : 506})
    assert access_cost(2500, 50)["amortized_roundtrips"] == pytest.approx(12.22)
    assert access_cost(10**6, 1000)["amortized_items"] == pytest.approx(10012)
