import numpy as np
import pytest

from pyoblivious.analysis import traces_identical
from pyoblivious.errors import InvalidConfig, MissIntolerance, PlaintextTooLarge
from pyoblivious.recursive import OsClient, build, formula_storage, message_size_for, plan_levels

def items(n):
    return [(f"key{i}", f"value{i}".encode()) for i in range(n)]

def client(N=100, c=2, top="square_root", seed=11, **extra):
    return OsClient({"N" : N, "c" : c, "top" : top, "item_size" : 256, "seed" : seed, **extra}, items=items(N))

@pytest.mark.parametrize("N, c, M", [(10**4, 2, 100), (10**6, 2, 1000), (2197, 3, 13), (2198, 3, 14), (1, 2, 2), (10, 2, 4)])
def test_message_size(N, c, M):
    assert message_size_for(N, c) == M

def test_level_plan_for_three_levels():
    top, bottom = plan_levels(2197, 3, 13, top="square_root")
    assert (top.level, top.n_items, top.epoch_length, top.cache, top.cache_capacity) == (3, 2197, 169, "cuckoo", 169)
    assert (bottom.level, bottom.n_items, bottom.epoch_length, bottom.cache) == (2, 444, 35, "memory")
    assert bottom.layout.capacity == 169

def test_level_plan_errors():
    with pytest.raises(InvalidConfig):
        plan_levels(100, 1, 100)
    with pytest.raises(InvalidConfig):
        plan_levels(100, 2, 9)
    with pytest.raises(InvalidConfig):
        plan_levels(100, 2, 10, top="btree")

def test_storage_formula():
    assert formula_storage(2500, 2) == 2550
    assert formula_storage(2197, 3) == 2535

def test_miss_intolerant_client():
    os = client()
    assert os.get("key5") == b"value5"
    os.put("key5", b"new")
    assert os.get("key5") == b"new"
    assert os.remove("key5") == b"new"
    assert os.get("key5") is None
    assert os.remove("key5") is None
    os.put("key5", b"back")
    assert os.get("key5") == b"back"
    with pytest.raises(MissIntolerance):
        os.get("key100")

def test_online_accesses_cost_two_roundtrips():
    os = client()
    os.store.reset_stats()
    os.get("key1")
    os.put("key2", b"x")
    assert os.stats().roundtrips == 4

def test_miss_tolerant_client():
    os = OsClient({"N" : 64, "top" : "cuckoo", "item_size" : 256, "seed" : 3}, items=items(48))
    assert len(os.top) == 48
    assert os.get("key3") == b"value3"
    assert os.get("missing") is None
    os.put("missing", b"found")
    assert os.get("missing") == b"found"
    assert os.remove("key3") == b"value3"
    assert os.get("key3") is None

def tolerant_client(seed=5, c=2, N=64, loaded=48, **extra):
    return OsClient({"N" : N, "c" : c, "top" : "cuckoo", "item_size" : 256, "seed" : seed, **extra},
                    items=items(loaded))

def run_ops(os, ops):
    os.store.reset_stats()
    for op, key in ops:
        if op == "put":
            os.put(key, b"x")
        else:
            getattr(os, op)(key)
    return os.store.trace()

def test_tolerant_hits_and_misses_look_alike():
    assert traces_identical(run_ops(tolerant_client(), [("get", "key1")]),
                            run_ops(tolerant_client(), [("get", "nobody")]))

@pytest.mark.parametrize("op, key", [("put", "key1"), ("put", "fresh"), ("remove", "key1"), ("remove", "nobody")])
def test_tolerant_writes_look_like_reads(op, key):
    assert traces_identical(run_ops(tolerant_client(), [("get", "key1")]),
                            run_ops(tolerant_client(), [(op, key)]))

def test_tolerant_workloads_look_alike_across_rebuilds():
    reads = [("get", f"key{i}") for i in range(8)]
    writes = [("put", "key1"), ("remove", "key2"), ("put", "fresh"), ("get", "nobody"),
              ("put", "key2"), ("remove", "nobody"), ("remove", "fresh"), ("get", "key3")]
    os = tolerant_client()
    trace = run_ops(os, reads)
    assert os.rebuilds > 0
    assert traces_identical(trace, run_ops(tolerant_client(), writes))

def replay(os, ops, seed, universe):
    """ Random get/put/remove mix checked against a dict after every step. """
    generator = np.random.default_rng(seed)
    oracle = {f"key{i}" : f"value{i}".encode() for i in range(len(os.top))}
    for _ in range(ops):
        key = f"key{int(generator.integers(0, universe))}"
        roll = generator.random()
        if roll < 0.4:
            value = generator.bytes(8)
            os.put(key, value)
            oracle[key] = value
        elif roll < 0.6:
            assert os.remove(key) == oracle.pop(key, None)
        else:
            assert os.get(key) == oracle.get(key)

def test_tolerant_client_replay_matches_dict():
    replay(tolerant_client(seed=8, N=100, loaded=50, shuffle="oracle"), 2000, seed=8, universe=110)

def test_three_level_tolerant_replay():
    replay(tolerant_client(seed=9, c=3, N=64, loaded=20, shuffle="oracle"), 100, seed=9, universe=40)

@pytest.mark.slow
def test_three_level_tolerant_replay_long():
    replay(tolerant_client(seed=10, c=3, N=64, loaded=20, shuffle="oracle"), 10**4, seed=10, universe=40)

def test_three_levels():
    os = OsClient({"N" : 216, "c" : 3, "top" : "square_root", "item_size" : 256, "seed" : 2}, items=items(216))
    assert os.message_size == 6
    assert [spec.level for spec in os.specs] == [3, 2]
    for i in range(0, 216, 9):
        assert os.get(f"key{i}") == f"value{i}".encode()
    os.put("key9", b"nine")
    assert os.get("key9") == b"nine"

def test_storage_and_memory_reports():
    os = OsClient({"N" : 400, "c" : 2, "top" : "square_root", "item_size" : 256, "seed" : 1}, items=items(400))
    storage = os.storage_report()
    assert storage["items"] == storage["data_items"] == storage["formula_items"] == 420
    assert storage["overhead_items"] == 0
    assert storage["levels"] == {2 : 420}
    assert os.memory_report()["bound"] == 2 * os.message_size

def test_seeded_clients_are_reproducible():
    traces = []
    for _ in range(2):
        os = client(seed=5)
        for i in range(30):
            os.get(f"key{(3 * i) % 100}")
        traces.append(os.store.trace())
    assert traces[0] == traces[1]

def test_configuration_errors():
    with pytest.raises(InvalidConfig):
        OsClient({"N" : 2}, items=items(3))
    with pytest.raises(InvalidConfig):
        OsClient({"N" : 10, "bogus" : 1})
    with pytest.raises(InvalidConfig):
        OsClient({"N" : 10, "top" : "tree"})
    os = client(N=16)
    with pytest.raises(PlaintextTooLarge):
        os.put("key1", b"x" * 256)

def test_serialize_and_diagram(tmp_path):
    os = build(items(64), 64, 2, cfg={"item_size" : 256, "seed" : 4})
    serialized = os.serialize(to_json=tmp_path / "client.json")
    assert serialized["message_size"] == 8
    assert (tmp_path / "client.json").exists()
    source = os.diagram().source
    assert "level 2" in source
    assert "cuckoo (capacity 64)" in source
