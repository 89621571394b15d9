""" Desk-scale acceptance checklist run by ``pyoblivious verify``.

Every check builds what it needs, measures it and compares against a
closed form or a frozen threshold. Large-N figures are checked through
the closed-form costs, which are first matched exactly against runs at
desk scale.

"""
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import (key_uniformity_test, mixing_experiment, permutation_uniformity, request_positions,
                       shuffled_order, traces_identical)
from .crypto import SessionRandom
from .cuckoo import CuckooLayout, CuckooTable
from .pricing import PricingModel
from .recursive import OsClient, formula_storage
from .square_root import access_cost
from .util import logger
from .workload import run_workload

log = logger.getLog(f"{logger.LOG_NAME}.acceptance")

# frozen from calibration runs at n=4096, M=16
MIXING_THRESHOLDS = {4 : 1.3, 5 : 1.1, 6 : 1.1}
MIXING_FRACTION = 0.95

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

def _workload(N, c, accesses, seed, **extra):
    spec = {"N" : N, "c" : c, "b" : 4, "item_size" : 1024, "seed" : seed, "accesses" : accesses,
            "top" : "square_root", "write_fraction" : 0.5}
    spec.update(extra)
    return run_workload(spec)

def check_online_c2(seed, quick):
    N = 2500
    report = _workload(N, 2, 2 * math.ceil(N / 50), seed, item_size=128)
    ok = report["minimum_roundtrips"] == 2 and report["online_roundtrips"] == 2
    return CheckResult("online roundtrips, c=2", ok,
                       {"minimum" : report["minimum_roundtrips"], "online" : report["online_roundtrips"]})

def check_amortized_c2(seed, quick):
    N, M = 2500, 50
    D = math.ceil(N / M)
    report = _workload(N, 2, 2 * D, seed, item_size=128)
    model = access_cost(N, M)
    small, large = access_cost(10**4, 100), access_cost(10**6, 1000)
    measured_ok = math.isclose(report["amortized_roundtrips"], model["amortized_roundtrips"])
    within = abs(small["amortized_roundtrips"] - 13) <= 0.2 * 13
    flat = abs(large["amortized_roundtrips"] - small["amortized_roundtrips"]) < 0.1 * small["amortized_roundtrips"]
    return CheckResult("amortized roundtrips, c=2", measured_ok and within and flat,
                       {"measured" : report["amortized_roundtrips"], "model" : model["amortized_roundtrips"],
                        "N=1e4" : small["amortized_roundtrips"], "N=1e6" : large["amortized_roundtrips"]})

def check_items_c2(seed, quick):
    N, M = 2500, 50
    report = _workload(N, 2, 2 * math.ceil(N / M), seed, item_size=128)
    model = access_cost(N, M)
    small, large = access_cost(10**4, 100), access_cost(10**6, 1000)
    ok = (math.isclose(report["amortized_items"], model["amortized_items"])
          and abs(small["amortized_items"] - 1.1e3) <= 0.25 * 1.1e3
          and abs(large["amortized_items"] - 1.1e4) <= 0.25 * 1.1e4)
    return CheckResult("items per access, c=2", ok,
                       {"measured" : report["amortized_items"], "model" : model["amortized_items"],
                        "N=1e4" : small["amortized_items"], "N=1e6" : large["amortized_items"]})

def check_c3(seed, quick):
    N = 13 ** 3
    report = _workload(N, 3, 40 if quick else 200, seed, item_size=256)
    ok = abs(report["minimum_roundtrips"] - 7) <= 1
    return CheckResult("online roundtrips, c=3", ok,
                       {"minimum" : report["minimum_roundtrips"], "amortized" : report["amortized_roundtrips"]})

def check_storage(seed, quick):
    detail = {}
    ok = True
    for N, c in ((2500, 2), (13 ** 3, 3)):
        client = OsClient({"N" : N, "c" : c, "top" : "square_root", "item_size" : 256, "seed" : seed},
                          items=[(f"key{i}", b"v") for i in range(N)])
        storage = client.storage_report()
        expected = formula_storage(N, c)
        detail[f"c={c}"] = {"data_items" : storage["data_items"], "formula" : expected,
                            "overhead" : storage["overhead_items"], "items" : storage["items"]}
        ok = ok and storage["data_items"] == expected
        if c == 2:
            ok = ok and storage["items"] == expected
    return CheckResult("server storage", ok, detail)

def check_cost(seed, quick):
    pricing = PricingModel.load()
    N, M = 2500, 50
    report = _workload(N, 2, 2 * math.ceil(N / M), seed)
    model = access_cost(N, M)
    per_access = sum(model["requests"][kind] * pricing.price(kind) for kind in ("get", "put", "delete"))
    measured_ok = math.isclose(report["cost"], per_access * report["accesses"], rel_tol=1e-9)

    table = access_cost(10**4, 100)
    full_run = 10**4 * sum(table["requests"][kind] * pricing.price(kind) for kind in ("get", "put", "delete"))
    units_ok = math.isclose(1000 * pricing.price("put"), 0.01) and math.isclose(10**4 * pricing.price("get"), 0.01)
    time = report["time"]
    ok = (measured_ok and units_ok and abs(full_run - 55) <= 0.15 * 55
          and time is not None and time["min_ms"] == 67.0)
    return CheckResult("cost and latency model", ok,
                       {"run_cost" : report["cost"], "full_run_N=1e4" : full_run,
                        "min_ms" : time and time["min_ms"], "amortized_ms" : time and time["amortized_ms"]})

def check_mixing(seed, quick):
    rng = SessionRandom(seed)
    trials = 40 if quick else 100
    detail = {}
    ok = True
    for b, factor in MIXING_THRESHOLDS.items():
        summary = mixing_experiment(4096, 16, b, trials, rng, epsilon=factor - 1)
        detail[f"b={b}"] = summary["fraction_within"]
        ok = ok and summary["fraction_within"] >= MIXING_FRACTION
    control = mixing_experiment(4096, 16, 1, trials, rng, epsilon=0.1)
    detail["b=1"] = control["fraction_within"]
    ok = ok and control["fraction_within"] < 0.05
    return CheckResult("buffer shuffle mixing", ok, detail)

def check_permutations(seed, quick):
    rng = SessionRandom(seed)
    p_memory = permutation_uniformity(6, 2 * 10**4 if quick else 10**5, rng)
    p_store = permutation_uniformity(3, 600 if quick else 3000, rng,
                                     shuffle=lambda items: shuffled_order(len(items), "buffer", rng=rng))
    return CheckResult("shuffle uniformity", p_memory > 0.01 and p_store > 0.01,
                       {"fisher_yates_p" : p_memory, "store_buffer_p" : p_store})

def _access_trace(N, top, requests, seed):
    client = OsClient({"N" : N, "c" : 2, "top" : top, "item_size" : 128, "seed" : seed},
                      items=[(f"key{i}", b"value") for i in range(N)])
    client.store.reset_stats()
    for op, key in requests:
        if op == "put":
            client.put(key, b"new")
        else:
            getattr(client, op)(key)
    return client.store.trace()

def check_traces(seed, quick):
    N = 400
    generator = np.random.default_rng(seed)
    length = 300
    first = [("get", f"key{i}") for i in generator.integers(0, N, length)]
    second = [("put" if i % 2 else "get", f"key{(i * 7) % N}") for i in range(length)]
    intolerant = traces_identical(_access_trace(N, "square_root", first, seed),
                                  _access_trace(N, "square_root", second, seed + 1))

    hits = [("get", f"key{i}") for i in range(length)]
    # removes, re-inserts, replacements and misses
    mixed = [[("remove", f"key{i}"), ("put", f"key{i - 1}"), ("put", f"key{i}"), ("get", f"absent{i}")][i % 4]
             for i in range(length)]
    tolerant = traces_identical(_access_trace(N, "cuckoo", hits, seed),
                                _access_trace(N, "cuckoo", mixed, seed))

    report_N = 2500
    accesses = 2000 if quick else 10**4
    client = OsClient({"N" : report_N, "c" : 2, "top" : "square_root", "item_size" : 128, "seed" : seed},
                      items=[(f"key{i}", b"v") for i in range(report_N)])
    client.store.reset_stats()
    for i in generator.integers(0, report_N, accesses):
        client.get(f"key{int(i)}")
    trace = client.store.trace()
    _, duplicates = request_positions(trace, strict=False)
    p_value = key_uniformity_test(trace)
    ok = intolerant and tolerant and duplicates == 0 and p_value > 0.01
    return CheckResult("trace obliviousness", ok,
                       {"shapes_intolerant" : intolerant, "shapes_tolerant" : tolerant,
                        "repeated_requests" : duplicates, "ks_p" : p_value})

def _replay(target, ops, generator, universe):
    """ Random get/put/remove mix against a dict, returns the number of disagreements. """
    raw = isinstance(target, CuckooTable)
    oracle = {}
    mismatches = 0
    for _ in range(ops):
        name = f"key{int(generator.integers(0, universe))}"
        key = name.encode() if raw else name
        roll = generator.random()
        if roll < 0.4:
            value = generator.bytes(8)
            target.put(key, value)
            oracle[name] = value
        elif roll < 0.6:
            mismatches += target.remove(key) != oracle.pop(name, None)
        else:
            mismatches += target.get(key) != oracle.get(name)
    return mismatches

def check_oracle(seed, quick):
    generator = np.random.default_rng(seed)
    detail = {}
    table = CuckooTable(CuckooLayout(512), rng=SessionRandom(seed))
    detail["cuckoo"] = _replay(table, 2000 if quick else 10**4, generator, 600)

    for c, N, ops in ((2, 400, 600 if quick else 10**4), (3, 64, 100 if quick else 10**4)):
        client = OsClient({"N" : N, "c" : c, "item_size" : 256, "seed" : seed, "shuffle" : "buffer" if c == 2 else "oracle"})
        detail[f"c={c}"] = _replay(client, ops, generator, N)
    return CheckResult("oracle equivalence", all(v == 0 for v in detail.values()), detail)

CHECKS = [check_online_c2, check_amortized_c2, check_items_c2, check_c3, check_storage, check_cost,
          check_mixing, check_permutations, check_traces, check_oracle]

def run_checks(seed=7, quick=True, names=None):
    results = []
    for check in CHECKS:
        if names and check.__name__ not in names:
            continue
        result = check(seed, quick)
        log.info(f"{'PASS' if result.passed else 'FAIL'} {result.name}: {result.detail}")
        results.append(result)
    return results
