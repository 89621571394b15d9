import json
from types import SimpleNamespace

import pytest

from pyoblivious.errors import InvalidConfig, MissingRttEntry, UnknownOpKind
from pyoblivious.pricing import (PricingModel, estimate_cost, estimate_time, expand_event, message_latency,
                                 request_counts)
from pyoblivious.server_store import Annotation, OpKind, TraceEvent

from conftest import skey

@pytest.fixture
def pricing():
    return PricingModel.load()

@pytest.fixture
def trace():
    lo, hi = skey(0), skey(99)
    return [TraceEvent(0, 0, OpKind.GET, skey(1), items=1),
            TraceEvent(1, 1, OpKind.REMOVE, skey(1), affected=1),
            TraceEvent(2, 2, OpKind.GET, skey(2), items=1),
            TraceEvent(3, 3, OpKind.REMOVE, skey(2), affected=1),
            TraceEvent(4, 4, OpKind.GET_RANGE, range=(lo, hi), items=10),
            TraceEvent(5, 5, OpKind.REMOVE_RANGE, range=(lo, hi), affected=10),
            TraceEvent(6, 5, OpKind.PUT, skey(3), items=1, affected=1),
            TraceEvent(7, 5, OpKind.PUT, skey(4), items=1, affected=1),
            TraceEvent(8, 5, OpKind.PUT, skey(5), items=1, affected=1)]

@pytest.fixture
def annotations():
    return [Annotation(0, 0, "access", {"op" : "get"}),
            Annotation(2, 2, "access", {"op" : "get"}),
            Annotation(4, 4, "rebuild", {"level" : 2})]

def test_bundled_prices(pricing):
    assert pricing.price("get") == pytest.approx(0.01 / 10000)
    assert pricing.price("put") == pytest.approx(0.01 / 1000)
    assert pricing.price("delete") == 0.0
    assert pricing.rtt("get", 1024) == 36
    assert pricing.currency == "USD"

def test_request_mapping(trace):
    assert expand_event(trace[4]) == ("get", 10)
    assert expand_event(trace[5]) == ("delete", 10)
    assert request_counts(trace) == {"get" : 12, "put" : 3, "copy" : 0, "delete" : 12}
    with pytest.raises(UnknownOpKind):
        expand_event(SimpleNamespace(op="scan"))

def test_cost(trace, pricing):
    assert estimate_cost(trace, pricing) == pytest.approx(12 * 1e-6 + 3 * 1e-5)

def test_message_latency(trace, pricing):
    assert message_latency(trace[:1], pricing, 1024) == 36
    assert message_latency(trace[5:], pricing, 1024) == 65
    assert message_latency(trace[5:], pricing, 1024, parallel_width=4) == 3 * 31
    assert message_latency(trace[4:5], pricing, 65536, parallel_width=4) == 3 * 56
    with pytest.raises(MissingRttEntry):
        message_latency(trace[:1], pricing, 2048)

def test_time_per_access(trace, pricing, annotations):
    report = estimate_time(trace, pricing, 1024, annotations=annotations)
    assert report["messages"] == 6
    assert report["total_ms"] == 235
    assert report["accesses"] == 2
    assert report["min_ms"] == 67
    assert report["online_ms"] == 67
    assert report["amortized_ms"] == pytest.approx(117.5)

    narrow = estimate_time(trace, pricing, 1024, parallel_width=4, annotations=annotations)
    assert narrow["amortized_ms"] == pytest.approx((67 + 36 + 31 + 108 + 93) / 2)

    bare = estimate_time(trace, pricing, 1024)
    assert bare["accesses"] == 0
    assert bare["total_ms"] == 235

def test_bad_pricing_files(tmp_path):
    path = tmp_path / "pricing.json"
    path.write_text(json.dumps({"prices" : {"get" : {"price" : 1}}, "rtt_ms" : {}}))
    with pytest.raises(InvalidConfig):
        PricingModel.load(path)
    with pytest.raises(InvalidConfig):
        PricingModel.load(tmp_path / "missing.json")
    with pytest.raises(InvalidConfig):
        PricingModel({"get" : -1.0}, {})
    with pytest.raises(InvalidConfig):
        PricingModel({}, {"get" : {1024 : 0}})

def test_cost_is_additive(trace, pricing):
    assert estimate_cost([], pricing) == 0
    assert estimate_time([], pricing)["total_ms"] == 0
    assert estimate_cost(trace, pricing) == pytest.approx(estimate_cost(trace[:4], pricing) + estimate_cost(trace[4:], pricing))

@pytest.mark.parametrize("count, op", [(1000, OpKind.PUT), (10000, OpKind.GET)])
def test_unit_prices(pricing, count, op):
    events = [TraceEvent(i, i, op, skey(i), items=1) for i in range(count)]
    assert estimate_cost(events, pricing) == pytest.approx(0.01)
