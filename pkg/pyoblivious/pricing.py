""" Request pricing and latency model for an object-store backend.

Server operations are expanded into the requests a plain object store
would need: a range read of m items becomes m concurrent gets and a
range delete becomes one delete per removed item. Cost is a sum of
per-request prices. Latency is estimated per message: requests of the
same kind run `parallel_width` at a time and different kinds overlap,
so a message takes as long as its slowest kind.

"""
import itertools
import json
import math
import pathlib
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field

from .errors import InvalidConfig, MissingRttEntry, UnknownOpKind
from .util import logger

REQUEST_KINDS = ("get", "put", "copy", "delete")

DEFAULT_PRICING = pathlib.Path(__file__).parent.absolute() / "data" / "s3_pricing.json"

log = logger.getLog(f"{logger.LOG_NAME}.pricing")

@dataclass
class PricingModel:
    prices: dict
    rtt_ms: dict
    currency: str = "USD"
    source: str = field(default="", compare=False)

    def __post_init__(self):
        for kind, price in self.prices.items():
            if price < 0:
                raise InvalidConfig(f"Price of '{kind}' must not be negative, got {price}.")
        for kind, row in self.rtt_ms.items():
            for size, ms in row.items():
                if ms <= 0:
                    raise InvalidConfig(f"RTT of '{kind}' at {size} bytes must be positive, got {ms}.")

    @classmethod
    def load(cls, filename=None):
        filename = filename if filename is not None else DEFAULT_PRICING
        try:
            with open(filename) as fp:
                table = json.load(fp)
        except (OSError, json.JSONDecodeError) as err:
            raise InvalidConfig(f"Could not read pricing file '{filename}': {err}") from None

        try:
            prices = {kind : entry["price"] / entry["per"] for kind, entry in table["prices"].items()}
            rtt_ms = {kind : {int(size) : float(ms) for size, ms in row.items()}
                      for kind, row in table["rtt_ms"].items()}
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as err:
            raise InvalidConfig(f"Malformed pricing file '{filename}': {err!r}") from None

        return cls(prices, rtt_ms, table.get("currency", "USD"), str(filename))

    def price(self, kind):
        return self.prices.get(kind, 0.0)

    def rtt(self, kind, item_size):
        try:
            return self.rtt_ms[kind][item_size]
        except KeyError:
            known = sorted(self.rtt_ms.get(kind, {}))
            raise MissingRttEntry(f"No RTT for '{kind}' at item size {item_size}. Known sizes: {known}") from None

def _op_name(event):
    return getattr(event.op, "value", event.op)

def expand_event(event):
    """ (request kind, count) for one trace event. """
    op = _op_name(event)
    if op == "get":
        return "get", 1
    if op == "put":
        return "put", 1
    if op == "remove":
        return "delete", 1
    if op == "getRange":
        return "get", event.items
    if op == "removeRange":
        return "delete", event.affected
    raise UnknownOpKind(f"Cost model has no mapping for operation '{op}'.")

def request_counts(trace):
    counts = Counter({kind : 0 for kind in REQUEST_KINDS})
    for event in trace:
        kind, n = expand_event(event)
        counts[kind] += n
    return counts

def estimate_cost(trace, pricing=None, item_size=None):
    """ Total price of the requests behind `trace`.

    Prices do not depend on the item size; `item_size` is accepted so
    cost and time estimates share a call signature.

    """
    pricing = pricing if pricing is not None else PricingModel.load()
    counts = request_counts(trace)
    return sum(n * pricing.price(kind) for kind, n in counts.items())

def message_latency(events, pricing, item_size, parallel_width=None):
    counts = Counter()
    for event in events:
        kind, n = expand_event(event)
        counts[kind] += n

    latency = 0.0
    for kind, n in counts.items():
        slots = 1 if not parallel_width else max(1, math.ceil(n / parallel_width))
        latency = max(latency, slots * pricing.rtt(kind, item_size))
    return latency

def message_latencies(trace, pricing, item_size, parallel_width=None):
    """ {message number: latency in ms} in trace order. """
    latencies = {}
    messages = {}
    for event in trace:
        messages.setdefault(event.message, []).append(event)
    for message, events in messages.items():
        latencies[message] = message_latency(events, pricing, item_size, parallel_width)
    return latencies

def estimate_time(trace, pricing=None, item_size=1024, parallel_width=None, annotations=None):
    """ Latency estimate of a trace.

    Parameters
    ----------
    trace : list of TraceEvent
    pricing : PricingModel, optional
        Defaults to the bundled table.
    item_size : int
        Selects the RTT column.
    parallel_width : int, optional
        Concurrent requests of one kind per slot. None lets every
        request of a message run at once, which for batched messages
        equals a width of M.
    annotations : list of Annotation, optional
        With ``access`` markers the trace is cut into accesses and the
        report gives the fastest access, the mean of accesses without a
        rebuild, and the mean over all accesses.

    """
    pricing = pricing if pricing is not None else PricingModel.load()
    latencies = message_latencies(trace, pricing, item_size, parallel_width)
    report = {"total_ms" : float(sum(latencies.values())), "messages" : len(latencies),
              "accesses" : 0, "min_ms" : 0.0, "online_ms" : 0.0, "amortized_ms" : 0.0}

    starts = sorted(a.message for a in (annotations or []) if a.label == "access")
    if not starts:
        return report

    rebuilds = sorted(a.message for a in annotations if a.label == "rebuild")
    order = sorted(latencies)
    cumulative = list(itertools.accumulate((latencies[m] for m in order), initial=0.0))
    bounds = starts + [math.inf]
    segments = []
    for lo, hi in zip(bounds, bounds[1:]):
        spent = cumulative[bisect_left(order, hi)] - cumulative[bisect_left(order, lo)]
        rebuilt = bisect_left(rebuilds, hi) > bisect_left(rebuilds, lo)
        segments.append((spent, rebuilt))

    online = [spent for spent, rebuilt in segments if not rebuilt]
    report.update({"accesses" : len(segments),
                   "min_ms" : float(min(spent for spent, _ in segments)),
                   "online_ms" : float(sum(online) / len(online)) if online else 0.0,
                   "amortized_ms" : float(sum(spent for spent, _ in segments) / len(segments))})
    log.debug(f"time estimate over {len(segments)} accesses: amortized {report['amortized_ms']:.1f} ms")
    return report
