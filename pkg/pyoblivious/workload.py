""" Benchmark replay: build a client, run a request stream, report I/O. """
import os

import numpy as np

from .config import client_parameters, workload_parameters
from .crypto import SessionRandom
from .errors import InvalidConfig, MissingRttEntry
from .parameter_list import ParameterList
from .pricing import PricingModel, estimate_cost, estimate_time
from .recursive import OsClient
from .util import logger, jsonencoder

WORKLOAD_STREAM = 1

log = logger.getLog(f"{logger.LOG_NAME}.workload")

def key_name(i):
    return f"key{i:08d}"

def initial_items(N, value_size, generator):
    return [(key_name(i), generator.bytes(value_size)) for i in range(N)]

def read_script(filename):
    """ Requests from a text file, one ``op key [hex value]`` per line. """
    requests = []
    try:
        with open(filename) as fp:
            for number, line in enumerate(fp, 1):
                fields = line.split()
                if not fields or fields[0].startswith("#"):
                    continue
                op = fields[0].lower()
                if op not in ("get", "put", "remove") or len(fields) < 2:
                    raise InvalidConfig(f"Line {number} of '{filename}' is not 'get|put|remove key [value]': {line.strip()!r}")
                value = bytes.fromhex(fields[2]) if op == "put" and len(fields) > 2 else b""
                requests.append((op, fields[1], value))
    except OSError as err:
        raise InvalidConfig(f"Could not read workload script '{filename}': {err}") from None
    return requests

def generate_requests(spec, generator):
    """ Request list (op, key, value) for the workload in `spec`. """
    p = spec
    N = p.N.value
    accesses = p.accesses.value
    distribution = p.distribution.value

    if distribution == "scripted":
        if p.script.value is None:
            raise InvalidConfig("A scripted workload needs 'script' to name a file.")
        requests = read_script(p.script.value)[:accesses]
        if p.top.value == "square_root":
            universe = {key_name(i) for i in range(N)}
            outside = [key for _, key, _ in requests if key not in universe]
            if outside:
                raise InvalidConfig(f"Scripted keys {outside[:3]} are outside the loaded set of a miss-intolerant client.")
        return requests

    if distribution == "uniform":
        indices = generator.integers(0, N, size=accesses)
    else:
        # popularity ranks land on a fixed random permutation of the keys
        ranks = (generator.zipf(p.zipf_a.value, size=accesses) - 1) % N
        indices = generator.permutation(N)[ranks]

    writes = generator.random(accesses) < p.write_fraction.value
    requests = []
    for index, write in zip(indices, writes):
        if write:
            requests.append(("put", key_name(int(index)), generator.bytes(p.value_size.value)))
        else:
            requests.append(("get", key_name(int(index)), b""))
    return requests

def as_spec(spec):
    if isinstance(spec, ParameterList):
        return spec
    parameters = workload_parameters()
    parameters.update(dict(spec or {}))
    return parameters

def run_workload(spec, out=None, pricing=None, verbose=False):
    """ Build a client for `spec`, replay its requests and report.

    The trace window starts after the initial build, so counts and
    estimates cover the accesses only. With `out`, the trace, the server
    stats and the report are written there as ``trace.jsonl``,
    ``stats.json`` and ``report.json``.

    """
    spec = as_spec(spec)
    values = spec.values()
    config = {name : values[name] for name, _ in client_parameters()}

    generator = SessionRandom(values["seed"]).spawn(WORKLOAD_STREAM).generator
    items = initial_items(values["N"], values["value_size"], generator)
    requests = generate_requests(spec, generator)

    client = OsClient(config, items=items, verbose=verbose)
    store = client.store
    store.reset_stats()

    oracle = dict(items)
    mismatches = 0
    per_access = []
    online = []
    for op, key, value in requests:
        before = store.stats().roundtrips
        rebuilds = client.rebuilds
        if op == "get":
            result = client.get(key)
            mismatches += result != oracle.get(key)
        elif op == "put":
            client.put(key, value)
            oracle[key] = value
        else:
            result = client.remove(key)
            mismatches += result != oracle.pop(key, None)
        spent = store.stats().roundtrips - before
        per_access.append(spent)
        if client.rebuilds == rebuilds:
            online.append(spent)

    stats = store.stats()
    accesses = len(requests)
    pricing = pricing if pricing is not None else PricingModel.load()
    trace = store.trace()
    cost = estimate_cost(trace, pricing)

    report = {"parameters" : values,
              "message_size" : client.message_size,
              "accesses" : accesses,
              "minimum_roundtrips" : int(min(per_access)) if per_access else 0,
              "online_roundtrips" : float(np.mean(online)) if online else 0.0,
              "amortized_roundtrips" : stats.roundtrips / accesses if accesses else 0.0,
              "amortized_items" : stats.items_transferred / accesses if accesses else 0.0,
              "rebuilds" : client.rebuilds,
              "oracle_mismatches" : int(mismatches),
              "io" : stats.as_dict(),
              "storage" : client.storage_report(),
              "memory" : client.memory_report(),
              "cost" : cost,
              "projected_cost" : cost * values["N"] / accesses if accesses else 0.0,
              "currency" : pricing.currency}

    try:
        report["time"] = estimate_time(trace, pricing, values["item_size"], client.message_size, store.annotations)
    except MissingRttEntry as err:
        log.warning(f"no time estimate: {err}")
        report["time"] = None

    if out:
        os.makedirs(out, exist_ok=True)
        store.export_trace(os.path.join(out, "trace.jsonl"))
        store.export_stats(os.path.join(out, "stats.json"), accesses=accesses)
        with open(os.path.join(out, "report.json"), "w") as fp:
            jsonencoder.dump(report, fp, indent=2)
        log.info(f"wrote workload report to file: '{os.path.join(out, 'report.json')}'")

    return report
