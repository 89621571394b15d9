""" Empirical checks of what an observer of the server can learn.

Everything here works on the server's view: the trace of operations
with obfuscated keys. The mixing tools follow one item through the
passes of a buffer shuffle. After each pass the observer knows which
group of M items every written key came from, so the best it can do is
spread its belief over a group's outputs evenly. `tracker_weights`
evaluates that belief group by group, and `path_posterior` enumerates
it key by key on small instances as a cross-check.

"""
import csv
import itertools
import math
from bisect import bisect_left, bisect_right
from collections import Counter

import numpy as np
from numba import jit
from scipy import stats

from .cache import ClientMemory
from .crypto import ItemCodec, LogicalKey, SessionRandom, generate_secret_key
from .errors import DuplicateKeyRequest, InsufficientSamples, InvalidConfig, NormalizationBroken
from .server_store import OpKind, ServerStore, namespace_range
from .shuffle import BufferShuffle, OracleShuffle, Phase, prefix, stage_items
from .util import logger

NORMALIZATION_TOLERANCE = 1e-9
MIN_SAMPLES = 1000
BRUTE_FORCE_LIMIT = 30

log = logger.getLog(f"{logger.LOG_NAME}.analysis")

@jit(nopython=True)
def n_flow_counts(src, dst, groups):
    X = np.zeros((groups, groups))
    for i in range(src.shape[0]):
        X[src[i], dst[i]] += 1.0
    return X

@jit(nopython=True)
def n_tracker_weights(flows, start):

    passes = flows.shape[0]
    G = flows.shape[1]
    P = np.zeros((passes + 1, G))
    P[0, start] = 1.0

    for i in range(passes):
        for k in range(G):
            size = 0.0
            for j in range(G):
                size += flows[i, k, j]
            if P[i, k] == 0.0 or size == 0.0:
                continue
            share = P[i, k] / size
            for j in range(G):
                P[i + 1, j] += share * flows[i, k, j]

    return P

def group_sizes(flows):
    """ Size of every group before each pass and after the last one. """
    flows = np.asarray(flows, dtype=np.float64)
    sizes = [f.sum(axis=1) for f in flows]
    sizes.append(flows[-1].sum(axis=0))
    return np.array(sizes)

def tracker_weights(flows, start=0):
    """ Observer's belief about the tracked item's group after each pass.

    Parameters
    ----------
    flows : array_like
        One (G, G) flow matrix per pass; ``flows[i][k][j]`` items moved
        from group k to group j in pass i.
    start : int
        Group that holds the tracked item before the first pass.

    Returns
    -------
    ndarray
        (passes + 1, G) matrix; row i sums to one.

    """
    flows = np.asarray(flows, dtype=np.float64)
    if flows.ndim != 3 or flows.shape[1] != flows.shape[2]:
        raise ValueError(f"Flows must have shape (passes, G, G), got {flows.shape}.")
    if flows.shape[0] == 0:
        P = np.zeros((1, flows.shape[1]))
        P[0, start] = 1.0
        return P

    P = n_tracker_weights(flows, start)
    sums = P.sum(axis=1)
    worst = np.max(np.abs(sums - 1.0))
    if worst > NORMALIZATION_TOLERANCE:
        raise NormalizationBroken(f"Weight matrix row sums deviate from 1 by {worst:.3e}.")
    return P

def per_key_weights(P, flows):
    """ Largest per-key belief after each pass (group weight over group size). """
    sizes = group_sizes(flows) if len(flows) else None
    out = []
    for i, row in enumerate(P):
        if sizes is None:
            out.append(1.0)
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            per_key = np.where(sizes[i] > 0, row / sizes[i], 0.0)
        out.append(float(per_key.max()))
    return np.array(out)

class KeyMirror(object):
    """ Sorted copy of the server's key set, rebuilt from a trace. """

    def __init__(self, keys=()):
        self.keys = sorted(keys)

    def __len__(self):
        return len(self.keys)

    def add(self, key):
        i = bisect_left(self.keys, key)
        if i == len(self.keys) or self.keys[i] != key:
            self.keys.insert(i, key)

    def discard(self, key):
        i = bisect_left(self.keys, key)
        if i < len(self.keys) and self.keys[i] == key:
            del self.keys[i]

    def pop_range(self, lo, hi):
        i = bisect_left(self.keys, lo)
        j = bisect_right(self.keys, hi)
        removed = self.keys[i:j]
        del self.keys[i:j]
        return removed

    def rank(self, key):
        """ Position of `key` among keys of its namespace, and that namespace's size. """
        lo, hi = namespace_range(key[0])
        first = bisect_left(self.keys, lo)
        last = bisect_left(self.keys, hi + b"\x00")
        return bisect_left(self.keys, key) - first, last - first

def _messages(trace):
    return itertools.groupby(trace, key=lambda event: event.message)

def shuffle_passes_from_trace(trace):
    """ Split a trace into shuffle passes as the server sees them.

    A group is a message that removes a key range and writes new keys.
    Consecutive groups writing into the same namespace form one pass.
    Each pass is a list of ``(removed_keys, written_keys)`` per group.

    """
    mirror = KeyMirror()
    passes = []
    current_dest = None

    for _, events in _messages(trace):
        removed, written = [], []
        for event in events:
            if event.op == OpKind.PUT:
                mirror.add(event.key)
                written.append(event.key)
            elif event.op == OpKind.REMOVE:
                mirror.discard(event.key)
            elif event.op == OpKind.REMOVE_RANGE:
                removed.extend(mirror.pop_range(*event.range))

        if not removed or not written:
            if written:
                current_dest = None
            continue

        dest = written[0][0]
        if dest != current_dest:
            passes.append([])
            current_dest = dest
        passes[-1].append((removed, written))

    return passes

def flow_counts(shuffle_pass, M):
    """ (G, G) flow matrix of one pass; output groups follow key order. """
    written = sorted(key for _, keys in shuffle_pass for key in keys)
    n = len(written)
    G = max(1, math.ceil(n / M), len(shuffle_pass))
    group_of = {key: rank // M for rank, key in enumerate(written)}

    src = np.array([k for k, (_, keys) in enumerate(shuffle_pass) for _ in keys], dtype=np.int64)
    dst = np.array([group_of[key] for _, keys in shuffle_pass for key in keys], dtype=np.int64)
    return n_flow_counts(src, dst, G)

def pass_flows(passes, M):
    flows = [flow_counts(p, M) for p in passes]
    G = max(f.shape[0] for f in flows)
    padded = np.zeros((len(flows), G, G))
    for i, f in enumerate(flows):
        padded[i, :f.shape[0], :f.shape[1]] = f
    return padded

def path_posterior(passes, M, start_key=None):
    """ Belief about the tracked item's final key, by enumerating every path.

    A path picks one output key per pass among the outputs of the group
    the item is in. Every path has probability equal to the product of
    1/group size along it. Only meant for small instances.

    """
    n = sum(len(keys) for _, keys in passes[0])
    if n > BRUTE_FORCE_LIMIT:
        raise InvalidConfig(f"Path enumeration is limited to {BRUTE_FORCE_LIMIT} items, got {n}.")

    # (pass, key) -> keys written by the group that reads it
    reader = {}
    for i, p in enumerate(passes):
        for removed, written in p:
            for key in removed:
                reader[(i, key)] = written
    first = passes[0][0][0]
    start_key = first[0] if start_key is None else start_key

    posterior = Counter()
    frontier = [(start_key, 1.0)]
    for i in range(len(passes)):
        # expand every path by one pass
        frontier = [(nxt, weight / len(reader[(i, key)]))
                    for key, weight in frontier
                    for nxt in reader[(i, key)]]
    for key, weight in frontier:
        posterior[key] += weight

    final = sorted(key for _, keys in passes[-1] for key in keys)
    groups = np.zeros(max(1, math.ceil(len(final) / M)))
    for rank, key in enumerate(final):
        groups[rank // M] += posterior[key]
    return dict(posterior), groups

def simulated_flows(n, M, passes, generator):
    """ Flows of `passes` buffer shuffle passes without touching a server.

    Fresh random keys put the written items in uniformly random key
    order, so every pass is a random permutation read back M at a time.

    """
    G = math.ceil(n / M)
    src = np.arange(n, dtype=np.int64) // M
    flows = np.zeros((passes, G, G))
    for p in range(passes):
        dst = generator.permutation(n).astype(np.int64) // M
        flows[p] = n_flow_counts(src, dst, G)
    return flows

def store_flows(n, M, passes, rng, item_size=128):
    """ Run a real buffer shuffle on a fresh store and read its flows back. """
    store = ServerStore(M, item_size)
    codec = ItemCodec(generate_secret_key(rng), item_size, rng)
    source = prefix(1, Phase.STAGING)
    stage_items(store, [(LogicalKey.dummy(j), b"") for j in range(1, n + 1)], source, codec, rng)
    shuffler = BufferShuffle(passes=passes, rng=rng, meter=ClientMemory())
    shuffler.shuffle(store, namespace_range(source), n, codec)
    found = shuffle_passes_from_trace(store.trace())
    if len(found) != passes:
        raise InvalidConfig(f"Expected {passes} passes in the shuffle trace, found {len(found)}.")
    return pass_flows(found, M)

def mixing_experiment(n, M, b, trials=100, rng=None, epsilon=0.1, engine="simulated", item_size=128):
    """ Track one item through `trials` independent b-pass buffer shuffles.

    Returns a summary with the per-trial maximum per-key weight after
    the last pass, its quantiles, and the fraction of trials at or below
    ``(1 + epsilon) / n``. ``per_pass`` holds the maximum weight after
    every pass of every trial.

    """
    if n < 2 or M < 2:
        raise InvalidConfig(f"Mixing needs n >= 2 and M >= 2, got n={n}, M={M}.")
    if engine not in ("simulated", "store"):
        raise InvalidConfig(f"Unknown mixing engine '{engine}'. Must be one of ['simulated', 'store']")
    rng = rng if rng is not None else SessionRandom()

    per_pass = np.zeros((trials, b + 1))
    for trial in range(trials):
        stream = rng.spawn(trial)
        if engine == "simulated":
            flows = simulated_flows(n, M, b, stream.generator)
        else:
            flows = store_flows(n, M, b, stream, item_size)

        if b == 0:
            per_pass[trial, 0] = 1.0 / min(M, n)
            continue
        P = tracker_weights(flows)
        per_pass[trial] = per_key_weights(P, flows)

    max_weight = per_pass[:, -1]
    threshold = (1.0 + epsilon) / n
    summary = {"n" : n, "M" : M, "passes" : b, "trials" : trials, "engine" : engine,
               "max_weight" : max_weight,
               "normalized" : max_weight * n,
               "quantiles" : {q : float(np.quantile(max_weight, q)) for q in (0.05, 0.5, 0.95)},
               "threshold" : threshold,
               "fraction_within" : float(np.mean(max_weight <= threshold)),
               "per_pass" : per_pass}
    log.debug(f"mixing n={n} M={M} b={b}: median {summary['quantiles'][0.5] * n:.3f}/n")
    return summary

def mixing_sweep(n, Ms, bs, trials=100, rng=None, filename=None, engine="simulated"):
    """ Run `mixing_experiment` over every (M, b) pair, one CSV row per pass. """
    rng = rng if rng is not None else SessionRandom()
    rows = []
    for M in Ms:
        for b in bs:
            summary = mixing_experiment(n, M, b, trials, rng, engine=engine)
            for trial, weights in enumerate(summary["per_pass"]):
                for p, weight in enumerate(weights):
                    rows.append({"n" : n, "M" : M, "passes" : b, "trial" : trial, "pass" : p,
                                 "max_weight" : float(weight)})

    if filename:
        with open(filename, "w", newline="") as fp:
            writer = csv.DictWriter(fp, fieldnames=["n", "M", "passes", "trial", "pass", "max_weight"])
            writer.writeheader()
            writer.writerows(rows)
        log.info(f"wrote {len(rows)} mixing rows to file: '{filename}'")
    return rows

def sweep_schedules(n, depths=(2, 3, 4)):
    """ Message sizes M = n**(1/j) for the sweep. """
    return sorted({max(2, round(n ** (1.0 / j))) for j in depths}, reverse=True)

def trace_shape(trace):
    """ Observable shape of a trace: (message offset, op kind, item count) per event. """
    if not trace:
        return ()
    base = trace[0].message
    return tuple((event.message - base, event.op.value, event.items) for event in trace)

def traces_identical(a, b):
    return trace_shape(a) == trace_shape(b)

def request_positions(trace, epochs=None, strict=True, jitter_seed=0):
    """ Relative rank of every requested key among its namespace's keys.

    Requests are the trace's gets. Within an epoch no key may be
    requested twice; an epoch of a namespace ends when new keys are
    written into it, or at the boundaries given in `epochs` as
    ``(message, namespace)`` pairs.

    """
    mirror = KeyMirror()
    generator = np.random.default_rng(jitter_seed)
    boundaries = sorted(epochs or [])
    next_boundary = 0
    requested = {}
    positions = []
    duplicates = 0

    for message, events in _messages(trace):
        while next_boundary < len(boundaries) and boundaries[next_boundary][0] <= message:
            requested.pop(boundaries[next_boundary][1], None)
            next_boundary += 1
        for event in events:
            if event.op == OpKind.GET:
                ns = event.key[0]
                seen = requested.setdefault(ns, set())
                if event.key in seen:
                    duplicates += 1
                    if strict:
                        raise DuplicateKeyRequest(f"Key {event.key.hex()} requested twice in one epoch (seq {event.seq}).")
                seen.add(event.key)
                rank, size = mirror.rank(event.key)
                if size:
                    positions.append((rank + generator.random()) / size)
            elif event.op == OpKind.PUT:
                if epochs is None:
                    requested.pop(event.key[0], None)
                mirror.add(event.key)
            elif event.op == OpKind.REMOVE:
                mirror.discard(event.key)
            elif event.op == OpKind.REMOVE_RANGE:
                mirror.pop_range(*event.range)

    return np.array(positions), duplicates

def key_uniformity_test(trace, epochs=None, strict=True, min_samples=MIN_SAMPLES):
    """ KS p-value of requested-key ranks against the uniform distribution. """
    positions, duplicates = request_positions(trace, epochs, strict)
    if len(positions) < min_samples:
        raise InsufficientSamples(f"Uniformity test needs {min_samples} requests, trace has {len(positions)}.")
    result = stats.kstest(positions, "uniform")
    log.debug(f"key uniformity over {len(positions)} requests: p={result.pvalue:.4f}, {duplicates} repeats")
    return float(result.pvalue)

def epoch_boundaries(annotations):
    return [(a.message, a.info["namespace"]) for a in annotations if a.label == "epoch"]

def shuffled_order(n, kind="oracle", passes=1, rng=None, item_size=128):
    """ Payload order left by one shuffle of n items on a tiny store. """
    rng = rng if rng is not None else SessionRandom()
    store = ServerStore(max(2, n), item_size)
    codec = ItemCodec(generate_secret_key(rng), item_size, rng)
    source = prefix(1, Phase.STAGING)
    stage_items(store, [(LogicalKey.dummy(j), b"") for j in range(1, n + 1)], source, codec, rng)
    if kind == "oracle":
        shuffler = OracleShuffle(rng=rng)
    else:
        shuffler = BufferShuffle(passes=passes, rng=rng)
    final = shuffler.shuffle(store, namespace_range(source), n, codec, (prefix(1, Phase.SHUFFLE_A), prefix(1, Phase.SHUFFLE_B)))
    items = store.get_range(final.lo, final.hi, n)
    return tuple(codec.open(value)[0].index - 1 for _, value in items)

def permutation_uniformity(n=6, trials=10**5, rng=None, shuffle=None):
    """ Chi-square p-value of the permutations produced by `shuffle`.

    `shuffle(items)` returns a permutation of ``range(n)``; it defaults
    to the session Fisher-Yates shuffle.

    """
    rng = rng if rng is not None else SessionRandom()
    shuffle = shuffle if shuffle is not None else (lambda items: rng.shuffle(list(items)))
    perms = {p : i for i, p in enumerate(itertools.permutations(range(n)))}
    counts = np.zeros(len(perms))
    for _ in range(trials):
        counts[perms[tuple(shuffle(range(n)))]] += 1
    return float(stats.chisquare(counts).pvalue)
