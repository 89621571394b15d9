""" Miss-intolerant square-root layer.

The server holds the layer's n real items plus D dummies under keys
``obfuscate_key(r, k)``. Every access costs one message of gets and one
message of removes, each for one key per requested item: the real key
on a cache miss, the next unused dummy on a hit. Whatever comes back
goes into the cache, which is either client memory or a smaller
oblivious dictionary. After D accesses the cache is drained to the
server and the whole set is shuffled and re-keyed under a fresh nonce.

"""
import math
from dataclasses import dataclass
from typing import Optional

from .cache import ClientMemory
from .crypto import KeySpace, LogicalKey, fresh_nonce, obfuscate_key
from .errors import AuthFailure, CacheOverflow, CountMismatch, InvalidConfig, KeyCollision, MissIntolerance
from .server_store import Get, Remove, namespace_range, namespace_span
from .shuffle import BufferShuffle, Phase, prefix, move_pass, rekey_pass, stage_items, drain_items
from .util import logger

MAX_NONCE_DRAWS = 5

log = logger.getLog(f"{logger.LOG_NAME}.square_root")

def rebuild_cost(n, D, M, passes=4):
    """ Server work of one rebuild with a buffer shuffle and a memory cache.

    Staging the D returned items takes ⌈D/M⌉ messages, then `passes`
    shuffle passes and the re-keying pass each read, remove and rewrite
    all n + D items in groups of M.

    """
    groups = math.ceil((n + D) / M)
    moves = (passes + 1) * (n + D)
    return {"roundtrips" : math.ceil(D / M) + 2 * (passes + 1) * groups,
            "items" : D + 2 * moves,
            "requests" : {"get" : moves, "put" : D + moves, "delete" : moves}}

def access_cost(N, M, passes=4):
    """ Per-access roundtrips and items of a layer over N items with a memory cache. """
    D = max(1, math.ceil(N / M))
    rebuild = rebuild_cost(N, D, M, passes)
    return {"epoch_length" : D,
            "minimum_roundtrips" : 2,
            "amortized_roundtrips" : 2 + rebuild["roundtrips"] / D,
            "amortized_items" : 1 + rebuild["items"] / D,
            "requests" : {"get" : 1 + rebuild["requests"]["get"] / D,
                          "put" : rebuild["requests"]["put"] / D,
                          "delete" : 1 + rebuild["requests"]["delete"] / D}}

@dataclass
class EpochState:
    D: int
    r: Optional[bytes] = None
    j: int = 1
    accesses: int = 0
    epoch: int = 0

class SquareRootStore(object):
    """ Square-root oblivious dictionary over a fixed key set.

    Parameters
    ----------
    store : ServerStore
        Server the layer lives on.
    level : int
        Level number, decides the namespace bytes the layer uses.
    n : int
        Expected number of real items (sets the default epoch length).
    codec : ItemCodec
        Seals and opens server values.
    cache : MemoryCache or CuckooTable
        Cache with at least `epoch_length` capacity.
    shuffler : Shuffler, optional
        Strategy used at every rebuild. Defaults to a 4 pass buffer shuffle.
    epoch_length : int, optional
        Number of accesses between rebuilds (D). Defaults to ⌈n/M⌉.

    """

    def __init__(self, store, level, n, codec, cache, shuffler=None, epoch_length=None, meter=None):

        self.store    = store
        self.level    = level
        self.n        = n
        self.codec    = codec
        self.rng      = codec.rng
        self.cache    = cache
        self.meter    = meter if meter is not None else ClientMemory()
        self.shuffler = shuffler if shuffler is not None else BufferShuffle(rng=self.rng, meter=self.meter)

        M = store.message_size
        self.D = epoch_length if epoch_length is not None else max(1, math.ceil(n / M))
        if self.D < 1:
            raise InvalidConfig(f"Epoch length {self.D} must be at least 1.")
        if cache.capacity < self.D:
            raise InvalidConfig(f"Cache capacity {cache.capacity} is smaller than the epoch length {self.D}.")

        self.resident = prefix(level, Phase.RESIDENT)
        self.staging  = prefix(level, Phase.STAGING)
        self.phases   = (prefix(level, Phase.SHUFFLE_A), prefix(level, Phase.SHUFFLE_B))

        # tiny sets are served from client memory without touching the server
        self.local    = {} if n < M else None
        self.state    = EpochState(D=self.D)
        self.rebuilds = 0

        if self.degenerate:
            log.warning(f"level {level} holds {n} items with M={M}, serving it from client memory")

    @property
    def degenerate(self):
        return self.local is not None

    @property
    def server_items(self):
        if self.degenerate or self.state.r is None:
            return 0
        return self.n + self.D - self.state.accesses

    def build(self, items):
        """ Load `items`, a list of (LogicalKey, value), onto the server. """
        items = list(items)
        if len({lk for lk, _ in items}) != len(items):
            raise KeyCollision("Logical keys passed to build are not distinct.")
        if len(self.cache):
            self.cache.drain()
        self.n = len(items)

        if self.degenerate:
            self.local = {lk.encode(): value for lk, value in items}
            self.meter.acquire(len(self.local))
            return self

        dummies = [(LogicalKey.dummy(j), b"") for j in range(1, self.D + 1)]
        stage_items(self.store, items + dummies, self.staging, self.codec, self.rng, self.meter)
        self._shuffle_and_rekey()
        self.store.annotate("build", level=self.level, items=self.n + self.D)
        log.debug(f"level {self.level} built with {self.n} items and {self.D} dummies")
        return self

    def access(self, k, new_value=None):
        """ Return the current value of `k`, optionally replacing it. """
        update = None if new_value is None else (lambda values: [new_value])
        return self.access_many([k], update)[0]

    def access_many(self, keys, update=None):
        """ Access several keys as one batched step.

        `update`, when given, receives the current values (one per key)
        and returns the values to keep. Each key position costs one get
        and one remove on the server; repeated keys are served as cache
        hits.

        """
        m = len(keys)
        if m == 0:
            return []
        if m > self.D:
            raise CacheOverflow(f"Batch of {m} keys exceeds the epoch length {self.D} of level {self.level}.")

        if self.degenerate:
            return self._access_local(keys, update)

        if self.state.accesses + m > self.D:
            self.rebuild()

        encoded = [k.encode() for k in keys]
        cached = self.cache.get_many(encoded)

        j = self.state.j
        seen = set()
        requests = []
        for k, enc, value in zip(keys, encoded, cached):
            if value is not None or enc in seen:
                requests.append((False, obfuscate_key(self.state.r, LogicalKey.dummy(j), self.resident)))
                j += 1
            else:
                requests.append((True, obfuscate_key(self.state.r, k, self.resident)))
            seen.add(enc)

        server_keys = [sk for _, sk in requests]
        responses = self._exchange([Get(sk) for sk in server_keys])

        fetched = {}
        for (real, _), k, enc, response in zip(requests, keys, encoded, responses):
            if response is None:
                if real:
                    raise MissIntolerance(f"Key {k.payload!r} is not stored at level {self.level}.")
                raise CountMismatch(f"Dummy item missing from level {self.level}.")
            if real:
                lk, value = self.codec.open(response)
                if lk != k:
                    raise AuthFailure(f"Server returned the item for {lk} when asked for {k}.")
                fetched[enc] = value

        self._exchange([Remove(sk) for sk in server_keys])
        self.state.j = j
        self.state.accesses += m

        values = [value if value is not None else fetched[enc] for enc, value in zip(encoded, cached)]
        # a repeated key sees the value of its first occurrence
        first = {}
        values = [first.setdefault(enc, value) for enc, value in zip(encoded, values)]

        new_values = update(list(values)) if update is not None else values
        final = dict(zip(encoded, new_values))
        self.cache.put_many([(enc, final[enc]) for enc in encoded])

        if self.state.accesses >= self.D:
            self.rebuild()

        return values

    def _access_local(self, keys, update):
        values = []
        for k in keys:
            enc = k.encode()
            if enc not in self.local:
                raise MissIntolerance(f"Key {k.payload!r} is not stored at level {self.level}.")
            values.append(self.local[enc])
        if update is not None:
            for k, value in zip(keys, update(list(values))):
                self.local[k.encode()] = value
        return values

    def _exchange(self, ops):
        M = self.store.message_size
        responses = []
        for i in range(0, len(ops), M):
            responses.extend(self.store.batch(ops[i:i + M]))
        return responses

    def rebuild(self):
        """ Return the cache to the server, shuffle and re-key the level. """
        if self.degenerate:
            self.state = EpochState(D=self.D, epoch=self.state.epoch + 1)
            return

        start = self.store.message_count
        cached = [(LogicalKey.decode(enc), value) for enc, value in self.cache.drain()]
        consumed = self.state.j - 1
        staged = cached + [(LogicalKey.dummy(i), b"") for i in range(1, consumed + 1)]
        if len(staged) != self.state.accesses:
            raise CountMismatch(f"Level {self.level} stages {len(staged)} items after {self.state.accesses} accesses.")

        self.store.annotate("rebuild", level=self.level, epoch=self.state.epoch)
        with self.meter.hold(len(cached)):
            stage_items(self.store, staged, self.staging, self.codec, self.rng, self.meter)
        self._shuffle_and_rekey()
        self.rebuilds += 1
        log.debug(f"level {self.level} rebuilt in {self.store.message_count - start} roundtrips")

    def _shuffle_and_rekey(self):
        total = self.n + self.D
        source = namespace_span(self.resident, self.staging)
        final = self.shuffler.shuffle(self.store, source, total, self.codec, self.phases)

        for attempt in range(MAX_NONCE_DRAWS):
            r = fresh_nonce(self.rng)
            try:
                rekey_pass(self.store, final, total, r, self.codec, self.resident, self.meter)
                break
            except KeyCollision as err:
                log.warning(f"level {self.level} nonce collision on attempt {attempt + 1}, redrawing")
                if err.written:
                    move_pass(self.store, namespace_range(self.resident), err.written, self.codec,
                              final.lo[0], self.rng, meter=self.meter)
        else:
            raise KeyCollision(f"Level {self.level} could not find a collision-free nonce in {MAX_NONCE_DRAWS} draws.")

        self.state = EpochState(D=self.D, r=r, epoch=self.state.epoch + 1)
        self.store.annotate("epoch", level=self.level, epoch=self.state.epoch, namespace=self.resident)

    def drain(self):
        """ Remove every real item from the server and cache and return them.

        The layer is empty afterwards and must be built again before use.

        """
        cached = [(LogicalKey.decode(enc), value) for enc, value in self.cache.drain()]
        if self.degenerate:
            items = [(LogicalKey.decode(enc), value) for enc, value in self.local.items()]
            self.meter.release(len(self.local))
            self.local = {}
        else:
            remaining = self.server_items
            items = drain_items(self.store, namespace_range(self.resident), remaining, self.codec)
        self.state = EpochState(D=self.D, epoch=self.state.epoch)
        self.n = 0
        return [(lk, value) for lk, value in items if lk.namespace != KeySpace.DUMMY] + cached
