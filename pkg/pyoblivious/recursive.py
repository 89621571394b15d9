import json
import math
from dataclasses import dataclass
from typing import Optional

from graphviz import Digraph

from .cache import ClientMemory, MemoryCache
from .config import client_parameters
from .crypto import OVERHEAD, ItemCodec, LogicalKey, SessionRandom, generate_secret_key, wrap_item
from .cuckoo import CuckooLayout, CuckooTable, ObliviousCells
from .errors import InvalidConfig, PlaintextTooLarge
from .server_store import ServerStore
from .shuffle import make_shuffler
from .square_root import SquareRootStore
from .util import logger, jsonencoder

# bytes a cached item grows by each time it is wrapped into a lower level's cell
NESTING_OVERHEAD = 13

PRESENT   = b"\x01"
TOMBSTONE = b"\x00"

@dataclass(frozen=True)
class LevelSpec:
    level: int
    n_items: int
    epoch_length: int
    batch: int
    cache: str
    cache_capacity: int
    layout: Optional[CuckooLayout] = None

    @property
    def server_items(self):
        return self.n_items + self.epoch_length

def message_size_for(N, c):
    """ Smallest M >= 2 with M**c >= N. """
    M = max(2, int(round(N ** (1.0 / c))))
    while M > 2 and (M - 1) ** c >= N:
        M -= 1
    while M ** c < N:
        M += 1
    return M

def plan_levels(N, c, M, epsilon=0.3, stash=4, top="cuckoo"):
    """ Sizes of every level, top (level c) first.

    Each level is one square-root layer. The top layer holds the N items
    themselves (``top="square_root"``) or the cells of a cuckoo table of
    capacity N (``top="cuckoo"``). Every lower level holds the cells of the
    cuckoo table that serves as the cache of the level above it, and
    level 2 is cached in client memory.

    """
    if c < 2:
        raise InvalidConfig(f"Recursion depth c={c} must be at least 2.")
    if M < 2 or M ** c < N:
        raise InvalidConfig(f"Message size {M} is too small for N={N} at c={c}: need M >= 2 and M**c >= N.")

    if top == "square_root":
        layout, n, batch = None, N, 1
    elif top == "cuckoo":
        layout = CuckooLayout(N, epsilon, stash)
        n, batch = layout.num_cells, layout.batch_width
    else:
        raise InvalidConfig(f"Unknown top layer '{top}'. Must be one of ['cuckoo', 'square_root']")

    specs = []
    for level in range(c, 1, -1):
        D = max(math.ceil(n / M), batch, 1)
        specs.append(LevelSpec(level, n, D, batch, "memory" if level == 2 else "cuckoo", D, layout))
        layout = CuckooLayout(D, epsilon, stash)
        batch = max(batch * layout.probe_width, layout.drain_width)
        n = layout.num_cells
    return specs

def formula_storage(N, c):
    """ Server items predicted for the miss-intolerant stack, without slack. """
    if c == 2:
        return N + math.ceil(N ** 0.5)
    return N + 2 * sum(round(N ** ((c - i) / c)) for i in range(1, c - 1))

class OsClient:
    """ Oblivious storage client over a stack of square-root levels.

    The client owns the level stack, the session key and the random
    source. With the default ``top="cuckoo"`` it is a full dictionary:
    gets of absent keys return None and look exactly like hits. With
    ``top="square_root"`` the key set is fixed to the items loaded at
    build time; `remove` then leaves a tombstone and `put` to a key that
    was never loaded raises `MissIntolerance`.

    Settings can be passed as a dict (`config`), as keyword arguments, or
    both; see `pyoblivious.config.client_parameters` for the names.

    """

    def __init__(self, config=None, items=None, store=None, secret_key=None, verbose=False, **overrides):

        self.log = logger.createLog(logger.LOG_NAME)
        self.verbose = verbose
        self._built = False

        self.parameters = client_parameters(owner=self)
        values = dict(config or {})
        values.update(overrides)
        items = list(items or [])
        if "N" not in values:
            values["N"] = max(1, len(items))
        self.parameters.update(values)

        p = self.parameters
        self.N = p.N.value
        self.c = p.c.value
        if len(items) > self.N:
            raise InvalidConfig(f"{len(items)} items do not fit a client built for N={self.N}.")

        if store is not None and p.message_size.value and store.message_size != p.message_size.value:
            raise InvalidConfig(f"Store message size {store.message_size} differs from configured {p.message_size.value}.")
        if store is not None:
            self.message_size = store.message_size
        else:
            self.message_size = p.message_size.value or message_size_for(self.N, self.c)

        self.specs = plan_levels(self.N, self.c, self.message_size, p.epsilon.value, p.stash.value, p.top.value)
        self.store = store if store is not None else ServerStore(self.message_size, p.item_size.value)
        if self.store.item_size != p.item_size.value:
            raise InvalidConfig(f"Store item size {self.store.item_size} differs from configured {p.item_size.value}.")

        seed = p.seed.value
        self.rng = SessionRandom(seed if seed >= 0 else None)
        self.secret_key = secret_key if secret_key is not None else generate_secret_key(self.rng)
        self.meter = ClientMemory()

        self.layers = []
        self.tables = []
        self._build_stack()
        self._load(items)
        self._built = True

        self.log.info(f"built c={self.c} stack for N={self.N} with M={self.message_size}: "
                      f"{len(self.layers)} levels, {len(self.store)} server items")

    @property
    def tolerant(self):
        return self.parameters.top.value == "cuckoo"

    def _codec(self, level):
        limit = self.store.item_size - OVERHEAD - NESTING_OVERHEAD * (level - 2)
        if limit <= NESTING_OVERHEAD:
            raise InvalidConfig(f"item_size {self.store.item_size} is too small for a level {level} stack.")
        return ItemCodec(self.secret_key, self.store.item_size, self.rng, limit)

    def _build_stack(self):
        p = self.parameters
        cache = None
        # bottom-up, so every layer finds its cache ready
        for spec in reversed(self.specs):
            if spec.level == 2:
                cache = MemoryCache(spec.cache_capacity, self.meter)
            shuffler = make_shuffler(p.shuffle.value, p.b.value, self.rng, self.meter)
            layer = SquareRootStore(self.store, spec.level, spec.n_items, self._codec(spec.level), cache,
                                    shuffler=shuffler, epoch_length=spec.epoch_length, meter=self.meter)
            self.layers.insert(0, layer)
            if spec.layout is not None:
                table = CuckooTable(spec.layout, ObliviousCells(layer, spec.layout.num_cells), self.rng, self.meter)
                self.tables.insert(0, table)
                cache = table

        self.top = self.tables[0] if self.tolerant else self.layers[0]

    def _load(self, items):
        if self.tolerant:
            self.top.bulk_load([(self._key(k), bytes(v)) for k, v in items])
        else:
            pairs = [(LogicalKey.real(k), PRESENT + bytes(v)) for k, v in items]
            for lk, value in pairs:
                self._check_fits(lk, value)
            self.top.build(pairs)
        self.store.annotate("loaded", items=len(items))

    @staticmethod
    def _key(key):
        return key.encode("utf-8") if isinstance(key, str) else bytes(key)

    def _check_fits(self, lk, value):
        codec = self.layers[0].codec
        size = len(wrap_item(lk, value))
        if size > codec.limit:
            raise PlaintextTooLarge(f"Item for key {lk.payload!r} needs {size} bytes, the top level allows {codec.limit}.")

    def get(self, key):
        self.store.annotate("access", op="get")
        if self.tolerant:
            return self.top.get(self._key(key))
        return self._unflag(self.top.access(LogicalKey.real(key)))

    def put(self, key, value):
        self.store.annotate("access", op="put")
        value = bytes(value)
        if self.tolerant:
            self.top.put(self._key(key), value)
            return None
        lk = LogicalKey.real(key)
        self._check_fits(lk, PRESENT + value)
        self.top.access(lk, PRESENT + value)
        return None

    def remove(self, key):
        self.store.annotate("access", op="remove")
        if self.tolerant:
            return self.top.remove(self._key(key))
        return self._unflag(self.top.access(LogicalKey.real(key), TOMBSTONE))

    @staticmethod
    def _unflag(value):
        if value is None or value[:1] != PRESENT:
            return None
        return value[1:]

    def update(self, parameter_name):
        # the stack is sized at construction
        if self._built:
            self.log.warning(f"'{parameter_name}' changed after build, it takes effect on the next client")

    @property
    def rebuilds(self):
        return sum(layer.rebuilds for layer in self.layers)

    def stats(self):
        return self.store.stats()

    def storage_report(self):
        """ Server item counts split into data and overhead. """
        # real items, top level dummies and the capacity of every cuckoo cache
        data_items = self.N + self.specs[0].epoch_length
        data_items += sum(spec.cache_capacity for spec in self.specs if spec.cache == "cuckoo")
        items = len(self.store)
        return {"items" : items,
                "data_items" : data_items,
                "overhead_items" : items - data_items,
                "formula_items" : formula_storage(self.N, self.c),
                "levels" : {spec.level : layer.server_items for spec, layer in zip(self.specs, self.layers)}}

    def memory_report(self):
        report = self.meter.as_dict()
        report["bound"] = self.c * self.message_size
        return report

    def serialize(self, to_json=None):

        serialized_client = {"parameters" : self.parameters.serialize(),
                             "message_size" : self.message_size,
                             "levels" : [spec for spec in self.specs],
                             "storage" : self.storage_report(),
                             "memory" : self.memory_report(),
                             "io" : self.stats().as_dict()}

        if to_json:
            with open(to_json, "w") as fp:
                json.dump(serialized_client, fp, cls=jsonencoder.CustomJSONEncoder, indent=2)
                self.log.info(f"wrote serialized client to file: '{to_json}'")

        return serialized_client

    def diagram(self, name="pyoblivious"):
        """ graphviz ``Digraph`` of the memory layout of the level stack. """

        dot = Digraph(comment=name, graph_attr={'rankdir' : 'TB', 'splines' : 'polyline', 'fontname' : 'Helvetica'})
        node_attr = {'fixedsize': 'false', 'width': '3', 'fontname' : 'Helvetica'}

        dot.node("client", label=f"client memory\n{self.specs[-1].cache_capacity} cached items + {self.message_size} scratch",
                 shape="box", style="rounded", _attributes=node_attr)

        for spec in self.specs:
            server = f"B{spec.level}"
            dot.node(server, label=f"level {spec.level} server dictionary\n"
                                   f"{spec.n_items} items + {spec.epoch_length} dummies",
                     shape="cylinder", _attributes=node_attr)
            if spec.layout is not None:
                table = f"T{spec.level}"
                dot.node(table, label=self._layout_table(spec), shape="none", _attributes=node_attr)
                dot.edge(table, server, label="cells stored in")
            if spec.level == 2:
                dot.edge(server, "client", label=f"cache ({spec.cache_capacity})")
            else:
                dot.edge(server, f"T{spec.level - 1}", label=f"cache ({spec.cache_capacity})")

        return dot

    @staticmethod
    def _layout_table(spec):
        layout = spec.layout
        label  = '<<TABLE BORDER="0" CELLBORDER="1" CELLSPACING="0" CELLPADDING="4">'
        label += f'<TR><TD COLSPAN="3"><B>level {spec.level} cuckoo (capacity {layout.capacity})</B></TD></TR>'
        label += f'<TR><TD>T1: {layout.table_size}</TD><TD>T2: {layout.table_size}</TD><TD>stash: {layout.stash}</TD></TR>'
        label += '</TABLE>>'
        return label

    def render_diagram(self, name="pyoblivious", filename="pyoblivious_diagram", format="pdf"):
        dot = self.diagram(name)
        path = dot.render(filename, format=format, cleanup=True)
        self.log.info(f"wrote memory layout diagram to file: '{path}'")
        return path

    @property
    def verbose(self):
        return self._verbose

    @verbose.setter
    def verbose(self, verbose):
        self._verbose = verbose
        # quiet clients keep whatever level the application configured
        if verbose:
            self.log.setLevel(logger.logging.DEBUG)

def build(items, N, c, store=None, secret_key=None, cfg=None):
    """ Build an `OsClient` for `N` items with recursion depth `c`. """
    config = dict(cfg or {})
    config.update({"N" : N, "c" : c})
    return OsClient(config, items=items, store=store, secret_key=secret_key)
