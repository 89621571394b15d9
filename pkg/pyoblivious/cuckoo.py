""" Miss-tolerant cuckoo dictionary over an abstract cell store.

Two tables T1 and T2 of t cells each plus a stash of s cells form one
flat array of ``2t + s`` cells. Every operation touches the cells in a
fixed pattern that depends only on the key's hash values, never on what
the cells hold. get, put and remove all run the same two rounds:

- round one reads ``T1[f1(k)], T2[f2(k)]`` and the whole stash, and
  serves the operation. A put into an occupied T1 cell evicts the
  occupant to the stash;
- round two reads the candidate cells of every stash slot (k's own
  cells stand in for empty slots) and moves each stashed item home, or
  one step further along its eviction chain.

`get_many` is a one-round batched lookup for a square-root layer's
cache step, which always pairs it with the same number of puts.

Cells live either in plain memory (`MemoryCells`) or as items of a
square-root layer (`ObliviousCells`), where the server sees only
obfuscated cell keys.

"""
import math
import struct
from dataclasses import dataclass

from Cryptodome.Hash import BLAKE2b

from .cache import ClientMemory
from .crypto import LogicalKey, SessionRandom
from .errors import CapacityExceeded, InvalidConfig, PlaintextTooLarge, RehashLoop
from .util import logger

EMPTY = b""
DEFAULT_EPSILON = 0.3
DEFAULT_STASH = 4
MAX_REHASH_ATTEMPTS = 10
SEED_SIZE = 16

log = logger.getLog(f"{logger.LOG_NAME}.cuckoo")

@dataclass(frozen=True)
class CuckooLayout:
    capacity: int
    epsilon: float = DEFAULT_EPSILON
    stash: int = DEFAULT_STASH

    @property
    def table_size(self):
        return max(1, math.ceil((1 + self.epsilon) * self.capacity))

    @property
    def num_cells(self):
        return 2 * self.table_size + self.stash

    @property
    def stash_cells(self):
        base = 2 * self.table_size
        return list(range(base, base + self.stash))

    @property
    def probe_width(self):
        return 2 + self.stash

    @property
    def drain_width(self):
        return 3 * self.stash

    @property
    def batch_width(self):
        """ Most cells one access of this table ever touches. """
        return max(self.probe_width, self.drain_width)

    @property
    def max_chain(self):
        return math.ceil(3 * math.log2(max(self.capacity, 2)))

def encode_cell(key, value):
    return b"\x01" + struct.pack(">H", len(key)) + key + value

def decode_cell(data):
    if not data or data[0] != 1:
        return None
    n = struct.unpack(">H", data[1:3])[0]
    return bytes(data[3:3 + n]), bytes(data[3 + n:])

CELL_HEADER = 3

class MemoryCells(object):
    """ Cell store in client memory that records every access.

    `trace` holds the tuple of cell indices of each access, which is the
    pattern an observer would see if cells were addressed in the clear.

    """

    def __init__(self, num_cells):
        self.cells = [EMPTY] * num_cells
        self.trace = []
        self.writes = 0
        self.value_capacity = None

    def __len__(self):
        return len(self.cells)

    def access(self, indices, update=None):
        self.trace.append(tuple(indices))
        values = [self.cells[i] for i in indices]
        if update is not None:
            written = {}
            for i, value in zip(indices, update(list(values))):
                written[i] = value
            for i, value in written.items():
                if self.cells[i] != value:
                    self.writes += 1
                self.cells[i] = value
        return values

    def reset(self, values):
        if len(values) != len(self.cells):
            raise InvalidConfig(f"Reset with {len(values)} cells, store holds {len(self.cells)}.")
        self.cells = list(values)

    def drain(self):
        values = self.cells
        self.cells = [EMPTY] * len(values)
        return values

class ObliviousCells(object):
    """ Cell store whose cells are items of a square-root layer.

    Cell ``i`` is stored under ``LogicalKey.cell(tag, i)``; a batch of
    cell reads becomes one batched access of the layer.

    """

    def __init__(self, layer, num_cells, tag=None):
        self.layer     = layer
        self.num_cells = num_cells
        self.tag       = layer.level if tag is None else tag

    def __len__(self):
        return self.num_cells

    @property
    def value_capacity(self):
        return self.layer.codec.value_capacity(LogicalKey.cell(self.tag, 0))

    def key(self, index):
        return LogicalKey.cell(self.tag, index)

    def access(self, indices, update=None):
        return self.layer.access_many([self.key(i) for i in indices], update)

    def reset(self, values):
        if len(values) != self.num_cells:
            raise InvalidConfig(f"Reset with {len(values)} cells, store holds {self.num_cells}.")
        self.layer.build([(self.key(i), value) for i, value in enumerate(values)])

    def drain(self):
        values = [EMPTY] * self.num_cells
        for lk, value in self.layer.drain():
            values[lk.index] = value
        return values

class CuckooTable(object):
    """ Cuckoo hash table with a stash, capacity fixed at creation.

    Parameters
    ----------
    layout : CuckooLayout
        Table sizing (capacity, epsilon, stash size).
    cells : MemoryCells or ObliviousCells, optional
        Where the cells live. Defaults to client memory.
    rng : SessionRandom, optional
        Source of the hash seeds and of random-walk choices.

    """

    kind = "cuckoo"

    def __init__(self, layout, cells=None, rng=None, meter=None):

        self.layout   = layout
        self.capacity = layout.capacity
        self.cells    = cells if cells is not None else MemoryCells(layout.num_cells)
        self.rng      = rng if rng is not None else SessionRandom()
        self.meter    = meter if meter is not None else ClientMemory()

        if len(self.cells) != layout.num_cells:
            raise InvalidConfig(f"Cell store holds {len(self.cells)} cells, layout needs {layout.num_cells}.")

        self.load      = 0
        self.rehashes  = 0
        self.evictions = 0
        self.inserts   = 0

        self._reseed()
        self._clear_chains()
        self.cells.reset([EMPTY] * layout.num_cells)

    def __len__(self):
        return self.load

    def _clear_chains(self):
        # per stash slot: evictions so far in the item's chain and the cell it was pushed out of
        self.chains  = [0] * self.layout.stash
        self.origins = [None] * self.layout.stash

    def _release(self, slot):
        self.chains[slot] = 0
        self.origins[slot] = None

    def _reseed(self):
        self.seeds = (self.rng.bytes(SEED_SIZE), self.rng.bytes(SEED_SIZE))

    def _hash(self, which, key):
        digest = BLAKE2b.new(digest_bits=64, key=self.seeds[which], data=key).digest()
        return int.from_bytes(digest, "big") % self.layout.table_size

    def slots(self, key):
        """ Candidate cells of `key`: its T1 cell and its T2 cell. """
        return [self._hash(0, key), self.layout.table_size + self._hash(1, key)]

    def probe(self, key):
        return self.slots(key) + self.layout.stash_cells

    def get(self, key):
        """ Look `key` up in the same two rounds a put or remove takes. """
        values = self.cells.access(self.probe(key))
        self._settle(key, values[2:])
        return self._find(key, values)

    def get_many(self, keys):
        """ Batched lookup in a single probe round.

        For callers whose every lookup batch is followed by a fixed
        number of puts, such as the cache step of a square-root layer.

        """
        width = self.layout.probe_width
        indices = [i for key in keys for i in self.probe(key)]
        values = self.cells.access(indices) if indices else []
        return [self._find(key, values[n * width:(n + 1) * width]) for n, key in enumerate(keys)]

    @staticmethod
    def _find(key, values):
        for value in values:
            entry = decode_cell(value)
            if entry is not None and entry[0] == key:
                return entry[1]
        return None

    def put(self, key, value):
        entry = encode_cell(key, value)
        capacity = self.cells.value_capacity
        if capacity is not None and len(entry) > capacity:
            raise PlaintextTooLarge(f"Cuckoo entry of {len(entry)} bytes exceeds the {capacity} byte cell budget.")

        while True:
            outcome, stash_view = self._insert_round(key, entry)
            if outcome != "overflow":
                break
            log.debug(f"stash overflow at load {self.load}, rehashing")
            self.rehash()

        self._settle(key, stash_view)
        if outcome == "full":
            raise CapacityExceeded(f"Cuckoo table is full at {self.capacity} items.")

    def put_many(self, pairs):
        for key, value in pairs:
            self.put(key, value)

    def _insert_round(self, key, entry):
        state = {"outcome" : None, "stash" : None}
        s = self.layout.stash
        home = self.slots(key)[0]

        def place(values):
            values = list(values)
            for i, value in enumerate(values):
                found = decode_cell(value)
                if found is not None and found[0] == key:
                    values[i] = entry
                    state["outcome"] = "replaced"
                    break
            else:
                free = [n for n in range(s) if decode_cell(values[2 + n]) is None]
                if self.load >= self.capacity:
                    state["outcome"] = "full"
                elif decode_cell(values[0]) is None:
                    values[0] = entry
                    state["outcome"] = "inserted"
                elif len(free) > s // 2 or (free and decode_cell(values[1]) is not None):
                    slot = free[0]
                    values[2 + slot], values[0] = values[0], entry
                    self.chains[slot], self.origins[slot] = 1, home
                    self.evictions += 1
                    state["outcome"] = "inserted"
                elif decode_cell(values[1]) is None:
                    # stash half full, k's empty T2 cell instead of another eviction
                    values[1] = entry
                    state["outcome"] = "inserted"
                else:
                    state["outcome"] = "overflow"
            state["stash"] = values[2:2 + s]
            return values

        self.cells.access(self.probe(key), place)
        if state["outcome"] == "inserted":
            self.load += 1
            self.inserts += 1
        return state["outcome"], state["stash"]

    def _settle(self, key, stash_view):
        """ Second round of every operation, over the stash slots' candidate cells.

        A stashed item moves into an empty candidate cell. Otherwise it
        takes the candidate it was not pushed out of and the occupant
        there takes its stash slot. After `max_chain` evictions an item
        stays in the stash until one of its cells frees up.

        """
        stash_cells = self.layout.stash_cells
        filler = self.slots(key)
        planned = [self.slots(e[0]) if e is not None else None for e in map(decode_cell, stash_view)]
        indices = [i for candidates in planned for i in (candidates or filler)] + stash_cells

        def settle(values):
            cells = {}
            for i, value in zip(indices, values):
                cells.setdefault(i, value)
            for slot, (cell, candidates) in enumerate(zip(stash_cells, planned)):
                if candidates is None or decode_cell(cells[cell]) is None:
                    continue
                home = next((c for c in candidates if decode_cell(cells[c]) is None), None)
                if home is not None:
                    cells[home], cells[cell] = cells[cell], EMPTY
                    self._release(slot)
                elif self.chains[slot] < self.layout.max_chain:
                    target = self._kick_target(slot, candidates)
                    cells[target], cells[cell] = cells[cell], cells[target]
                    self.chains[slot] += 1
                    self.origins[slot] = target
                    self.evictions += 1
                    if self.chains[slot] == self.layout.max_chain:
                        log.debug(f"eviction chain of {self.chains[slot]} ends in stash slot {slot}")
            return [cells[i] for i in indices]

        self.cells.access(indices, settle)

    def _kick_target(self, slot, candidates):
        a, b = candidates
        if self.origins[slot] == a:
            return b
        if self.origins[slot] == b:
            return a
        return a if self.rng.randbelow(2) == 0 else b

    def remove(self, key):
        state = {"value" : None, "stash" : None}
        s = self.layout.stash

        def clear(values):
            values = list(values)
            for i, value in enumerate(values):
                entry = decode_cell(value)
                if entry is not None and entry[0] == key:
                    state["value"] = entry[1]
                    values[i] = EMPTY
                    if i >= 2:
                        self._release(i - 2)
            state["stash"] = values[2:2 + s]
            return values

        self.cells.access(self.probe(key), clear)
        if state["value"] is not None:
            self.load -= 1
        self._settle(key, state["stash"])
        return state["value"]

    def items(self):
        """ Drain-free snapshot, only available over memory cells. """
        return [decode_cell(v) for v in self.cells.cells if decode_cell(v) is not None]

    def rehash(self):
        """ Draw new hash seeds and re-insert every item.

        All cells are read back in index order, placed in client memory
        under the new seeds and written back in one full reset.

        """
        values = self.cells.drain()
        self._reload([e for e in (decode_cell(v) for v in values) if e is not None])
        self.rehashes += 1

    def _reload(self, entries):
        with self.meter.hold(self.layout.num_cells):
            for attempt in range(MAX_REHASH_ATTEMPTS):
                self._reseed()
                table = self._place(entries)
                if table is not None:
                    break
            else:
                raise RehashLoop(f"No placement for {len(entries)} items after {MAX_REHASH_ATTEMPTS} reseeds.")

        self.cells.reset(table)
        self.load = len(entries)
        self._clear_chains()

    def bulk_load(self, pairs):
        """ Replace the contents with `pairs` in one full reset. """
        entries = [(bytes(k), bytes(v)) for k, v in pairs]
        if len(entries) > self.capacity:
            raise CapacityExceeded(f"Loading {len(entries)} items into a table of capacity {self.capacity}.")
        if len({k for k, _ in entries}) != len(entries):
            raise ValueError("Keys passed to bulk_load are not distinct.")
        capacity = self.cells.value_capacity
        for key, value in entries:
            size = CELL_HEADER + len(key) + len(value)
            if capacity is not None and size > capacity:
                raise PlaintextTooLarge(f"Cuckoo entry of {size} bytes exceeds the {capacity} byte cell budget.")

        self.cells.drain()
        self._reload(entries)

    def _place(self, entries):
        table = [EMPTY] * self.layout.num_cells
        free_stash = list(self.layout.stash_cells)

        for key, value in entries:
            current = encode_cell(key, value)
            for step in range(self.layout.max_chain + 1):
                a, b = self.slots(decode_cell(current)[0])
                if table[a] == EMPTY:
                    table[a] = current
                    break
                if table[b] == EMPTY:
                    table[b] = current
                    break
                target = a if step % 2 == 0 else b
                table[target], current = current, table[target]
            else:
                if not free_stash:
                    return None
                table[free_stash.pop(0)] = current
        return table

    def drain(self):
        """ Remove and return every (key, value), leaving an empty table. """
        values = self.cells.drain()
        entries = [e for e in (decode_cell(v) for v in values) if e is not None]
        self._reseed()
        self.cells.reset([EMPTY] * self.layout.num_cells)
        self.load = 0
        self._clear_chains()
        return entries
