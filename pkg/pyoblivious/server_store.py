""" Instrumented honest-but-curious key-value server.

The store keeps items in key order and exposes get, put, remove,
get_range and remove_range. Clients talk to it in messages: a call to
`ServerStore.batch` is one roundtrip carrying at most `message_size`
items, and the single-operation helpers are one-operation batches.
Everything the server sees is appended to a trace, which is what the
analysis tools treat as the adversary's view.

"""
import json
import math
import threading
from bisect import bisect_left, bisect_right, insort
from dataclasses import dataclass, field
from enum import Enum
from typing import ClassVar, NamedTuple, Optional, Tuple

from .errors import InvalidRange, MessageTooLarge, WrongItemSize
from .util import logger, jsonencoder

KEY_SIZE = 32
DEFAULT_ITEM_SIZE = 1024

log = logger.getLog(f"{logger.LOG_NAME}.server_store")

class OpKind(str, Enum):
    GET          = "get"
    PUT          = "put"
    REMOVE       = "remove"
    GET_RANGE    = "getRange"
    REMOVE_RANGE = "removeRange"

@dataclass(frozen=True)
class Get:
    key: bytes
    kind: ClassVar[OpKind] = OpKind.GET

    @property
    def item_budget(self):
        return 1

@dataclass(frozen=True)
class Put:
    key: bytes
    value: bytes
    kind: ClassVar[OpKind] = OpKind.PUT

    @property
    def item_budget(self):
        return 1

@dataclass(frozen=True)
class Remove:
    key: bytes
    kind: ClassVar[OpKind] = OpKind.REMOVE

    @property
    def item_budget(self):
        return 0

@dataclass(frozen=True)
class GetRange:
    lo: bytes
    hi: bytes
    m: int
    kind: ClassVar[OpKind] = OpKind.GET_RANGE

    @property
    def item_budget(self):
        return self.m

@dataclass(frozen=True)
class RemoveRange:
    lo: bytes
    hi: bytes
    kind: ClassVar[OpKind] = OpKind.REMOVE_RANGE

    @property
    def item_budget(self):
        return 0

class KeyRange(NamedTuple):
    lo: bytes
    hi: bytes

def namespace_range(prefix):
    """ Inclusive key range of every 32 byte key starting with `prefix`. """
    return KeyRange(bytes([prefix]) + b"\x00" * (KEY_SIZE - 1),
                    bytes([prefix]) + b"\xff" * (KEY_SIZE - 1))

def namespace_span(first, last):
    return KeyRange(namespace_range(first).lo, namespace_range(last).hi)

@dataclass
class TraceEvent:
    seq: int
    message: int
    op: OpKind
    key: Optional[bytes] = None
    range: Optional[Tuple[bytes, bytes]] = None
    items: int = 0
    affected: int = 0

    def to_json(self):
        return {
            "seq" : self.seq,
            "msg" : self.message,
            "op" : self.op.value,
            "key_hex" : self.key.hex() if self.key is not None else None,
            "range_hex" : [k.hex() for k in self.range] if self.range is not None else None,
            "items" : self.items,
            "affected" : self.affected,
        }

    @classmethod
    def from_json(cls, obj):
        key_range = obj.get("range_hex")
        return cls(seq=obj["seq"],
                   message=obj.get("msg", obj["seq"]),
                   op=OpKind(obj["op"]),
                   key=bytes.fromhex(obj["key_hex"]) if obj.get("key_hex") else None,
                   range=tuple(bytes.fromhex(k) for k in key_range) if key_range else None,
                   items=obj.get("items", 0),
                   affected=obj.get("affected", 0))

@dataclass
class IoStats:
    roundtrips: int = 0
    items_transferred: int = 0
    counts: dict = field(default_factory=lambda: {kind.value: 0 for kind in OpKind})

    def copy(self):
        return IoStats(self.roundtrips, self.items_transferred, dict(self.counts))

    def __sub__(self, other):
        return IoStats(self.roundtrips - other.roundtrips,
                       self.items_transferred - other.items_transferred,
                       {k: v - other.counts.get(k, 0) for k, v in self.counts.items()})

    def as_dict(self):
        return {"roundtrips" : self.roundtrips,
                "items_transferred" : self.items_transferred,
                "counts" : dict(self.counts)}

@dataclass(frozen=True)
class Annotation:
    seq: int
    message: int
    label: str
    info: dict = field(default_factory=dict)

class ServerStore:
    """ Ordered key-value server with message accounting.

    Parameters
    ----------
    message_size : int
        Largest number of items one message may carry (M).
    item_size : int
        Exact length of every stored value in bytes.

    """

    def __init__(self, message_size, item_size=DEFAULT_ITEM_SIZE):
        if message_size < 1:
            raise ValueError(f"Message size {message_size} must be at least 1.")

        self.message_size = message_size
        self.item_size    = item_size

        self._keys  = []
        self._items = {}
        self._lock  = threading.RLock()

        self._seq     = 0
        self._message = 0
        self._stats   = IoStats()
        self._trace   = []
        self.annotations = []

    def __len__(self):
        return len(self._keys)

    def __contains__(self, key):
        return key in self._items

    # single operation helpers, each one roundtrip
    def get(self, k):
        return self.batch([Get(k)])[0]

    def put(self, k, v):
        self.batch([Put(k, v)])

    def remove(self, k):
        return self.batch([Remove(k)])[0]

    def remove_range(self, k1, k2):
        self.batch([RemoveRange(k1, k2)])

    def get_range(self, k1, k2, m):
        """ Return the first `m` items with keys in [k1, k2].

        Served as one request whose response spans ⌈result/M⌉ messages,
        so `m` may exceed the message size here (but not inside a batch).

        """
        self._check_range(k1, k2)
        with self._lock:
            result = self._range(k1, k2, m)
            roundtrips = max(1, math.ceil(len(result) / self.message_size))
            self._record(OpKind.GET_RANGE, range_=(k1, k2), items=len(result))
            self._stats.roundtrips += roundtrips
            self._stats.items_transferred += len(result)
            self._message += roundtrips
        return result

    def batch(self, ops):
        """ Apply `ops` in order as a single message (one roundtrip). """
        budget = sum(op.item_budget for op in ops)
        if budget > self.message_size:
            raise MessageTooLarge(f"Message carries {budget} items, limit is {self.message_size}.")

        for op in ops:
            if op.kind in (OpKind.GET_RANGE, OpKind.REMOVE_RANGE):
                self._check_range(op.lo, op.hi)
            elif op.kind == OpKind.PUT:
                self._check_key(op.key)
                self._check_value(op.value)
            else:
                self._check_key(op.key)

        responses = []
        with self._lock:
            for op in ops:
                responses.append(self._apply(op))
            self._stats.roundtrips += 1
            self._message += 1
        return responses

    def _apply(self, op):
        if op.kind == OpKind.GET:
            value = self._items.get(op.key)
            items = 1 if value is not None else 0
            self._record(op.kind, key=op.key, items=items)
            self._stats.items_transferred += items
            return value

        if op.kind == OpKind.PUT:
            if op.key not in self._items:
                insort(self._keys, op.key)
            self._items[op.key] = op.value
            self._record(op.kind, key=op.key, items=1, affected=1)
            self._stats.items_transferred += 1
            return None

        if op.kind == OpKind.REMOVE:
            value = self._items.pop(op.key, None)
            if value is not None:
                del self._keys[bisect_left(self._keys, op.key)]
            self._record(op.kind, key=op.key, affected=int(value is not None))
            return value

        if op.kind == OpKind.GET_RANGE:
            result = self._range(op.lo, op.hi, op.m)
            self._record(op.kind, range_=(op.lo, op.hi), items=len(result))
            self._stats.items_transferred += len(result)
            return result

        if op.kind == OpKind.REMOVE_RANGE:
            i = bisect_left(self._keys, op.lo)
            j = bisect_right(self._keys, op.hi)
            for key in self._keys[i:j]:
                del self._items[key]
            del self._keys[i:j]
            self._record(op.kind, range_=(op.lo, op.hi), affected=j - i)
            return None

        raise ValueError(f"Unsupported operation {op!r}")

    def _range(self, k1, k2, m):
        i = bisect_left(self._keys, k1)
        j = min(bisect_right(self._keys, k2), i + max(m, 0))
        return [(key, self._items[key]) for key in self._keys[i:j]]

    def _record(self, kind, key=None, range_=None, items=0, affected=0):
        self._trace.append(TraceEvent(self._seq, self._message, kind, key, range_, items, affected))
        self._stats.counts[kind.value] += 1
        self._seq += 1

    def _check_key(self, k):
        if not isinstance(k, (bytes, bytearray)) or len(k) != KEY_SIZE:
            raise WrongItemSize(f"Keys must be {KEY_SIZE} bytes, got {k!r}.")

    def _check_value(self, v):
        if not isinstance(v, (bytes, bytearray)) or len(v) != self.item_size:
            length = len(v) if isinstance(v, (bytes, bytearray)) else type(v).__name__
            raise WrongItemSize(f"Values must be {self.item_size} bytes, got {length}.")

    def _check_range(self, k1, k2):
        self._check_key(k1)
        self._check_key(k2)
        if k1 > k2:
            raise InvalidRange(f"Range start {k1.hex()} is after its end {k2.hex()}.")

    def count_range(self, k1, k2):
        """ Number of stored keys in [k1, k2]. Inspection only, not traced. """
        return bisect_right(self._keys, k2) - bisect_left(self._keys, k1)

    def annotate(self, label, **info):
        self.annotations.append(Annotation(self._seq, self._message, label, info))

    @property
    def message_count(self):
        return self._message

    @property
    def seq(self):
        return self._seq

    def stats(self):
        return self._stats.copy()

    def trace(self):
        return list(self._trace)

    def reset_stats(self):
        """ Zero the counters and start a fresh trace window.

        Sequence numbers keep increasing across resets so events from
        different windows never share a `seq`.

        """
        with self._lock:
            self._stats = IoStats()
            self._trace = []
            self.annotations = []

    def export_trace(self, filename):
        with open(filename, "w") as fp:
            for event in self._trace:
                fp.write(json.dumps(event.to_json()) + "\n")
        log.info(f"wrote {len(self._trace)} trace events to file: '{filename}'")

    def export_stats(self, filename, **extra):
        report = {"stats" : self._stats.as_dict(),
                  "message_size" : self.message_size,
                  "item_size" : self.item_size,
                  "server_items" : len(self),
                  "annotations" : [{"seq" : a.seq, "msg" : a.message, "label" : a.label, **a.info}
                                   for a in self.annotations]}
        report.update(extra)
        with open(filename, "w") as fp:
            jsonencoder.dump(report, fp, indent=2)
        log.info(f"wrote server stats to file: '{filename}'")
        return report

def load_trace(filename):
    with open(filename) as fp:
        return [TraceEvent.from_json(json.loads(line)) for line in fp if line.strip()]

def load_annotations(filename):
    with open(filename) as fp:
        report = json.load(fp)
    return [Annotation(a.pop("seq"), a.pop("msg"), a.pop("label"), a)
            for a in report.get("annotations", [])]
