""" Client-resident cache and the memory meter. """
from .errors import CacheOverflow

class ClientMemory(object):
    """ Tracks how many items the client holds at once.

    Caches report their resident items and shuffles report the group
    they are holding; `peak` is the largest total ever observed.

    """

    def __init__(self):
        self.resident = 0
        self.scratch  = 0
        self.peak     = 0

    def acquire(self, n=1, scratch=False):
        if scratch:
            self.scratch += n
        else:
            self.resident += n
        self.peak = max(self.peak, self.resident + self.scratch)

    def release(self, n=1, scratch=False):
        if scratch:
            self.scratch -= n
        else:
            self.resident -= n

    def hold(self, n):
        """ Context manager for `n` items of shuffle scratch. """
        return _Scratch(self, n)

    def as_dict(self):
        return {"resident" : self.resident, "scratch" : self.scratch, "peak" : self.peak}

class _Scratch(object):
    def __init__(self, meter, n):
        self.meter = meter
        self.n = n

    def __enter__(self):
        self.meter.acquire(self.n, scratch=True)
        return self

    def __exit__(self, *exc):
        self.meter.release(self.n, scratch=True)
        return False

class MemoryCache(object):
    """ Bounded dictionary held in client memory.

    This is the cache at the bottom of every level stack. It offers the
    same batched interface as `CuckooTable`, so a square-root layer does
    not care which one it is fronted by.

    """

    kind = "memory"

    def __init__(self, capacity, meter=None):
        self.capacity = capacity
        self.meter    = meter if meter is not None else ClientMemory()
        self._items   = {}

    def __len__(self):
        return len(self._items)

    def get_many(self, keys):
        return [self._items.get(k) for k in keys]

    def put_many(self, pairs):
        for key, value in pairs:
            if key not in self._items:
                if len(self._items) >= self.capacity:
                    raise CacheOverflow(f"Client cache is full at {self.capacity} items.")
                self.meter.acquire(1)
            self._items[key] = value

    def drain(self):
        items = list(self._items.items())
        self.meter.release(len(items))
        self._items = {}
        return items
