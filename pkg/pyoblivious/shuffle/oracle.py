from ..errors import CountMismatch
from ..server_store import GetRange, Put, RemoveRange, namespace_range
from .passes import fresh_keys, shuffle_phases
from .shuffler import Shuffler

class OracleShuffle(Shuffler):
    """ Exact shuffle that holds every item in client memory.

    Only meant as a ground-truth baseline at test scale: it reads the
    whole range, applies one uniform permutation and writes the items
    back under fresh random keys.

    """

    def __init__(self, name="oracle", parameters=None, rng=None, meter=None):
        super().__init__(name, parameters, rng, meter)

    def shuffle(self, store, source, n, codec, phases=None):
        if phases is None:
            phases = shuffle_phases(source.lo[0])
        dest = phases[0]
        if n == 0:
            return namespace_range(dest)

        M = store.message_size
        items = []
        while len(items) < n:
            want = min(M, n - len(items))
            group = store.batch([GetRange(source.lo, source.hi, want)])[0]
            if len(group) < want:
                raise CountMismatch(f"Shuffle expected {want} more items in its source range, read {len(group)} ({len(items)} done of {n}).")
            store.batch([RemoveRange(group[0][0], group[-1][0])])
            items.extend(codec.open(value) for _, value in group)

        with self.meter.hold(len(items)):
            self.rng.shuffle(items)
            keys = fresh_keys(self.rng, dest, set(), len(items))
            for i in range(0, len(items), M):
                puts = [Put(k, codec.seal(lk, v)) for k, (lk, v) in zip(keys[i:i + M], items[i:i + M])]
                store.batch(sorted(puts, key=lambda op: op.key))

        return namespace_range(dest)

    def update(self, parameter_name):
        pass

def oracle_shuffle(store, namespace, n, codec, rng=None, phases=None):
    return OracleShuffle(rng=rng if rng is not None else codec.rng).shuffle(store, namespace, n, codec, phases)
