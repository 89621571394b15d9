""" Group-at-a-time passes over a server key range.

Every pass here reads the source range in groups of at most M items.
A group costs two roundtrips: one ``get_range`` and one message that
removes the group and writes its replacements. Writes inside a message
are sent in key order so their position never links back to the read.

"""
from enum import IntEnum

from ..cache import ClientMemory
from ..crypto import obfuscate_key, random_key
from ..errors import CountMismatch, KeyCollision
from ..server_store import GetRange, Put, RemoveRange, namespace_range

class Phase(IntEnum):
    RESIDENT  = 0
    STAGING   = 1
    SHUFFLE_A = 2
    SHUFFLE_B = 3

MAX_LEVEL = 15

def prefix(level, phase):
    """ Namespace byte of `phase` on `level`. """
    if not 0 <= level <= MAX_LEVEL:
        raise ValueError(f"Level {level} is outside 0..{MAX_LEVEL}.")
    return (level << 4) | int(phase)

def shuffle_phases(source_prefix):
    level = source_prefix >> 4
    return prefix(level, Phase.SHUFFLE_A), prefix(level, Phase.SHUFFLE_B)

def fresh_keys(rng, dest_prefix, issued, count):
    keys = []
    for _ in range(count):
        key = random_key(rng, dest_prefix)
        # redrawn locally, the server never sees a collision
        while key in issued:
            key = random_key(rng, dest_prefix)
        issued.add(key)
        keys.append(key)
    return keys

def move_pass(store, source, n, codec, dest_prefix, rng, assign=None, permute=True, meter=None):
    """ Move `n` items from `source` into namespace `dest_prefix`.

    `assign(items, issued, written)` returns one server key per item and
    may raise `KeyCollision` before anything of the group is written. The
    default draws fresh random keys.

    """
    M = store.message_size
    meter = meter if meter is not None else ClientMemory()
    issued = set()
    remaining = n
    written = 0

    while remaining > 0:
        want = min(M, remaining)
        group = store.batch([GetRange(source.lo, source.hi, want)])[0]
        if len(group) != want:
            raise CountMismatch(f"Pass expected {want} more items in its source range, read {len(group)} ({n - remaining} done of {n}).")

        with meter.hold(len(group)):
            items = [codec.open(value) for _, value in group]
            if permute:
                rng.shuffle(items)
            if assign is None:
                keys = fresh_keys(rng, dest_prefix, issued, len(items))
            else:
                keys = assign(items, issued, written)
            puts = sorted((Put(k, codec.seal(lk, v)) for k, (lk, v) in zip(keys, items)), key=lambda op: op.key)

        store.batch([RemoveRange(group[0][0], group[-1][0])] + puts)
        remaining -= len(group)
        written += len(group)

    return namespace_range(dest_prefix)

def rekey_pass(store, source, n, r_new, codec, dest_prefix, meter=None):
    """ Move `n` items into `dest_prefix` under ``obfuscate_key(r_new, k)``.

    Raises `KeyCollision` if two logical keys map to the same server key;
    the exception's `written` field says how many items already moved.

    """
    def assign(items, issued, written):
        keys = [obfuscate_key(r_new, lk, dest_prefix) for lk, _ in items]
        batch_keys = set(keys)
        if len(batch_keys) != len(keys) or not issued.isdisjoint(batch_keys):
            raise KeyCollision(f"Obfuscated key collision under a fresh nonce after {written} items.", written=written)
        issued.update(batch_keys)
        return keys

    return move_pass(store, source, n, codec, dest_prefix, codec.rng, assign=assign, permute=False, meter=meter)

def stage_items(store, items, dest_prefix, codec, rng, meter=None):
    """ Write (logical key, value) pairs under random keys, M per message. """
    M = store.message_size
    meter = meter if meter is not None else ClientMemory()
    issued = set()
    for i in range(0, len(items), M):
        chunk = items[i:i + M]
        with meter.hold(len(chunk)):
            keys = fresh_keys(rng, dest_prefix, issued, len(chunk))
            puts = sorted((Put(k, codec.seal(lk, v)) for k, (lk, v) in zip(keys, chunk)), key=lambda op: op.key)
        store.batch(puts)
    return namespace_range(dest_prefix)

def drain_items(store, source, n, codec):
    """ Read and remove `n` items from `source`, returning them decrypted. """
    M = store.message_size
    items = []
    remaining = n
    while remaining > 0:
        want = min(M, remaining)
        group = store.batch([GetRange(source.lo, source.hi, want)])[0]
        if len(group) != want:
            raise CountMismatch(f"Drain expected {want} more items, read {len(group)}.")
        store.batch([RemoveRange(group[0][0], group[-1][0])])
        items.extend(codec.open(value) for _, value in group)
        remaining -= want
    return items
