""" Key obfuscation, value encryption and session randomness.

Server keys are ``prefix || HMAC-SHA256(r, encoded logical key)[:31]``:
a keyed PRF under the epoch nonce ``r``, with a one byte namespace prefix
so that different levels and shuffle phases occupy disjoint key ranges.

Values are sealed with AES-GCM under the session key. The plaintext
carries a 4 byte length prefix and is zero padded, so every ciphertext
has exactly ``item_size`` bytes: ``nonce(12) || tag(16) || ciphertext``.

"""
import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from Cryptodome.Cipher import AES
from Cryptodome.Hash import HMAC, SHA256
from Cryptodome.Random import get_random_bytes
from Cryptodome.Random import random as secure_random

from .errors import AuthFailure, PlaintextTooLarge
from .server_store import KEY_SIZE

NONCE_SIZE      = 16
SECRET_KEY_SIZE = 32
GCM_NONCE_SIZE  = 12
GCM_TAG_SIZE    = 16
LENGTH_SIZE     = 4
OVERHEAD        = GCM_NONCE_SIZE + GCM_TAG_SIZE + LENGTH_SIZE

class KeySpace(IntEnum):
    REAL  = 1
    DUMMY = 2
    CELL  = 3

@dataclass(frozen=True)
class LogicalKey:
    namespace: KeySpace
    payload: bytes

    @classmethod
    def real(cls, key):
        if isinstance(key, str):
            key = key.encode("utf-8")
        return cls(KeySpace.REAL, bytes(key))

    @classmethod
    def dummy(cls, j):
        if j < 1:
            raise ValueError(f"Dummy index {j} must be at least 1.")
        return cls(KeySpace.DUMMY, struct.pack(">Q", j))

    @classmethod
    def cell(cls, tag, index):
        if index < 0:
            raise ValueError(f"Cell index {index} must be non-negative.")
        return cls(KeySpace.CELL, struct.pack(">BQ", tag, index))

    @property
    def index(self):
        if self.namespace == KeySpace.DUMMY:
            return struct.unpack(">Q", self.payload)[0]
        if self.namespace == KeySpace.CELL:
            return struct.unpack(">BQ", self.payload)[1]
        raise ValueError("Only dummy and cell keys carry an index.")

    def encode(self):
        return bytes([self.namespace]) + self.payload

    @classmethod
    def decode(cls, data):
        return cls(KeySpace(data[0]), bytes(data[1:]))

class SessionRandom(object):
    """ Source of every random choice a client makes.

    With a `seed` the stream comes from a numpy ``Generator`` and runs are
    byte-for-byte reproducible. Without one, bytes and integers come from
    the operating system through pycryptodome.

    """

    def __init__(self, seed=None):
        if seed is not None and seed < 0:
            seed = None
        self.seed = seed
        self._generator = np.random.default_rng(seed) if seed is not None else None

    @property
    def deterministic(self):
        return self._generator is not None

    @property
    def generator(self):
        """ numpy Generator for vectorized draws (analysis and workloads). """
        if self._generator is None:
            return np.random.default_rng(int.from_bytes(get_random_bytes(16), "big"))
        return self._generator

    def bytes(self, n):
        if self._generator is not None:
            return self._generator.bytes(n)
        return get_random_bytes(n)

    def randbelow(self, n):
        if self._generator is not None:
            return int(self._generator.integers(n))
        return secure_random.randrange(n)

    def shuffle(self, items):
        """ In-place Fisher-Yates shuffle. """
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def spawn(self, index):
        """ Independent stream for trial `index` (seed xor index). """
        if self.seed is None:
            return SessionRandom()
        return SessionRandom(self.seed ^ index)

def generate_secret_key(rng):
    return rng.bytes(SECRET_KEY_SIZE)

def fresh_nonce(rng):
    return rng.bytes(NONCE_SIZE)

def obfuscate_key(r, k, namespace=0):
    digest = HMAC.new(r, k.encode(), digestmod=SHA256).digest()
    return bytes([namespace]) + digest[:KEY_SIZE - 1]

def random_key(rng, namespace):
    return bytes([namespace]) + rng.bytes(KEY_SIZE - 1)

def encrypt_value(K, v, item_size, rng):
    capacity = item_size - OVERHEAD
    if len(v) > capacity:
        raise PlaintextTooLarge(f"Plaintext of {len(v)} bytes exceeds the {capacity} byte budget of a {item_size} byte item.")

    padded = struct.pack(">I", len(v)) + v + b"\x00" * (capacity - len(v))
    nonce = rng.bytes(GCM_NONCE_SIZE)
    cipher = AES.new(K, AES.MODE_GCM, nonce=nonce, mac_len=GCM_TAG_SIZE)
    ciphertext, tag = cipher.encrypt_and_digest(padded)
    return nonce + tag + ciphertext

def decrypt_value(K, c):
    nonce = c[:GCM_NONCE_SIZE]
    tag = c[GCM_NONCE_SIZE:GCM_NONCE_SIZE + GCM_TAG_SIZE]
    cipher = AES.new(K, AES.MODE_GCM, nonce=nonce, mac_len=GCM_TAG_SIZE)
    try:
        padded = cipher.decrypt_and_verify(c[GCM_NONCE_SIZE + GCM_TAG_SIZE:], tag)
    except ValueError as err:
        raise AuthFailure(f"Ciphertext failed authentication: {err}") from None

    length = struct.unpack(">I", padded[:LENGTH_SIZE])[0]
    if length > len(padded) - LENGTH_SIZE:
        raise AuthFailure(f"Decrypted length prefix {length} is out of range.")
    return padded[LENGTH_SIZE:LENGTH_SIZE + length]

def wrap_item(key, value):
    encoded = key.encode()
    return struct.pack(">H", len(encoded)) + encoded + value

def unwrap_item(plaintext):
    n = struct.unpack(">H", plaintext[:2])[0]
    return LogicalKey.decode(plaintext[2:2 + n]), plaintext[2 + n:]

class ItemCodec(object):
    """ Seals (logical key, value) pairs into fixed-size server values.

    The logical key travels inside the ciphertext so shuffles and
    re-keying passes can recover it. `limit` caps the wrapped plaintext
    below the raw item budget, which the level builder uses to leave
    room for the framing added when a lower level caches the item.

    """

    def __init__(self, secret_key, item_size, rng, limit=None):
        self.secret_key = secret_key
        self.item_size  = item_size
        self.rng        = rng
        self.limit      = item_size - OVERHEAD if limit is None else min(limit, item_size - OVERHEAD)

    def seal(self, key, value):
        plaintext = wrap_item(key, value)
        if len(plaintext) > self.limit:
            raise PlaintextTooLarge(f"Item for {key.namespace.name} key needs {len(plaintext)} bytes, limit is {self.limit}.")
        return encrypt_value(self.secret_key, plaintext, self.item_size, self.rng)

    def open(self, ciphertext):
        return unwrap_item(decrypt_value(self.secret_key, ciphertext))

    def value_capacity(self, key):
        """ Largest value that still fits next to `key`. """
        return self.limit - 2 - len(key.encode())
