import pytest

from pyoblivious.crypto import ItemCodec, SessionRandom, generate_secret_key
from pyoblivious.server_store import ServerStore

ITEM_SIZE = 128

def skey(i, namespace=1):
    """ 32 byte server key `i` inside `namespace`. """
    return bytes([namespace]) + i.to_bytes(31, "big")

@pytest.fixture
def rng():
    return SessionRandom(1234)

@pytest.fixture
def store():
    return ServerStore(4, ITEM_SIZE)

@pytest.fixture
def codec(rng):
    return ItemCodec(generate_secret_key(rng), ITEM_SIZE, rng)

@pytest.fixture
def value():
    return b"\xab" * ITEM_SIZE
