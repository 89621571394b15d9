from .shuffler import Shuffler
from .buffer   import BufferShuffle, buffer_shuffle
from .oracle   import OracleShuffle, oracle_shuffle
from .passes   import Phase, prefix, move_pass, rekey_pass, stage_items, drain_items
from ..errors  import InvalidConfig

def make_shuffler(kind, passes=4, rng=None, meter=None):
    if kind == "buffer":
        return BufferShuffle(passes=passes, rng=rng, meter=meter)
    if kind == "oracle":
        return OracleShuffle(rng=rng, meter=meter)
    raise InvalidConfig(f"Unknown shuffle strategy '{kind}'. Must be one of ['buffer', 'oracle']")
