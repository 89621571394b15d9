from ..parameter import Parameter
from ..parameter_list import ParameterList
from .passes import move_pass, shuffle_phases
from .shuffler import Shuffler

class BufferShuffle(Shuffler):
    """ Multi-pass buffer shuffle.

    Each pass reads the items M at a time, permutes the group in client
    memory and writes it back under fresh random keys in the other
    shuffle phase. After `passes` passes the items sit in the phase the
    last pass wrote to. A pass costs 2⌈n/M⌉ roundtrips.

    """

    def __init__(self, name="buffer", passes=4, parameters=None, rng=None, meter=None):

        super().__init__(name, parameters, rng, meter)

        if not parameters:
            self.parameters = ParameterList()
            self.parameters.add(Parameter("passes", passes, "int", owner=self, minimum=1, maximum=64))

    @property
    def passes(self):
        return self.parameters.passes.value

    def shuffle(self, store, source, n, codec, phases=None):
        self.check_message_size(store)
        if phases is None:
            phases = shuffle_phases(source.lo[0])

        current = source
        for p in range(self.passes):
            dest = phases[p % 2]
            current = move_pass(store, current, n, codec, dest, self.rng, permute=True, meter=self.meter)

        return current

    def update(self, parameter_name):
        self.log.debug(f"{self.name} shuffle now runs {self.passes} passes")

def buffer_shuffle(store, namespace, n, codec, passes=4, rng=None, phases=None, meter=None):
    shuffler = BufferShuffle(passes=passes, rng=rng if rng is not None else codec.rng, meter=meter)
    return shuffler.shuffle(store, namespace, n, codec, phases)
