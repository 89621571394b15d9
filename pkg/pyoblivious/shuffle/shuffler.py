from abc import ABC, abstractmethod

from ..cache import ClientMemory
from ..crypto import SessionRandom
from ..errors import InvalidConfig
from ..parameter_list import ParameterList
from ..util import logger

class Shuffler(ABC):
    """ Base class for oblivious shuffle strategies.

    A strategy moves `n` items out of a source key range on the server
    and leaves them, freshly keyed and re-encrypted, in one of the two
    shuffle phases it is handed. Strategies carry their settings in a
    `ParameterList` so they can be configured from a dict or JSON file.

    """

    def __init__(self, name, parameters=None, rng=None, meter=None):

        self.name       = name
        self.parameters = parameters if parameters is not None else ParameterList()
        self.rng        = rng if rng is not None else SessionRandom()
        self.meter      = meter if meter is not None else ClientMemory()
        self.log        = logger.getLog(f"{logger.LOG_NAME}.shuffle")

    @abstractmethod
    def shuffle(self, store, source, n, codec, phases):
        """ Shuffle `n` items out of `source`, return the final key range. """
        pass

    @abstractmethod
    def update(self, parameter_name):
        pass

    def set(self, config):
        self.parameters.update(config)

    def reset(self):
        for name, parameter in self.parameters:
            parameter.reset()

    def serialize(self):
        return {"name" : self.name, "parameters" : self.parameters.serialize()}

    @property
    def parameters(self):
        return self._parameters

    @parameters.setter
    def parameters(self, parameters):
        self._parameters = parameters

    @staticmethod
    def check_message_size(store):
        if store.message_size < 2:
            raise InvalidConfig(f"Shuffling needs a message size of at least 2, got {store.message_size}.")
