import json

from .errors import InvalidConfig
from .parameter import Parameter
from .parameter_list import ParameterList

def client_parameters(owner=None):
    """ Construction settings of an `OsClient`. """
    parameters = ParameterList()
    parameters.add(Parameter("N", 1, "int", owner=owner, units="items", minimum=1, maximum=10**9))
    parameters.add(Parameter("c", 2, "int", owner=owner, units="levels", minimum=2, maximum=8))
    parameters.add(Parameter("b", 4, "int", owner=owner, units="passes", minimum=1, maximum=64))
    parameters.add(Parameter("item_size", 1024, "int", owner=owner, units="bytes", minimum=64, maximum=2**20))
    parameters.add(Parameter("seed", -1, "int", owner=owner, minimum=-1, maximum=2**63 - 1))
    parameters.add(Parameter("epsilon", 0.3, "float", owner=owner, minimum=0.05, maximum=2.0))
    parameters.add(Parameter("stash", 4, "int", owner=owner, units="cells", minimum=1, maximum=16))
    parameters.add(Parameter("message_size", 0, "int", owner=owner, units="items", minimum=0, maximum=2**20))
    parameters.add(Parameter("top", "cuckoo", "string", owner=owner, options=["cuckoo", "square_root"]))
    parameters.add(Parameter("shuffle", "buffer", "string", owner=owner, options=["buffer", "oracle"]))
    return parameters

def workload_parameters():
    """ Settings of a benchmark replay: the client settings plus the workload. """
    parameters = client_parameters()
    parameters.top.value = "square_root"
    parameters.top._default = "square_root"
    parameters.add(Parameter("accesses", 1, "int", units="requests", minimum=1, maximum=10**9))
    parameters.add(Parameter("distribution", "uniform", "string", options=["uniform", "zipf", "scripted"]))
    parameters.add(Parameter("zipf_a", 1.2, "float", minimum=1.01, maximum=10.0))
    parameters.add(Parameter("write_fraction", 0.5, "float", minimum=0.0, maximum=1.0))
    parameters.add(Parameter("value_size", 16, "int", units="bytes", minimum=0, maximum=2**20))
    parameters.add(Parameter("script", None, "path"))
    return parameters

def read_json(filename):
    try:
        with open(filename) as fp:
            values = json.load(fp)
    except (OSError, json.JSONDecodeError) as err:
        raise InvalidConfig(f"Could not read config file '{filename}': {err}") from None
    if not isinstance(values, dict):
        raise InvalidConfig(f"Config file '{filename}' must hold a JSON object.")
    return values

def load_config(filename, parameters=None):
    parameters = parameters if parameters is not None else client_parameters()
    parameters.update(read_json(filename))
    return parameters
