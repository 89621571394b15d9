from .errors import InvalidConfig

class ParameterList():

    def __init__(self):
        pass

    def __iter__(self):
        for attr, value in self.__dict__.items():
            yield attr, value

    def __repr__(self):
        s = ""
        for name, parameter in self:
            s += parameter.__repr__() + "\n"
        return s

    def __contains__(self, name):
        return name in self.__dict__

    def add(self, parameter):
        self.check_parameter(parameter)
        setattr(self, parameter.name, parameter)

    def check_parameter(self, parameter):
        if hasattr(self, parameter.name):
            raise InvalidConfig("parameter names must be unique!")

    def update(self, values):
        """ Set several parameter values from a plain dict.

        Unknown names raise `InvalidConfig`, so a typo in a config file
        never passes silently.

        """
        for name, value in values.items():
            if name not in self:
                known = [n for n, _ in self]
                raise InvalidConfig(f"Unknown parameter '{name}'. Must be one of {known}")
            getattr(self, name).value = value

    def values(self):
        return {name: parameter.value for name, parameter in self}

    def serialize(self, **kwargs):
        serialized_parameters = {}
        for name, parameter in self:
            serialized_parameters[parameter.name] = parameter.serialize(**kwargs)

        return serialized_parameters
