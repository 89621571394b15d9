from .errors import InvalidConfig

kinds = ["string", "int", "float", "bool", "path"]

class Parameter(object):
    """ Configuration parameter object.

    A parameter has a `kind` that decides how values are validated:
    ``int`` and ``float`` need a `minimum` and `maximum`, ``string`` needs
    a list of `options`, ``bool`` takes any truth value and ``path`` holds
    free text (a file name) or None.

    When an `owner` is given, its ``update(name)`` method is called every
    time the value changes, which lets a shuffle strategy or client react
    to new settings.

    """

    def __init__(self, name, value, kind, owner=None, units="", minimum=None, maximum=None,
                options=[], print_precision=2, **kwargs):

        self.kind  = kind
        self.name  = name
        self.hold  = False
        self.owner = owner

        if   self.kind == "string":
            if len(options) < 1:
                raise InvalidConfig("Parameter of kind 'string' must have at least one option defined.")
            self.options = list(options)

        elif self.kind == "int" or self.kind == "float":
            if minimum is None or maximum is None:
                raise InvalidConfig("Parameter of kind 'int' and 'float' must have minimum and maximum values defined.")
            if maximum < minimum:
                raise InvalidConfig(f"Provided maximum value {maximum} is smaller than minimum {minimum}.")

            self.min = minimum
            self.max = maximum

        self.units = units
        self.value = value
        self._default = self.value
        self.print_precision = print_precision

        for key, val in kwargs.items():
            setattr(self, key, val)

    def __repr__(self):
        if self.kind == "int":
            return f"{self.name} {self.value:d} kind: {self.kind} range: ({self.min:d} to {self.max:d})"
        elif self.kind == "float":
            s1 = f"{self.name} {self.value:.{self.print_precision}f} {self.units} "
            s2 = f"kind: '{self.kind}' "
            s3 = f"default: {self._default:.{self.print_precision}f} {self.units} "
            s4 = f"range: ({self.min:.{self.print_precision}f} to {self.max:.{self.print_precision}f})"
            return s1 + s2 + s3 + s4
        elif self.kind == "string":
            return f"{self.name} {self.value} kind: {self.kind} options: ({self.options})"
        else:
            return f"{self.name} {self.value} kind: {self.kind}"

    def check_value(self, value):
        if self.kind == "string":
            if value not in self.options:
                raise InvalidConfig(f"Invalid value {value!r} for '{self.name}'. Must be one of {self.options}")

        elif self.kind in ["int", "float"]:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidConfig(f"Invalid value {value!r} for '{self.name}'. Must be a number.")
            if self.kind == "int" and int(value) != value:
                raise InvalidConfig(f"Invalid value {value!r} for '{self.name}'. Must be an integer.")
            if value < self.min or value > self.max:
                raise InvalidConfig(f"Invalid value {value} for '{self.name}'. Must be in range ({self.min} to {self.max}).")

        elif self.kind == "path":
            if value is not None and not isinstance(value, str):
                raise InvalidConfig(f"Invalid value {value!r} for '{self.name}'. Must be a path or None.")

    def coerce(self, value):
        if self.kind == "int":
            return int(value)
        if self.kind == "float":
            return float(value)
        if self.kind == "bool":
            return bool(value)
        return value

    def reset(self):
        self.value = self._default

    @property
    def value(self):
        return self._value

    @value.setter
    def value(self, value):
        self.check_value(value)
        self._value = self.coerce(value)

        # the owner is only told once the parameter has been registered with it
        if self.owner is not None and self.name in getattr(self.owner, "parameters", ()) and not self.hold:
            self.owner.update(self.name)

    def serialize(self):
        if self.kind in ["float", "int"]:
            val = {"value" : self.value, "min" : self.min, "max" : self.max}
        elif self.kind == "string":
            val = {"value" : self.value, "options" : self.options}
        else:
            val = {"value" : self.value}
        return val

    @property
    def kind(self):
        return self._kind

    @kind.setter
    def kind(self, kind):
        if kind not in kinds:
            raise InvalidConfig(f"Invalid kind. Must be one of {kinds}.")
        self._kind = kind
