""" Exceptions raised across pyoblivious.

Every error derives from `ObliviousStorageError` and from the builtin
it most resembles, so ``except ValueError`` keeps working for callers
that do not care about the distinction. Errors that mean an
obliviousness or accounting invariant no longer holds also derive from
`InvariantViolation`; the command line tool exits with status 2 on those.

"""

class ObliviousStorageError(Exception):
    pass

class InvariantViolation(ObliviousStorageError):
    pass

# server store
class WrongItemSize(ObliviousStorageError, ValueError):
    pass

class InvalidRange(ObliviousStorageError, ValueError):
    pass

class MessageTooLarge(ObliviousStorageError, ValueError):
    pass

# crypto
class PlaintextTooLarge(ObliviousStorageError, ValueError):
    pass

class AuthFailure(ObliviousStorageError, ValueError):
    pass

# shuffle
class CountMismatch(InvariantViolation, RuntimeError):
    pass

class KeyCollision(ObliviousStorageError, RuntimeError):
    """ Two obfuscated keys collided during a re-keying pass.

    `written` is the number of items the interrupted pass had already
    moved into the destination namespace.

    """
    def __init__(self, message, written=0):
        super().__init__(message)
        self.written = written

# square root layer
class MissIntolerance(ObliviousStorageError, LookupError):
    pass

class CacheOverflow(InvariantViolation, RuntimeError):
    pass

# cuckoo
class CapacityExceeded(ObliviousStorageError, RuntimeError):
    pass

class RehashLoop(ObliviousStorageError, RuntimeError):
    pass

# recursive
class InvalidConfig(ObliviousStorageError, ValueError):
    pass

# analysis
class NormalizationBroken(InvariantViolation, ArithmeticError):
    pass

class InsufficientSamples(ObliviousStorageError, ValueError):
    pass

class DuplicateKeyRequest(InvariantViolation, AssertionError):
    pass

# pricing
class UnknownOpKind(ObliviousStorageError, ValueError):
    pass

class MissingRttEntry(ObliviousStorageError, LookupError):
    pass
