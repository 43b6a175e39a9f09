"""Exception hierarchy shared by every module of the package."""


class HeisenbergError(Exception):
    """Base class for all errors raised by heisenberg_aag."""


class MismatchedParams(HeisenbergError, ValueError):
    """Operands were built over Heisenberg groups of different rank."""


class GroupOverflowError(HeisenbergError, OverflowError):
    """An exponent left the signed 64-bit range."""


class BadIndex(HeisenbergError, IndexError):
    """A word letter or key factor referenced a nonexistent generator."""


class BadRange(HeisenbergError, ValueError):
    """A length range [L1, L2] was empty or non-positive."""


class BadParams(HeisenbergError, ValueError):
    pass


class NonTerminating(HeisenbergError, RuntimeError):
    """Collection exceeded its step cap; the presentation is probably malformed."""


class ProtocolMismatch(HeisenbergError, RuntimeError):
    """Alice's and Bob's derived keys disagree; indicates an arithmetic bug."""


class ConfigError(HeisenbergError, ValueError):
    pass


class IncomparableRows(HeisenbergError, ValueError):
    """Summary rows differ in more than one studied parameter."""
