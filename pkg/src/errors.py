"""
Error types raised by the covers library.

Library code raises; only the command line turns these into exit codes.
"""


class CoversError(Exception):
    """Base class for every error raised by this package."""


# === group-core ===
class IdentityWord(CoversError):
    """A word reduced to the identity where a nontrivial class was required."""


# === perm-covers ===
class DegreeMismatch(CoversError):
    pass


class AttemptsExhausted(CoversError):
    """Rejection sampling gave up; the degree is too large for desk scale."""


class DegreeTooLarge(CoversError):
    pass


# === spectrum ===
class NotHyperbolic(CoversError):
    """|trace| <= 2 for a nontrivial element: the Fuchsian model is broken."""


class HorizonTooSmall(CoversError):
    pass


class CutoffExceeded(CoversError):
    pass


class ParseError(CoversError):
    pass


class InvariantViolation(CoversError):
    pass


# === analysis ===
class QuadratureFailure(CoversError):
    pass


# === statistics ===
class SpectrumTooShort(CoversError):
    """The spectrum cutoff is below the window scale L."""


class WordsAbsent(CoversError):
    """A synthetic spectrum without words was used where cover evaluation needs them."""


# === cli ===
class ConfigError(CoversError):
    pass
