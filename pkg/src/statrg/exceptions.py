"""Exception hierarchy. All errors derive from ``ValueError`` so callers that
only care about bad input can catch that."""


class StatRGError(ValueError):
    pass


class DomainError(StatRGError):
    """An argument lies outside the domain of a spectral function."""


class PairingError(StatRGError):
    """A coefficient vector does not match the length of its spectrum."""


class RangeError(StatRGError):
    """An inversion target lies outside the image of the bracket."""


class ExhaustionError(StatRGError):
    """A grid scan reached ``k_max`` without meeting its condition."""


class AdmissionError(StatRGError):
    """An instance failed an admission gate (self-similarity, source set)."""


class ConfigError(StatRGError):
    """A configuration is malformed or inconsistent."""
