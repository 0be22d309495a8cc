"""Exception types shared across the package."""


class CapredError(Exception):
    """Base class for all capred failures."""


class ShapeError(CapredError):
    """Structural mismatch: incompatible shapes, blocks, or hermiticity."""


class DomainError(CapredError):
    """Input lies outside an operation's domain (not positive, not a projection, ...)."""


class CertificateError(CapredError):
    """A positivity certificate does not permit the requested construction."""


class ExtractionError(CapredError):
    """Partition extraction failed after retries."""


class InconsistencyError(CapredError):
    """An internal cross-check failed; numerics are out of tolerance."""


class ParseError(CapredError):
    """Malformed map description; carries the failing position."""

    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at position {position})")
        self.position = position
