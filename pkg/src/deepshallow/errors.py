"""Exception types shared across the package."""

from __future__ import annotations


class NetError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(NetError, ValueError):
    pass


class InvalidNet(NetError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid net: " + "; ".join(self.violations))


class InvalidWidths(NetError, ValueError):
    pass


class EmptyHeads(NetError, ValueError):
    pass


class NegativeCoefficient(NetError, ValueError):
    pass


class WrongKind(NetError, TypeError):
    pass


class NotPlain(WrongKind):
    pass


class NotFullSkip(WrongKind):
    pass


class NotResidual(WrongKind):
    pass


class DepthTooSmall(NetError, ValueError):
    pass


class CapExceeded(NetError):
    """Raised when a transformation would produce more than 2**head_cap heads."""

    def __init__(self, exponent, head_cap):
        self.exponent = exponent
        self.head_cap = head_cap
        super().__init__(
            f"head exponent {exponent} exceeds cap {head_cap}; pass force to override"
        )


class ZeroDirection(NetError, ValueError):
    pass


class NetFormatError(NetError, ValueError):
    """Malformed net document. ``where`` is a field path or line reference."""

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)
