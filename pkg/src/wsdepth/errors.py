"""Exception hierarchy for the wsdepth package.

Every error raised on purpose by this package derives from ``WsdError`` so
callers (and the CLI) can map failure classes to exit codes without string
matching.
"""


class WsdError(Exception):
    """Base class for all wsdepth errors."""


class InvalidCloud(WsdError):
    """A point cloud violates its construction invariants."""


class DimensionMismatch(WsdError):
    """Operands live in different ambient dimensions."""


class LengthMismatch(WsdError):
    """Paired vectors have different lengths."""


class MarginalMismatch(WsdError):
    """A transport plan's marginals disagree with the cloud weights."""


class NotSPD(WsdError):
    """A covariance matrix is not symmetric positive definite."""


class UnsupportedPairing(WsdError):
    """No closed form is available for this (query, population) pairing."""


class EmptyPopulation(WsdError):
    """A depth was requested against an empty population."""


class TooFewDistributions(WsdError):
    """The operation needs at least two population members."""


class NonpositiveBandwidth(WsdError):
    """Kernel bandwidth must be strictly positive."""


class InvalidParameter(WsdError):
    """A configuration or distribution parameter is out of its domain."""


class NumericalError(WsdError):
    """A computation left its certified numerical envelope."""


class ParseError(WsdError):
    """A delimited input file could not be parsed."""


class EmptyGroup(WsdError):
    """An input file contains no data rows for any group."""


class NonFiniteValue(WsdError):
    """An input file contains a NaN or infinite coordinate."""
