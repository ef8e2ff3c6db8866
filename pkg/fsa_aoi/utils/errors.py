# fsa_aoi/utils/errors.py

from typing import Optional


class FsaAoiError(Exception):
    """Base class for errors raised by fsa_aoi."""


class ConfigError(FsaAoiError, ValueError):
    """Invalid experiment configuration or CLI input."""


class NumericalError(FsaAoiError):
    """A numerical routine could not produce a trustworthy value."""


class IntegrandError(NumericalError, ValueError):
    """An integrand returned NaN."""


class QuadratureError(NumericalError):
    """Quadrature did not converge and the caller cannot treat it as divergence."""

    def __init__(self, message: str, value: Optional[float] = None, abs_error: Optional[float] = None):
        super().__init__(message)
        self.value = value
        self.abs_error = abs_error


class DivergentSeries(NumericalError):
    """Series summation aborted; carries the partial data."""

    def __init__(self, message: str, partial_sum: float, terms: int, last_term: float):
        super().__init__(message)
        self.partial_sum = partial_sum
        self.terms = terms
        self.last_term = last_term


class NoRootInBracket(NumericalError):
    def __init__(self, lo: float, hi: float, g_lo: float, g_hi: float):
        super().__init__(f"No sign change on [{lo}, {hi}]: g(lo)={g_lo}, g(hi)={g_hi}")
        self.lo = lo
        self.hi = hi
        self.g_lo = g_lo
        self.g_hi = g_hi


class LowSampleWarning(UserWarning):
    """Too few deliveries after burn-in for meaningful statistics."""
