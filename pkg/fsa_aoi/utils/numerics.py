# fsa_aoi/utils/numerics.py
"""
Special functions, quadrature, series summation and root finding.

Semi-infinite integrals are mapped onto [0, 1) and handed to QUADPACK's
adaptive routine (scipy.integrate.quad):

* ``exponential``: z = lower - ln(1 - t), dz = dt / (1 - t). Integrands
  carrying an e^{-z} factor become bounded on [0, 1).
* ``rational``: z = lower + t / (1 - t), dz = dt / (1 - t)^2, for
  integrands with algebraic decay.

Non-convergence is reported through ``QuadResult.converged`` rather than
raised, so callers can decide whether a flagged integral means divergence.
"""

import logging
import math
import warnings
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy import integrate, optimize, special

from fsa_aoi.utils.errors import DivergentSeries, IntegrandError, NoRootInBracket
from fsa_aoi.utils.models import QuadratureSpec, QuadResult, SeriesResult, SeriesSpec

logger = logging.getLogger(__name__)

DEFAULT_QUADRATURE = QuadratureSpec()
DEFAULT_SERIES = SeriesSpec()

TRANSFORMS = ("exponential", "rational")


def gamma_fn(x: float) -> float:
    if x <= 0 and float(x).is_integer():
        raise ValueError(f"Gamma function has a pole at {x}")
    return float(special.gamma(x))


def gen_binomial(a: float, k: int) -> float:
    """Generalized binomial coefficient a(a-1)...(a-k+1)/k!."""
    if k < 0 or int(k) != k:
        raise ValueError(f"k must be a non-negative integer, got {k}")
    return float(special.binom(a, int(k)))


def gamma_product(delta: float) -> float:
    """Gamma(1 - delta) * Gamma(1 + delta) for delta in (0, 1)."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return gamma_fn(1.0 - delta) * gamma_fn(1.0 + delta)


def safe_exp(x: float) -> float:
    """math.exp returning inf instead of raising on overflow."""
    if x > 709.0:
        return math.inf
    return math.exp(x)


def _finite_map(f: Callable[[float], float], transform: str, lower: float) -> Callable[[float], float]:
    if transform == "exponential":
        def mapped(t):
            one_minus = 1.0 - t
            if one_minus <= 0.0:
                return 0.0
            return f(lower - math.log1p(-t)) / one_minus
    elif transform == "rational":
        def mapped(t):
            one_minus = 1.0 - t
            if one_minus <= 0.0:
                return 0.0
            return f(lower + t / one_minus) / (one_minus * one_minus)
    else:
        raise ValueError(f"Unknown transform '{transform}', expected one of {TRANSFORMS}")

    def checked(t):
        value = float(mapped(t))
        if math.isnan(value):
            raise IntegrandError(f"Integrand returned NaN at mapped point t={t}")
        return value

    return checked


def quad_finite(f: Callable[[float], float], a: float, b: float,
                spec: QuadratureSpec = DEFAULT_QUADRATURE) -> QuadResult:
    """Adaptive quadrature on a finite interval with the same flagging contract."""

    def checked(x):
        value = float(f(x))
        if math.isnan(value):
            raise IntegrandError(f"Integrand returned NaN at x={x}")
        return value

    return _run_quad(checked, a, b, spec)


def _run_quad(g: Callable[[float], float], a: float, b: float, spec: QuadratureSpec) -> QuadResult:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(
            g, a, b,
            epsabs=spec.abs_tol,
            epsrel=spec.rel_tol,
            limit=spec.max_subdivisions,
            full_output=1,
        )
    value, abs_error = float(out[0]), float(out[1])
    if math.isnan(value):
        raise IntegrandError("Quadrature produced NaN")
    if len(out) > 3:
        message = str(out[3]).strip().splitlines()[0]
        logger.debug(f"Quadrature flagged: {message} (value={value}, err={abs_error})")
        return QuadResult(value, abs_error, converged=False, message=message)
    return QuadResult(value, abs_error)


def quad_semi_infinite(f: Callable[[float], float],
                       spec: QuadratureSpec = DEFAULT_QUADRATURE,
                       transform: str = "exponential",
                       lower: float = 0.0) -> QuadResult:
    """Integral of f over [lower, inf)."""
    return _run_quad(_finite_map(f, transform, lower), 0.0, 1.0, spec)


@lru_cache(maxsize=16)
def _graded_rule(ratio: float, levels: int, nodes_per_panel: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = np.concatenate(([0.0], ratio ** np.arange(levels, -1, -1, dtype=float)))
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (lo[:, None] + half[:, None] * (x[None, :] + 1.0)).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def unit_interval_rule(spec: QuadratureSpec = DEFAULT_QUADRATURE) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes on [0, 1], panels shrinking geometrically toward 0."""
    return _graded_rule(spec.s_grading_ratio, spec.s_grading_levels, spec.s_nodes_per_panel)


def quad_2d_rect(f: Callable[[float, np.ndarray], np.ndarray],
                 spec: QuadratureSpec = DEFAULT_QUADRATURE,
                 transform: str = "exponential") -> QuadResult:
    """
    Iterated integral of f(q, s) over q in [0, inf), s in [0, 1].

    f must accept a scalar q and an array of s nodes. The inner s-integral
    uses the graded rule; the outer q-integral is adaptive.
    """
    nodes, weights = unit_interval_rule(spec)

    def inner(q):
        return float(np.dot(weights, f(q, nodes)))

    return quad_semi_infinite(inner, spec, transform)


def sum_series(term: Callable[[int], float], spec: SeriesSpec = DEFAULT_SERIES) -> SeriesResult:
    """
    Sum term(0) + term(1) + ... until a term falls below term_tol
    (relative to the partial sum once it exceeds one).

    Raises DivergentSeries when the partial sums pass the guard, or when the
    term budget runs out on terms that have stopped shrinking. If the budget
    runs out on shrinking terms, the tail is closed as a geometric series with
    the last term ratio and the result is flagged converged=False.
    """
    total = 0.0
    scale = 1.0
    last = math.nan
    prev = math.nan
    for k in range(spec.max_terms):
        prev, last = last, float(term(k))
        if not math.isfinite(last):
            raise DivergentSeries(f"Non-finite term at k={k}", total, k, last)
        total += last
        if k == 0:
            scale = max(1.0, abs(total))
        elif abs(total) > spec.divergence_guard * scale:
            raise DivergentSeries(f"Partial sums grew past the guard at k={k}", total, k + 1, last)
        if k >= 1 and abs(last) <= spec.term_tol * max(1.0, abs(total)):
            logger.debug(f"Series converged after {k + 1} terms (last term {last:.3e})")
            return SeriesResult(total, k + 1, last)

    ratio = last / prev if prev else math.inf
    if not abs(ratio) < 1.0:
        raise DivergentSeries(f"No convergence after {spec.max_terms} terms (term ratio {ratio:.4g})",
                              total, spec.max_terms, last)
    tail = last * ratio / (1.0 - ratio)
    logger.warning(f"Series hit {spec.max_terms} terms (last term {last:.3e}, ratio {ratio:.4g}); "
                   f"geometric tail {tail:.3e} added")
    return SeriesResult(total + tail, spec.max_terms, last, converged=False)


def find_root_bracketed(g: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10) -> float:
    g_lo, g_hi = float(g(lo)), float(g(hi))
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if g_lo * g_hi > 0 or math.isnan(g_lo) or math.isnan(g_hi):
        raise NoRootInBracket(lo, hi, g_lo, g_hi)
    return float(optimize.brentq(g, lo, hi, xtol=tol))
