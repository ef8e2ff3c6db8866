# fsa_aoi/utils/cellular.py
"""
AoI of the Poisson cellular uplink with fractional power control.

Sensors (intensity lambda_s) transmit to their nearest fusion centre
(intensity lambda_d) with power P_tx * R^(alpha*epsilon). Averages over the
typical link distance are written with z = c*lambda_d*pi*r^2, where c is the
association factor of the typical-link distance law (5/4 by default). The
interference seen at distance ratio q = (D/r)^2 from a sensor with
s = (R/D)^2 enters through the g_theta / G_theta kernels:

    g_theta(m, z) = (1/c) z^2 int_0^inf int_0^1 q e^{-zqs} /
                    ((m + X) (1 - e^{-zq})) ds dq,
    X = q^(alpha(1-epsilon)/2) / (theta s^(alpha epsilon/2)).

The kernels are evaluated after substituting t = z*q, which turns the
prefactor into t / (1 - e^{-t}) (removable at t = 0) and leaves an
integrand with algebraic decay in t.
"""

import logging
import math
import warnings
from functools import lru_cache
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from fsa_aoi.config import settings
from fsa_aoi.utils.errors import DivergentSeries, QuadratureError
from fsa_aoi.utils.models import (
    AoiValue,
    CellularConfig,
    CondSuccessProb,
    GThetaArgs,
    InfiniteAoI,
    PowerModel,
    ProtocolParams,
    QuadratureSpec,
    SeriesSpec,
    is_infinite,
)
from fsa_aoi.utils.numerics import (
    DEFAULT_QUADRATURE,
    DEFAULT_SERIES,
    gamma_fn,
    gamma_product,
    quad_2d_rect,
    quad_finite,
    quad_semi_infinite,
    safe_exp,
    sum_series,
)
from fsa_aoi.utils.renewal import decondition_moments

logger = logging.getLogger(__name__)


# (a, b, c, d, l, rho) selecting the E[1/mu^2] kernel at m = 1 - beta
def inv_mu_sq_coeffs(beta: float) -> Tuple[float, float, float, float, float, float]:
    return (1.0 - beta, 2.0, 2.0, 1.0 - beta, 1.0, beta)


def omega(cfg: CellularConfig) -> float:
    """theta^delta * Gamma(1 - delta) * Gamma(1 + delta)."""
    return cfg.theta ** cfg.delta * gamma_product(cfg.delta)


def _t_ratio(t: float) -> float:
    """t / (1 - e^{-t}), expanded near t = 0."""
    if t < 1e-8:
        return 1.0 + 0.5 * t
    return t / -math.expm1(-t)


def _interference_x(t: float, z: float, s: np.ndarray, cfg: CellularConfig,
                    z_cap: Optional[float]) -> np.ndarray:
    q = t / z
    if z_cap is None:
        return q ** (cfg.alpha * (1.0 - cfg.epsilon) / 2.0) * s ** (-cfg.alpha * cfg.epsilon / 2.0) / cfg.theta
    # Power capped at the link distance sqrt(z_cap/z) * r
    u = math.sqrt(z_cap / z)
    ratio = min(1.0, u) / np.minimum(np.sqrt(s * q), u)
    return q ** (cfg.alpha / 2.0) / cfg.theta * ratio ** (cfg.alpha * cfg.epsilon)


def _kernel(z: float, cfg: CellularConfig, spec: QuadratureSpec,
            weight: Callable[[np.ndarray], np.ndarray], z_cap: Optional[float] = None) -> float:
    """Shared engine: (1/c) int int t/(1-e^-t) e^{-ts} weight(X) ds dt."""
    if z == 0:
        return 0.0

    def integrand(t, s):
        return _t_ratio(t) * np.exp(-t * s) * weight(_interference_x(t, z, s, cfg, z_cap))

    result = quad_2d_rect(integrand, spec, transform="rational")
    if not result.converged:
        raise QuadratureError(f"Kernel integral did not converge at z={z}: {result.message}",
                              result.value, result.abs_error)
    return result.value / cfg.association_factor


@lru_cache(maxsize=8192)
def _g_cached(m: float, z: float, cfg: CellularConfig, spec: QuadratureSpec, z_cap: Optional[float]) -> float:
    return _kernel(z, cfg, spec, lambda x: 1.0 / (m + x), z_cap)


def g_theta(m: float, z: float, cfg: CellularConfig, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    args = GThetaArgs(m, z)
    return _g_cached(args.m, args.z, cfg, spec, None)


def g_theta_capped(m: float, z: float, z_cap: float, cfg: CellularConfig,
                   spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """g_theta with every sensor's power factor capped at the radius where z = z_cap."""
    args = GThetaArgs(m, z)
    if z_cap <= 0:
        raise ValueError("z_cap must be positive")
    return _g_cached(args.m, args.z, cfg, spec, float(z_cap))


@lru_cache(maxsize=4096)
def _big_g_cached(coeffs: Tuple[float, ...], z: float, cfg: CellularConfig, spec: QuadratureSpec) -> float:
    a, b, c, d, l, rho = coeffs

    def weight(x):
        return (c * (d + x) ** l + rho) / (a + x) ** b

    return _kernel(z, cfg, spec, weight)


def big_g_theta(coeffs: Sequence[float], z: float, cfg: CellularConfig,
                spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """G_theta((a,b,c,d,l,rho), z): the g_theta kernel with weight (c(d+X)^l + rho)/(a+X)^b."""
    args = GThetaArgs(0.0, z, tuple(coeffs))
    return _big_g_cached(args.coeffs, args.z, cfg, spec)


def full_inversion_kernel(m: float, cfg: CellularConfig, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """
    g_theta at epsilon = 1, which does not depend on z. Integrating out t
    leaves the trigamma function: (1/c) int_0^1 psi'(s) / (m + s^(-alpha/2)/theta) ds.
    """
    half_alpha = cfg.alpha / 2.0

    def integrand(s):
        damped = cfg.theta * s ** half_alpha
        return float(special.polygamma(1, s)) * damped / (m * damped + 1.0)

    result = quad_finite(integrand, 0.0, 1.0, spec)
    if not result.converged:
        raise QuadratureError(f"Full-inversion kernel did not converge: {result.message}",
                              result.value, result.abs_error)
    return result.value / cfg.association_factor


class DistancePdfs(NamedTuple):
    f_r: Callable[[float], float]
    f_x: Callable[[float], float]
    f_r_conditional: Callable[[float, float], float]


def distance_pdfs(cfg: CellularConfig) -> DistancePdfs:
    """Typical-link distance, nearest-centre distance, and link distance given D."""
    scale = cfg.association_factor * cfg.lambda_d * math.pi

    def f_r(u):
        return 2.0 * scale * u * math.exp(-scale * u * u) if u >= 0 else 0.0

    def f_x(u):
        return 2.0 * math.pi * cfg.lambda_d * u * math.exp(-cfg.lambda_d * math.pi * u * u) if u >= 0 else 0.0

    def f_r_conditional(u, d):
        if u < 0 or u > d:
            return 0.0
        return f_r(u) / -math.expm1(-scale * d * d)

    return DistancePdfs(f_r, f_x, f_r_conditional)


def cond_success_prob_cellular(pairs: Sequence[Tuple[float, float]], p: ProtocolParams,
                               cfg: CellularConfig, r: float) -> CondSuccessProb:
    """Success probability of the typical link given (D_i, R_i) for each interfering sensor."""
    arr = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
    if len(arr) == 0:
        return CondSuccessProb(1.0)
    if r <= 0:
        raise ValueError("Typical link distance must be positive")
    d, link = arr[:, 0], arr[:, 1]
    if np.any(link <= 0) or np.any(link > d * (1 + 1e-12)):
        raise ValueError("Each interferer needs 0 < R_i <= D_i")
    power = PowerModel.from_config(cfg)
    gain_ratio = power.factor(np.array([r]), cfg.alpha)[0] / power.factor(link, cfg.alpha)
    x = d ** cfg.alpha * gain_ratio / (cfg.theta * r ** cfg.alpha)
    log_mu = np.sum(np.log1p(-p.beta / (1.0 + x)))
    return CondSuccessProb(float(np.exp(log_mu)))


def _outer_expectation(exponent: Callable[[float], float], spec: QuadratureSpec,
                       growing: bool, z_split: Optional[float] = None) -> AoiValue:
    """
    int_0^inf exp(-z + exponent(z)) dz. For growing exponents the log-integrand
    is probed first; if it does not decrease the result is InfiniteAoI.
    """
    if growing:
        z1, z2 = settings.DIVERGENCE_PROBE_Z
        h1, h2 = exponent(z1) - z1, exponent(z2) - z2
        if h2 >= h1:
            return InfiniteAoI(f"exp(+) integrand does not decay (log-integrand {h1:.3g} at z={z1}, {h2:.3g} at z={z2})")

    def integrand(z):
        return safe_exp(exponent(z) - z)

    transform = "rational" if growing else "exponential"
    if z_split is not None and 0 < z_split < 700:
        parts = [quad_finite(integrand, 0.0, z_split, spec),
                 quad_semi_infinite(integrand, spec, transform, lower=z_split)]
    else:
        parts = [quad_semi_infinite(integrand, spec, transform)]

    value = sum(part.value for part in parts)
    flagged = [part.message for part in parts if not part.converged]
    if flagged:
        if growing:
            return InfiniteAoI(f"outer integral did not converge: {flagged[0]}")
        raise QuadratureError(f"Outer integral did not converge: {flagged[0]}", value)
    if math.isinf(value):
        return InfiniteAoI("outer integral overflows")
    return value


def cellular_mean_mu(cfg: CellularConfig, p: ProtocolParams, spec: QuadratureSpec = DEFAULT_QUADRATURE,
                     z_cap: Optional[float] = None) -> float:
    if cfg.lambda_s == 0:
        return 1.0
    load = cfg.density_ratio * p.beta
    kernel = (lambda z: g_theta(1.0, z, cfg, spec)) if z_cap is None \
        else (lambda z: g_theta_capped(1.0, z, z_cap, cfg, spec))
    return _outer_expectation(lambda z: -load * kernel(z), spec, growing=False, z_split=z_cap)


def cellular_mean_inv_mu(cfg: CellularConfig, p: ProtocolParams, spec: QuadratureSpec = DEFAULT_QUADRATURE,
                         z_cap: Optional[float] = None) -> AoiValue:
    if cfg.lambda_s == 0:
        return 1.0
    load, m = cfg.density_ratio * p.beta, 1.0 - p.beta
    kernel = (lambda z: g_theta(m, z, cfg, spec)) if z_cap is None \
        else (lambda z: g_theta_capped(m, z, z_cap, cfg, spec))
    try:
        return _outer_expectation(lambda z: load * kernel(z), spec, growing=True, z_split=z_cap)
    except QuadratureError as exc:
        if m == 0:
            return InfiniteAoI(f"every interferer active in every slot: {exc}")
        raise


def cellular_mean_inv_mu_sq(cfg: CellularConfig, p: ProtocolParams,
                            spec: QuadratureSpec = DEFAULT_QUADRATURE) -> AoiValue:
    if cfg.lambda_s == 0:
        return 1.0
    load, coeffs = cfg.density_ratio * p.beta, inv_mu_sq_coeffs(p.beta)
    try:
        return _outer_expectation(lambda z: load * big_g_theta(coeffs, z, cfg, spec), spec, growing=True)
    except QuadratureError as exc:
        if p.beta >= 1:
            return InfiniteAoI(f"every interferer active in every slot: {exc}")
        raise


def _assemble_mean(p: ProtocolParams, e_mu: float, e_inv_mu: AoiValue) -> AoiValue:
    if is_infinite(e_inv_mu):
        return e_inv_mu if isinstance(e_inv_mu, InfiniteAoI) else InfiniteAoI("E[1/mu] overflows")
    f, eta = p.frame_size, p.eta
    return f / eta * e_inv_mu + (f * f - 1) * eta / (12.0 * f) * e_mu + (1 - f) / 2.0


def avg_aoi_cellular(cfg: CellularConfig, p: ProtocolParams, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> AoiValue:
    """Average AoI under unconstrained fractional power control (p_max_ratio is ignored)."""
    e_inv_mu = cellular_mean_inv_mu(cfg, p, spec)
    if is_infinite(e_inv_mu):
        return _assemble_mean(p, 0.0, e_inv_mu)
    return _assemble_mean(p, cellular_mean_mu(cfg, p, spec), e_inv_mu)


def avg_aoi_sa_cellular(cfg: CellularConfig, eta: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> AoiValue:
    return avg_aoi_cellular(cfg, ProtocolParams(eta, 1), spec)


def q2_cellular(cfg: CellularConfig, p: ProtocolParams, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """avg_aoi_cellular minus the SA value at rate eta/F."""
    f = p.frame_size
    if f == 1:
        return 0.0
    return (f * f - 1) / 12.0 * p.beta * cellular_mean_mu(cfg, p, spec) + (1 - f) / 2.0


def avg_aoi_cellular_approx(cfg: CellularConfig, p: ProtocolParams, s: SeriesSpec = DEFAULT_SERIES) -> AoiValue:
    """Series approximation of avg_aoi_cellular built on Gamma(1 + (1-eps) n) / n! weights."""
    f, eta, beta, eps = p.frame_size, p.eta, p.beta, cfg.epsilon
    scale = cfg.effective_ratio * beta * omega(cfg) * gamma_fn(1.0 + eps)
    c1 = scale
    c2 = scale * (1.0 - beta) ** (cfg.delta - 1.0) if beta < 1 else math.inf
    if math.isinf(c2):
        return InfiniteAoI("eta/F = 1: the series weight C2 is unbounded")
    linear = (f * f - 1) * eta / (12.0 * f)

    def term(n):
        weight = math.exp(special.gammaln(1.0 + (1.0 - eps) * n) - special.gammaln(n + 1.0))
        return weight * (linear * (-c1) ** n + f / eta * c2 ** n)

    try:
        total = sum_series(term, s)
    except DivergentSeries as exc:
        return InfiniteAoI(f"approximation series diverges (C1={c1:.4g}, C2={c2:.4g}): {exc}")
    logger.debug(f"Cellular series approximation used {total.terms} terms")
    return total.value + (1 - f) / 2.0


def avg_aoi_no_power_control(cfg: CellularConfig, p: ProtocolParams) -> AoiValue:
    """Closed form at epsilon = 0; infinite when the interference exponent reaches one."""
    if cfg.epsilon != 0:
        raise ValueError("avg_aoi_no_power_control needs epsilon = 0")
    f, eta, beta = p.frame_size, p.eta, p.beta
    load = cfg.effective_ratio * omega(cfg) * beta
    if cfg.lambda_s > 0 and beta >= 1:
        return InfiniteAoI("eta/F = 1 without power control")
    growth = load * (1.0 - beta) ** (cfg.delta - 1.0) if cfg.lambda_s > 0 else 0.0
    if growth >= 1:
        return InfiniteAoI(f"interference exponent {growth:.4g} >= 1")
    return f / eta / (1.0 - growth) + (f * f - 1) * eta / (12.0 * f) / (1.0 + load) + (1 - f) / 2.0


def var_aoi_no_power_control(cfg: CellularConfig, p: ProtocolParams) -> AoiValue:
    """Variance at epsilon = 0, where every kernel is linear in z and each expectation is geometric."""
    if cfg.epsilon != 0:
        raise ValueError("var_aoi_no_power_control needs epsilon = 0")
    if cfg.lambda_s == 0:
        return decondition_moments(p, 1.0, 1.0, 1.0).variance
    beta, delta = p.beta, cfg.delta
    if beta >= 1:
        return InfiniteAoI("eta/F = 1 without power control")
    load = cfg.effective_ratio * omega(cfg) * beta
    m = 1.0 - beta
    first = load * m ** (delta - 1.0)
    second = load * (2.0 * m ** (delta - 1.0) + beta * (1.0 - delta) * m ** (delta - 2.0))
    if first >= 1 or second >= 1:
        return InfiniteAoI(f"interference exponent {max(first, second):.4g} >= 1")
    return decondition_moments(p, 1.0 / (1.0 + load), 1.0 / (1.0 - first), 1.0 / (1.0 - second)).variance


def _require_epsilon(cfg: CellularConfig, value: float, name: str):
    if cfg.epsilon != value:
        raise ValueError(f"{name} needs epsilon = {value}, got {cfg.epsilon}")


def avg_aoi_full_inversion(cfg: CellularConfig, p: ProtocolParams, spec: QuadratureSpec = DEFAULT_QUADRATURE,
                           method: str = "nested") -> AoiValue:
    """
    Average AoI at epsilon = 1. The kernel is z-independent, so the outer
    integral collapses and only K(1) and K(1 - beta) are needed.
    """
    _require_epsilon(cfg, 1.0, "avg_aoi_full_inversion")
    f, eta, beta = p.frame_size, p.eta, p.beta
    if cfg.lambda_s == 0:
        return f / eta + (f * f - 1) * eta / (12.0 * f) + (1 - f) / 2.0
    if method == "nested":
        kernel = lambda m: g_theta(m, 1.0, cfg, spec)
    elif method == "trigamma":
        kernel = lambda m: full_inversion_kernel(m, cfg, spec)
    else:
        raise ValueError(f"Unknown method '{method}'")
    load = cfg.density_ratio * beta
    try:
        growth = safe_exp(load * kernel(1.0 - beta))
    except QuadratureError as exc:
        if beta >= 1:
            return InfiniteAoI(f"every interferer active in every slot: {exc}")
        raise
    if math.isinf(growth):
        return InfiniteAoI("exp(+) term overflows")
    return (f * f - 1) * eta / (12.0 * f) * math.exp(-load * kernel(1.0)) + f / eta * growth + (1 - f) / 2.0


def avg_aoi_full_inversion_approx(cfg: CellularConfig, p: ProtocolParams) -> AoiValue:
    _require_epsilon(cfg, 1.0, "avg_aoi_full_inversion_approx")
    f, eta, beta = p.frame_size, p.eta, p.beta
    load = cfg.effective_ratio * beta * omega(cfg)
    if beta >= 1 and cfg.lambda_s > 0:
        return InfiniteAoI("eta/F = 1: approximation exponent unbounded")
    growth = safe_exp(load * (1.0 - beta) ** (cfg.delta - 1.0)) if cfg.lambda_s > 0 else 1.0
    if math.isinf(growth):
        return InfiniteAoI("exp(+) term overflows")
    return (f * f - 1) * eta / (12.0 * f) * math.exp(-load) + f / eta * growth + (1 - f) / 2.0


def cap_z(cfg: CellularConfig) -> float:
    """z value of the link distance p^(1/(alpha*eps)) beyond which sensors hit the power cap."""
    if cfg.p_max_ratio is None or cfg.epsilon <= 0:
        raise ValueError("The max-power model needs p_max_ratio and epsilon > 0")
    return cfg.association_factor * cfg.lambda_d * math.pi * cfg.p_max_ratio ** (cfg.delta / cfg.epsilon)


def avg_aoi_max_power(cfg: CellularConfig, p: ProtocolParams, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> AoiValue:
    """Average AoI when each sensor's power factor is min(R^(alpha*eps), p_max_ratio)."""
    z_c = cap_z(cfg)
    e_inv_mu = cellular_mean_inv_mu(cfg, p, spec, z_cap=z_c)
    if is_infinite(e_inv_mu):
        return _assemble_mean(p, 0.0, e_inv_mu)
    return _assemble_mean(p, cellular_mean_mu(cfg, p, spec, z_cap=z_c), e_inv_mu)


PRINTED_CAP_FACTOR = 48.0 / 25.0


def _printed_t_ratio(t: float) -> float:
    """t (1 - e^{-48t/25}) / (1 - e^{-t}), expanded near t = 0."""
    if t < 1e-8:
        return PRINTED_CAP_FACTOR * t
    return t * -math.expm1(-PRINTED_CAP_FACTOR * t) / -math.expm1(-t)


def _dblquad(integrand, t_lo: float, s_lo: float, spec: QuadratureSpec) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, _ = integrate.dblquad(integrand, t_lo, np.inf, s_lo, 1.0,
                                     epsabs=spec.abs_tol, epsrel=spec.rel_tol)
    return value


def g_theta_cap_printed(m: float, a: float, z: float, z_c: float, cfg: CellularConfig,
                        spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """
    Displayed max-power kernel g^C((m, a), z): the g_theta integrand with the
    extra (1 - e^{-48zq/25}) factor and X scaled by (z_c/z)^a.
    """
    if z <= 0:
        return 0.0
    scale = (z_c / z) ** a
    x_pow, s_pow = cfg.alpha * (1.0 - cfg.epsilon) / 2.0, cfg.alpha * cfg.epsilon / 2.0

    def integrand(s, t):
        x = (t / z) ** x_pow / (cfg.theta * s ** s_pow) * scale if s > 0 else math.inf
        return _printed_t_ratio(t) * math.exp(-t * s) / (m + x)

    return _dblquad(integrand, 0.0, 0.0, spec) / cfg.association_factor


def g_theta_cap_printed_n(m: float, a: float, b: float, n: int, z: float, z_c: float, cfg: CellularConfig,
                          spec: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """
    Displayed max-power correction g^C_n((m, a, b), z), integrated over
    q >= z_c z^n and z_c z^n <= s <= 1. Zero when that s-range is empty.
    """
    if z <= 0:
        return 0.0
    lower = z_c * z ** n
    if lower >= 1.0:
        return 0.0
    ratio = z_c / z
    half_alpha, eps_alpha = cfg.alpha / 2.0, cfg.alpha * cfg.epsilon / 2.0

    def integrand(s, t):
        q = t / z
        first = m + cfg.theta * q ** -half_alpha * ratio ** a
        second = m + cfg.theta * s ** eps_alpha * q ** (half_alpha * (cfg.epsilon - 1.0)) * ratio ** (a - eps_alpha)
        return _printed_t_ratio(t) * math.exp(-t * s) * (first ** -b - second ** -b)

    return _dblquad(integrand, z * lower, lower, spec) / cfg.association_factor


def _printed_bracket(inner: Callable[[float], float], outer: Callable[[float], float], z_c: float,
                     spec: QuadratureSpec) -> AoiValue:
    """int_0^z_c exp(-z + inner(z)) dz + int_z_c^inf exp(-z + outer(z)) dz."""
    z1, z2 = (z_c + offset for offset in settings.DIVERGENCE_PROBE_Z)
    h1, h2 = outer(z1) - z1, outer(z2) - z2
    if h2 >= h1:
        return InfiniteAoI(f"displayed max-power integrand does not decay beyond z={z_c:.4g}")
    near = quad_finite(lambda z: safe_exp(inner(z) - z), 0.0, z_c, spec)
    far = quad_semi_infinite(lambda z: safe_exp(outer(z) - z), spec, "rational", lower=z_c)
    flagged = [part.message for part in (near, far) if not part.converged]
    if flagged:
        return InfiniteAoI(f"displayed max-power integral did not converge: {flagged[0]}")
    value = near.value + far.value
    return InfiniteAoI("displayed max-power integral overflows") if math.isinf(value) else value


def avg_aoi_max_power_printed(cfg: CellularConfig, p: ProtocolParams,
                              spec: QuadratureSpec = DEFAULT_QUADRATURE) -> AoiValue:
    """
    The max-power AoI display evaluated term by term: four outer integrals
    split at z_c, its (F^2-1)eta/12 coefficient, and its kernel arguments and
    signs. The display leaves the load (lambda_s/lambda_d)(eta/F) implicit;
    it multiplies every kernel here. Kept for comparison with avg_aoi_max_power.
    """
    z_c = cap_z(cfg)
    f, eta = p.frame_size, p.eta
    head = (1 - f) / 2.0
    if cfg.lambda_s == 0:
        return head + (f * f - 1) * eta / 12.0 + f / eta
    load, a_cap = cfg.density_ratio * p.beta, cfg.epsilon / cfg.delta

    def kernel(m, a):
        return lambda z: g_theta_cap_printed(m, a, z, z_c, cfg, spec)

    def correction(m, a, b, n):
        return lambda z: g_theta_cap_printed_n(m, a, b, n, z, z_c, cfg, spec)

    def exponent(*parts):
        return lambda z: load * sum(part(z) for part in parts)

    mu_part = _printed_bracket(exponent(kernel(1.0, 0.0), correction(1.0, a_cap, 1.0, 1)),
                               exponent(kernel(1.0, a_cap), correction(1.0, 0.0, 1.0, -1)), z_c, spec)
    inv_part = _printed_bracket(exponent(kernel(0.0, 0.0), correction(0.0, a_cap, -1.0, 1)),
                                exponent(kernel(0.0, a_cap), correction(1.0, 0.0, -1.0, -1)), z_c, spec)
    for part in (mu_part, inv_part):
        if is_infinite(part):
            return part
    return head + (f * f - 1) * eta / 12.0 * mu_part + f / eta * inv_part


def max_power_printed_gap(cfg: CellularConfig, p: ProtocolParams, spec: QuadratureSpec = DEFAULT_QUADRATURE,
                          tol: float = 1e-6) -> float:
    """Displayed max-power value minus avg_aoi_max_power; logs a warning when they disagree."""
    capped = avg_aoi_max_power(cfg, p, spec)
    printed = avg_aoi_max_power_printed(cfg, p, spec)
    if is_infinite(capped) or is_infinite(printed):
        return 0.0 if is_infinite(capped) and is_infinite(printed) else math.inf
    gap = printed - capped
    if abs(gap) > tol * max(1.0, abs(capped)):
        logger.warning(
            f"Max-power evaluations disagree by {gap:.6g} at eta={p.eta}, F={p.frame_size}; "
            f"capped-kernel value {capped:.6g} is reported"
        )
    return gap


def var_aoi_cellular(cfg: CellularConfig, p: ProtocolParams, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> AoiValue:
    """Variance from E[mu], E[1/mu] and the G_theta expression of E[1/mu^2]."""
    e_inv_mu = cellular_mean_inv_mu(cfg, p, spec)
    if is_infinite(e_inv_mu):
        return e_inv_mu if isinstance(e_inv_mu, InfiniteAoI) else InfiniteAoI("E[1/mu] overflows")
    e_inv_mu_sq = cellular_mean_inv_mu_sq(cfg, p, spec)
    if is_infinite(e_inv_mu_sq):
        return e_inv_mu_sq if isinstance(e_inv_mu_sq, InfiniteAoI) else InfiniteAoI("E[1/mu^2] overflows")
    return decondition_moments(p, cellular_mean_mu(cfg, p, spec), e_inv_mu, e_inv_mu_sq).variance


def var_aoi_sa_cellular(cfg: CellularConfig, eta: float, spec: QuadratureSpec = DEFAULT_QUADRATURE) -> AoiValue:
    return var_aoi_cellular(cfg, ProtocolParams(eta, 1), spec)


def cellular_expectations(cfg: CellularConfig, p: ProtocolParams,
                          spec: QuadratureSpec = DEFAULT_QUADRATURE) -> Tuple[float, AoiValue, AoiValue]:
    """(E[mu], E[1/mu], E[1/mu^2]) of the typical link under unconstrained power control."""
    return (cellular_mean_mu(cfg, p, spec),
            cellular_mean_inv_mu(cfg, p, spec),
            cellular_mean_inv_mu_sq(cfg, p, spec))
