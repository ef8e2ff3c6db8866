# fsa_aoi/utils/bipolar.py
"""
Closed-form AoI results for the Poisson bipolar network.

Transmitters form a PPP of intensity lam, each with a receiver at distance r.
Under FSA an interferer is active in a given slot with probability
beta = eta/F, so every spatial average depends on the topology through the
spatial contention C = lam*pi*r^2*theta^delta*Gamma(1-delta)*Gamma(1+delta)
and on the protocol through beta.
"""

import logging
import math
from typing import Iterable, Optional

import numpy as np

from fsa_aoi.config import settings
from fsa_aoi.utils.models import (
    AoiValue,
    BipolarConfig,
    CondSuccessProb,
    InfiniteAoI,
    ProtocolParams,
    SeriesSpec,
    SpatialContention,
    is_infinite,
)
from fsa_aoi.utils.numerics import (
    DEFAULT_SERIES,
    find_root_bracketed,
    gamma_product,
    gen_binomial,
    safe_exp,
    sum_series,
)
from fsa_aoi.utils.renewal import decondition_moments

logger = logging.getLogger(__name__)


def contention(cfg: BipolarConfig) -> SpatialContention:
    if cfg.lam == 0:
        return SpatialContention(0.0)
    c = cfg.lam * math.pi * cfg.r ** 2 * cfg.theta ** cfg.delta * gamma_product(cfg.delta)
    return SpatialContention(c)


def cond_success_prob_bipolar(distances: Iterable[float], p: ProtocolParams,
                              cfg: BipolarConfig) -> CondSuccessProb:
    """Success probability of the typical link given its interferer distances."""
    d = np.asarray(list(distances), dtype=float)
    if d.size == 0:
        return CondSuccessProb(1.0)
    if np.any(d <= 0):
        raise ValueError("Interferer distances must be positive")
    ratio = d ** cfg.alpha / (cfg.theta * cfg.r ** cfg.alpha)
    log_mu = np.sum(np.log1p(-p.beta / (1.0 + ratio)))
    return CondSuccessProb(float(np.exp(log_mu)))


def mean_mu(cfg: BipolarConfig, p: ProtocolParams) -> float:
    return math.exp(-contention(cfg).c * p.beta)


def mean_inv_mu(cfg: BipolarConfig, p: ProtocolParams) -> float:
    c, beta = contention(cfg).c, p.beta
    if c == 0:
        return 1.0
    if beta >= 1:
        return math.inf
    return safe_exp(c * beta * (1 - beta) ** (cfg.delta - 1))


def inv_mu_sq_series(cfg: BipolarConfig, p: ProtocolParams, s: SeriesSpec = DEFAULT_SERIES) -> float:
    """Sum over k >= 1 of (k+1) * binom(delta-1, k-1) * (-beta)^k."""
    a, beta = cfg.delta - 1.0, p.beta

    def term(j):
        k = j + 1
        return (k + 1) * gen_binomial(a, k - 1) * (-beta) ** k

    return sum_series(term, s).value


def mean_inv_mu_sq(cfg: BipolarConfig, p: ProtocolParams, s: SeriesSpec = DEFAULT_SERIES) -> float:
    c = contention(cfg).c
    if c == 0:
        return 1.0
    return safe_exp(-c * inv_mu_sq_series(cfg, p, s))


def mean_inv_mu_sq_closed(cfg: BipolarConfig, p: ProtocolParams) -> float:
    """Resummed form of mean_inv_mu_sq."""
    c, beta, delta = contention(cfg).c, p.beta, cfg.delta
    if c == 0:
        return 1.0
    if beta >= 1:
        return math.inf
    return safe_exp(c * beta * (1 - beta) ** (delta - 2) * (2 - (1 + delta) * beta))


def _boundary(cfg: BipolarConfig, p: ProtocolParams) -> Optional[InfiniteAoI]:
    if p.beta >= 1 and contention(cfg).c > 0:
        return InfiniteAoI("eta/F = 1: every interferer transmits in every slot")
    return None


def avg_aoi_bipolar(cfg: BipolarConfig, p: ProtocolParams) -> AoiValue:
    infinite = _boundary(cfg, p)
    if infinite:
        return infinite
    f, eta = p.frame_size, p.eta
    value = (f / eta * mean_inv_mu(cfg, p)
             + (f * f - 1) * eta / (12.0 * f) * mean_mu(cfg, p)
             + (1 - f) / 2.0)
    if math.isinf(value):
        return InfiniteAoI("E[1/mu] overflows")
    return value


def avg_aoi_sa(cfg: BipolarConfig, eta: float) -> AoiValue:
    return avg_aoi_bipolar(cfg, ProtocolParams(eta, 1))


def q1(cfg: BipolarConfig, p: ProtocolParams) -> float:
    """avg_aoi_bipolar minus the SA value at rate eta/F."""
    f, beta = p.frame_size, p.beta
    return (f * f - 1) / 12.0 * beta * math.exp(-contention(cfg).c * beta) + (1 - f) / 2.0


def aoi_lower_bound(frame_size: int) -> float:
    f = frame_size
    return 2.0 * math.sqrt((f * f - 1) / 12.0) + (1 - f) / 2.0


def conversion_scheme_a(eta_sa: float) -> ProtocolParams:
    """Double the update rate and use two slots per frame."""
    if not 0 < eta_sa <= 0.5:
        raise ValueError("Scheme (a) needs eta_SA in (0, 0.5]")
    return ProtocolParams(2.0 * eta_sa, 2)


def conversion_scheme_b(eta_sa: float) -> ProtocolParams:
    """Update every frame, with frame size 1/eta_SA."""
    frame = round(1.0 / eta_sa)
    if frame < 1 or not math.isclose(frame * eta_sa, 1.0, rel_tol=1e-9):
        raise ValueError("Scheme (b) needs 1/eta_SA to be an integer")
    return ProtocolParams(1.0, frame)


def y_of_f(cfg: BipolarConfig, eta: float, frame: float) -> float:
    """Derivative of the average AoI with respect to a real-valued frame size."""
    if frame < 1:
        raise ValueError("Frame size must be at least 1")
    c, delta = contention(cfg).c, cfg.delta
    beta = eta / frame
    if beta >= 1 and c > 0:
        return -math.inf
    first = (1.0 / eta + c * (1 - beta) ** (delta - 2) / frame ** 2 * (eta * delta - frame)) \
        * safe_exp(c * beta * (1 - beta) ** (delta - 1))
    second = ((frame ** 2 + 1) * frame + (frame ** 2 - 1) * c * eta) / (12.0 * frame ** 3) \
        * eta * math.exp(-c * beta)
    return first + second - 0.5


def _finite_lower_end(cfg: BipolarConfig, eta: float, f_max: float) -> float:
    """Smallest probed F >= 1 where y(F) is finite (y diverges as F -> eta at eta = 1)."""
    probes = [1.0] + [1.0 + 10.0 ** -k for k in range(8, 0, -1)]
    for lo in probes:
        if math.isfinite(y_of_f(cfg, eta, lo)):
            return lo
    lo = 2.0
    while not math.isfinite(y_of_f(cfg, eta, lo)) and lo < f_max:
        lo = min(float(f_max), 2.0 * lo)
    return lo


def _aoi_or_inf(cfg: BipolarConfig, eta: float, frame: int) -> float:
    value = avg_aoi_bipolar(cfg, ProtocolParams(eta, frame))
    return math.inf if is_infinite(value) else value


def optimal_frame(cfg: BipolarConfig, eta: float, f_max: int = settings.DEFAULT_F_MAX) -> int:
    """Integer frame size minimizing the average AoI, via the root of y(F)."""

    def y(frame):
        return y_of_f(cfg, eta, frame)

    lo = _finite_lower_end(cfg, eta, f_max)
    y_lo, y_hi = y(lo), y(float(f_max))
    if y_lo >= 0:
        return 1
    if y_hi < 0:
        logger.warning(f"y(F) < 0 on [1, {f_max}] for eta={eta}; the average AoI still decreases at F={f_max}")
        return int(f_max)

    root = find_root_bracketed(y, lo, float(f_max), tol=1e-10)
    candidates = sorted({max(1, math.floor(root)), min(int(f_max), math.ceil(root))})
    best = min(candidates, key=lambda frame: (_aoi_or_inf(cfg, eta, frame), frame))
    logger.debug(f"y(F)=0 at F*={root:.6f}; candidates {candidates} -> {best}")
    return best


def spatial_throughput(cfg: BipolarConfig, p: ProtocolParams) -> float:
    """Successful transmissions per slot per link times log(1+theta), in nats."""
    return p.beta * math.exp(-contention(cfg).c * p.beta) * math.log1p(cfg.theta)


def tx_power(p: ProtocolParams, p_tx: float) -> float:
    return p.eta * p_tx / p.frame_size


def _moments(cfg: BipolarConfig, p: ProtocolParams, s: SeriesSpec):
    return mean_mu(cfg, p), mean_inv_mu(cfg, p), mean_inv_mu_sq(cfg, p, s)


def var_aoi_bipolar(cfg: BipolarConfig, p: ProtocolParams, s: SeriesSpec = DEFAULT_SERIES) -> AoiValue:
    infinite = _boundary(cfg, p)
    if infinite:
        return infinite
    e_mu, e_inv, e_inv_sq = _moments(cfg, p, s)
    if math.isinf(e_inv_sq) or math.isinf(e_inv):
        return InfiniteAoI("E[1/mu^2] overflows")
    return decondition_moments(p, e_mu, e_inv, e_inv_sq).variance


def var_aoi_sa(cfg: BipolarConfig, eta: float, s: SeriesSpec = DEFAULT_SERIES) -> AoiValue:
    return var_aoi_bipolar(cfg, ProtocolParams(eta, 1), s)


def var_aoi_bipolar_printed(cfg: BipolarConfig, p: ProtocolParams, s: SeriesSpec = DEFAULT_SERIES) -> AoiValue:
    """
    Seven-term variance display with the mixed term written out and the
    constant (F^2+2F-3)/4. Kept for comparison with var_aoi_bipolar.
    """
    infinite = _boundary(cfg, p)
    if infinite:
        return infinite
    f, eta, beta = p.frame_size, p.eta, p.beta
    c, delta = contention(cfg).c, cfg.delta
    e_mu, e_inv, e_inv_sq = _moments(cfg, p, s)
    mixed = 1.0 if c == 0 else safe_exp(c * beta * ((1 - beta) ** (delta - 1) - 1))
    return (2 * f * f / eta ** 2 * e_inv_sq
            - f * f / eta ** 2 * e_inv ** 2
            - (f * f - 1) ** 2 * eta ** 2 / (144.0 * f * f) * e_mu ** 2
            - (f * f - 1) / 6.0 * mixed
            - f * f / eta * e_inv
            + (f * f - 1) * eta / 12.0 * e_mu
            + (f * f + 2 * f - 3) / 4.0)


def variance_assembly_gap(cfg: BipolarConfig, p: ProtocolParams, s: SeriesSpec = DEFAULT_SERIES,
                          tol: float = 1e-9) -> float:
    """Printed assembly minus moment assembly; logs a warning when they disagree."""
    moment = var_aoi_bipolar(cfg, p, s)
    printed = var_aoi_bipolar_printed(cfg, p, s)
    if is_infinite(moment) or is_infinite(printed):
        return 0.0 if is_infinite(moment) and is_infinite(printed) else math.inf
    gap = printed - moment
    if abs(gap) > tol * max(1.0, abs(moment)):
        logger.warning(
            f"Variance assemblies disagree by {gap:.6g} at eta={p.eta}, F={p.frame_size}; "
            f"moment assembly {moment:.6g} is reported"
        )
    return gap


def q2_bipolar(cfg: BipolarConfig, p: ProtocolParams, s: SeriesSpec = DEFAULT_SERIES) -> AoiValue:
    """var_aoi_bipolar minus the SA variance at rate eta/F."""
    infinite = _boundary(cfg, p)
    if infinite:
        return infinite
    f, beta = p.frame_size, p.beta
    c, delta = contention(cfg).c, cfg.delta
    e_mu, e_inv = mean_mu(cfg, p), mean_inv_mu(cfg, p)
    mixed = 1.0 if c == 0 else safe_exp(c * beta * ((1 - beta) ** (delta - 1) - 1))
    k = f * f - 1
    return (-(f - 1) / beta * e_inv
            - k * k * beta * beta / 144.0 * e_mu ** 2
            - k / 6.0 * mixed
            + k * f * beta / 12.0 * e_mu
            + k / 4.0)
