# fsa_aoi/utils/renewal.py
"""
AoI of the FSA renewal process with the topology held fixed.

Given the per-attempt success probability mu, deliveries form a renewal
sequence: a source updates in a frame with probability eta, in a slot drawn
uniformly from the frame, and the update gets through with probability mu.
The inter-delivery interval is I = F*X + (N_w - N_{w-1}) with X geometric
with parameter eta*mu and N uniform on {1..F}.

Age convention: a delivery in slot t gives age 1 in slot t+1, and the age
grows by one per slot until the next delivery, so an interval of length I
contributes the ages 1, 2, ..., I.
"""

import logging
import math
import warnings
from typing import Optional, Tuple

import numpy as np

from fsa_aoi.config import settings
from fsa_aoi.utils.errors import LowSampleWarning
from fsa_aoi.utils.models import AoiStats, CondSuccessProb, ProtocolParams

logger = logging.getLogger(__name__)


def geometric_moments(p_succ: float) -> Tuple[float, float, float]:
    """First three raw moments of a geometric variable on {1, 2, ...}."""
    if not 0 < p_succ <= 1:
        raise ValueError(f"p_succ must lie in (0, 1], got {p_succ}")
    p = p_succ
    return 1.0 / p, (2.0 - p) / p ** 2, (p * p - 6.0 * p + 6.0) / p ** 3


def frame_slot_moments(frame_size: int) -> Tuple[float, float]:
    """E[N] and E[N^2] for the slot index N uniform on {1..F}."""
    f = frame_size
    return (f + 1) / 2.0, (f + 1) * (2 * f + 1) / 6.0


def interval_moments(p: ProtocolParams, mu: CondSuccessProb) -> Tuple[float, float, float]:
    """E[I], E[I^2], E[I^3] of the inter-delivery interval."""
    f = p.frame_size
    m1, m2, m3 = geometric_moments(p.eta * mu.mu)
    # N_w - N_{w-1} is symmetric with second moment 2*Var(N)
    jitter_sq = (f * f - 1) / 6.0
    return f * m1, f * f * m2 + jitter_sq, f ** 3 * m3 + 3.0 * f * m1 * jitter_sq


def cond_avg_aoi(p: ProtocolParams, mu: CondSuccessProb) -> float:
    f, rate = p.frame_size, p.eta * mu.mu
    return (f * f - 1) / (12.0 * f) * rate + f / rate + (1 - f) / 2.0


def cond_quad_aoi(p: ProtocolParams, mu: CondSuccessProb) -> float:
    f, rate = p.frame_size, p.eta * mu.mu
    return (2.0 * f * f / rate ** 2
            - f * (2 * f - 1) / rate
            + (f * f - 1) / (12.0 * f) * rate
            + f * (f - 1) / 2.0)


def cond_var_aoi(p: ProtocolParams, mu: CondSuccessProb) -> float:
    mean = cond_avg_aoi(p, mu)
    return max(cond_quad_aoi(p, mu) - mean * mean, 0.0)


def cond_aoi_stats(p: ProtocolParams, mu: CondSuccessProb) -> AoiStats:
    mean = cond_avg_aoi(p, mu)
    second = cond_quad_aoi(p, mu)
    return AoiStats(mean=mean, second_moment=second, variance=second - mean * mean)


def decondition_moments(p: ProtocolParams, e_mu: float, e_inv_mu: float, e_inv_mu_sq: float) -> AoiStats:
    """
    Spatial AoI moments from E[mu], E[1/mu] and E[1/mu^2].

    Both conditional formulas are linear in mu, 1/mu and 1/mu^2, so the
    spatial average is taken term by term.
    """
    f, eta = p.frame_size, p.eta
    linear = (f * f - 1) * eta / (12.0 * f) * e_mu
    mean = f / eta * e_inv_mu + linear + (1 - f) / 2.0
    second = (2.0 * f * f / eta ** 2 * e_inv_mu_sq
              - f * (2 * f - 1) / eta * e_inv_mu
              + linear
              + f * (f - 1) / 2.0)
    return AoiStats(mean=mean, second_moment=second, variance=second - mean * mean)


def simulate_deliveries(p: ProtocolParams, mu: CondSuccessProb, num_slots: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Absolute slot indices (0-based) of successful deliveries, in order."""
    f = p.frame_size
    frames = num_slots // f
    attempts = rng.random(frames) < p.eta
    slots = rng.integers(0, f, size=frames)
    delivered = attempts & (rng.random(frames) < mu.mu)
    frame_idx = np.nonzero(delivered)[0]
    return frame_idx * f + slots[delivered]


def aoi_from_deliveries(delivery_slots: np.ndarray,
                        burn_in: int = settings.BURN_IN_SUCCESSES,
                        batches: int = settings.CI_BATCHES) -> Optional[AoiStats]:
    """
    Time-average AoI moments over the complete inter-delivery intervals
    that follow the first ``burn_in`` deliveries.

    Returns None when no complete interval remains.
    """
    delivery_slots = np.asarray(delivery_slots)
    burn = min(burn_in, len(delivery_slots) // 2)
    intervals = np.diff(delivery_slots[burn:]).astype(float)
    n = len(intervals)
    if n == 0:
        return None

    area = intervals * (intervals + 1.0) / 2.0
    area_sq = intervals * (intervals + 1.0) * (2.0 * intervals + 1.0) / 6.0
    total_time = intervals.sum()
    mean = area.sum() / total_time
    second = area_sq.sum() / total_time

    notes = []
    if n < settings.BURN_IN_SUCCESSES:
        message = f"Only {n} inter-delivery intervals after burn-in"
        warnings.warn(message, LowSampleWarning, stacklevel=2)
        notes.append(message)

    ci = None
    groups = min(batches, n)
    if groups >= 2:
        batch_means = np.array([
            a.sum() / t.sum()
            for a, t in zip(np.array_split(area, groups), np.array_split(intervals, groups))
        ])
        ci = settings.CI_Z_SCORE * batch_means.std(ddof=1) / math.sqrt(groups)

    return AoiStats(mean=mean, second_moment=second, variance=second - mean * mean,
                    ci_halfwidth_mean=ci, sample_count=n, warnings=notes)


def renewal_oracle_sim(p: ProtocolParams, mu: CondSuccessProb, num_slots: int, seed: int,
                       burn_in: int = settings.BURN_IN_SUCCESSES,
                       batches: int = settings.CI_BATCHES) -> AoiStats:
    """Monte Carlo of the per-frame update process with a fixed success probability."""
    needed = 10.0 * p.frame_size / (p.eta * mu.mu)
    if num_slots < needed:
        raise ValueError(f"num_slots={num_slots} is below the minimum {math.ceil(needed)}")
    rng = np.random.default_rng(seed)
    deliveries = simulate_deliveries(p, mu, num_slots, rng)
    stats = aoi_from_deliveries(deliveries, burn_in=burn_in, batches=batches)
    if stats is None:
        raise ValueError(f"No complete inter-delivery interval in {num_slots} slots")
    logger.debug(f"Renewal oracle: {len(deliveries)} deliveries, mean AoI {stats.mean:.4f}")
    return stats
