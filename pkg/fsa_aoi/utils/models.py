# fsa_aoi/utils/models.py

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from fsa_aoi.config import settings


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = settings.QUAD_ABS_TOL
    rel_tol: float = settings.QUAD_REL_TOL
    max_subdivisions: int = settings.QUAD_MAX_SUBDIVISIONS
    s_grading_ratio: float = settings.S_GRADING_RATIO
    s_grading_levels: int = settings.S_GRADING_LEVELS
    s_nodes_per_panel: int = settings.S_NODES_PER_PANEL

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("Quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")
        if not 0 < self.s_grading_ratio < 1:
            raise ValueError("s_grading_ratio must lie in (0, 1)")
        if self.s_grading_levels < 0 or self.s_nodes_per_panel < 2:
            raise ValueError("Invalid graded mesh settings")


@dataclass(frozen=True)
class SeriesSpec:
    term_tol: float = settings.SERIES_TERM_TOL
    max_terms: int = settings.SERIES_MAX_TERMS
    divergence_guard: float = settings.SERIES_DIVERGENCE_GUARD

    def __post_init__(self):
        if self.term_tol <= 0:
            raise ValueError("term_tol must be positive")
        if self.max_terms < 2:
            raise ValueError("max_terms must be at least 2")
        if self.divergence_guard <= 1:
            raise ValueError("divergence_guard must exceed 1")


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error: float
    converged: bool = True
    message: str = ""

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms: int
    last_term: float
    converged: bool = True

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class InfiniteAoI:
    """Typed stand-in for a divergent AoI value."""
    cause: str = "divergent"

    def __float__(self):
        return math.inf

    def __str__(self):
        return settings.INF_TOKEN


AoiValue = Union[float, InfiniteAoI]


def is_infinite(value) -> bool:
    if isinstance(value, InfiniteAoI):
        return True
    try:
        return math.isinf(float(value))
    except (TypeError, ValueError):
        return False


@dataclass(frozen=True)
class ProtocolParams:
    eta: float
    frame_size: int = 1

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if int(self.frame_size) != self.frame_size or self.frame_size < 1:
            raise ValueError(f"frame_size must be a positive integer, got {self.frame_size}")
        object.__setattr__(self, "frame_size", int(self.frame_size))

    @property
    def beta(self) -> float:
        """Effective per-slot updating rate eta/F."""
        return self.eta / self.frame_size


@dataclass(frozen=True)
class CondSuccessProb:
    mu: float

    def __post_init__(self):
        if not 0 < self.mu <= 1:
            raise ValueError(f"mu must lie in (0, 1], got {self.mu}")


@dataclass
class AoiStats:
    mean: float
    second_moment: float
    variance: float
    ci_halfwidth_mean: Optional[float] = None
    sample_count: Optional[int] = None
    warnings: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.variance < -1e-9 * max(1.0, abs(self.second_moment)):
            raise ValueError(f"Negative AoI variance {self.variance}")
        if self.mean < 1 - 1e-9:
            raise ValueError(f"AoI mean below one slot: {self.mean}")
        self.variance = max(self.variance, 0.0)


@dataclass(frozen=True)
class BipolarConfig:
    lam: float
    r: float
    alpha: float
    theta: float

    def __post_init__(self):
        if self.alpha <= 2:
            raise ValueError("alpha must exceed 2")
        if self.lam < 0 or self.r <= 0 or self.theta <= 0:
            raise ValueError("Require lam >= 0, r > 0, theta > 0")

    @property
    def delta(self) -> float:
        return 2.0 / self.alpha


@dataclass(frozen=True)
class SpatialContention:
    c: float

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("Spatial contention must be non-negative")


@dataclass(frozen=True)
class CellularConfig:
    lambda_s: float
    lambda_d: float
    alpha: float
    theta: float
    epsilon: float = 0.0
    p_max_ratio: Optional[float] = None
    association_factor: float = 1.25

    def __post_init__(self):
        if self.alpha <= 2:
            raise ValueError("alpha must exceed 2")
        # lambda_s = 0 is accepted as the exact interference-free limit
        if self.lambda_s < 0 or self.lambda_d <= 0 or self.theta <= 0:
            raise ValueError("Require lambda_s >= 0, lambda_d > 0, theta > 0")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.p_max_ratio is not None and self.p_max_ratio <= 0:
            raise ValueError("p_max_ratio must be positive when given")
        if self.association_factor <= 0:
            raise ValueError("association_factor must be positive")

    @property
    def delta(self) -> float:
        return 2.0 / self.alpha

    @property
    def density_ratio(self) -> float:
        return self.lambda_s / self.lambda_d

    @property
    def effective_ratio(self) -> float:
        """Density ratio scaled by the association-distance correction."""
        return self.density_ratio / self.association_factor


@dataclass(frozen=True)
class GThetaArgs:
    """Arguments of the g_theta kernel, or of G_theta when coeffs = (a, b, c, d, l, rho) is set."""
    m: float
    z: float
    coeffs: Optional[Tuple[float, float, float, float, float, float]] = None

    def __post_init__(self):
        if self.z < 0:
            raise ValueError(f"z must be non-negative, got {self.z}")
        if self.coeffs is None:
            if self.m < 0:
                raise ValueError(f"m must be non-negative, got {self.m}")
        else:
            if len(self.coeffs) != 6:
                raise ValueError("G_theta takes six coefficients (a, b, c, d, l, rho)")
            object.__setattr__(self, "coeffs", tuple(float(v) for v in self.coeffs))
            if self.coeffs[0] < 0:
                raise ValueError("Coefficient a must be non-negative")


@dataclass(frozen=True)
class PowerModel:
    kind: str = "constant"
    epsilon: float = 0.0
    p_max_ratio: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("constant", "fractional", "capped"):
            raise ValueError(f"Unknown power model {self.kind}")
        if self.kind == "capped" and (self.p_max_ratio is None or self.epsilon <= 0):
            raise ValueError("Capped power needs epsilon > 0 and p_max_ratio")

    @classmethod
    def from_config(cls, cfg) -> "PowerModel":
        if isinstance(cfg, BipolarConfig):
            return cls("constant")
        if cfg.p_max_ratio is not None and cfg.epsilon > 0:
            return cls("capped", cfg.epsilon, cfg.p_max_ratio)
        if cfg.epsilon > 0:
            return cls("fractional", cfg.epsilon)
        return cls("constant")

    def factor(self, link_distances: np.ndarray, alpha: float) -> np.ndarray:
        """Transmit power relative to P_tx for sensors at the given link distances."""
        link_distances = np.asarray(link_distances, dtype=float)
        if self.kind == "constant":
            return np.ones_like(link_distances)
        compensation = link_distances ** (alpha * self.epsilon)
        if self.kind == "capped":
            return np.minimum(compensation, self.p_max_ratio)
        return compensation


@dataclass(frozen=True)
class SimSpec:
    num_realizations: int = 100
    slots_per_realization: int = 30000
    burn_in_successes: int = settings.BURN_IN_SUCCESSES
    fading: str = "rayleigh"
    torus_wrap: bool = True
    power_model: Optional[PowerModel] = None
    window_halfwidth: Optional[float] = None
    links_per_realization: int = 1
    p_tx: float = 1.0

    def __post_init__(self):
        if self.num_realizations < 1 or self.slots_per_realization < 1:
            raise ValueError("Need at least one realization and one slot")
        if self.fading != "rayleigh":
            raise ValueError("Only unit-mean Rayleigh fading is supported")
        if self.links_per_realization < 1:
            raise ValueError("links_per_realization must be at least 1")

    def check_frames(self, p: ProtocolParams):
        if self.slots_per_realization % p.frame_size:
            raise ValueError(
                f"slots_per_realization={self.slots_per_realization} is not a multiple of F={p.frame_size}"
            )


@dataclass
class NetworkRealization:
    kind: str  # 'bipolar' or 'cellular'
    transmitters: np.ndarray
    receivers: np.ndarray
    association: np.ndarray
    link_distances: np.ndarray
    typical_index: int
    window_halfwidth: float
    seed: int
    torus_wrap: bool = True
    resamples: int = 0

    @property
    def num_transmitters(self) -> int:
        return len(self.transmitters)


@dataclass
class LinkRun:
    """Outcome of running the protocol on one monitored link."""
    link: int
    mean: float
    second_moment: float
    sample_count: int
    deliveries: int
    transmissions: int
    slots: int
    energy_per_slot: float
    infinite: bool = False

    @property
    def success_rate(self) -> float:
        return self.deliveries / self.slots


@dataclass
class EstimateResult:
    stats: Optional[AoiStats]
    success_rate: float
    success_rate_ci: float
    energy_per_slot: float
    energy_ci: float
    mean_mu: float
    mean_mu_ci: float
    activity_rate: float
    infinite_fraction: float
    comparable: bool
    realizations: int
    resamples: int = 0
    link_mean: Optional[float] = None
    warnings: List[str] = field(default_factory=list)
