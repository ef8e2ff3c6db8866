# fsa_aoi/utils/simulator.py
"""
Spatial-temporal Monte Carlo of FSA updating over Poisson networks.

Each realization samples a topology on a square window [-W, W]^2 (torus
metric by default), then runs the protocol frame by frame: a source
updates in a frame with probability eta, in a uniformly drawn slot, and
the update is delivered when the Rayleigh-faded SIR at its receiver
exceeds theta. Only the monitored links are tracked; the rest of the
network acts as interference.

Random streams: SeedSequence(seed) spawns one child per realization; each
child spawns a topology stream and a protocol stream.

Palm conventions:
    bipolar   the typical receiver sits at the origin with its transmitter
              at distance r in a uniform direction; interferers form an
              independent PPP.
    cellular  a fusion centre is added at the origin and the typical
              sensor is drawn uniformly among the sensors of its cell.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from fsa_aoi.config import settings
from fsa_aoi.utils.errors import FsaAoiError
from fsa_aoi.utils.models import (
    AoiStats,
    BipolarConfig,
    CellularConfig,
    CondSuccessProb,
    EstimateResult,
    InfiniteAoI,
    LinkRun,
    NetworkRealization,
    PowerModel,
    ProtocolParams,
    SimSpec,
)
from fsa_aoi.utils.renewal import aoi_from_deliveries

logger = logging.getLogger(__name__)

NetworkConfig = Union[BipolarConfig, CellularConfig]
SeedLike = Union[int, np.random.SeedSequence]

# Upper bound on node-frame cells drawn per block
BLOCK_CELLS = 4_000_000
REJECTION_BATCH = 1024


def _seed_value(seed: SeedLike) -> int:
    if isinstance(seed, np.random.SeedSequence):
        return int(seed.generate_state(1)[0])
    return int(seed)


def default_window_halfwidth(cfg: NetworkConfig, p: ProtocolParams) -> float:
    """Half-width of the simulation window in meters."""
    if isinstance(cfg, CellularConfig):
        return settings.CELLULAR_WINDOW_SPACINGS / math.sqrt(cfg.lambda_d)
    if cfg.lam == 0:
        return settings.WINDOW_SPACING_MULTIPLE * cfg.r
    spacing = settings.WINDOW_SPACING_MULTIPLE / (2.0 * math.sqrt(cfg.lam))
    # Radius where the contention from interferers outside the window drops below the tolerance
    tail = (cfg.lam * p.beta * 2.0 * math.pi * cfg.theta * cfg.r ** cfg.alpha
            / ((cfg.alpha - 2.0) * settings.WINDOW_TAIL_TOLERANCE)) ** (1.0 / (cfg.alpha - 2.0))
    return max(spacing, tail)


def torus_delta(a: np.ndarray, b: np.ndarray, halfwidth: float, wrap: bool = True) -> np.ndarray:
    """Displacement a - b, reduced to the minimum image on the torus when wrap is set."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if wrap:
        side = 2.0 * halfwidth
        diff = np.mod(diff + halfwidth, side) - halfwidth
    return diff


def torus_distance(a: np.ndarray, b: np.ndarray, halfwidth: float, wrap: bool = True) -> np.ndarray:
    return np.linalg.norm(torus_delta(a, b, halfwidth, wrap), axis=-1)


def _uniform_points(rng: np.random.Generator, count: int, halfwidth: float) -> np.ndarray:
    return rng.uniform(-halfwidth, halfwidth, size=(count, 2))


def _check_window(density: float, halfwidth: float, label: str):
    expected = density * (2.0 * halfwidth) ** 2
    if 0 < expected < settings.MIN_EXPECTED_INTERFERERS:
        logger.warning(
            f"Window half-width {halfwidth:.4g} m holds only {expected:.1f} expected {label}; "
            f"interference may be truncated"
        )


def sample_bipolar(cfg: BipolarConfig, window_halfwidth: float, seed: SeedLike,
                   torus_wrap: bool = True) -> NetworkRealization:
    if window_halfwidth <= 0:
        raise ValueError("window_halfwidth must be positive")
    _check_window(cfg.lam, window_halfwidth, "interferers")
    rng = np.random.default_rng(seed)
    count = rng.poisson(cfg.lam * (2.0 * window_halfwidth) ** 2)

    phi = rng.uniform(0.0, 2.0 * np.pi, size=count + 1)
    transmitters = np.vstack(([0.0, 0.0], _uniform_points(rng, count, window_halfwidth)))
    receivers = transmitters.copy()
    # Typical pair: receiver at the origin, transmitter at distance r
    transmitters[0] = cfg.r * np.array([math.cos(phi[0]), math.sin(phi[0])])
    receivers[1:] = transmitters[1:] + cfg.r * np.column_stack((np.cos(phi[1:]), np.sin(phi[1:])))
    if torus_wrap:
        receivers = torus_delta(receivers, 0.0, window_halfwidth)

    logger.debug(f"Bipolar realization: {count} interferers in half-width {window_halfwidth:.4g} m")
    return NetworkRealization(
        kind="bipolar",
        transmitters=transmitters,
        receivers=receivers,
        association=np.arange(count + 1),
        link_distances=np.full(count + 1, float(cfg.r)),
        typical_index=0,
        window_halfwidth=float(window_halfwidth),
        seed=_seed_value(seed),
        torus_wrap=torus_wrap,
    )


def _centre_tree(centres: np.ndarray, halfwidth: float, wrap: bool) -> cKDTree:
    if wrap:
        side = 2.0 * halfwidth
        return cKDTree(np.mod(centres + halfwidth, side), boxsize=side)
    return cKDTree(centres)


def _associate(tree: cKDTree, points: np.ndarray, halfwidth: float, wrap: bool) -> Tuple[np.ndarray, np.ndarray]:
    if len(points) == 0:
        return np.zeros(0), np.zeros(0, dtype=int)
    query = np.mod(points + halfwidth, 2.0 * halfwidth) if wrap else points
    distances, index = tree.query(query)
    return distances, index


def _point_in_origin_cell(rng: np.random.Generator, tree: cKDTree, halfwidth: float, wrap: bool) -> np.ndarray:
    while True:
        candidates = _uniform_points(rng, REJECTION_BATCH, halfwidth)
        _, index = _associate(tree, candidates, halfwidth, wrap)
        inside = np.nonzero(index == 0)[0]
        if len(inside):
            return candidates[inside[0]]


def sample_cellular(cfg: CellularConfig, window_halfwidth: float, seed: SeedLike,
                    torus_wrap: bool = True) -> NetworkRealization:
    """Sensor and centre PPPs with nearest-centre association; typical sensor first."""
    if window_halfwidth <= 0:
        raise ValueError("window_halfwidth must be positive")
    _check_window(cfg.lambda_s, window_halfwidth, "sensors")
    rng = np.random.default_rng(seed)
    area = (2.0 * window_halfwidth) ** 2

    resamples = 0
    while True:
        centres = np.vstack(([0.0, 0.0], _uniform_points(rng, rng.poisson(cfg.lambda_d * area), window_halfwidth)))
        sensors = _uniform_points(rng, rng.poisson(cfg.lambda_s * area), window_halfwidth)
        tree = _centre_tree(centres, window_halfwidth, torus_wrap)
        distances, association = _associate(tree, sensors, window_halfwidth, torus_wrap)

        if cfg.lambda_s == 0:
            typical = _point_in_origin_cell(rng, tree, window_halfwidth, torus_wrap)
            sensors = np.vstack((typical, sensors))
            typical_distance, _ = _associate(tree, typical[None, :], window_halfwidth, torus_wrap)
            distances = np.concatenate((typical_distance, distances))
            association = np.concatenate(([0], association)).astype(int)
            break

        in_cell = np.nonzero(association == 0)[0]
        if len(in_cell):
            pick = in_cell[rng.integers(len(in_cell))]
            order = np.concatenate(([pick], np.delete(np.arange(len(sensors)), pick)))
            sensors, distances, association = sensors[order], distances[order], association[order]
            break

        resamples += 1
        if resamples > settings.MAX_CELLULAR_RESAMPLES:
            raise FsaAoiError(f"No sensor in the origin cell after {resamples} resamples")

    if resamples:
        logger.warning(f"Cellular realization resampled {resamples} time(s) for an empty typical cell")
    logger.debug(f"Cellular realization: {len(sensors)} sensors, {len(centres)} centres")
    return NetworkRealization(
        kind="cellular",
        transmitters=sensors,
        receivers=centres,
        association=np.asarray(association, dtype=int),
        link_distances=np.asarray(distances, dtype=float),
        typical_index=0,
        window_halfwidth=float(window_halfwidth),
        seed=_seed_value(seed),
        torus_wrap=torus_wrap,
        resamples=resamples,
    )


def sample_network(cfg: NetworkConfig, window_halfwidth: float, seed: SeedLike,
                   torus_wrap: bool = True) -> NetworkRealization:
    if isinstance(cfg, BipolarConfig):
        return sample_bipolar(cfg, window_halfwidth, seed, torus_wrap)
    if isinstance(cfg, CellularConfig):
        return sample_cellular(cfg, window_halfwidth, seed, torus_wrap)
    raise TypeError(f"Unsupported network config {type(cfg).__name__}")


def _power_model(cfg: NetworkConfig, spec: SimSpec) -> PowerModel:
    if spec.power_model is not None:
        return spec.power_model
    return PowerModel.from_config(cfg)


def _link_gains(real: NetworkRealization, link: int, cfg: NetworkConfig, power: PowerModel,
                p_tx: float = 1.0) -> np.ndarray:
    """Mean received power at the receiver of ``link`` from every transmitter."""
    receiver = real.receivers[real.association[link]]
    distances = torus_distance(real.transmitters, receiver, real.window_halfwidth, real.torus_wrap)
    distances = np.maximum(distances, 1e-9)
    return p_tx * power.factor(real.link_distances, cfg.alpha) * distances ** (-cfg.alpha)


def realization_mu(real: NetworkRealization, p: ProtocolParams, cfg: NetworkConfig,
                   link: Optional[int] = None, power: Optional[PowerModel] = None) -> CondSuccessProb:
    """Fading- and activity-averaged success probability of one link given the topology."""
    link = real.typical_index if link is None else link
    power = power or PowerModel.from_config(cfg)
    gains = _link_gains(real, link, cfg, power)
    others = np.delete(gains, link)
    if len(others) == 0:
        return CondSuccessProb(1.0)
    x = gains[link] / (cfg.theta * others)
    log_mu = np.sum(np.log1p(-p.beta / (1.0 + x)))
    return CondSuccessProb(max(float(np.exp(log_mu)), np.finfo(float).tiny))


def simulate_links(real: NetworkRealization, p: ProtocolParams, cfg: NetworkConfig, spec: SimSpec,
                   rng: np.random.Generator, links: Sequence[int]) -> Tuple[List[LinkRun], float]:
    """
    Run the protocol on the whole network and track the monitored links.

    Returns one LinkRun per monitored link and the empirical per-slot
    activity rate of all sources.
    """
    spec.check_frames(p)
    f = p.frame_size
    frames = spec.slots_per_realization // f
    total_slots = frames * f
    n = real.num_transmitters
    power = _power_model(cfg, spec)
    gains = [_link_gains(real, j, cfg, power, spec.p_tx) for j in links]
    factors = power.factor(real.link_distances[list(links)], cfg.alpha)

    block = max(1, min(settings.FRAME_BLOCK, BLOCK_CELLS // max(n, 1)))
    deliveries = [[] for _ in links]
    transmissions = np.zeros(len(links), dtype=np.int64)
    active_total = 0

    for start in range(0, frames, block):
        size = min(block, frames - start)
        active = rng.random((n, size)) < p.eta
        slots = rng.integers(0, f, size=(n, size), dtype=np.int16)
        active_total += int(active.sum())

        for k, j in enumerate(links):
            cols = np.nonzero(active[j])[0]
            transmissions[k] += len(cols)
            if len(cols) == 0:
                continue
            mine = slots[j, cols]
            colliding = active[:, cols] & (slots[:, cols] == mine)
            colliding[j] = False
            rows, hit = np.nonzero(colliding)
            fading = rng.exponential(size=len(rows))
            interference = np.bincount(hit, weights=fading * gains[k][rows], minlength=len(cols))
            signal = rng.exponential(size=len(cols)) * gains[k][j]
            ok = signal > cfg.theta * interference
            deliveries[k].append((start + cols[ok]).astype(np.int64) * f + mine[ok])

    runs = []
    for k, j in enumerate(links):
        slots_hit = np.concatenate(deliveries[k]) if deliveries[k] else np.zeros(0, dtype=np.int64)
        energy = transmissions[k] * spec.p_tx * float(factors[k]) / total_slots
        stats = None
        if len(slots_hit) >= spec.burn_in_successes + 2:
            stats = aoi_from_deliveries(slots_hit, burn_in=spec.burn_in_successes)
        if stats is None:
            runs.append(LinkRun(j, math.nan, math.nan, 0, len(slots_hit), int(transmissions[k]),
                                total_slots, energy, infinite=True))
        else:
            runs.append(LinkRun(j, stats.mean, stats.second_moment, stats.sample_count, len(slots_hit),
                                int(transmissions[k]), total_slots, energy))

    activity = active_total / (n * total_slots) if n else 0.0
    return runs, activity


def run_fsa(real: NetworkRealization, p: ProtocolParams, cfg: NetworkConfig, spec: SimSpec,
            seed: SeedLike = 0) -> Union[AoiStats, InfiniteAoI]:
    """Time-average AoI of the typical link of one realization."""
    rng = np.random.default_rng(seed)
    spec.check_frames(p)
    f = p.frame_size
    frames = spec.slots_per_realization // f
    runs, _ = simulate_links(real, p, cfg, spec, rng, [real.typical_index])
    if runs[0].infinite:
        return InfiniteAoI(f"{runs[0].deliveries} deliveries in {frames * f} slots, "
                           f"below the burn-in budget of {spec.burn_in_successes}")
    run = runs[0]
    return AoiStats(mean=run.mean, second_moment=run.second_moment,
                    variance=run.second_moment - run.mean ** 2, sample_count=run.sample_count)


def _monitored_links(real: NetworkRealization, count: int, rng: np.random.Generator) -> List[int]:
    others = np.delete(np.arange(real.num_transmitters), real.typical_index)
    extra = min(count - 1, len(others))
    chosen = rng.choice(others, size=extra, replace=False) if extra > 0 else []
    return [real.typical_index] + [int(j) for j in chosen]


def _run_realization(task):
    cfg, p, spec, window, seed_seq = task
    topology_seq, protocol_seq = seed_seq.spawn(2)
    real = sample_network(cfg, window, topology_seq, spec.torus_wrap)
    rng = np.random.default_rng(protocol_seq)
    links = _monitored_links(real, spec.links_per_realization, rng)
    runs, activity = simulate_links(real, p, cfg, spec, rng, links)
    mu = realization_mu(real, p, cfg, power=_power_model(cfg, spec)).mu
    return runs, activity, mu, real.resamples


def _mean_ci(values: np.ndarray) -> Tuple[float, float]:
    if len(values) == 0:
        return math.nan, math.nan
    if len(values) == 1:
        return float(values[0]), math.nan
    return float(values.mean()), settings.CI_Z_SCORE * float(values.std(ddof=1)) / math.sqrt(len(values))


def estimate(cfg: NetworkConfig, p: ProtocolParams, spec: SimSpec, seed: int = 0,
             threads: int = settings.DEFAULT_THREADS) -> EstimateResult:
    """
    Spatial-temporal AoI estimate: per-realization time averages of the
    typical link, averaged over independent topologies.
    """
    spec.check_frames(p)
    window = spec.window_halfwidth or default_window_halfwidth(cfg, p)
    children = np.random.SeedSequence(seed).spawn(spec.num_realizations)
    tasks = [(cfg, p, spec, window, child) for child in children]
    logger.info(
        f"Simulating {spec.num_realizations} realizations x {spec.slots_per_realization} slots "
        f"(eta={p.eta}, F={p.frame_size}, half-width {window:.4g} m, threads={threads})"
    )

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_run_realization, tasks))
    else:
        outcomes = [_run_realization(task) for task in tasks]

    typical = [runs[0] for runs, _, _, _ in outcomes]
    finite = [run for run in typical if not run.infinite]
    infinite_fraction = 1.0 - len(finite) / len(typical)
    comparable = infinite_fraction <= settings.INFINITE_SAMPLE_LIMIT
    notes = []
    if not comparable:
        message = (f"{infinite_fraction:.0%} of realizations delivered too few updates; "
                   f"estimate is not comparable to the analytic value")
        logger.warning(message)
        notes.append(message)

    stats = None
    if finite:
        means = np.array([run.mean for run in finite])
        seconds = np.array([run.second_moment for run in finite])
        mean, ci = _mean_ci(means)
        second = float(seconds.mean())
        stats = AoiStats(mean=mean, second_moment=second, variance=second - mean * mean,
                         ci_halfwidth_mean=None if math.isnan(ci) else ci,
                         sample_count=len(finite), warnings=list(notes))

    all_finite = [run.mean for runs, _, _, _ in outcomes for run in runs if not run.infinite]
    success, success_ci = _mean_ci(np.array([run.success_rate for run in typical]))
    energy, energy_ci = _mean_ci(np.array([run.energy_per_slot for run in typical]))
    mu, mu_ci = _mean_ci(np.array([outcome[2] for outcome in outcomes]))
    activity = float(np.mean([outcome[1] for outcome in outcomes]))
    resamples = int(sum(outcome[3] for outcome in outcomes))

    logger.info(f"Simulation done: mean AoI {stats.mean if stats else math.inf:.4f}, "
                f"success rate {success:.4f}, infinite fraction {infinite_fraction:.2f}")
    return EstimateResult(
        stats=stats,
        success_rate=success,
        success_rate_ci=success_ci,
        energy_per_slot=energy,
        energy_ci=energy_ci,
        mean_mu=mu,
        mean_mu_ci=mu_ci,
        activity_rate=activity,
        infinite_fraction=infinite_fraction,
        comparable=comparable,
        realizations=len(outcomes),
        resamples=resamples,
        link_mean=float(np.mean(all_finite)) if all_finite else None,
        warnings=notes,
    )
