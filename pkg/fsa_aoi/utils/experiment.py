# fsa_aoi/utils/experiment.py
"""
Experiment files, parameter grids and sweep results.

An experiment is a JSON document:

    {
      "name": "fig4a",
      "network": "bipolar",                      # bipolar | cellular | renewal
      "bipolar": {"lam": 0.01, "r": 10, "alpha": 3.5, "theta": "0dB"},
      "protocol": {"eta": 0.8, "frame_size": 3},
      "mode": "analytic",                        # analytic | simulate | both
      "sweep": [{"axis": "eta", "values": [0.1, 0.2]},
                {"axis": "frame_size", "range": [1, 8, 2]}],
      "sim": {"num_realizations": 100, "slots_per_realization": 30000},
      "metrics": ["mean", "variance"],
      "output": {"path": "results/fig4a.csv", "format": "csv"},
      "seed": 0
    }

Sweep axes form a cartesian product. Cellular blocks may give
``density_ratio`` instead of ``lambda_s``.
"""

import itertools
import json
import logging
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from fsa_aoi.config import settings
from fsa_aoi.utils import bipolar, cellular, renewal
from fsa_aoi.utils.errors import ConfigError
from fsa_aoi.utils.models import (
    BipolarConfig,
    CellularConfig,
    CondSuccessProb,
    InfiniteAoI,
    PowerModel,
    ProtocolParams,
    SimSpec,
    is_infinite,
)
from fsa_aoi.utils.simulator import estimate

logger = logging.getLogger(__name__)

NETWORKS = ("bipolar", "cellular", "renewal")
MODES = ("analytic", "simulate", "both")
FORMATS = ("csv", "json")

NETWORK_FIELDS = {
    "bipolar": ("lam", "r", "alpha", "theta"),
    "cellular": ("lambda_s", "lambda_d", "alpha", "theta", "epsilon", "p_max_ratio",
                 "association_factor", "density_ratio"),
    "renewal": ("mu",),
}
PROTOCOL_FIELDS = ("eta", "frame_size")
SIM_FIELDS = ("num_realizations", "slots_per_realization", "burn_in_successes", "torus_wrap",
              "window_halfwidth", "links_per_realization", "p_tx", "power_model")

METRICS = ("mean", "variance", "second_moment", "approx", "closed_form", "q1", "q2", "lower_bound",
           "throughput", "tx_power", "optimal_frame")
DEFAULT_METRICS = {
    "bipolar": ("mean", "variance", "q1", "q2", "lower_bound", "throughput", "tx_power"),
    "cellular": ("mean", "variance", "approx", "closed_form", "q2", "lower_bound"),
    "renewal": ("mean", "variance", "second_moment", "lower_bound"),
}

# Column names carry their unit as a suffix
PARAMETER_COLUMNS = {
    "eta": "eta",
    "frame_size": "frame_size",
    "lam": "lam_per_m2",
    "r": "r_m",
    "alpha": "alpha",
    "theta": "theta_linear",
    "lambda_s": "lambda_s_per_m2",
    "lambda_d": "lambda_d_per_m2",
    "density_ratio": "density_ratio",
    "epsilon": "epsilon",
    "p_max_ratio": "p_max_ratio",
    "association_factor": "association_factor",
    "mu": "mu",
}
VALUE_COLUMNS = (
    "mean_aoi_slots", "variance_aoi_slots2", "second_moment_aoi_slots2", "approx_mean_aoi_slots",
    "closed_form_mean_aoi_slots", "q1_slots", "q2_slots", "q2_slots2", "lower_bound_slots",
    "throughput_nats_per_slot", "tx_power_w", "sim_mean_aoi_slots", "sim_variance_aoi_slots2", "rel_gap",
)

_DB_PATTERN = re.compile(r"^\s*([-+]?\d*\.?\d+(?:[eE][-+]?\d+)?)\s*dB\s*$", re.IGNORECASE)


def parse_theta(value: Union[str, float, int]) -> float:
    """SIR threshold as a linear ratio; strings may carry a 'dB' suffix."""
    if isinstance(value, bool):
        raise ConfigError(f"Invalid theta {value!r}")
    if isinstance(value, (int, float)):
        linear = float(value)
    else:
        match = _DB_PATTERN.match(str(value))
        if match:
            linear = 10.0 ** (float(match.group(1)) / 10.0)
        else:
            try:
                linear = float(value)
            except ValueError:
                raise ConfigError(f"Invalid theta {value!r}: expected a number or e.g. '3dB'")
    if not linear > 0 or not math.isfinite(linear):
        raise ConfigError(f"theta must be positive and finite, got {value!r}")
    return linear


@dataclass
class SweepAxis:
    name: str
    values: List[Any]

    def __post_init__(self):
        if not self.values:
            raise ConfigError(f"Sweep axis '{self.name}' has no values")


@dataclass
class ExperimentConfig:
    network: str
    params: Dict[str, Any]
    protocol: Dict[str, Any]
    mode: str = "analytic"
    sweep: List[SweepAxis] = field(default_factory=list)
    sim: Dict[str, Any] = field(default_factory=dict)
    metrics: Optional[List[str]] = None
    output_path: Optional[str] = None
    output_format: str = "csv"
    seed: int = 0
    name: str = "experiment"

    def __post_init__(self):
        if self.network not in NETWORKS:
            raise ConfigError(f"Unknown network '{self.network}', expected one of {NETWORKS}")
        if self.mode not in MODES:
            raise ConfigError(f"Unknown mode '{self.mode}', expected one of {MODES}")
        if self.output_format not in FORMATS:
            raise ConfigError(f"Unknown output format '{self.output_format}'")
        allowed = set(NETWORK_FIELDS[self.network]) | set(PROTOCOL_FIELDS)
        for axis in self.sweep:
            if axis.name not in allowed:
                raise ConfigError(f"Sweep axis '{axis.name}' is not a {self.network} or protocol parameter")
        unknown = set(self.params) - set(NETWORK_FIELDS[self.network])
        if unknown:
            raise ConfigError(f"Unknown {self.network} parameters: {sorted(unknown)}")
        unknown = set(self.sim) - set(SIM_FIELDS)
        if unknown:
            raise ConfigError(f"Unknown sim settings: {sorted(unknown)}")
        if self.metrics is not None:
            bad = set(self.metrics) - set(METRICS)
            if bad:
                raise ConfigError(f"Unknown metrics: {sorted(bad)}")

    @property
    def metric_set(self) -> set:
        return set(self.metrics if self.metrics is not None else DEFAULT_METRICS[self.network])


def _axis_from_dict(data: Dict[str, Any]) -> SweepAxis:
    if "axis" not in data:
        raise ConfigError("Each sweep entry needs an 'axis'")
    if "values" in data:
        values = list(data["values"])
    elif "range" in data:
        start, stop, step = data["range"]
        values = [v.item() for v in np.arange(start, stop, step)]
    elif "logspace" in data:
        start, stop, num = data["logspace"]
        values = [v.item() for v in np.logspace(start, stop, int(num))]
    else:
        raise ConfigError(f"Sweep axis '{data['axis']}' needs 'values', 'range' or 'logspace'")
    return SweepAxis(data["axis"], values)


def experiment_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        network = data["network"]
        params = dict(data.get(network, {}))
        protocol = dict(data.get("protocol", {}))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"Malformed experiment: {exc}")
    sweep = data.get("sweep", [])
    if isinstance(sweep, dict):
        sweep = [sweep]
    output = data.get("output", {})
    return ExperimentConfig(
        network=network,
        params=params,
        protocol=protocol,
        mode=data.get("mode", "analytic"),
        sweep=[_axis_from_dict(entry) for entry in sweep],
        sim=dict(data.get("sim", {})),
        metrics=data.get("metrics"),
        output_path=output.get("path"),
        output_format=output.get("format", "csv"),
        seed=int(data.get("seed", 0)),
        name=data.get("name", "experiment"),
    )


def load_experiment(path: Union[str, Path]) -> ExperimentConfig:
    with open(path, "r") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}")
    logger.debug(f"Loaded experiment from {path}")
    return experiment_from_dict(data)


def apply_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Command-line values replace file values; None means not given."""
    protocol = dict(config.protocol)
    for key in PROTOCOL_FIELDS:
        if overrides.get(key) is not None:
            protocol[key] = overrides[key]
    changes = {"protocol": protocol}
    for key in ("mode", "output_path", "output_format", "seed"):
        if overrides.get(key) is not None:
            changes[key] = overrides[key]
    sim = dict(config.sim)
    for key in ("num_realizations", "slots_per_realization"):
        if overrides.get(key) is not None:
            sim[key] = overrides[key]
    changes["sim"] = sim
    return replace(config, **changes)


def grid_points(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """One merged parameter dict per grid point, last axis varying fastest."""
    base = {**config.params, **config.protocol}
    if not config.sweep:
        return [base]
    names = [axis.name for axis in config.sweep]
    return [{**base, **dict(zip(names, combo))}
            for combo in itertools.product(*(axis.values for axis in config.sweep))]


def build_network(network: str, point: Dict[str, Any]):
    """Domain config for one grid point: BipolarConfig, CellularConfig or a renewal mu."""
    try:
        if network == "bipolar":
            return BipolarConfig(lam=float(point["lam"]), r=float(point["r"]),
                                 alpha=float(point["alpha"]), theta=parse_theta(point["theta"]))
        if network == "cellular":
            lambda_d = float(point["lambda_d"])
            if point.get("density_ratio") is not None:
                lambda_s = float(point["density_ratio"]) * lambda_d
            else:
                lambda_s = float(point["lambda_s"])
            p_max = point.get("p_max_ratio")
            return CellularConfig(
                lambda_s=lambda_s, lambda_d=lambda_d, alpha=float(point["alpha"]),
                theta=parse_theta(point["theta"]), epsilon=float(point.get("epsilon", 0.0)),
                p_max_ratio=None if p_max is None else float(p_max),
                association_factor=float(point.get("association_factor", 1.25)),
            )
        return CondSuccessProb(float(point["mu"]))
    except KeyError as exc:
        raise ConfigError(f"Missing {network} parameter {exc}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc))


def build_protocol(point: Dict[str, Any]) -> ProtocolParams:
    try:
        return ProtocolParams(float(point["eta"]), int(point.get("frame_size", 1)))
    except KeyError:
        raise ConfigError("Protocol needs 'eta'")
    except ValueError as exc:
        raise ConfigError(str(exc))


def build_sim_spec(config: ExperimentConfig, net_cfg, p: ProtocolParams) -> SimSpec:
    """SimSpec for one grid point; the slot budget is rounded down to a multiple of F."""
    values = dict(config.sim)
    power = values.pop("power_model", None)
    if power is not None:
        if isinstance(power, str):
            power = {"kind": power}
        eps = getattr(net_cfg, "epsilon", 0.0)
        p_max = getattr(net_cfg, "p_max_ratio", None)
        values["power_model"] = PowerModel(power["kind"], float(power.get("epsilon", eps)),
                                           power.get("p_max_ratio", p_max))
    slots = int(values.get("slots_per_realization", SimSpec.slots_per_realization))
    rounded = max(p.frame_size, slots - slots % p.frame_size)
    if rounded != slots:
        logger.debug(f"Slot budget {slots} rounded to {rounded} for F={p.frame_size}")
    values["slots_per_realization"] = rounded
    try:
        return SimSpec(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid sim settings: {exc}")


def validate(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """Build every grid point once so bad values fail before any computation."""
    points = grid_points(config)
    for point in points:
        build_network(config.network, point)
        build_protocol(point)
    return points


def _cellular_mean(cfg: CellularConfig, p: ProtocolParams):
    if cfg.p_max_ratio is not None and cfg.epsilon > 0:
        return cellular.avg_aoi_max_power(cfg, p)
    return cellular.avg_aoi_cellular(cfg, p)


def analytic_row(network: str, net_cfg, p: ProtocolParams, metrics: set) -> Dict[str, Any]:
    row: Dict[str, Any] = {}
    if "lower_bound" in metrics:
        row["lower_bound_slots"] = bipolar.aoi_lower_bound(p.frame_size)

    if network == "renewal":
        if "mean" in metrics:
            row["mean_aoi_slots"] = renewal.cond_avg_aoi(p, net_cfg)
        if "variance" in metrics:
            row["variance_aoi_slots2"] = renewal.cond_var_aoi(p, net_cfg)
        if "second_moment" in metrics:
            row["second_moment_aoi_slots2"] = renewal.cond_quad_aoi(p, net_cfg)
        return row

    if network == "bipolar":
        if "mean" in metrics:
            row["mean_aoi_slots"] = bipolar.avg_aoi_bipolar(net_cfg, p)
        if "variance" in metrics:
            row["variance_aoi_slots2"] = bipolar.var_aoi_bipolar(net_cfg, p)
        if "q1" in metrics:
            row["q1_slots"] = bipolar.q1(net_cfg, p)
        if "q2" in metrics:
            row["q2_slots2"] = bipolar.q2_bipolar(net_cfg, p)
        if "throughput" in metrics:
            row["throughput_nats_per_slot"] = bipolar.spatial_throughput(net_cfg, p)
        if "tx_power" in metrics:
            row["tx_power_w"] = bipolar.tx_power(p, 1.0)
        if "optimal_frame" in metrics:
            row["optimal_frame"] = bipolar.optimal_frame(net_cfg, p.eta)
        return row

    capped = net_cfg.p_max_ratio is not None and net_cfg.epsilon > 0
    if "mean" in metrics:
        row["mean_aoi_slots"] = _cellular_mean(net_cfg, p)
    if "variance" in metrics and not capped:
        row["variance_aoi_slots2"] = cellular.var_aoi_cellular(net_cfg, p)
    if "approx" in metrics and not capped:
        row["approx_mean_aoi_slots"] = cellular.avg_aoi_cellular_approx(net_cfg, p)
    if "closed_form" in metrics:
        if net_cfg.epsilon == 0:
            row["closed_form_mean_aoi_slots"] = cellular.avg_aoi_no_power_control(net_cfg, p)
        elif net_cfg.epsilon == 1 and not capped:
            row["closed_form_mean_aoi_slots"] = cellular.avg_aoi_full_inversion(net_cfg, p, method="trigamma")
    if "q2" in metrics and not capped:
        row["q2_slots"] = cellular.q2_cellular(net_cfg, p)
    if "tx_power" in metrics:
        row["tx_power_w"] = bipolar.tx_power(p, 1.0)
    return row


def simulate_row(config: ExperimentConfig, net_cfg, p: ProtocolParams, seed: int,
                 threads: int) -> Dict[str, Any]:
    spec = build_sim_spec(config, net_cfg, p)
    if config.network == "renewal":
        try:
            stats = renewal.renewal_oracle_sim(p, net_cfg, spec.slots_per_realization, seed,
                                               burn_in=spec.burn_in_successes)
        except ValueError as exc:
            raise ConfigError(str(exc))
        return {
            "sim_mean_aoi_slots": stats.mean,
            "sim_mean_ci_slots": stats.ci_halfwidth_mean,
            "sim_variance_aoi_slots2": stats.variance,
            "sim_second_moment_aoi_slots2": stats.second_moment,
            "sim_samples": stats.sample_count,
        }

    result = estimate(net_cfg, p, spec, seed=seed, threads=threads)
    stats = result.stats
    return {
        "sim_mean_aoi_slots": stats.mean if stats else InfiniteAoI("no finite realization"),
        "sim_mean_ci_slots": stats.ci_halfwidth_mean if stats else None,
        "sim_variance_aoi_slots2": stats.variance if stats else InfiniteAoI("no finite realization"),
        "sim_link_mean_aoi_slots": result.link_mean,
        "sim_success_rate_per_slot": result.success_rate,
        "sim_success_rate_ci": result.success_rate_ci,
        "sim_energy_per_slot_w": result.energy_per_slot,
        "sim_energy_ci_w": result.energy_ci,
        "sim_mean_mu": result.mean_mu,
        "sim_mean_mu_ci": result.mean_mu_ci,
        "sim_activity_rate_per_slot": result.activity_rate,
        "sim_infinite_fraction": result.infinite_fraction,
        "sim_resamples": result.resamples,
        "comparable": result.comparable,
        "sim_samples": result.realizations,
    }


def agreement(analytic, simulated, comparable: bool = True,
              tol: float = settings.AGREEMENT_TOLERANCE) -> Dict[str, Any]:
    """Relative gap between simulated and analytic means."""
    if is_infinite(analytic) or is_infinite(simulated) or simulated is None:
        both = is_infinite(analytic) and (is_infinite(simulated) or not comparable)
        return {"rel_gap": 0.0 if both else math.nan, "within_tolerance": both}
    gap = abs(float(simulated) - float(analytic)) / abs(float(analytic))
    return {"rel_gap": gap, "within_tolerance": bool(gap <= tol) and comparable}


def run_sweep(config: ExperimentConfig, threads: int = settings.DEFAULT_THREADS,
              mode: Optional[str] = None) -> "SweepResult":
    mode = mode or config.mode
    points = validate(config)
    metrics = config.metric_set
    logger.info(f"Running '{config.name}' ({config.network}, {mode}) over {len(points)} grid point(s)")
    rows = []
    for index, point in enumerate(points):
        net_cfg = build_network(config.network, point)
        p = build_protocol(point)
        row = {PARAMETER_COLUMNS[k]: _parameter_value(k, v) for k, v in point.items() if v is not None}
        if mode in ("analytic", "both"):
            row.update(analytic_row(config.network, net_cfg, p, metrics))
        if mode in ("simulate", "both"):
            row.update(simulate_row(config, net_cfg, p, config.seed + index, threads))
        if mode == "both":
            row.update(agreement(row.get("mean_aoi_slots"), row.get("sim_mean_aoi_slots"),
                                 row.get("comparable", True)))
        rows.append(row)
        logger.debug(f"Grid point {index + 1}/{len(points)} done: {point}")
    return SweepResult(pd.DataFrame(rows))


def _parameter_value(key: str, value):
    return parse_theta(value) if key == "theta" else value


def _to_plain(value):
    if isinstance(value, InfiniteAoI):
        return math.inf
    return value


def _json_value(value):
    if is_infinite(value):
        return settings.INF_TOKEN
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


class SweepResult:
    """Rows of a parameter sweep; InfiniteAoI cells are written as the 'inf' token."""

    def __init__(self, frame: pd.DataFrame):
        self.frame = frame

    def __len__(self):
        return len(self.frame)

    @property
    def columns(self) -> List[str]:
        return list(self.frame.columns)

    def plain_frame(self) -> pd.DataFrame:
        return self.frame.apply(lambda column: column.map(_to_plain))

    def to_csv(self, path: Union[str, Path]):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        self.plain_frame().to_csv(path, index=False, float_format=settings.CSV_FLOAT_FORMAT, na_rep="nan")

    def to_json(self, path: Union[str, Path]):
        # json.dump writes floats with repr, so they read back bit for bit
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        records = [{key: _json_value(value) for key, value in row.items()}
                   for row in self.frame.to_dict(orient="records")]
        with open(path, "w") as f:
            json.dump(records, f, indent=2, allow_nan=False)

    def write(self, path: Union[str, Path], fmt: str = "csv"):
        if fmt == "json":
            self.to_json(path)
        else:
            self.to_csv(path)
        logger.info(f"Wrote {len(self)} row(s) to {path}")

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "SweepResult":
        frame = pd.read_csv(path, float_precision="round_trip")
        for column in frame.columns:
            if column in VALUE_COLUMNS or column.startswith("sim_"):
                frame[column] = frame[column].map(
                    lambda v: InfiniteAoI("read from file") if isinstance(v, float) and math.isinf(v) else v)
        return cls(frame)
