# fsa_aoi/utils/figures.py

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from fsa_aoi.config import settings
from fsa_aoi.utils.bipolar import optimal_frame, y_of_f
from fsa_aoi.utils.errors import ConfigError
from fsa_aoi.utils.experiment import (
    SweepResult,
    build_network,
    experiment_from_dict,
    grid_points,
    run_sweep,
)
from fsa_aoi.utils.models import BipolarConfig

logger = logging.getLogger(__name__)


def load_presets(path: Union[str, Path] = settings.FIGURES_PATH) -> Dict[str, dict]:
    with open(path, 'r') as f:
        return json.load(f)


def figure_names(path: Union[str, Path] = settings.FIGURES_PATH) -> List[str]:
    return list(load_presets(path))


def y_curve(cfg: BipolarConfig, eta: float, frames: Sequence[float]) -> pd.DataFrame:
    """y(F) sampled on real-valued frame sizes, with the integer optimum alongside."""
    best = optimal_frame(cfg, eta)
    return pd.DataFrame({
        "lam_per_m2": cfg.lam,
        "r_m": cfg.r,
        "eta": eta,
        "frame_size": [float(frame) for frame in frames],
        "y_per_slot": [y_of_f(cfg, eta, float(frame)) for frame in frames],
        "optimal_frame": best,
    })


def _frames(preset: dict) -> List[float]:
    spec = preset.get("frames", {"range": [1.0, 20.25, 0.25]})
    if "values" in spec:
        return [float(v) for v in spec["values"]]
    start, stop, step = spec["range"]
    return [v.item() for v in np.arange(start, stop, step)]


def run_figure(name: str, threads: int = settings.DEFAULT_THREADS, simulate: bool = False,
               presets: Optional[Dict[str, dict]] = None) -> SweepResult:
    """
    Evaluate one canned figure. Analytic values always; simulated columns
    only when ``simulate`` is set and the preset carries a ``sim`` block.
    """
    presets = presets if presets is not None else load_presets()
    if name not in presets:
        raise ConfigError(f"Unknown figure '{name}', expected one of {sorted(presets)}")
    preset = dict(presets[name])
    preset.setdefault("name", f"fig{name}")
    logger.info(f"Figure {name}: {preset.get('description', '')}")

    config = experiment_from_dict(preset)
    if preset.get("curve") == "y_of_f":
        frames = _frames(preset)
        curves = [y_curve(build_network("bipolar", point), float(point["eta"]), frames)
                  for point in grid_points(config)]
        return SweepResult(pd.concat(curves, ignore_index=True))

    mode = "both" if simulate and "sim" in preset else "analytic"
    return run_sweep(config, threads=threads, mode=mode)


def write_figures(names: Sequence[str], out_dir: Union[str, Path], threads: int = settings.DEFAULT_THREADS,
                  simulate: bool = False) -> List[Path]:
    presets = load_presets()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name in names:
        result = run_figure(name, threads=threads, simulate=simulate, presets=presets)
        path = out_dir / f"fig{name}.csv"
        result.to_csv(path)
        written.append(path)
        logger.info(f"Figure {name}: {len(result)} row(s) -> {path}")
    return written
