"""Knob pre-visualisation, dominance labels, Pareto fronts and sweep summaries."""
import math
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from ..core.autodiff import Tensor
from ..core.models import CostTable, DominanceLabel, LossKnobs, ModelRecord
from ..core.supernet import expected_cost
from ..utils.exceptions import ErrorCodes
from .record_filters import EnergyFilter, LatencyFilter


KNOBS = ("alpha", "beta", "gamma", "delta")
METRICS = {"accuracy": "accuracy", "latency": "latency", "energy": "energy"}



def v_metrics(knobs: LossKnobs, lat0: float, ener0: float) -> tuple[float, float]:
    """``(α·lat0^β, γ·ener0^δ)``."""
    if not (lat0 > 0 and ener0 > 0):
        raise ErrorCodes.raise_error(
            ErrorCodes.VALIDATION_ERROR,
            f"v_metrics: baselines must be > 0, got lat0={lat0}, ener0={ener0}."
        )
    return knobs.alpha * lat0 ** knobs.beta, knobs.gamma * ener0 ** knobs.delta


def dominance(vlat: float, vener: float) -> DominanceLabel:
    """Energy-dominant iff ``vener / vlat > 1.0``."""
    if not vlat > 0:
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"dominance: vlat must be > 0, got {vlat}.")
    ratio = vener / vlat
    return DominanceLabel("energy-dominant" if ratio > 1.0 else "latency-dominant", ratio)


def record_dominance(record: ModelRecord) -> DominanceLabel:
    # vlat is 0 whenever alpha is 0
    if record.vlat > 0:
        return dominance(record.vlat, record.vener)
    if record.vener > 0:
        return DominanceLabel("energy-dominant", math.inf)
    return DominanceLabel("latency-dominant", 0.0)


def baseline_costs(lat_table: CostTable, ener_table: CostTable) -> tuple[float, float]:
    """Expected latency and energy under uniform θ, the search's starting point."""
    adm = lat_table.admissible
    probs = adm / adm.sum(axis=1, keepdims=True)
    mask = Tensor(probs)
    return expected_cost(mask, lat_table).item(), expected_cost(mask, ener_table).item()



# ─────────────── Pareto analysis ───────────────
def pareto_mask(accuracy: Sequence[float], latency: Sequence[float], energy: Sequence[float]) -> np.ndarray:
    """True where no other point is >= in accuracy, <= in latency and energy, and strictly better once."""
    acc, lat, ener = (np.asarray(v, dtype=np.float64) for v in (accuracy, latency, energy))
    no_worse = (acc[None, :] >= acc[:, None]) & (lat[None, :] <= lat[:, None]) & (ener[None, :] <= ener[:, None])
    better = (acc[None, :] > acc[:, None]) | (lat[None, :] < lat[:, None]) | (ener[None, :] < ener[:, None])
    return ~np.any(no_worse & better, axis=1)


def pareto_front(records: Sequence[ModelRecord]) -> list[ModelRecord]:
    records = list(records)
    if not records:
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, "pareto_front: no records given.")
    keep = pareto_mask(
        [r.accuracy for r in records],
        [r.latency for r in records],
        [r.energy for r in records],
    )
    return [r for r, k in zip(records, keep) if k]


def select_model(records: Iterable[ModelRecord], tolerance: float = 0.15) -> Optional[ModelRecord]:
    """Most accurate record within ``tolerance`` of both the latency and the energy minima."""
    records = list(records)
    if not records:
        return None
    lat_min = min(r.latency for r in records)
    ener_min = min(r.energy for r in records)
    near_min = LatencyFilter(max_latency=lat_min * (1 + tolerance)) & EnergyFilter(max_energy=ener_min * (1 + tolerance))
    candidates = near_min.apply(records)
    return max(candidates, key=lambda r: r.accuracy) if candidates else None


def speedup(baseline: ModelRecord, record: ModelRecord) -> tuple[float, float]:
    """``(latency factor, energy factor)`` of ``record`` over ``baseline``."""
    if record.energy <= 0:
        return baseline.latency / record.latency, math.inf
    return baseline.latency / record.latency, baseline.energy / record.energy


def knob_trend(records: Sequence[ModelRecord], knob: str, metric: str) -> float:
    """Spearman rank correlation between a knob and a record metric; NaN when either is constant."""
    if knob not in KNOBS or metric not in METRICS:
        raise ErrorCodes.raise_error(
            ErrorCodes.VALIDATION_ERROR,
            f"knob_trend: knob must be one of {KNOBS} and metric one of {tuple(METRICS)}, got {knob!r}, {metric!r}."
        )
    xs = [getattr(r.knobs, knob) for r in records]
    ys = [getattr(r, METRICS[metric]) for r in records]
    if len(records) < 2 or len(set(xs)) < 2 or len(set(ys)) < 2:
        return math.nan
    rho, _ = stats.spearmanr(xs, ys)
    return float(rho)
