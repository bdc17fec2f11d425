"""Synthetic device model and the latency / energy lookup tables it produces.

Latency is an overhead floor plus MACs over throughput. Energy charges only
the dynamic current above idle, with utilisation growing as a power of the
block's share of the heaviest block in the table.
"""
from typing import Optional

import numpy as np

from ..utils.common import get_logger
from ..utils.constants import NUM_BLOCKS
from ..utils.exceptions import ErrorCodes
from .models import BlockConfig, CostTable, DeviceModel, LayerSpec, MacroArch
from .reader import load_table, save_table
from .searchspace import CANDIDATE_CONFIGS, check_admissible


__all__ = [
    "block_macs",
    "block_latency",
    "block_energy",
    "macs_matrix",
    "profile",
    "load_table",
    "save_table",
]


logger = get_logger(name=__name__)



def block_macs(cfg: BlockConfig, layer: LayerSpec, input_hw: tuple[int, int]) -> int:
    check_admissible(cfg, layer)
    if cfg.is_skip:
        return 0
    h, w = input_hw
    if h < 1 or w < 1:
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"block_macs: empty input size {input_hw}.")
    s, g = layer.stride, cfg.groups
    h_out, w_out = (h - 1) // s + 1, (w - 1) // s + 1
    c_in, c_out = layer.in_channels, layer.out_channels
    hidden = cfg.expansion * c_in
    expand = h * w * c_in * hidden // g
    depthwise = h_out * w_out * hidden * cfg.kernel ** 2
    project = h_out * w_out * hidden * c_out // g
    return expand + depthwise + project


def block_latency(model: DeviceModel, macs: int) -> float:
    if macs < 0:
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"block_latency: negative MAC count {macs}.")
    if macs == 0:
        return model.per_block_overhead
    return model.per_block_overhead + macs / model.throughput


def block_current(model: DeviceModel, macs: int, macs_max: int) -> float:
    u = 0.0 if macs_max <= 0 else min(1.0, macs / macs_max) ** model.utilization_exponent
    return model.idle_current + (model.max_current - model.idle_current) * u


def block_energy(model: DeviceModel, macs: int, t: float, macs_max: Optional[int] = None) -> float:
    """Dynamic energy in joules; ``macs_max`` defaults to ``macs`` (full utilisation)."""
    if t < 0:
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"block_energy: negative time {t}.")
    if macs_max is None:
        macs_max = macs
    current = block_current(model, macs, macs_max)
    return (current - model.idle_current) * model.supply_voltage * t


def macs_matrix(arch: MacroArch, input_hw: Optional[tuple[int, int]] = None) -> np.ndarray:
    """MAC counts as a [layers x 9] int matrix, -1 where the block is inadmissible."""
    sizes = arch.layer_input_hw(input_hw)
    macs = np.full((arch.num_layers, NUM_BLOCKS), -1, dtype=np.int64)
    for row, (layer, hw) in enumerate(zip(arch.tbs_layers, sizes)):
        for col, cfg in enumerate(CANDIDATE_CONFIGS):
            if cfg.is_skip and not layer.skip_admissible:
                continue
            macs[row, col] = block_macs(cfg, layer, hw)
    return macs


def profile(
    model: DeviceModel,
    arch: MacroArch,
    input_hw: Optional[tuple[int, int]] = None,
) -> tuple[CostTable, CostTable]:
    macs = macs_matrix(arch, input_hw)
    macs_max = int(macs.max())
    latency = np.full(macs.shape, np.nan)
    energy = np.full(macs.shape, np.nan)
    for (row, col), m in np.ndenumerate(macs):
        if m < 0:
            continue
        t = block_latency(model, int(m))
        latency[row, col] = t
        energy[row, col] = block_energy(model, int(m), t, macs_max)

    logger.info(
        f"Profiled {arch.num_layers} TBS layers ({arch.preset}): "
        f"latency {np.nanmin(latency):.3g}..{np.nanmax(latency):.3g} s, "
        f"energy {np.nanmin(energy):.3g}..{np.nanmax(energy):.3g} J"
    )
    return CostTable("latency", latency), CostTable("energy", energy)
