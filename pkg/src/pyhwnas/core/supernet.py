"""Stochastic supernet: Gumbel-Softmax mixture of every admissible block per TBS layer.

One Gumbel draw per layer per forward pass is shared by the feature mixture,
the latency term and the energy term, so all three describe the same sampled
architecture.
"""
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..utils.common import all_finite, make_rng
from ..utils.constants import ENERGY_FLOOR, GUMBEL_CLAMP
from ..utils.exceptions import ErrorCodes, NumericalError, ShapeError
from .autodiff import Tensor, add, clamp_min, softmax
from .models import CostTable, LossBreakdown, LossKnobs, MacroArch, Theta
from .searchspace import (
    CANDIDATE_CONFIGS,
    BlockParams,
    block_forward,
    head_forward,
    init_block_params,
    init_head_params,
    init_stem_params,
    stem_forward,
)


TableLike = Union[CostTable, np.ndarray]



@dataclass(eq=False)
class GumbelMask:
    m: Tensor
    tau: float
    noise: np.ndarray = field(repr=False)

    @property
    def values(self) -> np.ndarray:
        return self.m.data

    def argmax(self) -> np.ndarray:
        return self.m.data.argmax(axis=-1)



def sample_gumbel(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    u = np.clip(rng.random((rows, cols)), GUMBEL_CLAMP, 1.0 - GUMBEL_CLAMP)
    return -np.log(-np.log(u))


def gumbel_softmax(theta_row: Tensor, noise_row, tau: float) -> Tensor:
    """``softmax((θ + g) / τ)`` over the last axis; ``-inf`` logits stay at probability 0."""
    if not (tau > 0 and np.isfinite(tau)):
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"gumbel_softmax: tau must be > 0, got {tau}.")
    if not isinstance(theta_row, Tensor):
        theta_row = Tensor(theta_row)
    noise_row = np.asarray(noise_row, dtype=np.float64)
    if noise_row.shape != theta_row.shape:
        raise ShapeError(f"gumbel_softmax: noise shape {noise_row.shape} differs from θ shape {theta_row.shape}.")
    if not np.isfinite(theta_row.data).any(axis=-1).all():
        raise ErrorCodes.raise_error(
            ErrorCodes.VALIDATION_ERROR,
            "gumbel_softmax: a row has no admissible cell (all logits are -inf)."
        )
    return softmax((theta_row + Tensor(noise_row)) / tau, axis=-1)


def gumbel_mask(
    theta: Theta,
    tau: float,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[np.ndarray] = None,
) -> GumbelMask:
    if noise is None:
        if rng is None:
            raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, "gumbel_mask: pass either rng or noise.")
        noise = sample_gumbel(rng, *theta.logits.shape)
    return GumbelMask(gumbel_softmax(theta.logits, noise, tau), float(tau), np.asarray(noise))


def _table_values(table: TableLike) -> np.ndarray:
    if isinstance(table, CostTable):
        return table.values
    return np.asarray(table, dtype=np.float64)


def expected_cost(mask: Union[GumbelMask, Tensor], table: TableLike) -> Tensor:
    """``Σ_l Σ_i m_li · cost_li`` as a scalar differentiable in the mask."""
    m = mask.m if isinstance(mask, GumbelMask) else mask
    values = _table_values(table)
    if m.shape != values.shape:
        raise ShapeError(f"expected_cost: mask shape {m.shape} differs from table shape {values.shape}.")
    absent = np.isnan(values)
    if np.any(m.data[absent] != 0):
        raise ShapeError("expected_cost: mask puts weight on a cell that is absent from the table.")
    return (m * Tensor(np.where(absent, 0.0, values))).sum()



# ─────────────── loss ───────────────
def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def total_loss(ce, lat, ener, knobs: LossKnobs) -> LossBreakdown:
    """``ce + α·lat^β + γ·ener^δ``; the differentiable total is kept on ``.loss``."""
    ce, lat, ener = _as_tensor(ce), _as_tensor(lat), _as_tensor(ener)
    for name, t in (("ce", ce), ("lat", lat), ("ener", ener)):
        if t.size != 1:
            raise ShapeError(f"total_loss: {name} must be a scalar, got shape {t.shape}.")
    if not all_finite(ce.item(), lat.item(), ener.item()):
        raise NumericalError(f"total_loss: non-finite input ce={ce.item()}, lat={lat.item()}, ener={ener.item()}.")
    if lat.item() <= 0 or ener.item() < 0:
        raise ErrorCodes.raise_error(
            ErrorCodes.VALIDATION_ERROR,
            f"total_loss: need lat > 0 and ener >= 0, got lat={lat.item()}, ener={ener.item()}."
        )

    lat_term = (lat ** knobs.beta) * knobs.alpha
    ener_base = clamp_min(ener, ENERGY_FLOOR) if knobs.delta < 1 else ener
    ener_term = (ener_base ** knobs.delta) * knobs.gamma
    total = add(add(ce, lat_term), ener_term)
    return LossBreakdown(ce.item(), lat.item(), ener.item(), total.item(), knobs, loss=total)


def loss_value(ce: float, lat: float, ener: float, knobs: LossKnobs) -> float:
    """Plain-float form of :func:`total_loss`."""
    ener_base = max(ener, ENERGY_FLOOR) if knobs.delta < 1 else ener
    return ce + lat ** knobs.beta * knobs.alpha + ener_base ** knobs.delta * knobs.gamma



# ─────────────── network ───────────────
@dataclass(eq=False)
class SupernetWeights:
    stem: BlockParams
    blocks: list[list[BlockParams]]
    head: BlockParams

    def parameters(self) -> list[Tensor]:
        params = list(self.stem.values())
        for row in self.blocks:
            for block in row:
                params.extend(block.values())
        params.extend(self.head.values())
        return params

    def state(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.parameters()]



def init_supernet_weights(arch: MacroArch, seed: int = 0) -> SupernetWeights:
    rng = make_rng(seed, 0)
    adm = arch.admissible_mask()
    stem = init_stem_params(arch, rng)
    blocks = [
        [
            init_block_params(cfg, layer, rng) if adm[row, col] else {}
            for col, cfg in enumerate(CANDIDATE_CONFIGS)
        ]
        for row, layer in enumerate(arch.tbs_layers)
    ]
    head = init_head_params(arch, rng)
    return SupernetWeights(stem, blocks, head)



@dataclass(eq=False)
class SupernetOutput:
    logits: Tensor
    lat: Tensor
    ener: Tensor
    mask: GumbelMask



def check_tables(arch: MacroArch, *tables: CostTable) -> None:
    expected = arch.admissible_mask()
    for table in tables:
        if table.shape != expected.shape:
            raise ShapeError(
                f"{table.metric} table has shape {table.shape}, architecture needs {expected.shape}."
            )
        if not np.array_equal(table.admissible, expected):
            row = int(np.argwhere(table.admissible != expected)[0][0])
            raise ShapeError(f"{table.metric} table row {row} does not match the layer's admissible blocks.")



class Supernet:
    def __init__(
        self,
        arch: MacroArch,
        lat_table: CostTable,
        ener_table: CostTable,
        theta: Theta,
        weights: SupernetWeights,
    ):
        check_tables(arch, lat_table, ener_table)
        if theta.logits.shape != (arch.num_layers, len(CANDIDATE_CONFIGS)):
            raise ShapeError(f"θ has shape {theta.logits.shape}, architecture needs {(arch.num_layers, 9)}.")
        self.arch = arch
        self.lat_table = lat_table
        self.ener_table = ener_table
        self.theta = theta
        self.weights = weights
        self._admissible = arch.admissible_mask()

    def weight_parameters(self) -> list[Tensor]:
        return self.weights.parameters()

    def theta_parameters(self) -> list[Tensor]:
        return [self.theta.logits]

    def zero_grad(self) -> None:
        for p in (*self.weight_parameters(), *self.theta_parameters()):
            p.zero_grad()

    def forward(
        self,
        x: Tensor,
        tau: float,
        rng: Optional[np.random.Generator] = None,
        noise: Optional[np.ndarray] = None,
    ) -> SupernetOutput:
        mask = gumbel_mask(self.theta, tau, rng, noise)
        h = stem_forward(self.arch, x, self.weights.stem)
        for row, layer in enumerate(self.arch.tbs_layers):
            mixed = None
            for col, cfg in enumerate(CANDIDATE_CONFIGS):
                if not self._admissible[row, col]:
                    continue
                term = mask.m[row, col] * block_forward(cfg, layer, h, self.weights.blocks[row][col])
                mixed = term if mixed is None else add(mixed, term)
            h = mixed
        logits = head_forward(self.arch, h, self.weights.head)
        lat = expected_cost(mask, self.lat_table)
        ener = expected_cost(mask, self.ener_table)
        return SupernetOutput(logits, lat, ener, mask)

    __call__ = forward



def supernet_forward(
    x: Tensor,
    supernet: Supernet,
    tau: float,
    rng: Optional[np.random.Generator] = None,
) -> tuple[Tensor, Tensor, Tensor]:
    out = supernet.forward(x, tau, rng)
    return out.logits, out.lat, out.ener
