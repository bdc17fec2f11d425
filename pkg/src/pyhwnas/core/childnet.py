"""Discrete child architecture: argmax extraction, exact table costs, standalone training."""
from typing import Optional

import numpy as np

from ..utils.common import get_logger, make_rng
from ..utils.exceptions import AdmissibilityError, ErrorCodes, ShapeError
from .autodiff import Tensor
from .models import ChildNet, CostTable, LossKnobs, MacroArch, OptimizerConfig, Theta
from .optim import make_optimizer
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
from .streamer import Dataset
from .trainer import evaluate, run_phase, split_dataset


CHILD_OPTIMIZER = OptimizerConfig(kind="sgd", lr=0.05, momentum=0.9, weight_decay=1e-4, lr_schedule="cosine")

logger = get_logger(name=__name__)



def sample_childnet(theta: Theta, arch: MacroArch) -> ChildNet:
    """Row-wise argmax of θ over admissible cells; ties go to the lowest index."""
    if theta.num_layers != arch.num_layers:
        raise ShapeError(f"θ has {theta.num_layers} rows but the architecture has {arch.num_layers} TBS layers.")
    logits = np.where(arch.admissible_mask(), theta.values, -np.inf)
    return ChildNet(tuple(int(c) for c in np.argmax(logits, axis=1)), arch)


def childnet_cost(child: ChildNet, lat_table: CostTable, ener_table: CostTable) -> tuple[float, float]:
    totals = []
    for table in (lat_table, ener_table):
        if table.num_layers != len(child.choices):
            raise ShapeError(
                f"{table.metric} table has {table.num_layers} rows, childnet has {len(child.choices)} layers."
            )
        total = 0.0
        for layer, choice in enumerate(child.choices):
            value = table.values[layer, choice]
            if np.isnan(value):
                raise AdmissibilityError(f"{table.metric} table has no entry for block {choice} in layer {layer}.")
            total += float(value)
        totals.append(total)
    return totals[0], totals[1]



class ChildNetwork:
    def __init__(self, child: ChildNet, seed: int = 0):
        if child.arch is None:
            raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, "ChildNetwork: childnet carries no architecture.")
        self.child = child
        self.arch = child.arch
        rng = make_rng(seed, 6)
        self.stem = init_stem_params(self.arch, rng)
        self.blocks: list[BlockParams] = [
            init_block_params(CANDIDATE_CONFIGS[c], layer, rng)
            for c, layer in zip(child.choices, self.arch.tbs_layers)
        ]
        self.head = init_head_params(self.arch, rng)

    def parameters(self) -> list[Tensor]:
        params = list(self.stem.values())
        for block in self.blocks:
            params.extend(block.values())
        params.extend(self.head.values())
        return params

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def forward(self, x: Tensor) -> Tensor:
        h = stem_forward(self.arch, x, self.stem)
        for c, layer, params in zip(self.child.choices, self.arch.tbs_layers, self.blocks):
            h = block_forward(CANDIDATE_CONFIGS[c], layer, h, params)
        return head_forward(self.arch, h, self.head)

    __call__ = forward



def train_childnet(
    child: ChildNet,
    dataset: Dataset,
    epochs: int = 30,
    seed: int = 0,
    *,
    optimizer: Optional[OptimizerConfig] = None,
    batch_size: int = 64,
    holdout: float = 0.2,
) -> float:
    """Train ``child`` from fresh weights and return held-out accuracy."""
    if epochs < 1:
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"train_childnet: epochs must be >= 1, got {epochs}.")
    if child.arch is not None and dataset.channels != child.arch.input_channels:
        raise ShapeError(
            f"train_childnet: dataset has {dataset.channels} channels, architecture expects {child.arch.input_channels}."
        )
    train_set, test_set = split_dataset(dataset, 1.0 - holdout, seed)
    mean, std = train_set.channel_stats()
    train_set, test_set = train_set.standardized(mean, std), test_set.standardized(mean, std)

    net = ChildNetwork(child, seed)
    opt = make_optimizer(net.parameters(), optimizer or CHILD_OPTIMIZER)
    rng = make_rng(seed, 8)
    knobs = LossKnobs()
    one, zero = Tensor(1.0), Tensor(0.0)

    def forward(x):
        return net.forward(x), one, zero

    for epoch in range(epochs):
        opt.set_epoch(epoch, epochs)
        stats = run_phase(forward, net.zero_grad, opt, train_set, phase="weights", knobs=knobs,
                          batch_size=batch_size, rng=rng, epoch=epoch)
        logger.info(f"child epoch {epoch:>3} ce={stats.ce:.4f} acc={stats.acc:.3f}")

    accuracy = evaluate(forward, test_set)
    logger.info(f"childnet [{child}] held-out accuracy {accuracy:.4f}")
    return accuracy
