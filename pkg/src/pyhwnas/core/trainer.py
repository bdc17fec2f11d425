"""Alternating weight / θ search over a supernet.

Warmup epochs train weights only. Every later epoch runs a weight pass over
the weight split followed by a θ pass over the θ split with weights frozen.
"""
import math
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..utils.common import ensure_dir, get_logger, make_rng
from ..utils.constants import SEARCH_LOG, THETA_FILE_FORMAT
from ..utils.exceptions import ErrorCodes, NumericalError
from .autodiff import Tensor, backward, softmax_cross_entropy
from .models import CostTable, EpochLog, LossKnobs, MacroArch, PhaseStats, SearchConfig, Theta
from .optim import Optimizer, cosine_anneal, make_optimizer
from .reader import save_theta, write_search_log
from .streamer import Dataset, iter_batches
from .supernet import Supernet, init_supernet_weights, loss_value, total_loss


ForwardFn = Callable[[Tensor], tuple[Tensor, Tensor, Tensor]]

logger = get_logger(name=__name__)



def split_dataset(dataset: Dataset, split: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified seeded split into ``(weight_set, theta_set)``."""
    if not 0 < split < 1:
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"split_dataset: split must lie in (0, 1), got {split}.")
    rng = make_rng(seed, 5)
    first, second = [], []
    for cls in range(dataset.num_classes):
        idx = np.flatnonzero(dataset.labels == cls)
        if idx.size == 0:
            continue
        idx = rng.permutation(idx)
        cut = int(math.floor(idx.size * split + 0.5))
        if cut < 1 or cut > idx.size - 1:
            raise ErrorCodes.raise_error(
                ErrorCodes.VALIDATION_ERROR,
                f"split_dataset: class {cls} has {idx.size} samples, too few for a {split:g} split."
            )
        first.append(idx[:cut])
        second.append(idx[cut:])
    return dataset.subset(np.sort(np.concatenate(first))), dataset.subset(np.sort(np.concatenate(second)))


def tau_at(epoch: int, config: SearchConfig) -> float:
    if not 0 <= epoch < config.epochs:
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"tau_at: epoch {epoch} outside [0, {config.epochs}).")
    return cosine_anneal(config.tau_init, config.tau_min, epoch, config.epochs)


def theta_init(arch: MacroArch) -> Theta:
    """Logit 1.0 on every admissible cell, ``-inf`` elsewhere."""
    logits = np.where(arch.admissible_mask(), 1.0, -np.inf)
    return Theta(Tensor(logits, requires_grad=True))


def build_supernet(arch: MacroArch, tables: tuple[CostTable, CostTable], seed: int = 0) -> Supernet:
    lat_table, ener_table = tables
    return Supernet(arch, lat_table, ener_table, theta_init(arch), init_supernet_weights(arch, seed))



# ─────────────── shared phase machinery ───────────────
def clear_snapshots(log_dir: Path) -> int:
    """Remove θ snapshots left in ``log_dir`` by an earlier search."""
    stale = list(log_dir.glob(THETA_FILE_FORMAT.format("*")))
    for path in stale:
        try:
            path.unlink()
        except OSError as oe:
            raise ErrorCodes.raise_error(
                ErrorCodes.IO_ERROR,
                f"Could not remove stale snapshot {str(path)!r}: {oe}"
            ) from oe
    if stale:
        logger.debug(f"Removed {len(stale)} stale θ snapshot(s) from {str(log_dir)!r}")
    return len(stale)


def run_phase(
    forward: ForwardFn,
    zero_grad: Callable[[], None],
    optimizer: Optimizer,
    data: Dataset,
    *,
    phase: str,
    knobs: LossKnobs,
    batch_size: int,
    rng: np.random.Generator,
    epoch: int,
) -> PhaseStats:
    """One pass over ``data``; only ``optimizer``'s parameters are updated."""
    ce_sum = lat_sum = ener_sum = 0.0
    correct = seen = batches = 0
    for x, y in iter_batches(data, batch_size, rng):
        zero_grad()
        logits, lat, ener = forward(x)
        try:
            breakdown = total_loss(softmax_cross_entropy(logits, y), lat, ener, knobs)
        except NumericalError as ne:
            raise NumericalError(str(ne), epoch=epoch, phase=phase) from ne
        backward(breakdown.loss)
        optimizer.step()

        n = len(y)
        ce_sum += breakdown.ce * n
        lat_sum += breakdown.lat * n
        ener_sum += breakdown.ener * n
        correct += int((logits.data.argmax(axis=1) == y).sum())
        seen += n
        batches += 1

    if not seen:
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"{phase} phase of epoch {epoch} saw no samples.")
    ce, lat, ener = ce_sum / seen, lat_sum / seen, ener_sum / seen
    return PhaseStats(phase, ce, lat, ener, loss_value(ce, lat, ener, knobs), correct / seen, batches)


def evaluate(forward: ForwardFn, data: Dataset, batch_size: int = 256) -> float:
    correct = 0
    for x, y in iter_batches(data, batch_size):
        logits = forward(x)[0]
        correct += int((logits.data.argmax(axis=1) == y).sum())
    return correct / max(len(data), 1)



def _log_phase(epoch: int, tau: float, stats: PhaseStats) -> None:
    logger.info(
        f"epoch {epoch:>3} {stats.phase:<7} tau={tau:.4f} ce={stats.ce:.4f} lat={stats.lat:.4g}s "
        f"ener={stats.ener:.4g}J total={stats.total:.4f} acc={stats.acc:.3f}"
    )


def run_search(
    config: SearchConfig,
    arch: MacroArch,
    tables: tuple[CostTable, CostTable],
    dataset: Dataset,
    supernet: Optional[Supernet] = None,
) -> tuple[Theta, list[EpochLog]]:
    """Search θ; snapshots ``theta_epoch_<n>.txt`` and ``search_log.csv`` land in ``config.log_dir``."""
    from .childnet import childnet_cost, sample_childnet

    supernet = supernet or build_supernet(arch, tables, config.seed)
    weight_set, theta_set = split_dataset(dataset, config.split, config.seed)
    mean, std = weight_set.channel_stats()
    weight_set, theta_set = weight_set.standardized(mean, std), theta_set.standardized(mean, std)

    log_dir = ensure_dir(config.log_dir) if config.log_dir is not None else None
    if log_dir is not None:
        clear_snapshots(log_dir)
    w_opt = make_optimizer(supernet.weight_parameters(), config.w_optimizer)
    t_opt = make_optimizer(supernet.theta_parameters(), config.theta_optimizer)
    w_rng, t_rng = make_rng(config.seed, 1), make_rng(config.seed, 2)
    gumbel_rng = make_rng(config.seed, 4)

    def forward(x):
        out = supernet.forward(x, tau, gumbel_rng)
        return out.logits, out.lat, out.ener

    logs: list[EpochLog] = []
    for epoch in range(config.epochs):
        tau = tau_at(epoch, config)
        lr = w_opt.set_epoch(epoch, config.epochs)
        t_opt.set_epoch(epoch, config.epochs)
        common = dict(knobs=config.knobs, batch_size=config.batch_size, epoch=epoch)

        w_stats = run_phase(forward, supernet.zero_grad, w_opt, weight_set, phase="weights", rng=w_rng, **common)
        _log_phase(epoch, tau, w_stats)
        t_stats = None
        if epoch >= config.warmup_epochs:
            t_stats = run_phase(forward, supernet.zero_grad, t_opt, theta_set, phase="theta", rng=t_rng, **common)
            _log_phase(epoch, tau, t_stats)

        child = sample_childnet(supernet.theta, arch)
        child_lat, child_ener = childnet_cost(child, *tables)
        logger.info(f"epoch {epoch:>3} childnet [{child}] lat={child_lat:.4g}s ener={child_ener:.4g}J")

        theta_path = None
        if log_dir is not None:
            theta_path = save_theta(supernet.theta, log_dir / THETA_FILE_FORMAT.format(epoch), epoch, tau)
        logs.append(EpochLog(epoch, tau, lr, w_stats, t_stats, theta_path, child.choices, child_lat, child_ener))
        if log_dir is not None:
            write_search_log(logs, log_dir / SEARCH_LOG)

    return supernet.theta, logs
