import itertools
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Iterable, Optional, Sequence

from ..core.childnet import childnet_cost, sample_childnet, train_childnet
from ..core.models import CostTable, LossKnobs, MacroArch, ModelRecord, SearchConfig
from ..core.reader import RecordWriter
from ..core.streamer import Dataset
from ..core.trainer import run_search
from ..utils.common import PathLike, default_max_workers, get_logger, unpack_error
from ..utils.exceptions import ErrorCodes
from .metrics import baseline_costs, v_metrics


logger = get_logger(name=__name__)



def knob_grid(
    alphas: Iterable[float] = (0.0,),
    betas: Iterable[float] = (1.0,),
    gammas: Iterable[float] = (0.0,),
    deltas: Iterable[float] = (1.0,),
) -> list[LossKnobs]:
    return [LossKnobs(a, b, g, d) for a, b, g, d in itertools.product(alphas, betas, gammas, deltas)]



def evaluate_point(
    index: int,
    knobs: LossKnobs,
    base_config: SearchConfig,
    arch: MacroArch,
    tables: tuple[CostTable, CostTable],
    dataset: Dataset,
    *,
    child_epochs: int,
    baselines: tuple[float, float],
    seed: int,
) -> ModelRecord:
    """Search, extract, cost and retrain one knob point."""
    log_dir = base_config.log_dir / f"model_{index:03d}" if base_config.log_dir is not None else None
    config = base_config.replace(knobs=knobs, seed=seed, log_dir=log_dir)
    theta, _ = run_search(config, arch, tables, dataset)
    child = sample_childnet(theta, arch)
    latency, energy = childnet_cost(child, *tables)
    accuracy = train_childnet(child, dataset, epochs=child_epochs, seed=seed,
                              batch_size=base_config.batch_size)
    vlat, vener = v_metrics(knobs, *baselines)
    return ModelRecord(
        model_id=index,
        knobs=knobs,
        accuracy=accuracy,
        latency=latency,
        energy=energy,
        vlat=vlat,
        vener=vener,
        choices=child.choices,
    )


def sweep(
    grid: Sequence[LossKnobs],
    base_config: SearchConfig,
    arch: MacroArch,
    tables: tuple[CostTable, CostTable],
    dataset: Dataset,
    *,
    child_epochs: int = 30,
    csv_path: Optional[PathLike] = None,
    max_workers: Optional[int] = None,
    paired: bool = False,
    baselines: Optional[tuple[float, float]] = None,
) -> list[ModelRecord]:
    """Evaluate every knob point; rows reach ``csv_path`` as points finish.

    Point ``i`` runs with seed ``base_config.seed + i`` unless ``paired``, in
    which case every point reuses the base seed. Failed points are logged and
    skipped. Strict configs run sequentially in grid order.
    """
    grid = list(grid)
    if not grid:
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, "sweep: knob grid is empty.")
    baselines = baselines or baseline_costs(*tables)

    def run(index, knobs):
        seed = base_config.seed if paired else base_config.seed + index
        return evaluate_point(index, knobs, base_config, arch, tables, dataset,
                              child_epochs=child_epochs, baselines=baselines, seed=seed)

    writer = RecordWriter(csv_path) if csv_path is not None else None
    records: list[ModelRecord] = []

    def collect(index, knobs, produce):
        try:
            record = produce()
        except Exception as e:
            logger.exception(f"Sweep point {index} ({knobs}) failed and was skipped: {unpack_error(e)}")
            return
        records.append(record)
        if writer is not None:
            writer.write(record)
        logger.info(
            f"Sweep point {index}: acc={record.accuracy:.4f} lat={record.latency:.4g}s "
            f"ener={record.energy:.4g}J child=[{','.join(map(str, record.choices))}]"
        )

    try:
        if base_config.strict:
            for index, knobs in enumerate(grid):
                collect(index, knobs, lambda: run(index, knobs))
        else:
            workers = min(max_workers or default_max_workers(), len(grid))
            with ThreadPoolExecutor(max_workers=workers) as executor:
                futures = {executor.submit(run, i, k): (i, k) for i, k in enumerate(grid)}
                for future in as_completed(futures):
                    index, knobs = futures[future]
                    collect(index, knobs, future.result)
    finally:
        if writer is not None:
            writer.close()

    if csv_path is not None:
        logger.info(f"Sweep wrote {len(records)}/{len(grid)} records to {Path(csv_path).name}")
    return sorted(records, key=lambda r: r.model_id)
