from pathlib import Path
from typing import Optional

from ..analysis.base import ProcessFilters
from ..analysis.metrics import pareto_front
from ..analysis.record_filters import AccuracyFilter, EnergyFilter, LatencyFilter
from ..analysis.sweep import sweep
from ..utils.common import PathLike, ensure_dir, get_logger, quiet_logger, set_verbosity
from ..utils.constants import CHILDNET_FILE, ENER_LOOKUP, LAT_LOOKUP, PARETO_CSV, SWEEP_CSV, THETA_FILE_FORMAT
from ..utils.exceptions import ShapeError
from .childnet import childnet_cost, sample_childnet, train_childnet
from .costmodel import profile
from .models import ChildNet, CostTable, EpochLog, LossKnobs, ModelRecord, Theta
from .oracle import (
    MicroSpace,
    architecture_probabilities,
    enumerate_space,
    exact_expected_loss,
    gumbel_frequencies,
    pareto_architectures,
    relaxation_gap,
    total_variation,
)
from .reader import load_childnet, load_table, load_theta, read_records, save_childnet, save_table, write_records
from .trainer import run_search




class SearchEngine:
    """Drives profile -> search -> sample -> train-child -> sweep -> pareto from one ``RunConfig``."""

    def __init__(self, config=None, verbose=True):
        from ..cli.config import RunConfig

        set_verbosity(verbose)
        self.__logger = get_logger() if verbose else quiet_logger()
        self.config = config or RunConfig()
        self.arch = self.config.arch()
        self._tables: Optional[tuple[CostTable, CostTable]] = None
        self._dataset = None

    @property
    def out_dir(self) -> Path:
        return ensure_dir(self.config.out)

    @property
    def dataset(self):
        if self._dataset is None:
            self._dataset = self.config.dataset()
        return self._dataset

    @property
    def tables(self) -> tuple[CostTable, CostTable]:
        """Configured tables, then tables already profiled into the output dir, then a fresh profile."""
        if self._tables is None:
            lat_path, ener_path = self.config.table_paths()
            if lat_path is None or ener_path is None:
                default_lat, default_ener = self.config.out / LAT_LOOKUP, self.config.out / ENER_LOOKUP
                if default_lat.is_file() and default_ener.is_file():
                    lat_path, ener_path = default_lat, default_ener
            if lat_path is not None and ener_path is not None:
                self._tables = (load_table(lat_path), load_table(ener_path))
            else:
                self._tables = self.profile()[:2]
        return self._tables

    # ─────────────── pipeline steps ───────────────
    def profile(self) -> tuple[CostTable, CostTable, Path, Path]:
        lat_table, ener_table = profile(self.config.device(), self.arch)
        out = self.out_dir
        lat_path = save_table(lat_table, out / LAT_LOOKUP)
        ener_path = save_table(ener_table, out / ENER_LOOKUP)
        self._tables = (lat_table, ener_table)
        self.__logger.info(f"Wrote {lat_path} and {ener_path}")
        return lat_table, ener_table, lat_path, ener_path

    def search(self, knobs: Optional[LossKnobs] = None) -> tuple[Theta, list[EpochLog]]:
        config = self.config.search_config()
        if knobs is not None:
            config = config.replace(knobs=knobs)
        return run_search(config, self.arch, self.tables, self.dataset)

    def latest_theta(self) -> Path:
        snapshots = sorted(
            self.config.out.glob(THETA_FILE_FORMAT.format("*")), key=lambda p: int(p.stem.rsplit("_", 1)[1])
        )
        if not snapshots:
            raise FileNotFoundError(f"No θ snapshots in {str(self.config.out)!r}; run 'search' first.")
        return snapshots[-1]

    def sample(self, theta_path: Optional[PathLike] = None) -> tuple[ChildNet, Path]:
        theta, epoch, _ = load_theta(theta_path or self.latest_theta())
        if theta.num_layers != self.arch.num_layers:
            raise ShapeError(
                f"θ file has {theta.num_layers} layers but the {self.arch.preset} architecture has "
                f"{self.arch.num_layers} TBS layers."
            )
        child = sample_childnet(theta, self.arch)
        path = save_childnet(child, self.out_dir / CHILDNET_FILE)
        self.__logger.info(f"Sampled childnet [{child}] from epoch {epoch} -> {path}")
        return child, path

    def train_child(self, child_path: Optional[PathLike] = None) -> dict:
        child = load_childnet(child_path or self.config.out / CHILDNET_FILE, self.arch)
        latency, energy = childnet_cost(child, *self.tables)
        accuracy = train_childnet(
            child,
            self.dataset,
            epochs=self.config.get("child", "epochs", 30),
            seed=self.config.seed,
            optimizer=self.config.child_optimizer(),
            holdout=self.config.get("child", "holdout", 0.2),
        )
        report = {"childnet": str(child), "accuracy": accuracy, "latency_s": latency, "energy_j": energy}
        self.__logger.info(f"accuracy={accuracy:.4f} latency={latency:.6g}s energy={energy:.6g}J")
        return report

    def sweep(self) -> tuple[list[ModelRecord], Path]:
        path = self.out_dir / SWEEP_CSV
        records = sweep(
            self.config.grid(),
            self.config.search_config(),
            self.arch,
            self.tables,
            self.dataset,
            child_epochs=self.config.get("child", "epochs", 30),
            csv_path=path,
            max_workers=self.config.get("sweep", "workers"),
            paired=self.config.get("sweep", "paired", False),
        )
        return records, path

    def pareto(
        self,
        csv_path: Optional[PathLike] = None,
        *,
        max_latency: Optional[float] = None,
        max_energy: Optional[float] = None,
        min_accuracy: Optional[float] = None,
    ) -> tuple[list[ModelRecord], Path]:
        records = read_records(csv_path or self.config.out / SWEEP_CSV)
        limits = ProcessFilters([
            LatencyFilter(max_latency=max_latency),
            EnergyFilter(max_energy=max_energy),
            AccuracyFilter(min_accuracy=min_accuracy),
        ])
        kept = limits.apply(records)
        front = pareto_front(kept) if kept else []
        path = write_records(front, self.out_dir / PARETO_CSV)
        self.__logger.info(f"{len(front)} of {len(records)} records are Pareto-optimal -> {path}")
        return front, path

    def oracle(self) -> dict:
        get = self.config.get
        space = MicroSpace.random(get("oracle", "layers", 3), get("oracle", "candidates", 3), get("oracle", "seed", self.config.seed))
        knobs = self.config.knobs()
        theta = space.lat * 0.0
        entries = enumerate_space(space)
        exact_p = architecture_probabilities(theta, space)
        _, arch_freq = gumbel_frequencies(theta, get("oracle", "samples", 20_000), get("oracle", "tau", 1e-3), self.config.seed)
        report = {
            "architectures": len(entries),
            "min_latency": min(lat for _, lat, _ in entries),
            "min_energy": min(ener for _, _, ener in entries),
            "pareto": [",".join(map(str, a)) for a in pareto_architectures(space)],
            "exact_expected_loss": exact_expected_loss(theta, space, knobs),
            "relaxation_gap": relaxation_gap(theta, space, knobs),
            "gumbel_total_variation": total_variation(arch_freq, exact_p),
        }
        for key, value in report.items():
            self.__logger.info(f"{key}: {value}")
        return report
