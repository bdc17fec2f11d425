"""Flat ``section.key=value`` run-config files.

Example::

    # desk search with a latency penalty
    arch.preset=desk
    search.epochs=20
    knobs.alpha=0.2
    sweep.alphas=0,0.25,0.5,1.0
"""
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional

from ..core.models import DeviceModel, LossKnobs, MacroArch, OptimizerConfig, SearchConfig, Serializable
from ..core.searchspace import build_macro
from ..core.streamer import Dataset, load_binary_dataset, load_cifar10, make_synthetic
from ..utils.common import PathLike
from ..utils.exceptions import ConfigError, ErrorCodes
from ..analysis.sweep import knob_grid



def _bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _floats(value: str) -> tuple[float, ...]:
    return tuple(float(v) for v in value.split(",") if v.strip())


def _layers(value: str) -> tuple[tuple[int, int, int], ...]:
    """``in:out:stride`` triples separated by commas."""
    return tuple(tuple(int(p) for p in item.split(":")) for item in value.split(",") if item.strip())


def _optional_int(value: str) -> Optional[int]:
    return None if value.strip().lower() in ("", "none") else int(value)


KNOWN_KEYS: dict[str, dict[str, Callable[[str], Any]]] = {
    "arch": {
        "preset": str, "num_tbs": int, "layers": _layers, "num_classes": int,
        "input_size": int, "input_channels": int, "stem_channels": int, "head_channels": int,
    },
    "data": {
        "kind": str, "path": Path, "samples": int, "noise": float, "limit": _optional_int,
    },
    "search": {
        "defaults": str, "epochs": int, "warmup_epochs": int, "batch_size": int, "split": float,
        "tau_init": float, "tau_min": float,
        "w_lr": float, "w_momentum": float, "w_weight_decay": float,
        "theta_lr": float, "theta_weight_decay": float,
    },
    "knobs": {"alpha": float, "beta": float, "gamma": float, "delta": float},
    "sweep": {
        "alphas": _floats, "betas": _floats, "gammas": _floats, "deltas": _floats,
        "workers": _optional_int, "paired": _bool,
    },
    "device": {
        "supply_voltage": float, "idle_current": float, "max_current": float,
        "throughput": float, "per_block_overhead": float, "utilization_exponent": float,
    },
    "tables": {"latency": Path, "energy": Path},
    "child": {"epochs": int, "lr": float, "holdout": float},
    "oracle": {"layers": int, "candidates": int, "samples": int, "tau": float, "seed": int},
    "run": {"seed": int, "strict": _bool, "out": Path},
}



@dataclass(kw_only=True)
class RunConfig(Serializable):
    sections: dict[str, dict[str, Any]] = field(default_factory=dict)
    seed: int = 0
    strict: bool = True
    out: Path = Path("runs")

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    # ─────────────── resolved objects ───────────────
    def arch(self) -> MacroArch:
        size = self.get("arch", "input_size", 8)
        layers = self.get("arch", "layers")
        return build_macro(
            self.get("arch", "preset", "desk") if layers is None else layers,
            self.get("arch", "num_classes", 10),
            num_tbs=self.get("arch", "num_tbs"),
            input_channels=self.get("arch", "input_channels", 3),
            input_hw=(size, size),
            stem_channels=self.get("arch", "stem_channels"),
            head_channels=self.get("arch", "head_channels"),
        )

    def device(self) -> DeviceModel:
        return DeviceModel(**self.sections.get("device", {}))

    def knobs(self) -> LossKnobs:
        return LossKnobs(**self.sections.get("knobs", {}))

    def search_config(self) -> SearchConfig:
        s = self.sections.get("search", {})
        defaults = s.get("defaults", "desk")
        if defaults not in ("desk", "full"):
            raise ConfigError(f"search.defaults must be 'desk' or 'full', got {defaults!r}.")
        base = SearchConfig.desk() if defaults == "desk" else SearchConfig()
        w_opt = replace(
            base.w_optimizer,
            lr=s.get("w_lr", base.w_optimizer.lr),
            momentum=s.get("w_momentum", base.w_optimizer.momentum),
            weight_decay=s.get("w_weight_decay", base.w_optimizer.weight_decay),
        )
        t_opt = replace(
            base.theta_optimizer,
            lr=s.get("theta_lr", base.theta_optimizer.lr),
            weight_decay=s.get("theta_weight_decay", base.theta_optimizer.weight_decay),
        )
        plain = {k: v for k, v in s.items() if k in ("epochs", "warmup_epochs", "batch_size", "split", "tau_init", "tau_min")}
        return base.replace(
            **plain, w_optimizer=w_opt, theta_optimizer=t_opt,
            knobs=self.knobs(), seed=self.seed, strict=self.strict, log_dir=self.out,
        )

    def grid(self) -> list[LossKnobs]:
        s, k = self.sections.get("sweep", {}), self.knobs()
        return knob_grid(
            s.get("alphas", (k.alpha,)),
            s.get("betas", (k.beta,)),
            s.get("gammas", (k.gamma,)),
            s.get("deltas", (k.delta,)),
        )

    def child_optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(kind="sgd", lr=self.get("child", "lr", 0.05), momentum=0.9, weight_decay=1e-4)

    def table_paths(self) -> tuple[Optional[Path], Optional[Path]]:
        return self.get("tables", "latency"), self.get("tables", "energy")

    def dataset(self) -> Dataset:
        arch = self.arch()
        kind = self.get("data", "kind", "synthetic")
        match kind:
            case "synthetic":
                return make_synthetic(
                    samples=self.get("data", "samples", 512),
                    classes=arch.num_classes,
                    channels=arch.input_channels,
                    image_size=arch.input_hw[0],
                    noise=self.get("data", "noise", 0.5),
                    seed=self.seed,
                )
            case "binary":
                return load_binary_dataset(self._data_path())
            case "cifar10":
                return load_cifar10(self._data_path(), limit=self.get("data", "limit"))
            case _:
                raise ConfigError(f"data.kind must be synthetic, binary or cifar10, got {kind!r}.")

    def _data_path(self) -> Path:
        path = self.get("data", "path")
        if path is None:
            raise ConfigError("data.path is required for binary and cifar10 datasets.")
        return path

    def validate_paths(self) -> None:
        for section, key in (("tables", "latency"), ("tables", "energy"), ("data", "path")):
            path = self.get(section, key)
            if path is not None and not Path(path).exists():
                raise ErrorCodes.raise_error(ErrorCodes.IO_ERROR, f"{section}.{key}: no such path {str(path)!r}.")

    def with_overrides(self, *, seed=None, strict=None, out=None) -> "RunConfig":
        return replace(
            self,
            seed=self.seed if seed is None else seed,
            strict=self.strict if strict is None else strict,
            out=self.out if out is None else Path(out),
        )



def parse_config(text: str) -> RunConfig:
    sections: dict[str, dict[str, Any]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"line {line_no}: expected 'section.key=value', got {raw.strip()!r}.")
        converter = KNOWN_KEYS.get(section, {}).get(name)
        if converter is None:
            raise ConfigError(f"line {line_no}: unknown config key {key.strip()!r}.")
        try:
            sections.setdefault(section, {})[name] = converter(value.strip())
        except (TypeError, ValueError) as e:
            raise ConfigError(f"line {line_no}: bad value for {key.strip()!r}: {e}") from e

    run = sections.pop("run", {})
    return RunConfig(
        sections=sections,
        seed=run.get("seed", 0),
        strict=run.get("strict", True),
        out=run.get("out", Path("runs")),
    )


def load_config(path: Optional[PathLike]) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path).expanduser()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as oe:
        raise ErrorCodes.raise_error(ErrorCodes.IO_ERROR, f"Cannot read config {str(path)!r}: {oe}") from oe
    return parse_config(text)
