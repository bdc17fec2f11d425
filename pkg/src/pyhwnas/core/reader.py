"""Text formats: lookup tables, θ snapshots, childnet files and CSV logs.

Floats are written with 17 significant digits so save -> load -> save is
byte-identical.
"""
import csv
import re
from functools import wraps
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_fixed

from ..utils.common import PathLike
from ..utils.constants import NUM_BLOCKS, SEARCH_LOG_COLUMNS, SWEEP_COLUMNS
from ..utils.exceptions import ErrorCodes, HwnasIOError, TableFormatError
from .autodiff import Tensor
from .models import ChildNet, CostTable, EpochLog, LossKnobs, MacroArch, ModelRecord, Theta


TABLE_HEADER = re.compile(r"^# metric=(latency|energy) unit=(s|J) layers=(\d+) blocks=(\d+)$")
THETA_HEADER = re.compile(r"^# layers=(\d+) blocks=(\d+) epoch=(\d+) tau=(\S+)$")
CHILD_HEADER = re.compile(r"^# preset=(\S+) layers=(\d+)$")
ABSENT = "-"



def must_exist(func):
    @wraps(func)
    def wrapper(path, *args, **kwargs):
        path = Path(path).expanduser()
        if not path.is_file():
            raise ErrorCodes.raise_error(ErrorCodes.IO_ERROR, f"No such file: {str(path)!r}")
        return func(path, *args, **kwargs)
    return wrapper


@retry(
    retry=retry_if_exception_type(OSError),
    stop=stop_after_attempt(3),
    wait=wait_fixed(0.05),
    reraise=True,
)
def _read_lines(path: Path) -> list[str]:
    return path.read_text(encoding="utf-8").splitlines()


def _write_text(path: PathLike, text: str) -> Path:
    path = Path(path).expanduser()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as oe:
        raise HwnasIOError(f"Cannot write {str(path)!r}: {oe}") from oe
    return path


def format_float(value: float) -> str:
    if np.isneginf(value):
        return "-inf"
    return f"{float(value):.17g}"



# ─────────────── lookup tables ───────────────
def format_table(table: CostTable) -> str:
    lines = [f"# metric={table.metric} unit={table.unit} layers={table.num_layers} blocks={NUM_BLOCKS}"]
    for row in table.values:
        lines.append(" ".join(ABSENT if np.isnan(v) else format_float(v) for v in row))
    return "\n".join(lines) + "\n"


def save_table(table: CostTable, path: PathLike) -> Path:
    return _write_text(path, format_table(table))


def parse_table(lines: list[str]) -> CostTable:
    if not lines:
        raise TableFormatError("empty table file", line_no=1)
    header = TABLE_HEADER.match(lines[0].strip())
    if header is None:
        raise TableFormatError(f"malformed header {lines[0]!r}", line_no=1)
    metric, unit, layers, blocks = header.group(1), header.group(2), int(header.group(3)), int(header.group(4))
    if blocks != NUM_BLOCKS:
        raise TableFormatError(f"blocks={blocks} but tables have {NUM_BLOCKS} columns", line_no=1)
    if CostTable.UNITS[metric] != unit:
        raise TableFormatError(f"unit {unit!r} does not match metric {metric!r}", line_no=1)

    rows = [line for line in lines[1:]]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) != layers:
        raise TableFormatError(f"header declares {layers} rows, found {len(rows)}", line_no=len(lines))

    values = np.empty((layers, NUM_BLOCKS))
    for idx, line in enumerate(rows):
        line_no = idx + 2
        fields = line.split()
        if len(fields) != NUM_BLOCKS:
            raise TableFormatError(f"row {idx} has {len(fields)} columns, expected {NUM_BLOCKS}", line_no=line_no)
        for col, token in enumerate(fields):
            if token == ABSENT:
                values[idx, col] = np.nan
                continue
            try:
                v = float(token)
            except ValueError:
                raise TableFormatError(f"row {idx} column {col}: {token!r} is not a number", line_no=line_no) from None
            if np.isnan(v):
                raise TableFormatError(f"row {idx} column {col}: NaN is not allowed", line_no=line_no)
            if not np.isfinite(v) or v < 0:
                raise TableFormatError(f"row {idx} column {col}: value {token} must be finite and >= 0", line_no=line_no)
            values[idx, col] = v
    return CostTable(metric, values, unit)


@must_exist
def load_table(path: PathLike) -> CostTable:
    return parse_table(_read_lines(path))



# ─────────────── θ snapshots ───────────────
def format_theta(theta: Theta, epoch: int, tau: float) -> str:
    lines = [f"# layers={theta.num_layers} blocks={NUM_BLOCKS} epoch={epoch} tau={format_float(tau)}"]
    for row in theta.values:
        lines.append(" ".join(map(format_float, row)))
    return "\n".join(lines) + "\n"


def save_theta(theta: Theta, path: PathLike, epoch: int = 0, tau: float = 1.0) -> Path:
    return _write_text(path, format_theta(theta, epoch, tau))


@must_exist
def load_theta(path: PathLike) -> tuple[Theta, int, float]:
    """Return ``(theta, epoch, tau)`` from a snapshot file."""
    lines = _read_lines(path)
    header = THETA_HEADER.match(lines[0].strip()) if lines else None
    if header is None:
        raise TableFormatError(f"malformed θ header {lines[0] if lines else ''!r}", line_no=1)
    layers, blocks, epoch, tau = int(header.group(1)), int(header.group(2)), int(header.group(3)), float(header.group(4))
    if blocks != NUM_BLOCKS:
        raise TableFormatError(f"blocks={blocks} but θ rows have {NUM_BLOCKS} columns", line_no=1)
    rows = [line for line in lines[1:] if line.strip()]
    if len(rows) != layers:
        raise TableFormatError(f"header declares {layers} rows, found {len(rows)}", line_no=len(lines))
    values = np.empty((layers, NUM_BLOCKS))
    for idx, line in enumerate(rows):
        fields = line.split()
        if len(fields) != NUM_BLOCKS:
            raise TableFormatError(f"row {idx} has {len(fields)} columns, expected {NUM_BLOCKS}", line_no=idx + 2)
        try:
            values[idx] = [float(f) for f in fields]
        except ValueError:
            raise TableFormatError(f"row {idx} holds a non-numeric value", line_no=idx + 2) from None
        if np.isnan(values[idx]).any() or np.isposinf(values[idx]).any():
            raise TableFormatError(f"row {idx}: only finite values or -inf are allowed", line_no=idx + 2)
    return Theta(Tensor(values, requires_grad=True)), epoch, tau



# ─────────────── childnet files ───────────────
def save_childnet(child: ChildNet, path: PathLike) -> Path:
    preset = child.arch.preset if child.arch is not None else "explicit"
    return _write_text(path, f"# preset={preset} layers={len(child.choices)}\n{child}\n")


@must_exist
def load_childnet(path: PathLike, arch: Optional[MacroArch] = None) -> ChildNet:
    lines = [line for line in _read_lines(path) if line.strip()]
    header = CHILD_HEADER.match(lines[0].strip()) if lines else None
    if header is None or len(lines) != 2:
        raise TableFormatError("childnet file needs a '# preset=<name> layers=<L>' header and one line of indices",
                               line_no=1)
    preset, layers = header.group(1), int(header.group(2))
    try:
        choices = tuple(int(tok) for tok in lines[1].split(","))
    except ValueError:
        raise TableFormatError(f"bad block index list {lines[1]!r}", line_no=2) from None
    if len(choices) != layers:
        raise TableFormatError(f"header declares {layers} layers, found {len(choices)} indices", line_no=2)
    if arch is not None and arch.preset != preset:
        raise ErrorCodes.raise_error(
            ErrorCodes.VALIDATION_ERROR,
            f"childnet was sampled for preset {preset!r} but the configured architecture is {arch.preset!r}."
        )
    return ChildNet(choices, arch)



# ─────────────── CSV logs ───────────────
def epoch_rows(log: EpochLog) -> list[dict]:
    return [
        {
            "epoch": log.epoch,
            "phase": stats.phase,
            "tau": format_float(log.tau),
            "ce": format_float(stats.ce),
            "lat": format_float(stats.lat),
            "ener": format_float(stats.ener),
            "total": format_float(stats.total),
            "acc": format_float(stats.acc),
        }
        for stats in log.phases
    ]


def write_search_log(logs: Iterable[EpochLog], path: PathLike) -> Path:
    path = Path(path).expanduser()
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SEARCH_LOG_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for log in logs:
            writer.writerows(epoch_rows(log))
    return path


@must_exist
def read_search_log(path: PathLike) -> list[dict]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def record_row(record: ModelRecord) -> dict:
    from ..analysis.metrics import record_dominance

    k = record.knobs
    label = record_dominance(record).label
    return {
        "model_id": record.model_id,
        "alpha": format_float(k.alpha),
        "beta": format_float(k.beta),
        "gamma": format_float(k.gamma),
        "delta": format_float(k.delta),
        "vlat": format_float(record.vlat),
        "vener": format_float(record.vener),
        "dominance": label,
        "accuracy": format_float(record.accuracy),
        "latency_s": format_float(record.latency),
        "energy_j": format_float(record.energy),
        "child_choices": ",".join(map(str, record.choices)),
    }


class RecordWriter:
    """Single writer for sweep CSVs; rows are flushed as they arrive."""

    def __init__(self, path: PathLike):
        self.path = Path(path).expanduser()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", newline="", encoding="utf-8")
        self._writer = csv.DictWriter(self._fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        self._writer.writeheader()
        self._fh.flush()

    def write(self, record: ModelRecord) -> None:
        self._writer.writerow(record_row(record))
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *args):
        self.close()


def write_records(records: Iterable[ModelRecord], path: PathLike) -> Path:
    with RecordWriter(path) as writer:
        for record in records:
            writer.write(record)
    return writer.path


@must_exist
def read_records(path: PathLike) -> list[ModelRecord]:
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(SWEEP_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise TableFormatError(f"sweep CSV is missing columns {sorted(missing)}", line_no=1)
        for line_no, row in enumerate(reader, start=2):
            try:
                choices = tuple(int(c) for c in row["child_choices"].split(",") if c.strip())
                records.append(ModelRecord(
                    model_id=int(row["model_id"]),
                    knobs=LossKnobs(*(float(row[k]) for k in ("alpha", "beta", "gamma", "delta"))),
                    accuracy=float(row["accuracy"]),
                    latency=float(row["latency_s"]),
                    energy=float(row["energy_j"]),
                    vlat=float(row["vlat"]),
                    vener=float(row["vener"]),
                    choices=choices,
                ))
            except (TypeError, ValueError) as e:
                raise TableFormatError(f"bad sweep row: {e}", line_no=line_no) from e
    return records
