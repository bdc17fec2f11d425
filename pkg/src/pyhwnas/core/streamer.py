"""Image-classification datasets and minibatch streaming.

Raw binary layout (little endian)::

    b"HNDS" | uint32 N C H W classes | N x uint8 label | N*C*H*W x uint8 pixel
"""
import pickle
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from ..utils.common import PathLike, get_logger, make_rng
from ..utils.exceptions import ErrorCodes, HwnasIOError, ShapeError, TableFormatError
from .autodiff import Tensor


MAGIC = b"HNDS"
HEADER_BYTES = len(MAGIC) + 5 * 4

logger = get_logger(name=__name__)



@dataclass(eq=False)
class Dataset:
    images: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise ShapeError(f"Dataset: images must be [N,C,H,W], got shape {self.images.shape}.")
        if self.labels.shape != (self.images.shape[0],):
            raise ShapeError(
                f"Dataset: {self.labels.shape[0] if self.labels.ndim else 0} labels for {self.images.shape[0]} images."
            )
        if self.num_classes < 2:
            raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"Dataset: need >= 2 classes, got {self.num_classes}.")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ErrorCodes.raise_error(
                ErrorCodes.VALIDATION_ERROR,
                f"Dataset: labels must lie in [0, {self.num_classes})."
            )

    def __len__(self):
        return self.images.shape[0]

    @property
    def channels(self) -> int:
        return self.images.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.images[indices], self.labels[indices], self.num_classes)

    def channel_stats(self) -> tuple[np.ndarray, np.ndarray]:
        mean = self.images.mean(axis=(0, 2, 3))
        std = self.images.std(axis=(0, 2, 3))
        return mean, np.where(std > 0, std, 1.0)

    def standardized(self, mean=None, std=None) -> "Dataset":
        """Per-channel zero mean / unit variance, optionally with given statistics."""
        if mean is None or std is None:
            mean, std = self.channel_stats()
        mean = np.asarray(mean, dtype=np.float64).reshape(1, -1, 1, 1)
        std = np.asarray(std, dtype=np.float64).reshape(1, -1, 1, 1)
        return Dataset((self.images - mean) / std, self.labels, self.num_classes)

    def with_shuffled_labels(self, seed: int = 0) -> "Dataset":
        rng = make_rng(seed, 7)
        return Dataset(self.images, rng.permutation(self.labels), self.num_classes)



def make_synthetic(
    samples: int = 512,
    classes: int = 10,
    channels: int = 3,
    image_size: int = 8,
    noise: float = 0.5,
    seed: int = 0,
) -> Dataset:
    """Gaussian class prototypes plus isotropic noise; classes are balanced."""
    if samples < classes:
        raise ErrorCodes.raise_error(
            ErrorCodes.VALIDATION_ERROR,
            f"make_synthetic: {samples} samples cannot cover {classes} classes."
        )
    if noise < 0:
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"make_synthetic: noise must be >= 0, got {noise}.")
    rng = make_rng(seed, 3)
    shape = (channels, image_size, image_size)
    prototypes = rng.standard_normal((classes, *shape))
    labels = rng.permutation(np.arange(samples) % classes)
    images = prototypes[labels] + noise * rng.standard_normal((samples, *shape))
    return Dataset(images, labels, classes)



# ─────────────── raw binary format ───────────────
def save_binary_dataset(dataset: Dataset, path: PathLike) -> Path:
    """Pixels are rounded and clipped to uint8."""
    path = Path(path).expanduser()
    n, c, h, w = dataset.images.shape
    header = MAGIC + np.array([n, c, h, w, dataset.num_classes], dtype="<u4").tobytes()
    pixels = np.clip(np.rint(dataset.images), 0, 255).astype(np.uint8)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(header + dataset.labels.astype(np.uint8).tobytes() + pixels.tobytes())
    except OSError as oe:
        raise HwnasIOError(f"Cannot write {str(path)!r}: {oe}") from oe
    return path


@retry(
    retry=retry_if_exception_type(OSError),
    stop=stop_after_attempt(3),
    wait=wait_exponential(multiplier=0.05, max=1),
    reraise=True,
)
def _read_bytes(path: Path) -> bytes:
    return path.read_bytes()


def load_binary_dataset(path: PathLike) -> Dataset:
    path = Path(path).expanduser()
    if not path.is_file():
        raise ErrorCodes.raise_error(ErrorCodes.IO_ERROR, f"No such file: {str(path)!r}")
    raw = _read_bytes(path)
    if len(raw) < HEADER_BYTES or raw[:4] != MAGIC:
        raise TableFormatError(f"{path.name}: not a raw dataset file (bad magic)", line_no=1)
    n, c, h, w, classes = (int(v) for v in np.frombuffer(raw, dtype="<u4", count=5, offset=4))
    expected = HEADER_BYTES + n + n * c * h * w
    if len(raw) != expected:
        raise TableFormatError(f"{path.name}: expected {expected} bytes for N={n} C={c} H={h} W={w}, found {len(raw)}",
                               line_no=1)
    labels = np.frombuffer(raw, dtype=np.uint8, count=n, offset=HEADER_BYTES)
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=HEADER_BYTES + n).reshape(n, c, h, w)
    logger.info(f"Loaded {n} images [{c}x{h}x{w}], {classes} classes from {path.name}")
    return Dataset(pixels.astype(np.float64), labels.astype(np.int64), classes)


def load_cifar10(root: PathLike, train: bool = True, limit: Optional[int] = None) -> Dataset:
    """Read the CIFAR-10 "python version" batches from ``root``."""
    root = Path(root).expanduser()
    names = [f"data_batch_{i}" for i in range(1, 6)] if train else ["test_batch"]
    images, labels = [], []
    for name in names:
        batch = root / name
        if not batch.is_file():
            raise ErrorCodes.raise_error(ErrorCodes.IO_ERROR, f"CIFAR-10 batch {str(batch)!r} not found.")
        with batch.open("rb") as fh:
            entry = pickle.load(fh, encoding="bytes")
        images.append(np.asarray(entry[b"data"], dtype=np.uint8).reshape(-1, 3, 32, 32))
        labels.extend(entry[b"labels"])
    data = Dataset(np.concatenate(images).astype(np.float64), np.asarray(labels), 10)
    return data if limit is None else data.subset(np.arange(min(limit, len(data))))



def iter_batches(
    dataset: Dataset,
    batch_size: int,
    rng: Optional[np.random.Generator] = None,
) -> Iterator[tuple[Tensor, np.ndarray]]:
    """Yield ``(x, labels)``; order is shuffled by ``rng`` or sequential without it."""
    if batch_size < 1:
        raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"iter_batches: batch_size must be >= 1, got {batch_size}.")
    order = np.arange(len(dataset)) if rng is None else rng.permutation(len(dataset))
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        yield Tensor(dataset.images[idx]), dataset.labels[idx]
