import numpy as np
import pytest

from pyhwnas.core.models import CostTable, MacroArch
from pyhwnas.core.searchspace import build_macro
from pyhwnas.core.streamer import make_synthetic


CHEAP_BLOCK = 3



def micro_arch(layers=((4, 4, 1), (4, 4, 1)), num_classes=2) -> MacroArch:
    return build_macro(list(layers), num_classes, input_hw=(4, 4), stem_channels=4, head_channels=8)


def rigged_tables(
    arch: MacroArch, cheap: int = CHEAP_BLOCK, cost: float = 10.0, metric: str = "latency"
) -> tuple[CostTable, CostTable]:
    """In the ``metric`` table every admissible block costs ``cost`` except ``cheap``, which is ten
    times cheaper. The other table is flat at 1.0.
    """
    adm = arch.admissible_mask()
    rigged = np.where(adm, cost, np.nan)
    rigged[:, cheap] = cost / 10.0
    flat = np.where(adm, 1.0, np.nan)
    if metric == "energy":
        return CostTable("latency", flat), CostTable("energy", rigged)
    return CostTable("latency", rigged), CostTable("energy", flat)


def numeric_grad(f, array: np.ndarray, eps: float = 1e-6, cells=None) -> np.ndarray:
    """Central differences of the scalar ``f()`` w.r.t. ``array``, which is perturbed in place."""
    grad = np.zeros_like(array)
    for idx in cells if cells is not None else np.ndindex(array.shape):
        old = array[idx]
        array[idx] = old + eps
        up = f()
        array[idx] = old - eps
        down = f()
        array[idx] = old
        grad[idx] = (up - down) / (2 * eps)
    return grad



@pytest.fixture
def arch():
    return micro_arch()


@pytest.fixture
def tables(arch):
    return rigged_tables(arch)


@pytest.fixture
def separable():
    return make_synthetic(samples=64, classes=2, channels=3, image_size=4, noise=0.3, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
