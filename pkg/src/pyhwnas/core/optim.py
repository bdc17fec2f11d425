"""In-place optimizers over :class:`Tensor` parameters and the cosine schedules."""
import math
from typing import Iterable, Optional

import numpy as np

from ..utils.exceptions import ErrorCodes
from .autodiff import Tensor
from .models import OptimizerConfig



def cosine_lr(base_lr: float, epoch: int, epochs: int) -> float:
    """Cosine decay from ``base_lr`` at epoch 0 to 0 at the last epoch, ``epochs - 1``."""
    if epochs < 1 or not 0 <= epoch < epochs:
        raise ErrorCodes.raise_error(
            ErrorCodes.VALIDATION_ERROR,
            f"cosine_lr: epoch {epoch} outside [0, {epochs - 1}]."
        )
    if epochs == 1:
        return base_lr
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / (epochs - 1)))


def cosine_anneal(start: float, end: float, step: int, steps: int) -> float:
    """Cosine from ``start`` at step 0 to exactly ``end`` at ``steps - 1``."""
    if step == 0:
        return float(start)
    if step == steps - 1:
        return float(end)
    return end + 0.5 * (start - end) * (1.0 + math.cos(math.pi * step / (steps - 1)))



class Optimizer:
    def __init__(self, params: Iterable[Tensor], config: OptimizerConfig):
        self.params = list(params)
        self.config = config
        self.lr = config.lr
        self.steps = 0

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def set_epoch(self, epoch: int, epochs: int) -> float:
        if self.config.lr_schedule == "cosine":
            self.lr = cosine_lr(self.config.lr, epoch, epochs)
        else:
            self.lr = self.config.lr
        return self.lr

    def step(self) -> None:
        raise NotImplementedError



class SGD(Optimizer):
    """Heavy-ball momentum with L2 weight decay added to the gradient."""

    def __init__(self, params, config: OptimizerConfig):
        super().__init__(params, config)
        self._velocity: list[Optional[np.ndarray]] = [None] * len(self.params)

    def step(self) -> None:
        mu, wd = self.config.momentum, self.config.weight_decay
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad + wd * p.data if wd else p.grad
            v = self._velocity[i]
            v = g.copy() if v is None else mu * v + g
            self._velocity[i] = v
            p.data -= self.lr * v
        self.steps += 1



class Adam(Optimizer):
    """Adam with decoupled weight decay; ``-inf`` cells are left untouched."""

    def __init__(self, params, config: OptimizerConfig):
        super().__init__(params, config)
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        b1, b2 = self.config.betas
        eps, wd = self.config.eps, self.config.weight_decay
        self.steps += 1
        c1, c2 = 1.0 - b1 ** self.steps, 1.0 - b2 ** self.steps
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            live = np.isfinite(p.data)
            g = np.where(live, p.grad, 0.0)
            self._m[i] = b1 * self._m[i] + (1 - b1) * g
            self._v[i] = b2 * self._v[i] + (1 - b2) * g * g
            update = (self._m[i] / c1) / (np.sqrt(self._v[i] / c2) + eps)
            decayed = p.data * (1.0 - self.lr * wd) if wd else p.data
            p.data = np.where(live, decayed - self.lr * update, p.data)



def make_optimizer(params: Iterable[Tensor], config: OptimizerConfig) -> Optimizer:
    match config.kind:
        case "sgd":
            return SGD(params, config)
        case "adam":
            return Adam(params, config)
        case _:
            raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"Unknown optimizer kind {config.kind!r}.")
