"""Brute-force ground truth over enumerable micro search spaces.

Architectures are enumerated in ``itertools.product`` order, so architecture
``a`` has flat index ``Σ_l a_l · K^(L-1-l)``.
"""
import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..utils.common import make_rng
from ..utils.exceptions import ErrorCodes, ShapeError
from .autodiff import Tensor, backward, softmax
from .models import ChildNet, LossKnobs, Theta
from .supernet import expected_cost, loss_value, sample_gumbel, total_loss


MAX_LAYERS = 4
MAX_CANDIDATES = 4
MAX_ARCHITECTURES = 256

ThetaLike = Union[Theta, Tensor, np.ndarray]



@dataclass(eq=False)
class MicroSpace:
    """Cost tables ``[layers x candidates]`` plus an assigned CE value per architecture."""

    lat: np.ndarray
    ener: np.ndarray
    ce: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        self.lat = np.array(self.lat, dtype=np.float64)
        self.ener = np.array(self.ener, dtype=np.float64)
        if self.lat.ndim != 2 or self.lat.shape != self.ener.shape:
            raise ShapeError(f"MicroSpace: lat {self.lat.shape} and ener {self.ener.shape} must be equal 2-D shapes.")
        layers, candidates = self.lat.shape
        if not (1 <= layers <= MAX_LAYERS and 1 <= candidates <= MAX_CANDIDATES) or self.size > MAX_ARCHITECTURES:
            raise ErrorCodes.raise_error(
                ErrorCodes.VALIDATION_ERROR,
                f"MicroSpace: {layers} layers x {candidates} candidates exceeds the enumerable bound "
                f"({MAX_LAYERS} x {MAX_CANDIDATES}, {MAX_ARCHITECTURES} architectures)."
            )
        for name, table in (("lat", self.lat), ("ener", self.ener)):
            if not np.all(np.isfinite(table)) or np.any(table < 0):
                raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"MicroSpace: {name} must be finite and >= 0.")
        self.ce = np.zeros(self.size) if self.ce is None else np.array(self.ce, dtype=np.float64).reshape(-1)
        if self.ce.shape != (self.size,):
            raise ShapeError(f"MicroSpace: need {self.size} CE values, got {self.ce.size}.")

    @property
    def layers(self) -> int:
        return self.lat.shape[0]

    @property
    def candidates(self) -> int:
        return self.lat.shape[1]

    @property
    def size(self) -> int:
        return self.candidates ** self.layers

    @classmethod
    def random(cls, layers: int = 3, candidates: int = 3, seed: int = 0, with_ce: bool = True) -> "MicroSpace":
        rng = make_rng(seed, 11)
        lat = rng.uniform(0.5, 5.0, size=(layers, candidates))
        ener = rng.uniform(0.5, 5.0, size=(layers, candidates))
        ce = rng.uniform(0.1, 2.5, size=candidates ** layers) if with_ce else None
        return cls(lat, ener, ce)



def _logits(theta: ThetaLike) -> np.ndarray:
    if isinstance(theta, Theta):
        return theta.values
    if isinstance(theta, Tensor):
        return theta.data
    return np.asarray(theta, dtype=np.float64)


def _row_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_theta(logits: np.ndarray, space: MicroSpace) -> None:
    if logits.shape != space.lat.shape:
        raise ShapeError(f"θ shape {logits.shape} differs from the space's {space.lat.shape}.")


def architecture_index(choices, candidates: int) -> int:
    index = 0
    for c in choices:
        index = index * candidates + int(c)
    return index



def enumerate_space(space: MicroSpace) -> list[tuple[ChildNet, float, float]]:
    """Every architecture with its exact table-summed latency and energy."""
    rows = range(space.layers)
    entries = []
    for choices in itertools.product(range(space.candidates), repeat=space.layers):
        lat = sum(float(space.lat[l, c]) for l, c in zip(rows, choices))
        ener = sum(float(space.ener[l, c]) for l, c in zip(rows, choices))
        entries.append((ChildNet(choices), lat, ener))
    return entries


def architecture_probabilities(theta: ThetaLike, space: MicroSpace) -> np.ndarray:
    """``P(a|θ) = Π_l softmax(θ_l)[a_l]`` in enumeration order."""
    logits = _logits(theta)
    _check_theta(logits, space)
    probs = _row_softmax(logits)
    joint = np.ones(1)
    for row in probs:
        joint = np.outer(joint, row).reshape(-1)
    return joint


def exact_expected_loss(theta: ThetaLike, space: MicroSpace, knobs: LossKnobs) -> float:
    probs = architecture_probabilities(theta, space)
    losses = np.array([
        loss_value(space.ce[idx], lat, ener, knobs)
        for idx, (_, lat, ener) in enumerate(enumerate_space(space))
    ])
    return float(np.dot(probs, losses))


def relaxed_expected_loss(theta: ThetaLike, space: MicroSpace, knobs: LossKnobs) -> float:
    """Expected CE plus the cost terms evaluated at the mean mask ``softmax(θ)``."""
    logits = _logits(theta)
    _check_theta(logits, space)
    mask = Tensor(_row_softmax(logits))
    lat = expected_cost(mask, space.lat).item()
    ener = expected_cost(mask, space.ener).item()
    expected_ce = float(np.dot(architecture_probabilities(logits, space), space.ce))
    return loss_value(expected_ce, lat, ener, knobs)


def relaxation_gap(theta: ThetaLike, space: MicroSpace, knobs: LossKnobs) -> float:
    """``exact - relaxed``; zero when β = δ = 1."""
    return exact_expected_loss(theta, space, knobs) - relaxed_expected_loss(theta, space, knobs)



def gumbel_frequencies(
    theta: ThetaLike,
    samples: int = 20_000,
    tau: float = 1e-3,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Empirical per-cell and per-architecture frequencies of the Gumbel-Softmax argmax."""
    logits = _logits(theta)
    layers, candidates = logits.shape
    rng = make_rng(seed, 12)
    noise = sample_gumbel(rng, samples * layers, candidates).reshape(samples, layers, candidates)
    masks = _row_softmax((logits[None] + noise) / tau)
    choices = masks.argmax(axis=-1)
    cells = np.stack([np.bincount(choices[:, l], minlength=candidates) for l in range(layers)]) / samples
    flat = choices @ (candidates ** np.arange(layers - 1, -1, -1))
    archs = np.bincount(flat, minlength=candidates ** layers) / samples
    return cells, archs


def total_variation(p, q) -> float:
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeError(f"total_variation: shapes {p.shape} and {q.shape} differ.")
    return 0.5 * float(np.abs(p - q).sum())



def descend_relaxed(
    space: MicroSpace,
    knobs: LossKnobs,
    steps: int = 500,
    lr: float = 0.1,
    theta0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Plain gradient descent on the relaxed cost terms (no CE) from uniform θ."""
    logits = np.zeros(space.lat.shape) if theta0 is None else np.array(theta0, dtype=np.float64)
    _check_theta(logits, space)
    theta = Tensor(logits, requires_grad=True)
    zero = Tensor(0.0)
    for _ in range(steps):
        theta.zero_grad()
        mask = softmax(theta, axis=-1)
        breakdown = total_loss(zero, expected_cost(mask, space.lat), expected_cost(mask, space.ener), knobs)
        backward(breakdown.loss)
        theta.data -= lr * theta.grad
    return theta.data.copy()


def argmax_architecture(theta: ThetaLike) -> tuple[int, ...]:
    return tuple(int(c) for c in np.argmax(_logits(theta), axis=1))


def pareto_architectures(space: MicroSpace) -> list[tuple[int, ...]]:
    """Architectures whose (latency, energy) pair no other architecture dominates."""
    entries = enumerate_space(space)
    costs = np.array([(lat, ener) for _, lat, ener in entries])
    front = []
    for i, (child, _, _) in enumerate(entries):
        no_worse = np.all(costs <= costs[i], axis=1)
        better = np.any(costs < costs[i], axis=1)
        if not np.any(no_worse & better):
            front.append(child.choices)
    return front
