"""Candidate block family and fixed macro-architectures.

Candidate order (index -> config) is part of every table and θ file:

    0 e1_k3_g1   1 e1_k5_g1   2 e3_k3_g1   3 e3_k5_g1
    4 e6_k3_g1   5 e6_k5_g1   6 e1_k3_g2   7 e3_k3_g2   8 skip
"""
import math
from typing import Optional, Sequence

import numpy as np

from ..utils.constants import NUM_BLOCKS, SKIP_INDEX
from ..utils.exceptions import AdmissibilityError, ErrorCodes, ShapeError
from .autodiff import (
    Tensor,
    add,
    channel_shuffle,
    conv2d,
    global_avg_pool,
    linear,
    relu,
)
from .models import BlockConfig, LayerSpec, MacroArch


BlockParams = dict[str, Tensor]


SKIP_BLOCK = BlockConfig(is_skip=True)
CANDIDATE_CONFIGS: tuple[BlockConfig, ...] = (
    *(BlockConfig(e, k, 1) for e in (1, 3, 6) for k in (3, 5)),
    BlockConfig(1, 3, 2),
    BlockConfig(3, 3, 2),
    SKIP_BLOCK,
)
assert len(CANDIDATE_CONFIGS) == NUM_BLOCKS and CANDIDATE_CONFIGS[SKIP_INDEX].is_skip

PRESETS = ("full", "desk")

# (out_channels, repeats, first stride) per stage.
FULL_STAGES = ((16, 1, 1), (24, 4, 2), (32, 4, 2), (64, 4, 2), (112, 4, 1), (184, 4, 2), (352, 1, 1))
DESK_SCHEDULE = ((8, 1), (16, 2), (16, 1), (24, 2), (24, 1), (24, 1))



def candidate_blocks(layer: LayerSpec) -> list[BlockConfig]:
    if not layer.tbs:
        raise ErrorCodes.raise_error(
            ErrorCodes.VALIDATION_ERROR,
            f"candidate_blocks: layer {layer} is fixed, not a TBS layer."
        )
    blocks = list(CANDIDATE_CONFIGS[:SKIP_INDEX])
    if layer.skip_admissible:
        blocks.append(SKIP_BLOCK)
    return blocks


def check_admissible(cfg: BlockConfig, layer: LayerSpec) -> None:
    if cfg.is_skip and not layer.skip_admissible:
        raise AdmissibilityError(
            f"skip block needs in_channels == out_channels and stride 1, got "
            f"{layer.in_channels}->{layer.out_channels} stride {layer.stride}."
        )
    if not cfg.is_skip and cfg.groups > 1:
        hidden = cfg.expansion * layer.in_channels
        for name, channels in (("in_channels", layer.in_channels), ("out_channels", layer.out_channels),
                               ("hidden channels", hidden)):
            if channels % cfg.groups:
                raise AdmissibilityError(f"{cfg.name}: {name}={channels} is not divisible by groups={cfg.groups}.")



# ─────────────── parameters ───────────────
def _uniform(rng: np.random.Generator, shape, fan_in: int, gain: float = 2.0) -> Tensor:
    bound = math.sqrt(3.0 * gain / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def _zeros(n: int) -> Tensor:
    return Tensor(np.zeros(n), requires_grad=True)


def init_block_params(cfg: BlockConfig, layer: LayerSpec, rng: np.random.Generator) -> BlockParams:
    """Fan-in scaled uniform weights, zero biases; skip blocks own no parameters."""
    check_admissible(cfg, layer)
    if cfg.is_skip:
        return {}
    c_in, c_out, g, k = layer.in_channels, layer.out_channels, cfg.groups, cfg.kernel
    hidden = cfg.expansion * c_in
    return {
        "pw1_w": _uniform(rng, (hidden, c_in // g, 1, 1), c_in // g),
        "pw1_b": _zeros(hidden),
        "dw_w": _uniform(rng, (hidden, 1, k, k), k * k),
        "dw_b": _zeros(hidden),
        "pw2_w": _uniform(rng, (c_out, hidden // g, 1, 1), hidden // g, gain=1.0),
        "pw2_b": _zeros(c_out),
    }


def block_param_count(cfg: BlockConfig, layer: LayerSpec) -> int:
    if cfg.is_skip:
        return 0
    c_in, c_out, g, k = layer.in_channels, layer.out_channels, cfg.groups, cfg.kernel
    hidden = cfg.expansion * c_in
    return (hidden * (c_in // g) + hidden) + (hidden * k * k + hidden) + (c_out * (hidden // g) + c_out)


def block_forward(cfg: BlockConfig, layer: LayerSpec, x: Tensor, params: BlockParams) -> Tensor:
    if x.ndim != 4 or x.shape[1] != layer.in_channels:
        raise ShapeError(
            f"block_forward: input has {x.shape[1] if x.ndim == 4 else x.shape} channels, "
            f"layer expects in_channels={layer.in_channels}."
        )
    check_admissible(cfg, layer)
    if cfg.is_skip:
        return x

    hidden = cfg.expansion * layer.in_channels
    h = conv2d(x, params["pw1_w"], params["pw1_b"], groups=cfg.groups)
    if cfg.groups > 1:
        h = channel_shuffle(h, cfg.groups)
    h = relu(h)
    h = conv2d(h, params["dw_w"], params["dw_b"], stride=layer.stride, padding=cfg.kernel // 2, groups=hidden)
    h = relu(h)
    h = conv2d(h, params["pw2_w"], params["pw2_b"], groups=cfg.groups)
    if cfg.groups > 1:
        h = channel_shuffle(h, cfg.groups)
    if layer.skip_admissible:
        h = add(h, x)
    return h



# ─────────────── macro-architecture ───────────────
def build_macro(
    preset="desk",
    num_classes: int = 10,
    *,
    num_tbs: Optional[int] = None,
    layers: Optional[Sequence] = None,
    input_channels: int = 3,
    input_hw: tuple[int, int] = (8, 8),
    stem_channels: Optional[int] = None,
    head_channels: Optional[int] = None,
) -> MacroArch:
    """Resolve ``preset`` ("full", "desk") or an explicit layer list into a MacroArch.

    Explicit layers are ``LayerSpec`` objects or ``(in, out, stride)`` triples;
    ``preset`` may itself be such a list.
    """
    if not isinstance(preset, str):
        layers, preset = preset, "explicit"

    if layers is not None:
        specs = tuple(
            spec if isinstance(spec, LayerSpec) else LayerSpec(*map(int, spec))
            for spec in layers
        )
        if not specs:
            raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, "build_macro: explicit layer list is empty.")
        stem = LayerSpec(input_channels, stem_channels or specs[0].in_channels, 1, tbs=False)
        return MacroArch("explicit", stem, specs, head_channels or 64, num_classes, input_hw)

    match preset:
        case "full":
            stem = LayerSpec(input_channels, stem_channels or 16, 1, tbs=False)
            specs, c = [], stem.out_channels
            for out, repeats, stride in FULL_STAGES:
                for r in range(repeats):
                    specs.append(LayerSpec(c, out, stride if r == 0 else 1))
                    c = out
            return MacroArch("full", stem, tuple(specs), head_channels or 1984, num_classes, input_hw)
        case "desk":
            count = len(DESK_SCHEDULE) if num_tbs is None else int(num_tbs)
            if count < 1:
                raise ErrorCodes.raise_error(ErrorCodes.VALIDATION_ERROR, f"build_macro: num_tbs must be >= 1, got {count}.")
            stem = LayerSpec(input_channels, stem_channels or 8, 1, tbs=False)
            specs, c = [], stem.out_channels
            for idx in range(count):
                out, stride = DESK_SCHEDULE[idx] if idx < len(DESK_SCHEDULE) else (c, 1)
                specs.append(LayerSpec(c, out, stride))
                c = out
            return MacroArch("desk", stem, tuple(specs), head_channels or 64, num_classes, input_hw)
        case _:
            raise ErrorCodes.raise_error(
                ErrorCodes.VALIDATION_ERROR,
                f"build_macro: unknown preset {preset!r}; choose one of {PRESETS} or pass explicit layers."
            )



def init_stem_params(arch: MacroArch, rng: np.random.Generator) -> BlockParams:
    c_in, c_out = arch.stem.in_channels, arch.stem.out_channels
    return {"w": _uniform(rng, (c_out, c_in, 3, 3), c_in * 9), "b": _zeros(c_out)}


def init_head_params(arch: MacroArch, rng: np.random.Generator) -> BlockParams:
    c_last, c_head = arch.last_channels, arch.head_channels
    return {
        "conv_w": _uniform(rng, (c_head, c_last, 1, 1), c_last),
        "conv_b": _zeros(c_head),
        "fc_w": _uniform(rng, (c_head, arch.num_classes), c_head, gain=1.0 / 3.0),
        "fc_b": _zeros(arch.num_classes),
    }


def stem_forward(arch: MacroArch, x: Tensor, params: BlockParams) -> Tensor:
    if x.ndim != 4 or x.shape[1] != arch.input_channels:
        raise ShapeError(
            f"stem: input must be [N,{arch.input_channels},H,W], got shape {x.shape}."
        )
    return relu(conv2d(x, params["w"], params["b"], stride=arch.stem.stride, padding=1))


def head_forward(arch: MacroArch, h: Tensor, params: BlockParams) -> Tensor:
    h = relu(conv2d(h, params["conv_w"], params["conv_b"]))
    return linear(global_avg_pool(h), params["fc_w"], params["fc_b"])
