import numpy as np
import pytest

from pyhwnas.core.autodiff import Tensor
from pyhwnas.core.models import BlockConfig, LayerSpec
from pyhwnas.core.searchspace import (
    CANDIDATE_CONFIGS,
    SKIP_BLOCK,
    block_forward,
    block_param_count,
    build_macro,
    candidate_blocks,
    check_admissible,
    init_block_params,
)
from pyhwnas.utils.constants import NUM_BLOCKS, SKIP_INDEX
from pyhwnas.utils.exceptions import AdmissibilityError, ValidationError

from conftest import numeric_grad



class TestCandidates:
    def test_family_order(self):
        assert [c.name for c in CANDIDATE_CONFIGS] == [
            "e1_k3_g1", "e1_k5_g1", "e3_k3_g1", "e3_k5_g1",
            "e6_k3_g1", "e6_k5_g1", "e1_k3_g2", "e3_k3_g2", "skip",
        ]

    def test_skip_admissible_layer_has_nine(self):
        blocks = candidate_blocks(LayerSpec(16, 16, 1))
        assert len(blocks) == NUM_BLOCKS
        assert blocks[-1].is_skip

    @pytest.mark.parametrize("layer", [LayerSpec(16, 16, 2), LayerSpec(16, 24, 1)])
    def test_no_skip_when_shape_changes(self, layer):
        blocks = candidate_blocks(layer)
        assert len(blocks) == NUM_BLOCKS - 1
        assert not any(b.is_skip for b in blocks)

    def test_fixed_layer_rejected(self):
        with pytest.raises(ValidationError, match="not a TBS layer"):
            candidate_blocks(LayerSpec(3, 8, 1, tbs=False))

    def test_skip_on_strided_layer(self):
        with pytest.raises(AdmissibilityError):
            check_admissible(SKIP_BLOCK, LayerSpec(8, 8, 2))

    def test_grouped_block_needs_even_channels(self):
        with pytest.raises(AdmissibilityError, match="divisible"):
            check_admissible(BlockConfig(1, 3, 2), LayerSpec(3, 4, 1))

    def test_bad_kernel(self):
        with pytest.raises(ValidationError):
            BlockConfig(1, 7, 1)



class TestBlockForward:
    def test_skip_returns_input(self, rng):
        x = Tensor(rng.standard_normal((2, 4, 4, 4)))
        assert block_forward(SKIP_BLOCK, LayerSpec(4, 4, 1), x, {}) is x

    def test_zero_weights_leave_only_the_residual(self, rng):
        layer, cfg = LayerSpec(4, 4, 1), BlockConfig(1, 3, 1)
        params = init_block_params(cfg, layer, rng)
        for p in params.values():
            p.data[...] = 0.0
        x = rng.standard_normal((2, 4, 5, 5))
        np.testing.assert_array_equal(block_forward(cfg, layer, Tensor(x), params).data, x)

    def test_grouped_strided_shape_and_gradient(self, rng):
        layer, cfg = LayerSpec(4, 6, 2), BlockConfig(3, 5, 2)
        params = init_block_params(cfg, layer, rng)
        x = Tensor(rng.standard_normal((2, 4, 6, 6)), requires_grad=True)

        def loss():
            out = block_forward(cfg, layer, x, params)
            return (out * out).sum()

        out = block_forward(cfg, layer, x, params)
        assert out.shape == (2, 6, 3, 3)
        loss().backward()
        cells = [(0, 0, 0, 0), (1, 3, 2, 5), (0, 2, 4, 1), (1, 1, 5, 5)]
        expected = numeric_grad(lambda: loss().item(), x.data, cells=cells)
        for cell in cells:
            assert x.grad[cell] == pytest.approx(expected[cell], rel=1e-5, abs=1e-6)

    def test_channel_mismatch(self, rng):
        layer = LayerSpec(4, 4, 1)
        params = init_block_params(CANDIDATE_CONFIGS[0], layer, rng)
        with pytest.raises(ValidationError, match="in_channels=4"):
            block_forward(CANDIDATE_CONFIGS[0], layer, Tensor(np.ones((1, 3, 4, 4))), params)

    @pytest.mark.parametrize("cfg", CANDIDATE_CONFIGS)
    def test_param_count(self, cfg, rng):
        layer = LayerSpec(8, 8, 1)
        params = init_block_params(cfg, layer, rng)
        assert sum(p.size for p in params.values()) == block_param_count(cfg, layer)



class TestMacroArch:
    def test_full_preset(self):
        arch = build_macro("full")
        assert arch.num_layers == 22
        assert arch.head_channels == 1984

    def test_desk_preset(self):
        arch = build_macro("desk")
        assert arch.num_layers == 6
        assert [l.out_channels for l in arch.tbs_layers] == [8, 16, 16, 24, 24, 24]
        assert arch.stem.in_channels == 3 and arch.stem.out_channels == 8
        assert int(arch.admissible_mask()[:, SKIP_INDEX].sum()) == 4
        assert arch.layer_input_hw() == [(8, 8), (8, 8), (4, 4), (4, 4), (2, 2), (2, 2)]

    def test_desk_extra_layers_repeat_the_last_width(self):
        arch = build_macro("desk", num_tbs=8)
        assert arch.num_layers == 8
        assert arch.tbs_layers[-1].skip_admissible

    def test_explicit_single_layer(self):
        arch = build_macro([(8, 8, 1)], 2)
        assert arch.preset == "explicit"
        assert arch.num_layers == 1
        assert arch.admissible_mask().all()

    def test_unknown_preset(self):
        with pytest.raises(ValidationError, match="unknown preset"):
            build_macro("huge")

    def test_channel_chain_is_checked(self):
        with pytest.raises(ValidationError, match="input channels"):
            build_macro([(8, 8, 1), (16, 16, 1)])
