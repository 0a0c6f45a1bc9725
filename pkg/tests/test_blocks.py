import pytest
import torch
import torch.nn as nn

from icisp.nn import (
    BLOCK_VARIANTS,
    FreqModulationBlock,
    PointwiseFFN,
    ResidualBlockDown,
    ResidualBlockUp,
    ResidualScanModule,
    VisualScanBlock,
    depth_to_space,
    resample_block,
)


def test_visual_scan_block_shape_and_determinism():
    torch.manual_seed(0)
    block = VisualScanBlock(6, state_dim=4)
    x = torch.randn(2, 6, 8, 8)
    out = block(x)
    assert out.shape == x.shape
    assert torch.equal(out, block(x))


def test_channel_mismatch_rejected():
    block = VisualScanBlock(6, state_dim=4)
    with pytest.raises(ValueError, match="channels"):
        block(torch.randn(1, 5, 8, 8))


def test_zero_gate_yields_fuse_bias():
    torch.manual_seed(1)
    block = VisualScanBlock(4, state_dim=4)
    with torch.no_grad():
        block.gate.weight.zero_()
        block.gate.bias.zero_()
    x = torch.randn(1, 4, 6, 6)
    out = block(x)
    want = block.fuse.bias.reshape(1, -1, 1, 1).expand_as(out)
    assert torch.allclose(out, want)


def test_residual_flag_adds_input():
    torch.manual_seed(2)
    plain = VisualScanBlock(4, state_dim=4, residual=False)
    res = VisualScanBlock(4, state_dim=4, residual=True)
    res.load_state_dict(plain.state_dict())
    x = torch.randn(1, 4, 6, 6)
    assert torch.allclose(res(x), plain(x) + x)


def test_local_branch_zeroed_matches_plain_variant():
    torch.manual_seed(3)
    full = VisualScanBlock(4, state_dim=4, local_branch=True)
    plain = VisualScanBlock(4, state_dim=4, local_branch=False)
    shared = {k: v for k, v in full.state_dict().items() if not k.startswith("local")}
    plain.load_state_dict(shared)
    with torch.no_grad():
        for p in full.local.parameters():
            p.zero_()
    x = torch.randn(1, 4, 8, 8)
    assert torch.equal(full(x), plain(x))


def test_fdmb_shape_and_identity_hook():
    torch.manual_seed(4)
    block = FreqModulationBlock(4, state_dim=4)
    x = torch.randn(1, 4, 8, 8)
    assert block(x).shape == x.shape

    block.low = nn.Identity()
    block.high = nn.Identity()
    assert torch.allclose(block(x), block.ffn(x), atol=1e-6)


def test_fdmb_internal_subband_dims():
    torch.manual_seed(5)
    block = FreqModulationBlock(4, state_dim=4)
    seen = {}

    def spy(module, args, out):
        seen["shape"] = args[0].shape

    block.low.register_forward_hook(spy)
    block(torch.randn(1, 4, 10, 6))
    assert seen["shape"][-2:] == (5, 3)


@pytest.mark.parametrize("variant", BLOCK_VARIANTS)
def test_rssm_variants(variant):
    torch.manual_seed(6)
    block = ResidualScanModule(8, variant, state_dim=4)
    x = torch.randn(1, 8, 8, 8)
    assert block(x).shape == x.shape


def test_rssm_variant_param_counts_distinct():
    counts = set()
    for variant in BLOCK_VARIANTS:
        block = ResidualScanModule(8, variant, state_dim=4)
        counts.add(sum(p.numel() for p in block.parameters()))
    assert len(counts) == len(BLOCK_VARIANTS)


def test_rssm_bad_variant():
    with pytest.raises(ValueError, match="variant"):
        ResidualScanModule(8, "evssb_swin")


def test_down_up_shapes():
    down = ResidualBlockDown(64, 64)
    assert down(torch.randn(1, 64, 32, 32)).shape == (1, 64, 16, 16)
    up = ResidualBlockUp(64, 32)
    assert up(torch.randn(1, 64, 8, 8)).shape == (1, 32, 16, 16)
    x = torch.randn(1, 8, 6, 6)
    assert resample_block("down", 8, 8)(resample_block("up", 8, 8)(x)).shape == x.shape


def test_down_rejects_odd():
    with pytest.raises(ValueError, match="even"):
        ResidualBlockDown(4, 4)(torch.randn(1, 4, 5, 6))


def test_depth_to_space_order():
    x = torch.tensor([1.0, 2.0, 3.0, 4.0]).reshape(1, 4, 1, 1)
    out = depth_to_space(x)
    assert torch.equal(out, torch.tensor([[[[1.0, 2.0], [3.0, 4.0]]]]))


def test_ffn_pointwise():
    torch.manual_seed(7)
    ffn = PointwiseFFN(4)
    x = torch.randn(1, 4, 3, 3)
    out = ffn(x)
    # per-position map: permuting pixels commutes with the FFN
    perm = ffn(x.flip(-1)).flip(-1)
    assert torch.allclose(out, perm, atol=1e-6)
