import math

import pytest
import torch

from icisp.gan import (
    AdaptiveFusion,
    DynamicSFT,
    SemanticDiscriminator,
    SpatialFeatureTransform,
    discriminator_hinge_loss,
    generator_adversarial_loss,
)
from icisp.priors import StubPrior


def test_affb_partition_of_unity():
    torch.manual_seed(0)
    affb = AdaptiveFusion(16, semantic_channels=8, width=12)
    semantic = torch.randn(2, 8, 4, 4)
    latent = torch.randn(2, 16, 4, 4)
    f_latent = affb.latent_conv(latent)
    f_semantic = affb.semantic_conv(semantic)
    stats = (f_latent + f_semantic).mean(dim=(2, 3), keepdim=True)
    squeezed = torch.nn.functional.gelu(affb.squeeze(stats))
    logits = torch.stack([affb.expand_latent(squeezed), affb.expand_semantic(squeezed)])
    attn = torch.softmax(logits, dim=0)
    assert torch.allclose(attn.sum(dim=0), torch.ones_like(attn[0]))


def test_affb_tied_weights_average():
    torch.manual_seed(1)
    affb = AdaptiveFusion(8, semantic_channels=8, width=8)
    with torch.no_grad():
        affb.expand_semantic.weight.copy_(affb.expand_latent.weight)
        affb.expand_semantic.bias.copy_(affb.expand_latent.bias)
    semantic = torch.randn(1, 8, 4, 4)
    latent = torch.randn(1, 8, 4, 4)
    got = affb(semantic, latent)
    want = (affb.latent_conv(latent) + affb.semantic_conv(semantic)) / 2
    assert torch.allclose(got, want, atol=1e-6)


def test_affb_output_width_and_grid_check():
    affb = AdaptiveFusion(16)
    out = affb(torch.randn(2, 256, 4, 4), torch.randn(2, 16, 4, 4))
    assert out.shape == (2, 256, 4, 4)
    with pytest.raises(ValueError, match="grid"):
        affb(torch.randn(1, 256, 4, 4), torch.randn(1, 16, 8, 8))


def test_sft_identity_and_split():
    torch.manual_seed(2)
    sft = SpatialFeatureTransform(64, 8, ratio=0.5)
    assert sft.mod_channels == 32
    x = torch.randn(1, 64, 4, 4)
    cond = torch.randn(1, 8, 4, 4)

    # force alpha = 1, beta = 0 through the parameter head
    with torch.no_grad():
        sft.params[-1].weight.zero_()
        sft.params[-1].bias.zero_()
        sft.params[-1].bias[: sft.mod_channels] = 1.0
    out = sft(x, cond)
    assert torch.allclose(out, x, atol=1e-6)
    # pass-through slice is bit-identical regardless of parameters
    torch.manual_seed(3)
    sft2 = SpatialFeatureTransform(64, 8, ratio=0.5)
    out2 = sft2(x, cond)
    assert torch.equal(out2[:, 32:], x[:, 32:])


def test_sft_floor_rule():
    assert SpatialFeatureTransform(5, 4, ratio=0.5).mod_channels == 2
    assert SpatialFeatureTransform(1, 4, ratio=0.1).mod_channels == 1
    with pytest.raises(ValueError):
        SpatialFeatureTransform(0, 4, ratio=0.5)


def test_dsft_ratio_set():
    assert DynamicSFT.RATIOS == (1 / 2, 2 / 3, 3 / 4, 4 / 5)
    dsft = DynamicSFT(20, cond_channels=8)
    mods = [b.mod_channels for b in dsft.branches]
    assert mods == [10, 13, 15, 16]
    # channel accounting: modulated + pass-through = C per branch
    for branch in dsft.branches:
        assert branch.mod_channels + (20 - branch.mod_channels) == 20


def test_dsft_zero_weights_give_fuse_bias():
    torch.manual_seed(4)
    dsft = DynamicSFT(8, cond_channels=4)
    with torch.no_grad():
        dsft.branch_weights.zero_()
    x = torch.randn(1, 8, 4, 4)
    cond = torch.randn(1, 4, 4, 4)
    out = dsft(x, cond)
    want = dsft.fuse.bias.reshape(1, -1, 1, 1).expand_as(out)
    assert torch.allclose(out, want, atol=1e-6)


def test_dsft_shape():
    dsft = DynamicSFT(16, cond_channels=8)
    out = dsft(torch.randn(2, 16, 6, 6), torch.randn(2, 8, 6, 6))
    assert out.shape == (2, 16, 6, 6)


@pytest.fixture(scope="module")
def disc():
    torch.manual_seed(5)
    return SemanticDiscriminator(16, StubPrior(seed=0)).eval()


def test_discriminator_score_map_dims(disc):
    img = torch.rand(1, 3, 64, 64)
    latent = torch.randn(1, 16, 4, 4)
    scores = disc(img, latent, img)
    assert scores.shape == (1, 1, math.ceil(64 / 16), math.ceil(64 / 16))


def test_discriminator_detaches_latent(disc):
    img = torch.rand(1, 3, 64, 64)
    latent = torch.randn(1, 16, 4, 4, requires_grad=True)
    img_in = img.clone().requires_grad_(True)
    disc(img_in, latent, img).sum().backward()
    assert latent.grad is None
    assert img_in.grad is not None and img_in.grad.abs().sum() > 0


def test_discriminator_determinism(disc):
    img = torch.rand(1, 3, 64, 64)
    latent = torch.randn(1, 16, 4, 4)
    assert torch.equal(disc(img, latent, img), disc(img, latent, img))


def test_discriminator_shape_mismatch(disc):
    with pytest.raises(ValueError, match="shape"):
        disc(torch.rand(1, 3, 64, 64), torch.randn(1, 16, 4, 4), torch.rand(1, 3, 32, 32))


def test_adversarial_losses():
    assert generator_adversarial_loss(torch.full((2, 1, 3, 3), 2.0)).item() == pytest.approx(-2.0)
    zero = discriminator_hinge_loss(torch.ones(4), -torch.ones(4))
    assert zero.item() == pytest.approx(0.0)
    two = discriminator_hinge_loss(torch.zeros(4), torch.zeros(4))
    assert two.item() == pytest.approx(2.0)


def test_hinge_monotonicity():
    fake = torch.zeros(8)
    losses = [discriminator_hinge_loss(torch.full((8,), r), fake).item() for r in (-1.0, 0.0, 0.5, 1.0)]
    assert all(b < a for a, b in zip(losses, losses[1:]))
    real = torch.ones(8)
    losses = [discriminator_hinge_loss(real, torch.full((8,), f)).item() for f in (1.0, 0.0, -0.5, -1.0)]
    assert all(b < a for a, b in zip(losses, losses[1:]))
    assert discriminator_hinge_loss(torch.full((4,), 5.0), torch.full((4,), -5.0)).item() >= 0.0
