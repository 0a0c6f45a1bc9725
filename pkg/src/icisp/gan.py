"""Semantic-informed patch discriminator: adaptive condition fusion, dynamic
spatial feature transforms, hinge objectives."""

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils import spectral_norm

from .priors import SEMANTIC_CHANNELS, extract_semantic

__all__ = [
    "AdaptiveFusion",
    "SpatialFeatureTransform",
    "DynamicSFT",
    "SemanticDiscriminator",
    "generator_adversarial_loss",
    "discriminator_hinge_loss",
]

COND_CHANNELS = 256


class AdaptiveFusion(nn.Module):
    """Softmax-gated convex combination of semantic features and the latent.

    Both inputs get a 3x3 conv to the common width; global average pooling
    of their sum feeds a squeeze (factor 2) and two parallel expands whose
    per-channel softmax weights mix the two branches.
    """

    def __init__(self, latent_channels, semantic_channels=SEMANTIC_CHANNELS, width=COND_CHANNELS):
        super().__init__()
        self.latent_conv = nn.Conv2d(latent_channels, width, 3, padding=1)
        self.semantic_conv = nn.Conv2d(semantic_channels, width, 3, padding=1)
        self.squeeze = nn.Conv2d(width, width // 2, 1)
        self.expand_latent = nn.Conv2d(width // 2, width, 1)
        self.expand_semantic = nn.Conv2d(width // 2, width, 1)

    def forward(self, semantic, latent):
        if semantic.shape[-2:] != latent.shape[-2:]:
            raise ValueError(f"grid mismatch: semantic {tuple(semantic.shape[-2:])} vs latent {tuple(latent.shape[-2:])}")
        f_latent = self.latent_conv(latent)
        f_semantic = self.semantic_conv(semantic)
        stats = (f_latent + f_semantic).mean(dim=(2, 3), keepdim=True)
        squeezed = F.gelu(self.squeeze(stats))
        logits = torch.stack([self.expand_latent(squeezed), self.expand_semantic(squeezed)])
        attn = torch.softmax(logits, dim=0)
        return attn[0] * f_latent + attn[1] * f_semantic


class SpatialFeatureTransform(nn.Module):
    """Condition-driven affine modulation of the first floor(ratio*C) channels;
    remaining channels pass through untouched."""

    def __init__(self, channels, cond_channels, ratio):
        super().__init__()
        if channels < 1:
            raise ValueError("channels must be >= 1")
        self.channels = channels
        self.mod_channels = max(1, int(ratio * channels))
        hidden = max(32, cond_channels // 2)
        self.params = nn.Sequential(
            nn.Conv2d(cond_channels, hidden, 3, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(hidden, 2 * self.mod_channels, 3, padding=1),
        )

    def forward(self, x, cond):
        if x.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[1]}")
        alpha, beta = self.params(cond).chunk(2, dim=1)
        head = x[:, : self.mod_channels]
        tail = x[:, self.mod_channels :]
        return torch.cat([alpha * head + beta, tail], dim=1)


class DynamicSFT(nn.Module):
    """Four SFT branches at split ratios i/(i+1), scaled by learnable weights,
    concatenated and fused back to the input width by a 1x1 conv."""

    RATIOS = tuple(i / (i + 1) for i in range(1, 5))

    def __init__(self, channels, cond_channels=COND_CHANNELS):
        super().__init__()
        self.branches = nn.ModuleList(SpatialFeatureTransform(channels, cond_channels, r) for r in self.RATIOS)
        self.branch_weights = nn.Parameter(torch.ones(len(self.RATIOS)))
        self.fuse = nn.Conv2d(len(self.RATIOS) * channels, channels, 1)

    def forward(self, x, cond):
        outs = [w * branch(x, cond) for w, branch in zip(self.branch_weights, self.branches)]
        return self.fuse(torch.cat(outs, dim=1))


class SemanticDiscriminator(nn.Module):
    """Patch critic conditioned on fused semantic/latent features.

    Four stride-2 stages (64/128/256/512, leaky slope 0.2, spectral norm)
    with dynamic modulation after stages 2 and 3; the final 1x1 conv emits
    one score per patch, so the map is ceil(H/16) x ceil(W/16).
    """

    def __init__(self, latent_channels, provider, widths=(64, 128, 256, 512)):
        super().__init__()
        self.provider = provider
        self.fusion = AdaptiveFusion(latent_channels)
        w1, w2, w3, w4 = widths
        self.stage1 = spectral_norm(nn.Conv2d(3, w1, 3, stride=2, padding=1))
        self.stage2 = spectral_norm(nn.Conv2d(w1, w2, 3, stride=2, padding=1))
        self.stage3 = spectral_norm(nn.Conv2d(w2, w3, 3, stride=2, padding=1))
        self.stage4 = spectral_norm(nn.Conv2d(w3, w4, 3, stride=2, padding=1))
        self.mod2 = DynamicSFT(w2)
        self.mod3 = DynamicSFT(w3)
        self.score = spectral_norm(nn.Conv2d(w4, 1, 1))

    def condition(self, latent, reference):
        semantic = extract_semantic(reference, self.provider)
        return self.fusion(semantic.data, latent.detach())

    def forward(self, img, latent, reference):
        if img.shape != reference.shape:
            raise ValueError("image and reference must share a shape")
        cond = self.condition(latent, reference)
        h = F.leaky_relu(self.stage1(img), 0.2)
        h = F.leaky_relu(self.stage2(h), 0.2)
        h = self.mod2(h, _resize(cond, h))
        h = F.leaky_relu(self.stage3(h), 0.2)
        h = self.mod3(h, _resize(cond, h))
        h = F.leaky_relu(self.stage4(h), 0.2)
        return self.score(h)


def _resize(cond, like):
    if cond.shape[-2:] == like.shape[-2:]:
        return cond
    return F.interpolate(cond, size=like.shape[-2:], mode="bilinear", align_corners=False)


def generator_adversarial_loss(scores):
    """Negative mean critic score of the reconstruction."""
    return -scores.mean()


def discriminator_hinge_loss(real_scores, fake_scores):
    """Bounded hinge: mean relu(1 - real) + mean relu(1 + fake)."""
    return F.relu(1.0 - real_scores).mean() + F.relu(1.0 + fake_scores).mean()
