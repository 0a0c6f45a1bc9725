"""Pluggable semantic-prior providers producing latent-grid-aligned features.

Providers are frozen: nothing here ever receives gradients or training
updates.  The default stub is a seeded random conv stack so desk-scale
runs need no external weights; a real pretrained encoder can be dropped
in through the torchscript adapter.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

SEMANTIC_CHANNELS = 256

__all__ = ["SEMANTIC_CHANNELS", "ProviderUnavailableError", "SemanticFeatures", "StubPrior", "TorchscriptPrior", "make_provider", "extract_semantic"]


class ProviderUnavailableError(RuntimeError):
    pass


@dataclass
class SemanticFeatures:
    """Features aligned to the latent grid: [B, 256, H/16, W/16]."""

    data: torch.Tensor
    provider_id: str


class StubPrior(nn.Module):
    """Three frozen stride-2 convs with seed-fixed weights and GELU; bias-free
    so the zero image maps to zero features."""

    provider_id = "stub"

    def __init__(self, seed=0):
        super().__init__()
        self.seed = seed
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.conv1 = nn.Conv2d(3, 32, 3, stride=2, padding=1, bias=False)
            self.conv2 = nn.Conv2d(32, 64, 3, stride=2, padding=1, bias=False)
            self.conv3 = nn.Conv2d(64, 128, 3, stride=2, padding=1, bias=False)
            self.project = nn.Conv2d(128, SEMANTIC_CHANNELS, 1, bias=False)
        self.requires_grad_(False)

    def features(self, x):
        h = F.gelu(self.conv1(x))
        h = F.gelu(self.conv2(h))
        return F.gelu(self.conv3(h))


class TorchscriptPrior(nn.Module):
    """Adapter around an externally supplied scripted encoder (e.g. a large
    pretrained vision model); excluded from the default test suite."""

    provider_id = "dinov2"

    def __init__(self, weights_path):
        super().__init__()
        import os

        if not weights_path or not os.path.exists(weights_path):
            raise ProviderUnavailableError(
                f"no provider weights at {weights_path!r}; supply prior_weights_path or use the stub provider"
            )
        self.net = torch.jit.load(weights_path).eval()
        for p in self.net.parameters():
            p.requires_grad_(False)
        out_ch = self.net(torch.zeros(1, 3, 64, 64)).shape[1]
        with torch.random.fork_rng():
            torch.manual_seed(0)
            self.project = nn.Conv2d(out_ch, SEMANTIC_CHANNELS, 1, bias=False)
        self.requires_grad_(False)

    def features(self, x):
        return self.net(x)


def make_provider(name, weights_path="", seed=0):
    if name == "stub":
        return StubPrior(seed)
    if name == "dinov2":
        return TorchscriptPrior(weights_path)
    raise ValueError(f"unknown prior provider {name!r}")


@torch.no_grad()
def extract_semantic(x, provider) -> SemanticFeatures:
    """Provider features resized to the latent grid and projected to 256
    channels; no gradients flow into the provider."""
    h, w = x.shape[-2:]
    if h % 16 or w % 16:
        raise ValueError(f"input dims must divide the x16 latent stride, got {h}x{w}")
    feats = provider.features(x)
    feats = F.interpolate(feats, size=(h // 16, w // 16), mode="bilinear", align_corners=False)
    return SemanticFeatures(data=provider.project(feats), provider_id=provider.provider_id)
