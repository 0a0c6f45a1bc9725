"""Analysis/synthesis and hyper transforms built from resampling blocks and
residual scan modules."""

import torch.nn as nn
import torch.nn.functional as F

from ..nn.blocks import ResidualBlockDown, ResidualBlockUp, ResidualScanModule

__all__ = ["AnalysisTransform", "SynthesisTransform", "HyperAnalysis", "HyperSynthesis"]


def _scan_stack(channels, cfg):
    return [ResidualScanModule(channels, cfg.block_variant, cfg.state_dim, cfg.ffn_expansion) for _ in range(cfg.rssm_depth)]


class AnalysisTransform(nn.Module):
    """Image [B, 3, H, W] -> latent [B, m, H/16, W/16]; H, W must divide 64."""

    def __init__(self, cfg):
        super().__init__()
        c1, c2, c3, m = cfg.channels[:4]
        layers = []
        for c_in, c_out in ((3, c1), (c1, c2), (c2, c3), (c3, m)):
            layers.append(ResidualBlockDown(c_in, c_out))
            layers.extend(_scan_stack(c_out, cfg))
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        h, w = x.shape[-2:]
        if h % 64 or w % 64:
            raise ValueError(f"input dims must divide 64, got {h}x{w}; pad first")
        return self.net(x)


class SynthesisTransform(nn.Module):
    """Latent -> image in [0, 1]; mirror of the analysis transform."""

    def __init__(self, cfg):
        super().__init__()
        c1, c2, c3, m = cfg.channels[:4]
        layers = []
        for c_in, c_out in ((m, c3), (c3, c2), (c2, c1), (c1, 3)):
            layers.extend(_scan_stack(c_in, cfg))
            layers.append(ResidualBlockUp(c_in, c_out))
        self.net = nn.Sequential(*layers)

    def forward(self, y_hat, clamp=True):
        x = self.net(y_hat)
        return x.clamp(0.0, 1.0) if clamp else x


class HyperAnalysis(nn.Module):
    """Latent -> hyper latent via two stride-2 stages."""

    def __init__(self, cfg):
        super().__init__()
        m, c5, c6 = cfg.channels[3], cfg.channels[4], cfg.channels[5]
        self.head = nn.Conv2d(m, c5, 3, padding=1)
        self.down1 = ResidualBlockDown(c5, c5)
        self.down2 = ResidualBlockDown(c5, c6)

    def forward(self, y):
        return self.down2(self.down1(F.leaky_relu(self.head(y), 0.2)))


class HyperSynthesis(nn.Module):
    """Hyper latent -> entropy features with 2m channels on the latent grid."""

    def __init__(self, cfg):
        super().__init__()
        m, c5, c6 = cfg.channels[3], cfg.channels[4], cfg.channels[5]
        self.up1 = ResidualBlockUp(c6, c5)
        self.up2 = ResidualBlockUp(c5, c5)
        self.tail = nn.Conv2d(c5, 2 * m, 3, padding=1)

    def forward(self, z_hat):
        return self.tail(F.leaky_relu(self.up2(self.up1(z_hat)), 0.2))
