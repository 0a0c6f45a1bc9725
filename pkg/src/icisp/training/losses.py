"""Loss assembly for both training stages plus the frozen feature network
used by the perceptual and style terms."""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..gan import generator_adversarial_loss

__all__ = [
    "LossReport",
    "StubFeatureNet",
    "make_featnet",
    "perceptual_loss",
    "style_loss",
    "gram_matrix",
    "distortion_mse255",
    "stage1_loss",
    "stage2_loss",
]


@dataclass
class LossReport:
    """Per-step loss breakdown; rates are bits per pixel."""

    step: int
    total: float
    rate_y: float
    rate_z: float
    distortion: float
    perceptual: float = 0.0
    style: float = 0.0
    adversarial: float = 0.0

    def log_line(self):
        return (
            f"step={self.step} total={self.total!r} rate_y={self.rate_y!r} "
            f"rate_z={self.rate_z!r} d={self.distortion!r} per={self.perceptual!r} "
            f"sty={self.style!r} adv={self.adversarial!r}"
        )


class StubFeatureNet(nn.Module):
    """Frozen seeded conv pyramid standing in for a pretrained perceptual
    network; exposes one feature map per stage."""

    def __init__(self, seed=0, widths=(16, 32, 64, 64)):
        super().__init__()
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            convs, c_in = [], 3
            for w in widths:
                convs.append(nn.Conv2d(c_in, w, 3, stride=2, padding=1))
                c_in = w
            self.convs = nn.ModuleList(convs)
        self.requires_grad_(False)

    def features(self, x):
        feats = []
        h = x
        for conv in self.convs:
            h = F.gelu(conv(h))
            feats.append(h)
        return feats


def make_featnet(weights_path="", seed=0):
    """External VGG-style feature network when weights are supplied,
    otherwise the seeded stub."""
    if weights_path:
        net = torch.jit.load(weights_path).eval()
        for p in net.parameters():
            p.requires_grad_(False)
        return net
    return StubFeatureNet(seed)


def perceptual_loss(x_hat, x, featnet):
    """Sum over layers of the mean squared feature difference."""
    total = x_hat.new_zeros(())
    for fa, fb in zip(featnet.features(x_hat), featnet.features(x)):
        total = total + (fa - fb).pow(2).mean()
    return total


def gram_matrix(feats):
    """G = F F^T / (C*H*W) over flattened per-channel features."""
    b, c, h, w = feats.shape
    flat = feats.reshape(b, c, h * w)
    return flat @ flat.transpose(1, 2) / (c * h * w)


def style_loss(x_hat, x, featnet):
    """Sum over layers of the mean absolute Gram-matrix difference."""
    total = x_hat.new_zeros(())
    for fa, fb in zip(featnet.features(x_hat), featnet.features(x)):
        total = total + (gram_matrix(fa) - gram_matrix(fb)).abs().mean()
    return total


def distortion_mse255(x_hat, x):
    """MSE on pixel values scaled to [0, 255]."""
    return F.mse_loss(x_hat, x) * 255.0**2


def _bpp(bits, x):
    return bits / (x.shape[0] * x.shape[-2] * x.shape[-1])


def stage1_loss(x, model, cfg, step=0, generator=None):
    """rate(y) + rate(z) + k * distortion; rates in bpp via noise quantization."""
    out = model(x, generator=generator)
    rate_y = _bpp(out["y_bits"], x)
    rate_z = _bpp(out["z_bits"], x)
    distortion = distortion_mse255(out["x_hat"], x)
    total = rate_y + rate_z + cfg.k * distortion
    report = LossReport(
        step=step,
        total=float(total.detach()),
        rate_y=float(rate_y.detach()),
        rate_z=float(rate_z.detach()),
        distortion=float(distortion.detach()),
    )
    return total, report, out


def stage2_loss(x, model, disc, featnet, cfg, step=0, generator=None, out=None):
    """lam*rate + k1*distortion + k2*perceptual + k3*style + k4*adversarial."""
    if out is None:
        out = model(x, generator=generator)
    rate_y = _bpp(out["y_bits"], x)
    rate_z = _bpp(out["z_bits"], x)
    distortion = distortion_mse255(out["x_hat"], x)
    perceptual = perceptual_loss(out["x_hat"], x, featnet)
    style = style_loss(out["x_hat"], x, featnet)
    adversarial = generator_adversarial_loss(disc(out["x_hat"], out["y_hat"], x))
    total = (
        cfg.lam * (rate_y + rate_z)
        + cfg.k1 * distortion
        + cfg.k2 * perceptual
        + cfg.k3 * style
        + cfg.k4 * adversarial
    )
    report = LossReport(
        step=step,
        total=float(total.detach()),
        rate_y=float(rate_y.detach()),
        rate_z=float(rate_z.detach()),
        distortion=float(distortion.detach()),
        perceptual=float(perceptual.detach()),
        style=float(style.detach()),
        adversarial=float(adversarial.detach()),
    )
    return total, report, out
