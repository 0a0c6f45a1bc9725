"""Transform building blocks: gated scan block, frequency modulation block,
residual scan module, and strided residual resampling."""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .haar import SubbandSet, haar_forward, haar_inverse, pad_to_even
from .scan import SS2D

__all__ = [
    "ChannelLayerNorm",
    "PointwiseFFN",
    "VisualScanBlock",
    "FreqModulationBlock",
    "ResidualScanModule",
    "ResidualBlockDown",
    "ResidualBlockUp",
    "resample_block",
    "depth_to_space",
    "BLOCK_VARIANTS",
]

BLOCK_VARIANTS = ("vssm_ffn", "evssb_ffn", "evssb_vssm", "evssb_fdmb")


class ChannelLayerNorm(nn.Module):
    """LayerNorm over the channel axis of [B, C, H, W], per spatial position."""

    def __init__(self, channels, eps=1e-6):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(channels))
        self.bias = nn.Parameter(torch.zeros(channels))
        self.eps = eps

    def forward(self, x):
        x = x.permute(0, 2, 3, 1)
        x = F.layer_norm(x, x.shape[-1:], self.weight, self.bias, self.eps)
        return x.permute(0, 3, 1, 2)


class PointwiseFFN(nn.Module):
    """Per-position feed-forward: 1x1 conv, exact GELU, 1x1 conv."""

    def __init__(self, channels, expansion=2):
        super().__init__()
        hidden = channels * expansion
        self.expand = nn.Conv2d(channels, hidden, 1)
        self.act = nn.GELU()
        self.project = nn.Conv2d(hidden, channels, 1)

    def forward(self, x):
        return self.project(self.act(self.expand(x)))


class VisualScanBlock(nn.Module):
    """Gated spatial-mixing block.

    A 1x1 conv plus depthwise 3x3 builds the shared context; the global
    branch runs a four-direction selective scan over it and the optional
    local branch applies two successive 3x3 convs.  A SiLU gate computed
    from the raw input multiplies the normalized branch sum before the 1x1
    fuse.  `local_branch=False` yields the plain visual state-space
    variant used inside the frequency block.
    """

    def __init__(self, channels, state_dim=8, local_branch=True, residual=False):
        super().__init__()
        self.channels = channels
        self.residual = residual
        self.pointwise = nn.Conv2d(channels, channels, 1)
        self.depthwise = nn.Conv2d(channels, channels, 3, padding=1, groups=channels)
        self.scan = SS2D(channels, state_dim)
        self.local = (
            nn.Sequential(
                nn.Conv2d(channels, channels, 3, padding=1),
                nn.Conv2d(channels, channels, 3, padding=1),
            )
            if local_branch
            else None
        )
        self.gate = nn.Conv2d(channels, channels, 1)
        self.norm = ChannelLayerNorm(channels)
        self.fuse = nn.Conv2d(channels, channels, 1)

    def forward(self, x):
        if x.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[1]}")
        ctx = self.depthwise(self.pointwise(x))
        mixed = self.scan(ctx)
        if self.local is not None:
            mixed = mixed + self.local(ctx)
        gate = F.silu(self.gate(x))
        out = self.fuse(self.norm(mixed) * gate)
        return out + x if self.residual else out


class FreqModulationBlock(nn.Module):
    """Pointwise FFN, Haar split, separate scan modulation of the low band
    and the channel-stacked high bands, Haar merge.

    The low band runs through one scan block over C channels; lh/hl/hh are
    concatenated into 3C channels, modulated by a second scan block, and
    split back before synthesis.
    """

    def __init__(self, channels, state_dim=8, expansion=2):
        super().__init__()
        self.ffn = PointwiseFFN(channels, expansion)
        self.low = VisualScanBlock(channels, state_dim, local_branch=False)
        self.high = VisualScanBlock(3 * channels, state_dim, local_branch=False)

    def forward(self, x):
        x = self.ffn(x)
        x, (ph, pw) = pad_to_even(x)
        bands = haar_forward(x)
        low = self.low(bands.ll)
        high = self.high(torch.cat([bands.lh, bands.hl, bands.hh], dim=1))
        lh, hl, hh = high.chunk(3, dim=1)
        out = haar_inverse(SubbandSet(ll=low, lh=lh, hl=hl, hh=hh))
        if ph or pw:
            out = out[..., : out.shape[-2] - ph, : out.shape[-1] - pw]
        return out


class ResidualScanModule(nn.Module):
    """Pre-norm residual pair: x + S(LN(x)) then x + M(LN(x)).

    The spatial block S and the modulation block M are picked by
    `variant`, one of vssm_ffn / evssb_ffn / evssb_vssm / evssb_fdmb.
    """

    def __init__(self, channels, variant="evssb_fdmb", state_dim=8, ffn_expansion=2):
        super().__init__()
        if variant not in BLOCK_VARIANTS:
            raise ValueError(f"unknown block variant {variant!r}")
        spatial_kind, mod_kind = variant.split("_")
        self.norm1 = ChannelLayerNorm(channels)
        self.norm2 = ChannelLayerNorm(channels)
        self.spatial = VisualScanBlock(channels, state_dim, local_branch=(spatial_kind == "evssb"))
        if mod_kind == "ffn":
            self.modulation = PointwiseFFN(channels, ffn_expansion)
        elif mod_kind == "vssm":
            self.modulation = nn.Sequential(
                PointwiseFFN(channels, ffn_expansion),
                VisualScanBlock(channels, state_dim, local_branch=False),
            )
        else:
            self.modulation = FreqModulationBlock(channels, state_dim, ffn_expansion)

    def forward(self, x):
        x = x + self.spatial(self.norm1(x))
        x = x + self.modulation(self.norm2(x))
        return x


def depth_to_space(x, factor=2):
    """[B, C*r^2, H, W] -> [B, C, H*r, W*r]; block [a, b, c, d] -> [[a, b], [c, d]]."""
    return F.pixel_shuffle(x, factor)


class ResidualBlockDown(nn.Module):
    """Residual block with a stride-2 main conv; halves H and W."""

    def __init__(self, c_in, c_out):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.skip = nn.Conv2d(c_in, c_out, 1, stride=2)

    def forward(self, x):
        h, w = x.shape[-2:]
        if h % 2 or w % 2:
            raise ValueError(f"downsampling needs even spatial dims, got {h}x{w}")
        return self.conv2(F.leaky_relu(self.conv1(x), 0.2)) + self.skip(x)


class ResidualBlockUp(nn.Module):
    """Residual block with sub-pixel (depth-to-space) upsampling; doubles H and W."""

    def __init__(self, c_in, c_out):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out * 4, 3, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.skip = nn.Conv2d(c_in, c_out * 4, 1)

    def forward(self, x):
        main = self.conv2(F.leaky_relu(depth_to_space(self.conv1(x)), 0.2))
        return main + depth_to_space(self.skip(x))


def resample_block(mode, c_in, c_out):
    """Factory for the strided residual blocks; mode is 'down' or 'up'."""
    if mode == "down":
        return ResidualBlockDown(c_in, c_out)
    if mode == "up":
        return ResidualBlockUp(c_in, c_out)
    raise ValueError(f"mode must be 'down' or 'up', got {mode!r}")
