"""Channel-wise autoregressive entropy parameters over latent slices.

The latent splits into equal channel slices decoded in a fixed order;
slice i's Gaussian parameters are predicted from the hyper features
concatenated with all previously decoded slices, so encoder and decoder
reproduce the identical mu/sigma sequence from the same hyper latent.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .gaussian import SCALE_MIN

__all__ = ["SliceOrderError", "ChannelContext"]


class SliceOrderError(RuntimeError):
    """Slices must be requested strictly in order 0..S-1."""


class ChannelContext(nn.Module):
    def __init__(self, latent_channels, hyper_features, slices, lrp=True):
        super().__init__()
        if latent_channels % slices:
            raise ValueError("latent channels must divide evenly into slices")
        self.slices = slices
        self.slice_channels = latent_channels // slices
        h1 = max(16, (7 * latent_channels) // 10)
        h2 = max(16, (2 * latent_channels) // 5)
        self.param_nets = nn.ModuleList(
            nn.Sequential(
                nn.Conv2d(hyper_features + i * self.slice_channels, h1, 3, padding=1),
                nn.GELU(),
                nn.Conv2d(h1, h2, 3, padding=1),
                nn.GELU(),
                nn.Conv2d(h2, 2 * self.slice_channels, 1),
            )
            for i in range(slices)
        )
        if lrp:
            hl = max(16, latent_channels // 5)
            self.lrp_nets = nn.ModuleList(
                nn.Sequential(
                    nn.Conv2d(hyper_features + (i + 1) * self.slice_channels, hl, 1),
                    nn.GELU(),
                    nn.Conv2d(hl, self.slice_channels, 3, padding=1),
                )
                for i in range(slices)
            )
        else:
            self.lrp_nets = None

    def _check_order(self, decoded_slices, index):
        if index < 0 or index >= self.slices:
            raise SliceOrderError(f"slice index {index} out of range 0..{self.slices - 1}")
        if len(decoded_slices) != index:
            raise SliceOrderError(f"slice {index} requested with {len(decoded_slices)} decoded slices")

    def params_for_slice(self, hyper, decoded_slices, index):
        """(mu, sigma) for slice `index`; sigma = 0.11 + softplus(raw) > 0.11."""
        self._check_order(decoded_slices, index)
        feats = torch.cat([hyper, *decoded_slices], dim=1)
        raw = self.param_nets[index](feats)
        mu, sigma_raw = raw.chunk(2, dim=1)
        return mu, SCALE_MIN + F.softplus(sigma_raw)

    def lrp_for_slice(self, hyper, decoded_slices, quantized_slice, index):
        """Bounded refinement 0.5*tanh(.) added to the dequantized slice."""
        if self.lrp_nets is None:
            return torch.zeros_like(quantized_slice)
        feats = torch.cat([hyper, *decoded_slices, quantized_slice], dim=1)
        return 0.5 * torch.tanh(self.lrp_nets[index](feats))
