"""Learned per-channel factorized density for the hyper latent.

Each channel owns a small monotone network whose output (after sigmoid)
is a cumulative distribution; bin masses come from CDF differences at
+-0.5 around the integer grid, the usual factorized-prior construction.
"""

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from .gaussian import LIKELIHOOD_FLOOR

__all__ = ["FactorizedDensity"]

_LOG2 = math.log(2.0)


class FactorizedDensity(nn.Module):
    def __init__(self, channels, filters=(3, 3, 3), init_scale=10.0):
        super().__init__()
        self.channels = channels
        dims = (1, *filters, 1)
        scale = init_scale ** (1.0 / (len(dims) - 1))
        self.matrices = nn.ParameterList()
        self.biases = nn.ParameterList()
        self.factors = nn.ParameterList()
        for k in range(len(dims) - 1):
            init = math.log(math.expm1(1.0 / scale / dims[k + 1]))
            self.matrices.append(nn.Parameter(torch.full((channels, dims[k + 1], dims[k]), init)))
            self.biases.append(nn.Parameter(torch.empty(channels, dims[k + 1], 1).uniform_(-0.5, 0.5)))
            if k < len(dims) - 2:
                self.factors.append(nn.Parameter(torch.zeros(channels, dims[k + 1], 1)))

    def logits(self, v):
        """Pre-sigmoid CDF logits for per-channel samples v: [C, M]."""
        u = v.unsqueeze(1)  # [C, 1, M]
        for k, matrix in enumerate(self.matrices):
            u = torch.bmm(F.softplus(matrix), u) + self.biases[k]
            if k < len(self.factors):
                u = u + torch.tanh(self.factors[k]) * torch.tanh(u)
        return u.squeeze(1)

    def cdf(self, v):
        return torch.sigmoid(self.logits(v))

    def likelihood(self, v):
        """Unit-bin mass around v (same +-0.5 convolution as the Gaussian model)."""
        upper = self.cdf(v + 0.5)
        lower = self.cdf(v - 0.5)
        return torch.clamp(upper - lower, min=LIKELIHOOD_FLOOR)

    def rate_bits(self, z):
        """Total bits for a [B, C, H, W] hyper latent."""
        if z.shape[1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {z.shape[1]}")
        v = z.transpose(0, 1).reshape(self.channels, -1)
        return -torch.log(self.likelihood(v)).sum() / _LOG2

    @torch.no_grad()
    def pmf_on_support(self, lo, hi):
        """Per-channel bin masses over integer symbols [lo, hi], tails folded
        into the boundary bins; rows sum to 1."""
        ks = torch.arange(lo, hi + 1, dtype=torch.float32).repeat(self.channels, 1)
        upper = self.cdf(ks + 0.5)
        lower = self.cdf(ks - 0.5)
        pmf = upper - lower
        pmf[:, 0] += lower[:, 0]
        pmf[:, -1] += 1.0 - upper[:, -1]
        return pmf.clamp_min(0)
