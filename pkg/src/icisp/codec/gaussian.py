"""Discretized-Gaussian likelihoods, bit estimation, and the coding scale table."""

import math

import torch

__all__ = [
    "SCALE_MIN",
    "SCALE_MAX",
    "SCALE_LEVELS",
    "LIKELIHOOD_FLOOR",
    "scale_table",
    "gaussian_likelihood",
    "rate_bits",
    "snap_scale_indexes",
]

SCALE_MIN = 0.11
SCALE_MAX = 256.0
SCALE_LEVELS = 64
LIKELIHOOD_FLOOR = 2.0**-16
_LOG2 = math.log(2.0)


def scale_table(device=None, dtype=torch.float32):
    """64 log-spaced scales from 0.11 to 256 shared by encoder and decoder."""
    return torch.exp(
        torch.linspace(math.log(SCALE_MIN), math.log(SCALE_MAX), SCALE_LEVELS, device=device, dtype=dtype)
    )


def gaussian_likelihood(residual, sigma):
    """Mass of the unit bin around `residual` under N(0, sigma^2), floored at 2^-16."""
    upper = torch.special.ndtr((residual + 0.5) / sigma)
    lower = torch.special.ndtr((residual - 0.5) / sigma)
    return torch.clamp(upper - lower, min=LIKELIHOOD_FLOOR)


def rate_bits(y_hat, mu, sigma):
    """Total bits to code y_hat under the mean/scale Gaussian model."""
    p = gaussian_likelihood(y_hat - mu, sigma)
    return -torch.log(p).sum() / _LOG2


def snap_scale_indexes(sigma, table=None):
    """Index of the nearest table scale >= sigma (clamped to the last entry)."""
    if table is None:
        table = scale_table(device=sigma.device, dtype=sigma.dtype)
    idx = torch.searchsorted(table, sigma.detach().contiguous())
    return idx.clamp_(max=len(table) - 1)
