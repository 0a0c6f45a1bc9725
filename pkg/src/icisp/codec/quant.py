"""Quantization modes: additive uniform noise, hard round, straight-through round."""

import torch

__all__ = ["quantize", "quantize_ste"]


def quantize_ste(v):
    """Round in the forward pass, identity gradient in the backward pass."""
    return v + (torch.round(v) - v).detach()


def quantize(y, mode, mu=None, generator=None):
    """Quantize `y` under the given mode.

    noise: y + U(-0.5, 0.5) (training surrogate for the rate term)
    round: round(y - mu) + mu (actual coding path)
    ste:   round value forward, identity gradient backward
    """
    if mode == "noise":
        noise = torch.empty_like(y)
        noise.uniform_(-0.5, 0.5, generator=generator)
        return y + noise
    if mu is None:
        mu = torch.zeros((), dtype=y.dtype, device=y.device)
    if mode == "round":
        return torch.round(y - mu) + mu
    if mode == "ste":
        return quantize_ste(y - mu) + mu
    raise ValueError(f"unknown quantization mode {mode!r}")
