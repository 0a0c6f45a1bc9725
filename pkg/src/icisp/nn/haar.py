"""Orthonormal 2x2 Haar analysis/synthesis on [B, C, H, W] feature maps.

The four subbands use +-1/2 kernels so the transform is orthonormal
(energy preserving) and its inverse is exact up to float rounding.
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F

__all__ = ["SubbandSet", "haar_forward", "haar_inverse", "pad_to_even", "pad_to_multiple"]


@dataclass
class SubbandSet:
    """Haar subbands of one feature map; each is [B, C, H/2, W/2]."""

    ll: torch.Tensor
    lh: torch.Tensor
    hl: torch.Tensor
    hh: torch.Tensor

    def validate(self):
        shape = self.ll.shape
        for name in ("lh", "hl", "hh"):
            band = getattr(self, name)
            if band.shape != shape:
                raise ValueError(f"subband {name} has shape {tuple(band.shape)}, expected {tuple(shape)}")


def haar_forward(x: torch.Tensor) -> SubbandSet:
    """Split x into (ll, lh, hl, hh); requires even H and W.

    For a 2x2 block [[a, b], [c, d]]:
        ll = (a+b+c+d)/2, hl = (a-b+c-d)/2, lh = (a+b-c-d)/2, hh = (a-b-c+d)/2
    """
    if x.dim() != 4:
        raise ValueError(f"expected [B, C, H, W], got {tuple(x.shape)}")
    h, w = x.shape[-2:]
    if h % 2 or w % 2:
        raise ValueError(f"spatial dims must be even, got {h}x{w}; pad first (pad_to_even)")
    dtype = x.dtype
    x = x.double()  # butterfly in float64 keeps the round trip well under 1e-6
    a = x[..., 0::2, 0::2]
    b = x[..., 0::2, 1::2]
    c = x[..., 1::2, 0::2]
    d = x[..., 1::2, 1::2]
    return SubbandSet(
        ll=((a + b + c + d) / 2).to(dtype),
        lh=((a + b - c - d) / 2).to(dtype),
        hl=((a - b + c - d) / 2).to(dtype),
        hh=((a - b - c + d) / 2).to(dtype),
    )


def haar_inverse(s: SubbandSet) -> torch.Tensor:
    """Exact synthesis inverse of :func:`haar_forward`."""
    s.validate()
    dtype = s.ll.dtype
    ll, lh, hl, hh = s.ll.double(), s.lh.double(), s.hl.double(), s.hh.double()
    a = ((ll + lh + hl + hh) / 2).to(dtype)
    b = ((ll + lh - hl - hh) / 2).to(dtype)
    c = ((ll - lh + hl - hh) / 2).to(dtype)
    d = ((ll - lh - hl + hh) / 2).to(dtype)
    bsz, ch, hh_, ww_ = s.ll.shape
    out = s.ll.new_empty(bsz, ch, hh_ * 2, ww_ * 2)
    out[..., 0::2, 0::2] = a
    out[..., 0::2, 1::2] = b
    out[..., 1::2, 0::2] = c
    out[..., 1::2, 1::2] = d
    return out


def pad_to_even(x: torch.Tensor) -> tuple[torch.Tensor, tuple[int, int]]:
    """Reflect-pad bottom/right so H and W are even; returns (padded, (ph, pw))."""
    h, w = x.shape[-2:]
    ph, pw = h % 2, w % 2
    if ph or pw:
        x = F.pad(x, (0, pw, 0, ph), mode="reflect")
    return x, (ph, pw)


def pad_to_multiple(x: torch.Tensor, multiple: int) -> tuple[torch.Tensor, tuple[int, int]]:
    """Reflect-pad bottom/right so both spatial dims divide `multiple`."""
    h, w = x.shape[-2:]
    ph = (multiple - h % multiple) % multiple
    pw = (multiple - w % multiple) % multiple
    if ph or pw:
        # reflect padding cannot exceed dim-1; fall back to replicate for tiny inputs
        mode = "reflect" if ph < h and pw < w else "replicate"
        x = F.pad(x, (0, pw, 0, ph), mode=mode)
    return x, (ph, pw)
