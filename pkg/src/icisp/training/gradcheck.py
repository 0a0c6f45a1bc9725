"""Finite-difference validation of analytic gradients for the named blocks.

Each registered block builds a tiny double-precision instance; a fixed
random projection turns its output into a scalar, whose gradient w.r.t.
every parameter and input is compared entry-by-entry against central
differences.
"""

from dataclasses import dataclass, field

import torch

from ..codec.gaussian import rate_bits
from ..gan import AdaptiveFusion, DynamicSFT, SpatialFeatureTransform
from ..nn.blocks import FreqModulationBlock, VisualScanBlock
from ..nn.haar import haar_forward

__all__ = ["GradCheckReport", "grad_check", "REGISTRY"]


@dataclass
class GradCheckReport:
    block: str
    max_rel_error: float
    per_tensor: dict = field(default_factory=dict)

    def passed(self, tol):
        return self.max_rel_error <= tol


def _leaf_inputs(shapes, gen):
    return [torch.randn(*s, dtype=torch.float64, generator=gen, requires_grad=True) for s in shapes]


def _build_haar(gen):
    (x,) = _leaf_inputs([(1, 2, 4, 4)], gen)

    def fn():
        s = haar_forward(x)
        return torch.stack([s.ll, s.lh, s.hl, s.hh])

    return fn, {"x": x}


def _build_evssb(gen):
    block = VisualScanBlock(4, state_dim=4).double()
    (x,) = _leaf_inputs([(1, 4, 8, 8)], gen)
    leaves = {"x": x, **dict(block.named_parameters())}
    return lambda: block(x), leaves


def _build_fdmb(gen):
    block = FreqModulationBlock(4, state_dim=4).double()
    (x,) = _leaf_inputs([(1, 4, 8, 8)], gen)
    leaves = {"x": x, **dict(block.named_parameters())}
    return lambda: block(x), leaves


def _build_affb(gen):
    block = AdaptiveFusion(6, semantic_channels=5, width=8).double()
    semantic, latent = _leaf_inputs([(1, 5, 4, 4), (1, 6, 4, 4)], gen)
    leaves = {"semantic": semantic, "latent": latent, **dict(block.named_parameters())}
    return lambda: block(semantic, latent), leaves


def _build_sft(gen):
    block = SpatialFeatureTransform(8, 6, ratio=0.5).double()
    x, cond = _leaf_inputs([(1, 8, 4, 4), (1, 6, 4, 4)], gen)
    leaves = {"x": x, "cond": cond, **dict(block.named_parameters())}
    return lambda: block(x, cond), leaves


def _build_dsft(gen):
    block = DynamicSFT(8, cond_channels=6).double()
    x, cond = _leaf_inputs([(1, 8, 4, 4), (1, 6, 4, 4)], gen)
    leaves = {"x": x, "cond": cond, **dict(block.named_parameters())}
    return lambda: block(x, cond), leaves


def _build_rate(gen):
    # rate in noise mode: fixed noise sample, gradient w.r.t. the latent;
    # inputs scaled so no bin mass sits at the 2^-16 likelihood clamp
    y = 0.2 * torch.randn(1, 3, 4, 4, dtype=torch.float64, generator=gen)
    y.requires_grad_(True)
    noise = torch.rand(1, 3, 4, 4, dtype=torch.float64, generator=gen) - 0.5
    mu = 0.2 * torch.randn(1, 3, 4, 4, dtype=torch.float64, generator=gen)
    mu.requires_grad_(True)
    sigma_raw = 0.5 + 0.5 * torch.randn(1, 3, 4, 4, dtype=torch.float64, generator=gen)
    sigma_raw.requires_grad_(True)
    fn = lambda: rate_bits(y + noise, mu, 0.11 + torch.nn.functional.softplus(sigma_raw)).reshape(1)
    return fn, {"y": y, "mu": mu, "sigma_raw": sigma_raw}


REGISTRY = {
    "haar": _build_haar,
    "evssb": _build_evssb,
    "fdmb": _build_fdmb,
    "affb": _build_affb,
    "sft": _build_sft,
    "dsft": _build_dsft,
    "rate": _build_rate,
}


def grad_check(block_name, tol=1e-4, step=1e-5, seed=0):
    """Compare analytic gradients against central differences for every
    parameter and input of the named block; returns a GradCheckReport."""
    if block_name not in REGISTRY:
        raise KeyError(f"unknown block {block_name!r}; known: {sorted(REGISTRY)}")
    gen = torch.Generator().manual_seed(seed)
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        fn, leaves = REGISTRY[block_name](gen)
    out = fn()
    proj = torch.randn(out.shape, dtype=torch.float64, generator=gen)
    objective = lambda: (fn() * proj).sum()

    analytic = torch.autograd.grad(objective(), list(leaves.values()), allow_unused=True)
    per_tensor = {}
    for (name, leaf), grad in zip(leaves.items(), analytic):
        grad = torch.zeros_like(leaf) if grad is None else grad
        numeric = torch.zeros_like(leaf)
        flat = leaf.detach().reshape(-1)
        num_flat = numeric.reshape(-1)
        for j in range(flat.numel()):
            orig = flat[j].item()
            h = step * max(1.0, abs(orig))
            with torch.no_grad():
                flat[j] = orig + h
                hi = objective().item()
                flat[j] = orig - h
                lo = objective().item()
                flat[j] = orig
            num_flat[j] = (hi - lo) / (2 * h)
        scale = max(grad.abs().max().item(), numeric.abs().max().item(), 1e-12)
        per_tensor[name] = (grad - numeric).abs().max().item() / scale
    return GradCheckReport(block=block_name, max_rel_error=max(per_tensor.values()), per_tensor=per_tensor)
