"""Actual bitstream production and parsing around the compression model.

Encoder and decoder run the identical deterministic float path (same ops,
same order), so the decoded image is bit-equal to the encoder-side
reconstruction.
"""

import numpy as np
import torch

from ..nn.haar import pad_to_multiple
from .container import BitstreamContainer, ContainerError
from .gaussian import rate_bits, scale_table, snap_scale_indexes
from .rans import build_gaussian_cdf, freqs_to_cdf, quantize_pmf, rans_decode, rans_encode

SYMBOL_BOUND = 255  # residual symbols clamp to [-255, 255]
GRID = 64  # coding grid: two hyper stages below the x16 latent stride

__all__ = ["SYMBOL_BOUND", "encode_image", "decode_image", "round_mode_rate_bits", "hyper_coding_tables", "latent_coding_tables"]


def hyper_coding_tables(model):
    """One 16-bit table per hyper channel from the factorized density."""
    pmf = model.z_density.pmf_on_support(-SYMBOL_BOUND, SYMBOL_BOUND).cpu().numpy()
    return [freqs_to_cdf(quantize_pmf(row), -SYMBOL_BOUND) for row in pmf]


def latent_coding_tables():
    """One 16-bit table per entry of the shared scale table; the first entry
    is clamped up to the 0.11 floor against float32 rounding."""
    from .gaussian import SCALE_MIN

    return [build_gaussian_cdf(0.0, max(float(s), SCALE_MIN), (-SYMBOL_BOUND, SYMBOL_BOUND)) for s in scale_table()]


def _channel_indexes(channels, spatial):
    return np.repeat(np.arange(channels), spatial).tolist()


def _padded(size):
    return (size + GRID - 1) // GRID * GRID


@torch.no_grad()
def encode_image(x, model, return_recon=False):
    """Compress one [1, 3, H, W] image in [0, 1] into a container."""
    if x.dim() == 3:
        x = x.unsqueeze(0)
    if x.shape[0] != 1 or x.shape[1] != 3:
        raise ValueError(f"expected a single RGB image, got {tuple(x.shape)}")
    height, width = int(x.shape[-2]), int(x.shape[-1])
    x_pad, _ = pad_to_multiple(x, GRID)

    y = model.analysis(x_pad)
    z = model.hyper_analysis(y)
    z_hat = torch.round(z).clamp_(-SYMBOL_BOUND, SYMBOL_BOUND)

    z_sym = z_hat[0].to(torch.int64).flatten().tolist()
    z_idx = _channel_indexes(z_hat.shape[1], z_hat.shape[-2] * z_hat.shape[-1])
    z_stream = rans_encode(z_sym, z_idx, hyper_coding_tables(model))

    hyper = model.hyper_synthesis(z_hat)
    tables = latent_coding_tables()
    sigmas = scale_table()
    decoded, y_streams = [], []
    for i, y_slice in enumerate(y.chunk(model.cfg.slices, 1)):
        mu, sigma = model.context.params_for_slice(hyper, decoded, i)
        v = torch.round(y_slice - mu).clamp_(-SYMBOL_BOUND, SYMBOL_BOUND)
        idx = snap_scale_indexes(sigma, sigmas)
        y_streams.append(rans_encode(v.flatten().to(torch.int64).tolist(), idx.flatten().tolist(), tables))
        q = v + mu
        if model.context.lrp_nets is not None:
            q = q + model.context.lrp_for_slice(hyper, decoded, q, i)
        decoded.append(q)

    container = BitstreamContainer(model.model_id(), width, height, z_stream, y_streams)
    if not return_recon:
        return container
    recon = model.synthesis(torch.cat(decoded, dim=1))[..., :height, :width]
    return container, recon


@torch.no_grad()
def decode_image(container, model):
    """Reverse of :func:`encode_image`; output equals the encoder-side
    reconstruction bit-exactly."""
    if container.model_id != model.model_id():
        raise ContainerError("container was produced by a different model configuration")
    height, width = container.height, container.width
    zh, zw = _padded(height) // GRID, _padded(width) // GRID
    c6 = model.cfg.hyper_channels

    z_idx = _channel_indexes(c6, zh * zw)
    z_sym = rans_decode(container.z_stream, z_idx, hyper_coding_tables(model))
    z_hat = torch.from_numpy(z_sym).to(torch.float32).reshape(1, c6, zh, zw)

    hyper = model.hyper_synthesis(z_hat)
    tables = latent_coding_tables()
    sigmas = scale_table()
    if len(container.y_streams) != model.cfg.slices:
        raise ContainerError(f"container has {len(container.y_streams)} slices, model expects {model.cfg.slices}")
    decoded = []
    for i, stream in enumerate(container.y_streams):
        mu, sigma = model.context.params_for_slice(hyper, decoded, i)
        idx = snap_scale_indexes(sigma, sigmas)
        sym = rans_decode(stream, idx.flatten().tolist(), tables)
        v = torch.from_numpy(sym).to(torch.float32).reshape(mu.shape)
        q = v + mu
        if model.context.lrp_nets is not None:
            q = q + model.context.lrp_for_slice(hyper, decoded, q, i)
        decoded.append(q)

    return model.synthesis(torch.cat(decoded, dim=1))[..., :height, :width]


@torch.no_grad()
def round_mode_rate_bits(x, model):
    """Analytic bit count along the exact coding path (round quantization,
    continuous sigma); the real stream should land within the coder
    overhead of this figure."""
    if x.dim() == 3:
        x = x.unsqueeze(0)
    x_pad, _ = pad_to_multiple(x, GRID)
    y = model.analysis(x_pad)
    z = model.hyper_analysis(y)
    z_hat = torch.round(z).clamp_(-SYMBOL_BOUND, SYMBOL_BOUND)
    bits = model.z_density.rate_bits(z_hat)
    hyper = model.hyper_synthesis(z_hat)
    decoded = []
    for i, y_slice in enumerate(y.chunk(model.cfg.slices, 1)):
        mu, sigma = model.context.params_for_slice(hyper, decoded, i)
        v = torch.round(y_slice - mu).clamp_(-SYMBOL_BOUND, SYMBOL_BOUND)
        bits = bits + rate_bits(v + mu, mu, sigma)
        q = v + mu
        if model.context.lrp_nets is not None:
            q = q + model.context.lrp_for_slice(hyper, decoded, q, i)
        decoded.append(q)
    return float(bits)
