"""Fidelity metrics: PSNR on the 255 scale and multi-scale SSIM."""

import math

import torch
import torch.nn.functional as F

__all__ = ["PSNR_CAP", "MSSSIM_WEIGHTS", "psnr", "ms_ssim", "fidelity_metrics", "bpp_measure"]

PSNR_CAP = 100.0
MSSSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def psnr(x, x_hat):
    """10*log10(255^2 / MSE_255), capped at 100 dB for identical inputs."""
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    mse = float(((x - x_hat) * 255.0).pow(2).mean())
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(255.0**2 / mse))


def _gaussian_window(size, sigma, dtype):
    coords = torch.arange(size, dtype=dtype) - (size - 1) / 2.0
    g = torch.exp(-(coords**2) / (2 * sigma**2))
    return g / g.sum()


def _ssim_pass(x, y, window, k1=0.01, k2=0.03, data_range=1.0):
    """Returns (mean ssim, mean cs) using separable valid-mode filtering."""
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    ch = x.shape[1]
    w_row = window.reshape(1, 1, 1, -1).repeat(ch, 1, 1, 1)
    w_col = window.reshape(1, 1, -1, 1).repeat(ch, 1, 1, 1)

    def blur(t):
        return F.conv2d(F.conv2d(t, w_row, groups=ch), w_col, groups=ch)

    mu_x = blur(x)
    mu_y = blur(y)
    sigma_x = blur(x * x) - mu_x**2
    sigma_y = blur(y * y) - mu_y**2
    sigma_xy = blur(x * y) - mu_x * mu_y
    cs = (2 * sigma_xy + c2) / (sigma_x + sigma_y + c2)
    ssim = ((2 * mu_x * mu_y + c1) / (mu_x**2 + mu_y**2 + c1)) * cs
    return ssim.mean(), cs.mean()


def ms_ssim(x, y, weights=MSSSIM_WEIGHTS, window_size=11, window_sigma=1.5, data_range=1.0):
    """Multi-scale SSIM with the canonical five scales and weights.

    Contrast terms of the coarse scales multiply into the full SSIM of the
    finest retained scale; scales halve via 2x2 average pooling.
    """
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch {tuple(x.shape)} vs {tuple(y.shape)}")
    if x.dim() == 3:
        x, y = x.unsqueeze(0), y.unsqueeze(0)
    levels = len(weights)
    min_dim = min(x.shape[-2:])
    if min_dim < window_size * 2 ** (levels - 1):
        raise ValueError(
            f"image side {min_dim} too small for {levels} scales with window {window_size}"
        )
    window = _gaussian_window(window_size, window_sigma, x.dtype)
    values = []
    for level in range(levels):
        ssim_mean, cs_mean = _ssim_pass(x, y, window, data_range=data_range)
        values.append(ssim_mean if level == levels - 1 else cs_mean)
        if level < levels - 1:
            x = F.avg_pool2d(x, 2)
            y = F.avg_pool2d(y, 2)
    # negative contrast terms are clipped before the fractional powers
    stacked = torch.clamp(torch.stack(values), min=0.0)
    return float(torch.prod(stacked ** torch.tensor(weights, dtype=x.dtype)))


def fidelity_metrics(x, x_hat):
    """(psnr_db, ms_ssim) for images in [0, 1]."""
    return psnr(x, x_hat), ms_ssim(x, x_hat)


def bpp_measure(container, true_w, true_h):
    """Bits per pixel of a full container, header included."""
    return container.num_bits / (true_w * true_h)
