"""End-to-end compression model: transforms, hyper path, entropy machinery."""

import torch
import torch.nn as nn

from .charm import ChannelContext
from .factorized import FactorizedDensity
from .gaussian import rate_bits
from .quant import quantize
from .transforms import AnalysisTransform, HyperAnalysis, HyperSynthesis, SynthesisTransform

__all__ = ["CompressionModel"]


class CompressionModel(nn.Module):
    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        # weight init depends only on cfg.seed; outer RNG state is untouched
        with torch.random.fork_rng():
            torch.manual_seed(cfg.seed)
            self.analysis = AnalysisTransform(cfg)
            self.synthesis = SynthesisTransform(cfg)
            self.hyper_analysis = HyperAnalysis(cfg)
            self.hyper_synthesis = HyperSynthesis(cfg)
            self.z_density = FactorizedDensity(cfg.hyper_channels)
            self.context = ChannelContext(cfg.latent_channels, 2 * cfg.latent_channels, cfg.slices, cfg.lrp)

    def model_id(self) -> bytes:
        return self.cfg.model_id()

    def forward(self, x, generator=None):
        """Training pass: rate terms use noise quantization, the synthesis path
        uses straight-through rounding around the predicted means."""
        y = self.analysis(x)
        z = self.hyper_analysis(y)
        z_bits = self.z_density.rate_bits(quantize(z, "noise", generator=generator))
        z_hat = quantize(z, "ste")
        hyper = self.hyper_synthesis(z_hat)

        decoded = []
        y_bits = x.new_zeros(())
        for i, y_slice in enumerate(y.chunk(self.cfg.slices, 1)):
            mu, sigma = self.context.params_for_slice(hyper, decoded, i)
            y_bits = y_bits + rate_bits(quantize(y_slice, "noise", generator=generator), mu, sigma)
            q = quantize(y_slice, "ste", mu)
            if self.context.lrp_nets is not None:
                q = q + self.context.lrp_for_slice(hyper, decoded, q, i)
            decoded.append(q)
        y_hat = torch.cat(decoded, dim=1)
        x_hat = self.synthesis(y_hat, clamp=False)

        return {
            "x_hat": x_hat,
            "y": y,
            "y_hat": y_hat,
            "z": z,
            "z_hat": z_hat,
            "y_bits": y_bits,
            "z_bits": z_bits,
        }
