"""Selective-scan (S6) recurrence and its four-direction 2-D wrapper.

The recurrence per position t and channel c with state size N is

    h_t = exp(dt_t * a) . h_{t-1} + (dt_t * B_t) x_t        (h_0 = 0)
    y_t = <C_t, h_t> + skip * x_t

with a diagonal, strictly negative decay `a` stored as -exp(a_log), and
dt/B/C produced per position by learned projections of the input.  The
sequential core is a plain O(L*N) loop wrapped in a custom autograd
function so training does not build an L-step graph; buffers are
preallocated and written in place to keep per-step dispatch low.
"""

import logging
import math
import os

import torch
import torch.nn as nn
import torch.nn.functional as F

__all__ = ["LinearScan", "selective_scan", "ScanParams", "SS2D"]

log = logging.getLogger(__name__)

_SCAN_CPP = r"""
#include <torch/extension.h>
#include <vector>

torch::Tensor scan_forward(torch::Tensor a, torch::Tensor b) {
    TORCH_CHECK(a.sizes() == b.sizes(), "a and b must share a shape");
    auto a_c = a.contiguous();
    auto b_c = b.contiguous();
    auto h = torch::empty_like(b_c);
    int64_t steps = a_c.size(0);
    int64_t width = steps ? a_c.numel() / steps : 0;
    AT_DISPATCH_FLOATING_TYPES(a_c.scalar_type(), "scan_forward", [&] {
        const scalar_t* ap = a_c.data_ptr<scalar_t>();
        const scalar_t* bp = b_c.data_ptr<scalar_t>();
        scalar_t* hp = h.data_ptr<scalar_t>();
        for (int64_t j = 0; j < width; ++j) hp[j] = bp[j];
        for (int64_t t = 1; t < steps; ++t) {
            const scalar_t* at = ap + t * width;
            const scalar_t* bt = bp + t * width;
            const scalar_t* prev = hp + (t - 1) * width;
            scalar_t* ht = hp + t * width;
            for (int64_t j = 0; j < width; ++j) ht[j] = bt[j] + at[j] * prev[j];
        }
    });
    return h;
}

std::vector<torch::Tensor> scan_backward(torch::Tensor a, torch::Tensor h, torch::Tensor grad_h) {
    auto a_c = a.contiguous();
    auto h_c = h.contiguous();
    auto g_c = grad_h.contiguous();
    auto grad_a = torch::empty_like(a_c);
    auto grad_b = torch::empty_like(a_c);
    int64_t steps = a_c.size(0);
    int64_t width = steps ? a_c.numel() / steps : 0;
    AT_DISPATCH_FLOATING_TYPES(a_c.scalar_type(), "scan_backward", [&] {
        const scalar_t* ap = a_c.data_ptr<scalar_t>();
        const scalar_t* hp = h_c.data_ptr<scalar_t>();
        const scalar_t* gp = g_c.data_ptr<scalar_t>();
        scalar_t* gap = grad_a.data_ptr<scalar_t>();
        scalar_t* gbp = grad_b.data_ptr<scalar_t>();
        std::vector<scalar_t> carry(width, scalar_t(0));
        for (int64_t t = steps - 1; t > 0; --t) {
            const scalar_t* at = ap + t * width;
            const scalar_t* prev = hp + (t - 1) * width;
            const scalar_t* gt = gp + t * width;
            scalar_t* gat = gap + t * width;
            scalar_t* gbt = gbp + t * width;
            for (int64_t j = 0; j < width; ++j) {
                scalar_t lam = gt[j] + carry[j];
                gbt[j] = lam;
                gat[j] = lam * prev[j];
                carry[j] = at[j] * lam;
            }
        }
        for (int64_t j = 0; j < width; ++j) {
            gbp[j] = gp[j] + carry[j];
            gap[j] = scalar_t(0);
        }
    });
    return {grad_a, grad_b};
}
"""

_cpp_scan = None
_cpp_tried = False


def _cpp_backend():
    """Compiled loop when available; the pure-torch loop otherwise."""
    global _cpp_scan, _cpp_tried
    if _cpp_tried:
        return _cpp_scan
    _cpp_tried = True
    if os.environ.get("ICISP_DISABLE_CPP_SCAN"):
        return None
    try:
        from torch.utils.cpp_extension import load_inline

        _cpp_scan = load_inline(
            name="icisp_scan",
            cpp_sources=_SCAN_CPP,
            functions=["scan_forward", "scan_backward"],
            extra_cflags=["-O3"],
            verbose=False,
        )
    except Exception as exc:  # pragma: no cover - depends on toolchain
        log.warning("falling back to the python scan loop (%s)", exc)
        _cpp_scan = None
    return _cpp_scan


def _scan_fwd(a, b):
    cpp = _cpp_backend()
    if cpp is not None:
        return cpp.scan_forward(a, b)
    h = torch.empty_like(b)
    a_t = a.unbind(0)
    b_t = b.unbind(0)
    h_t = h.unbind(0)
    h_t[0].copy_(b_t[0])
    state = h_t[0]
    for t in range(1, len(h_t)):
        torch.addcmul(b_t[t], a_t[t], state, out=h_t[t])
        state = h_t[t]
    return h


def _scan_bwd(a, h, grad_h):
    cpp = _cpp_backend()
    if cpp is not None:
        return cpp.scan_backward(a, h, grad_h)
    steps = a.shape[0]
    grad_a = torch.empty_like(a)
    grad_b = torch.empty_like(a)
    gh_t = grad_h.contiguous().unbind(0)
    a_t = a.unbind(0)
    h_t = h.unbind(0)
    ga_t = grad_a.unbind(0)
    gb_t = grad_b.unbind(0)
    carry = torch.zeros_like(gh_t[0])
    # adjoint runs right-to-left: lam_t = g_t + a_{t+1} * lam_{t+1}
    for t in range(steps - 1, 0, -1):
        lam = torch.add(gh_t[t], carry, out=gb_t[t])
        torch.mul(lam, h_t[t - 1], out=ga_t[t])
        torch.mul(a_t[t], lam, out=carry)
    torch.add(gh_t[0], carry, out=gb_t[0])
    ga_t[0].zero_()  # h_{-1} = 0
    return grad_a, grad_b


class LinearScan(torch.autograd.Function):
    """h_t = a_t * h_{t-1} + b_t along dim 0, elementwise over trailing dims."""

    @staticmethod
    def forward(ctx, a, b):
        if a.shape[0] == 0:
            ctx.save_for_backward(a, b)
            return torch.empty_like(b)
        h = _scan_fwd(a, b)
        ctx.save_for_backward(a, h)
        return h

    @staticmethod
    def backward(ctx, grad_h):
        a, h = ctx.saved_tensors
        if a.shape[0] == 0:
            return torch.zeros_like(a), torch.zeros_like(a)
        grad_a, grad_b = _scan_bwd(a, h, grad_h)
        return grad_a, grad_b


def selective_scan(u, dt, a_diag, b_mix, c_mix, skip):
    """Left-to-right selective scan over sequences.

    Args:
        u: input [L, C] or [B, L, C]
        dt: positive step sizes, same shape as u
        a_diag: per-channel diagonal decay [C, N] (values <= 0)
        b_mix: input mixing vectors [(B,) L, N]
        c_mix: output mixing vectors [(B,) L, N]
        skip: per-channel passthrough gain [C]

    Returns output with the shape of u.
    """
    squeeze = u.dim() == 2
    if squeeze:
        u, dt, b_mix, c_mix = u[None], dt[None], b_mix[None], c_mix[None]
    if not (torch.isfinite(u).all() and torch.isfinite(dt).all()):
        raise ValueError("non-finite scan inputs")
    bsz, length, ch = u.shape
    n = a_diag.shape[-1]

    a = torch.exp(dt.unsqueeze(-1) * a_diag)                      # [B, L, C, N]
    b = (dt * u).unsqueeze(-1) * b_mix.unsqueeze(2)               # [B, L, C, N]
    a = a.permute(1, 0, 2, 3).reshape(length, bsz * ch, n)
    b = b.permute(1, 0, 2, 3).reshape(length, bsz * ch, n)
    h = LinearScan.apply(a, b)
    h = h.reshape(length, bsz, ch, n).permute(1, 0, 2, 3)
    y = torch.einsum("blcn,bln->blc", h, c_mix) + skip * u
    return y[0] if squeeze else y


class ScanParams(nn.Module):
    """Learned S6 parameterization for one traversal direction.

    dt comes from a low-rank projection passed through softplus so the
    discretized decay exp(dt*a) stays in (0, 1]; B and C are per-position
    linear projections of the input.
    """

    def __init__(self, channels, state_dim=8, dt_rank=None, dt_min=1e-3, dt_max=0.1):
        super().__init__()
        self.channels = channels
        self.state_dim = state_dim
        self.dt_rank = dt_rank if dt_rank is not None else max(1, channels // 16)
        self.x_proj = nn.Linear(channels, self.dt_rank + 2 * state_dim, bias=False)
        self.dt_proj = nn.Linear(self.dt_rank, channels, bias=True)
        self.a_log = nn.Parameter(torch.log(torch.arange(1, state_dim + 1, dtype=torch.float32)).repeat(channels, 1))
        self.skip = nn.Parameter(torch.ones(channels))
        self._init_dt(dt_min, dt_max)

    def _init_dt(self, dt_min, dt_max):
        std = self.dt_rank**-0.5
        nn.init.uniform_(self.dt_proj.weight, -std, std)
        dt = torch.exp(torch.rand(self.channels) * (math.log(dt_max) - math.log(dt_min)) + math.log(dt_min))
        with torch.no_grad():
            # bias = softplus^{-1}(dt) so initial step sizes land in [dt_min, dt_max]
            self.dt_proj.bias.copy_(dt + torch.log(-torch.expm1(-dt)))

    def compute(self, u):
        """Per-position (dt, B, C) from input sequences u: [B, L, C]."""
        dbl = self.x_proj(u)
        dt_raw, b_mix, c_mix = torch.split(dbl, [self.dt_rank, self.state_dim, self.state_dim], dim=-1)
        dt = F.softplus(self.dt_proj(dt_raw))
        return dt, b_mix, c_mix

    @property
    def a_diag(self):
        return -torch.exp(self.a_log)

    def forward(self, u):
        dt, b_mix, c_mix = self.compute(u)
        return selective_scan(u, dt, self.a_diag, b_mix, c_mix, self.skip)


class SS2D(nn.Module):
    """Four-direction selective scan over [B, C, H, W].

    Flattens along row-major forward/backward and column-major
    forward/backward orders, scans each with its own parameters, and sums
    the un-flattened outputs.  All four recurrences share one sequential
    loop by stacking along the batch axis, with the scan operands built
    directly in L-major layout.
    """

    def __init__(self, channels, state_dim=8, dt_rank=None):
        super().__init__()
        self.channels = channels
        self.state_dim = state_dim
        self.dirs = nn.ModuleList(ScanParams(channels, state_dim, dt_rank) for _ in range(4))

    def forward(self, x):
        bsz, ch, hh, ww = x.shape
        length = hh * ww
        n = self.state_dim
        row = x.reshape(bsz, ch, length)
        col = x.transpose(2, 3).reshape(bsz, ch, length)
        seqs = torch.stack([row, col, row.flip(-1), col.flip(-1)], dim=1)
        u = seqs.permute(0, 1, 3, 2)                                  # [B, 4, L, C]

        dts, bs, cs = [], [], []
        for d, params in enumerate(self.dirs):
            dt, b_mix, c_mix = params.compute(u[:, d])
            dts.append(dt)
            bs.append(b_mix)
            cs.append(c_mix)
        a_diag = torch.stack([p.a_diag for p in self.dirs])           # [4, C, N]
        c_mix = torch.stack(cs, dim=1)                                # [B, 4, L, N]

        # L-major layout before forming the large [L, B, 4, C, N] operands,
        # so their reshape into the scan is free
        u_l = u.permute(2, 0, 1, 3).contiguous()
        dt_l = torch.stack(dts, dim=1).permute(2, 0, 1, 3).contiguous()
        bm_l = torch.stack(bs, dim=1).permute(2, 0, 1, 3).contiguous()
        a = torch.exp(dt_l.unsqueeze(-1) * a_diag)
        b = (dt_l * u_l).unsqueeze(-1) * bm_l.unsqueeze(3)

        h = LinearScan.apply(a.reshape(length, -1, n), b.reshape(length, -1, n))
        h = h.reshape(length, bsz, 4, ch, n)
        y = torch.einsum("lbdcn,bdln->bdlc", h, c_mix)
        skips = torch.stack([p.skip for p in self.dirs])              # [4, C]
        y = y + skips[None, :, None, :] * u
        y = y.permute(0, 1, 3, 2)                                     # [B, 4, C, L]

        out = (y[:, 0] + y[:, 2].flip(-1)).reshape(bsz, ch, hh, ww)
        out = out + (y[:, 1] + y[:, 3].flip(-1)).reshape(bsz, ch, ww, hh).transpose(2, 3)
        return out
