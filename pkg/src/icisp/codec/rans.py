"""Reference entropy coder: 64-bit-state range coder (rANS form) with 16-bit
frequency tables, byte-wise renormalization, little-endian state flush.

The byte layout is the cross-implementation contract: encoding walks the
symbols in reverse, emits renormalization bytes, and prepends the 8-byte
final state; decoding reads the state, then pops symbols front to back,
pulling bytes as the state drops below the normalization floor.  A fully
decoded stream ends exactly at the initial state, which doubles as an
integrity check.
"""

from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

PROB_BITS = 16
PROB_SCALE = 1 << PROB_BITS
RANS_L = 1 << 48
_STATE_MASK = PROB_SCALE - 1
_INV_SQRT2 = 2.0**-0.5

__all__ = [
    "PROB_BITS",
    "PROB_SCALE",
    "CoderError",
    "SupportError",
    "StreamError",
    "CdfTable",
    "quantize_pmf",
    "build_gaussian_cdf",
    "rans_encode",
    "rans_decode",
]


class CoderError(ValueError):
    pass


class SupportError(CoderError):
    """Symbol outside the table's support."""


class StreamError(CoderError):
    """Truncated or corrupt bitstream."""


@dataclass
class CdfTable:
    """Integer CDF over symbols [offset, offset + bins); cdf has bins+1 entries,
    cdf[0] = 0, cdf[-1] = 2^16, every in-support bin mass >= 1."""

    cdf: np.ndarray
    offset: int
    precision: int = PROB_BITS
    _cdf_list: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.cdf = np.asarray(self.cdf, dtype=np.uint32)
        if self.precision != PROB_BITS:
            raise ValueError("only 16-bit tables are supported")
        if self.cdf[0] != 0 or self.cdf[-1] != PROB_SCALE:
            raise ValueError("cdf must run from 0 to 2^16")
        steps = np.diff(self.cdf.astype(np.int64))
        if (steps < 1).any():
            raise ValueError("every in-support bin needs mass >= 1")
        self._cdf_list = [int(v) for v in self.cdf]

    @property
    def num_bins(self):
        return len(self.cdf) - 1

    def freq(self, symbol):
        k = symbol - self.offset
        if k < 0 or k >= self.num_bins:
            raise SupportError(f"symbol {symbol} outside support [{self.offset}, {self.offset + self.num_bins})")
        return self._cdf_list[k + 1] - self._cdf_list[k]


def quantize_pmf(pmf, anchor=None):
    """Deterministic 16-bit integerization: nearest integer with a floor of 1
    per bin; the rounding residual lands on the anchor bin (default: the
    middle bin, i.e. symbol 0 of a symmetric support, which keeps symmetric
    inputs exactly symmetric), falling back to the largest bins when the
    anchor cannot absorb it."""
    pmf = np.asarray(pmf, dtype=np.float64)
    if pmf.ndim != 1 or len(pmf) < 1:
        raise ValueError("pmf must be a non-empty 1-D array")
    if len(pmf) > PROB_SCALE:
        raise ValueError("more bins than probability mass units")
    if (pmf < 0).any() or not np.isfinite(pmf).all():
        raise ValueError("pmf entries must be finite and non-negative")
    total = pmf.sum()
    if total <= 0:
        raise ValueError("pmf must have positive mass")
    if anchor is None:
        anchor = len(pmf) // 2
    freqs = np.floor(pmf / total * PROB_SCALE + 0.5).astype(np.int64)
    np.maximum(freqs, 1, out=freqs)
    diff = PROB_SCALE - int(freqs.sum())
    if freqs[anchor] + diff >= 1:
        freqs[anchor] += diff
        diff = 0
    while diff != 0:
        i = int(np.argmax(freqs))  # ties resolve to the lowest bin index
        if diff > 0:
            freqs[i] += diff
            diff = 0
        else:
            take = min(-diff, int(freqs[i]) - 1)
            if take == 0:
                raise ValueError("cannot renormalize pmf: all mass at the floor")
            freqs[i] -= take
            diff += take
    return freqs


def freqs_to_cdf(freqs, offset):
    cdf = np.zeros(len(freqs) + 1, dtype=np.uint32)
    np.cumsum(freqs, out=cdf[1:])
    return CdfTable(cdf=cdf, offset=offset)


def build_gaussian_cdf(mu_frac, sigma, support, precision=PROB_BITS):
    """16-bit table for round(y - mu) under N(mu_frac, sigma^2).

    Bin masses are Gaussian CDF differences at +-0.5; out-of-support tails
    fold into the boundary bins.  erf keeps the mu_frac = 0 case exactly
    symmetric in floating point.
    """
    if precision != PROB_BITS:
        raise ValueError("only 16-bit tables are supported")
    if not -0.5 <= mu_frac < 0.5:
        raise ValueError("mu_frac must lie in [-0.5, 0.5)")
    if sigma < 0.11:
        raise ValueError("sigma below the 0.11 scale floor")
    lo, hi = int(support[0]), int(support[1])
    if lo > 0 or hi < 0 or hi < lo:
        raise ValueError(f"support [{lo}, {hi}] must contain 0")
    ks = np.arange(lo, hi + 1, dtype=np.float64)
    scale = _INV_SQRT2 / sigma
    upper = erf((ks + 0.5 - mu_frac) * scale)
    lower = erf((ks - 0.5 - mu_frac) * scale)
    pmf = 0.5 * (upper - lower)
    pmf[0] += 0.5 * (1.0 + lower[0])
    pmf[-1] += 0.5 * (1.0 - upper[-1])
    return freqs_to_cdf(quantize_pmf(pmf, anchor=-lo), lo)


def rans_encode(symbols, indexes, tables):
    """Encode symbols, each under tables[indexes[i]], into one byte stream."""
    if len(symbols) != len(indexes):
        raise ValueError("symbols and indexes must have equal length")
    cdfs = [t._cdf_list for t in tables]
    offsets = [t.offset for t in tables]
    nbins = [t.num_bins for t in tables]
    state = RANS_L
    tail = bytearray()
    for i in range(len(symbols) - 1, -1, -1):
        t = indexes[i]
        cdf = cdfs[t]
        k = int(symbols[i]) - offsets[t]
        if k < 0 or k >= nbins[t]:
            raise SupportError(f"symbol {symbols[i]} outside support of table {t}")
        start = cdf[k]
        f = cdf[k + 1] - start
        limit = f << 40  # f * ((RANS_L >> 16) << 8)
        while state >= limit:
            tail.append(state & 0xFF)
            state >>= 8
        state = ((state // f) << PROB_BITS) + (state % f) + start
    return state.to_bytes(8, "little") + bytes(reversed(tail))


def rans_decode(data, indexes, tables, count=None):
    """Exact inverse of :func:`rans_encode`; raises StreamError on truncated
    or inconsistent input."""
    n = len(indexes) if count is None else count
    if count is not None and count != len(indexes):
        raise ValueError("count disagrees with indexes length")
    if len(data) < 8:
        raise StreamError("stream shorter than the 8-byte state")
    state = int.from_bytes(data[:8], "little")
    pos = 8
    end = len(data)
    cdfs = [t._cdf_list for t in tables]
    offsets = [t.offset for t in tables]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        cdf = cdfs[indexes[i]]
        slot = state & _STATE_MASK
        k = bisect_right(cdf, slot) - 1
        start = cdf[k]
        f = cdf[k + 1] - start
        state = f * (state >> PROB_BITS) + slot - start
        while state < RANS_L:
            if pos >= end:
                raise StreamError("truncated stream")
            state = (state << 8) | data[pos]
            pos += 1
        out[i] = k + offsets[indexes[i]]
    if state != RANS_L or pos != end:
        raise StreamError("stream does not decode to its initial state")
    return out
