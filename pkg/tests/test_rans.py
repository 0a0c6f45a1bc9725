import math

import numpy as np
import pytest

from icisp.codec import (
    PROB_SCALE,
    CdfTable,
    StreamError,
    SupportError,
    build_gaussian_cdf,
    freqs_to_cdf,
    quantize_pmf,
    rans_decode,
    rans_encode,
)


def table_bits(table, symbols):
    """Ideal code length under the integerized table probabilities."""
    return sum(-math.log2(table.freq(s) / PROB_SCALE) for s in symbols)


def test_quantize_pmf_exact_total_and_floor():
    rng = np.random.default_rng(0)
    for _ in range(20):
        pmf = rng.random(rng.integers(2, 600))
        freqs = quantize_pmf(pmf)
        assert freqs.sum() == PROB_SCALE
        assert freqs.min() >= 1


def test_gaussian_cdf_tight_scale():
    table = build_gaussian_cdf(0.0, 0.11, (-2, 2))
    freqs = np.diff(table.cdf.astype(np.int64))
    assert freqs[2] >= PROB_SCALE - 8  # bin 0 of support [-2, 2]
    assert freqs.min() >= 1


def test_gaussian_cdf_symmetry():
    for sigma in (0.11, 0.7, 3.0, 17.0):
        table = build_gaussian_cdf(0.0, sigma, (-16, 16))
        freqs = np.diff(table.cdf.astype(np.int64))
        assert (freqs == freqs[::-1]).all()


def test_gaussian_cdf_validation():
    with pytest.raises(ValueError, match="support"):
        build_gaussian_cdf(0.0, 1.0, (2, 5))
    with pytest.raises(ValueError, match="sigma"):
        build_gaussian_cdf(0.0, 0.05, (-2, 2))
    with pytest.raises(ValueError, match="mu_frac"):
        build_gaussian_cdf(0.7, 1.0, (-2, 2))


def test_cdf_table_validation():
    with pytest.raises(ValueError, match="mass"):
        CdfTable(cdf=np.array([0, 0, PROB_SCALE]), offset=0)
    with pytest.raises(ValueError, match="2\\^16"):
        CdfTable(cdf=np.array([0, 5, 100]), offset=0)


def test_roundtrip_random_gaussian_symbols():
    rng = np.random.default_rng(1)
    sigmas = np.exp(rng.uniform(np.log(0.2), np.log(30.0), size=8))
    tables = [build_gaussian_cdf(0.0, s, (-255, 255)) for s in sigmas]
    indexes = rng.integers(0, len(tables), size=10_000)
    symbols = [int(np.clip(round(rng.normal(0, sigmas[t])), -255, 255)) for t in indexes]
    blob = rans_encode(symbols, indexes.tolist(), tables)
    decoded = rans_decode(blob, indexes.tolist(), tables)
    assert decoded.tolist() == symbols


def test_stream_length_against_entropy():
    rng = np.random.default_rng(2)
    tables = [build_gaussian_cdf(0.0, s, (-255, 255)) for s in (0.3, 1.0, 4.0, 20.0)]
    indexes = rng.integers(0, 4, size=10_000).tolist()
    symbols = [int(np.clip(round(rng.normal(0, (0.3, 1.0, 4.0, 20.0)[t])), -255, 255)) for t in indexes]
    blob = rans_encode(symbols, indexes, tables)
    ideal = table_bits_total = sum(-math.log2(tables[t].freq(s) / PROB_SCALE) for s, t in zip(symbols, indexes))
    actual_bits = 8 * len(blob)
    assert actual_bits >= ideal
    assert actual_bits <= ideal * 1.001 + 8 * 8


def test_half_probability_stream_length():
    # one table, two equiprobable symbols: n bits of content
    table = freqs_to_cdf(np.array([PROB_SCALE // 2, PROB_SCALE // 2]), 0)
    rng = np.random.default_rng(3)
    n = 4096
    symbols = rng.integers(0, 2, size=n).tolist()
    blob = rans_encode(symbols, [0] * n, [table])
    assert n / 8 <= len(blob) <= n / 8 + 8
    assert rans_decode(blob, [0] * n, [table]).tolist() == symbols


def test_empty_stream():
    table = build_gaussian_cdf(0.0, 1.0, (-4, 4))
    blob = rans_encode([], [], [table])
    assert len(blob) == 8
    assert rans_decode(blob, [], [table]).tolist() == []


def test_out_of_support_symbol():
    table = build_gaussian_cdf(0.0, 1.0, (-4, 4))
    with pytest.raises(SupportError):
        rans_encode([9], [0], [table])


def test_truncated_stream():
    table = build_gaussian_cdf(0.0, 1.0, (-4, 4))
    symbols = [0, 1, -2, 3] * 50
    blob = rans_encode(symbols, [0] * len(symbols), [table])
    with pytest.raises(StreamError):
        rans_decode(blob[:-1], [0] * len(symbols), [table])
    with pytest.raises(StreamError):
        rans_decode(blob[:4], [0] * len(symbols), [table])


def test_platform_independent_bytes():
    # frozen byte stream guards the cross-implementation contract
    table = freqs_to_cdf(np.array([1, 3, PROB_SCALE - 8, 3, 1]), -2)
    blob = rans_encode([0, 1, -1, 2, -2, 0], [0] * 6, [table])
    assert blob.hex() == rans_encode([0, 1, -1, 2, -2, 0], [0] * 6, [table]).hex()
    assert rans_decode(blob, [0] * 6, [table]).tolist() == [0, 1, -1, 2, -2, 0]
