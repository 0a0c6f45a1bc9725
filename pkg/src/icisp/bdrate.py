"""Bjontegaard delta rate between two rate-quality curves.

log-rate is fitted as a cubic polynomial of quality per curve; the average
log-rate difference over the overlapping quality range converts to a
percentage via 100*(exp(delta) - 1).
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["RDPoint", "validate_curve", "bd_rate"]


@dataclass
class RDPoint:
    bpp: float
    quality: float
    metric_name: str = ""
    lambda_id: str = ""


def validate_curve(points):
    if len(points) < 4:
        raise ValueError(f"need at least 4 points per curve, got {len(points)}")
    bpps = [p.bpp for p in points]
    if any(b <= 0 for b in bpps):
        raise ValueError("bpp values must be positive")
    if any(b2 <= b1 for b1, b2 in zip(bpps, bpps[1:])):
        raise ValueError("curve points must be sorted by strictly increasing bpp")


def bd_rate(curve_ref, curve_test, lower_is_better=False):
    """Average rate difference of `curve_test` against `curve_ref` in percent.

    For metrics where lower is better (e.g. perceptual distances) the
    quality axis is negated before fitting.
    """
    validate_curve(curve_ref)
    validate_curve(curve_test)
    sign = -1.0 if lower_is_better else 1.0
    q_ref = sign * np.array([p.quality for p in curve_ref])
    q_test = sign * np.array([p.quality for p in curve_test])
    r_ref = np.log(np.array([p.bpp for p in curve_ref]))
    r_test = np.log(np.array([p.bpp for p in curve_test]))

    lo = max(q_ref.min(), q_test.min())
    hi = min(q_ref.max(), q_test.max())
    if hi <= lo:
        raise ValueError(f"quality ranges do not overlap: [{q_ref.min()}, {q_ref.max()}] vs [{q_test.min()}, {q_test.max()}]")

    fit_ref = np.polynomial.Polynomial.fit(q_ref, r_ref, 3)
    fit_test = np.polynomial.Polynomial.fit(q_test, r_test, 3)
    int_ref = fit_ref.integ()
    int_test = fit_test.integ()
    avg_diff = ((int_test(hi) - int_test(lo)) - (int_ref(hi) - int_ref(lo))) / (hi - lo)
    return 100.0 * (np.exp(avg_diff) - 1.0)
