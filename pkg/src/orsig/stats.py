"""Binomial interval helpers shared by the experiment runners."""
from __future__ import annotations

from math import sqrt
from statistics import NormalDist


def z_value(confidence: float, two_sided: bool = True) -> float:
    tail = (1 - confidence) / 2 if two_sided else 1 - confidence
    return NormalDist().inv_cdf(1 - tail)


def wilson_interval(successes: int, total: int, z: float) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total <= 0:
        raise ValueError("total must be positive")
    if not 0 <= successes <= total:
        raise ValueError("successes must lie in [0, total]")
    phat = successes / total
    denom = 1 + z * z / total
    centre = (phat + z * z / (2 * total)) / denom
    half = z * sqrt(phat * (1 - phat) / total + z * z / (4 * total * total)) / denom
    # clamp the endpoints that are exact in theory but drift in floating point
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == total else min(1.0, centre + half)
    return min(lo, phat), max(hi, phat)


def wilson_one_sided(successes: int, total: int, confidence: float) -> tuple[float, float]:
    """One-sided lower and upper Wilson bounds, each at ``confidence``."""
    return wilson_interval(successes, total, z_value(confidence, two_sided=False))
