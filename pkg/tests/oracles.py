"""Independent oracles used by the test suite.

These deliberately avoid the implementation's code paths: the bandwidth
oracle bisects the transmission-time equation directly, and the KS helper
compares an empirical sample against a closed-form CDF.
"""

import math

import numpy as np

from fedteddi.wireless import ChannelRealization, LinkBudget, RadioProfile, shannon_rate


def bisect_min_bandwidth(
    remaining_time_s: float,
    profile: RadioProfile,
    channel: ChannelRealization,
    budget: LinkBudget,
    hi: float | None = None,
    rel_tol: float = 1e-9,
) -> float:
    """Root of D_s / R(B) = remaining_time by bisection on the bandwidth.

    Returns +inf when even the upper bracket cannot meet the deadline
    (the channel saturates below the required rate).
    """

    def upload_time(b: float) -> float:
        return budget.model_bits / shannon_rate(b, profile, channel)

    lo = 1e-3
    if hi is None:
        hi = 1.0
        while upload_time(hi) > remaining_time_s:
            hi *= 2.0
            if hi > 1e24:
                return math.inf
    else:
        if upload_time(hi) > remaining_time_s:
            return math.inf
    while upload_time(lo) < remaining_time_s:
        lo /= 2.0
        if lo < 1e-200:
            break
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if upload_time(mid) <= remaining_time_s:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_tol * hi:
            break
    return hi


def ks_statistic(samples: np.ndarray, cdf) -> float:
    """Kolmogorov-Smirnov distance between a sample and a reference CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))
