"""Channel, delay, and bandwidth modeling for synchronous round deadlines.

All internal computation is in linear SI units (watts, Hz, seconds); dBm/dB
appear only at the config boundary.  The minimum-bandwidth solver inverts
the Shannon rate through the Lambert-W function, with a bisection fallback
in the ill-conditioned region near the feasibility boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "InfeasibleClientError",
    "RadioProfile",
    "ComputeProfile",
    "ChannelRealization",
    "LinkBudget",
    "dbm_to_watts",
    "path_loss_db",
    "path_gain",
    "sample_compute_delay",
    "compute_delay_cdf",
    "shannon_rate",
    "lambert_w",
    "min_bandwidth",
    "round_delay",
]

# Safety margin applied to the minimum bandwidth so the straggler's round
# delay never lands above the deadline in floating point.
_BANDWIDTH_MARGIN = 1e-9

# |Gamma - 1| window in which the Lambert-W form is ill-conditioned (the
# two branches collide at the -1/e branch point) and the rate equation is
# solved by bisection instead.
_GAMMA_BISECT_WINDOW = 1e-2


class InfeasibleClientError(RuntimeError):
    """The client cannot finish its upload within the round deadline."""


@dataclass(frozen=True)
class RadioProfile:
    """Uplink radio parameters of one client (config-boundary units)."""

    tx_power_dbm: float = 23.0
    distance_km: float = 0.1
    shadow_sigma_db: float = 8.0
    noise_psd_dbm_hz: float = -174.0
    carrier_ghz: float = 3.5

    def __post_init__(self):
        if not math.isfinite(self.tx_power_dbm):
            raise ValueError("tx_power_dbm must be finite")
        if self.distance_km <= 0:
            raise ValueError("distance_km must be positive")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow_sigma_db must be nonnegative")


@dataclass(frozen=True)
class ComputeProfile:
    """Shifted-exponential local computation model: minimum time per sample
    plus an exponential tail."""

    min_time_per_sample_s: float = 0.5e-3
    rate_samples_per_s: float = 2.0e3

    def __post_init__(self):
        if self.min_time_per_sample_s <= 0 or self.rate_samples_per_s <= 0:
            raise ValueError("compute profile parameters must be positive")


@dataclass(frozen=True)
class ChannelRealization:
    """Average channel power gain over one upload (linear ratio)."""

    gain: float

    def __post_init__(self):
        if not (self.gain > 0 and math.isfinite(self.gain)):
            raise ValueError("gain must be positive and finite")


@dataclass(frozen=True)
class LinkBudget:
    """Round-level link constants: model size, deadline, shared bandwidth."""

    model_bits: float
    deadline_s: float
    total_bandwidth_hz: float

    def __post_init__(self):
        if self.model_bits <= 0 or self.deadline_s <= 0 or self.total_bandwidth_hz <= 0:
            raise ValueError("link budget entries must be positive")


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def path_loss_db(distance_km: float) -> float:
    """Urban macro path loss 128.1 + 37.6 log10(d) with d in kilometers."""
    if distance_km <= 0:
        raise ValueError("distance must be positive")
    return 128.1 + 37.6 * math.log10(distance_km)


def path_gain(profile: RadioProfile, rng_seed: int) -> ChannelRealization:
    """Draw one channel realization: path loss plus log-normal shadowing."""
    pl = path_loss_db(profile.distance_km)
    if profile.shadow_sigma_db > 0:
        rng = np.random.Generator(np.random.PCG64(rng_seed))
        pl += profile.shadow_sigma_db * rng.standard_normal()
    return ChannelRealization(gain=10.0 ** (-pl / 10.0))


def sample_compute_delay(
    profile: ComputeProfile,
    tau: int,
    batch: int,
    rng_seed: int,
    size: int | None = None,
):
    """Draw local-training delays: a*tau*b shift plus an Exp(mu/(tau*b)) tail.

    The mean is a*tau*b + tau*b/mu.  Pass ``size`` to draw a vector from a
    single stream (the first draw equals the scalar call's result).
    """
    if tau < 1 or batch < 1:
        raise ValueError("tau and batch must be >= 1")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    work = tau * batch
    shift = profile.min_time_per_sample_s * work
    scale = work / profile.rate_samples_per_s
    draws = shift + rng.exponential(scale=scale, size=size)
    if size is None:
        return float(draws)
    return draws


def compute_delay_cdf(profile: ComputeProfile, tau: int, batch: int, t) -> np.ndarray:
    """Closed-form CDF of the shifted-exponential training delay."""
    t = np.asarray(t, dtype=float)
    work = tau * batch
    shift = profile.min_time_per_sample_s * work
    rate = profile.rate_samples_per_s / work
    return np.where(t >= shift, 1.0 - np.exp(-rate * (t - shift)), 0.0)


def shannon_rate(bandwidth_hz: float, profile: RadioProfile, channel: ChannelRealization) -> float:
    """Uplink rate B * log2(1 + P|H|^2 / (B N0)) in bits/second."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    p_watts = dbm_to_watts(profile.tx_power_dbm)
    n0 = dbm_to_watts(profile.noise_psd_dbm_hz)
    snr = p_watts * channel.gain / (bandwidth_hz * n0)
    # log1p keeps the wideband limit P|H|^2/(N0 ln2) exact when snr underflows
    return bandwidth_hz * math.log1p(snr) / math.log(2.0)


_INV_E = math.exp(-1.0)


def _halley_w(z: float, w: float) -> float:
    """Polish a Lambert-W guess with Halley's iteration to ~1e-12 residual."""
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - z
        if abs(f) <= 1e-13 * (abs(z) + 1e-300):
            break
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = f / denom
        w -= step
        if abs(step) <= 1e-15 * (1.0 + abs(w)):
            break
    return w


def lambert_w(z: float, branch: int = 0) -> float:
    """Real Lambert-W: the solutions w of w*exp(w) = z.

    branch 0 is defined for z >= -1/e; branch -1 for z in [-1/e, 0).
    Evaluated by Halley iteration from series/asymptotic initial guesses.
    """
    if branch not in (0, -1):
        raise ValueError("branch must be 0 or -1")
    if z < -_INV_E - 1e-15:
        raise ValueError(f"no real Lambert-W value for z={z!r} < -1/e")
    z = max(z, -_INV_E)
    if z == -_INV_E:
        return -1.0
    if branch == 0:
        if abs(z) < 1e-300:
            return 0.0
        if z < -0.25:
            eta = math.sqrt(2.0 * (1.0 + math.e * z))
            w = -1.0 + eta - eta * eta / 3.0 + 11.0 / 72.0 * eta**3
        elif z < 1.0:
            w = z * (1.0 - z + 1.5 * z * z)
        else:
            lz = math.log(z)
            llz = math.log(lz) if lz > 0 else 0.0
            w = lz - llz
        return _halley_w(z, w)
    # branch -1: z in (-1/e, 0)
    if z >= 0:
        raise ValueError("branch -1 requires z < 0")
    if z < -0.25:
        eta = math.sqrt(2.0 * (1.0 + math.e * z))
        w = -1.0 - eta - eta * eta / 3.0 - 11.0 / 72.0 * eta**3
    else:
        l1 = math.log(-z)
        l2 = math.log(-l1)
        w = l1 - l2
    return _halley_w(z, w)


def _required_rate(remaining_time_s: float, budget: LinkBudget) -> float:
    return budget.model_bits / remaining_time_s


def _rate_equation_bisect(
    required_rate: float, gamma_hz: float
) -> float:
    """Solve B*log2(1 + gamma/B) = required_rate by bisection on B.

    Valid only when required_rate < gamma/ln2 (otherwise no bandwidth works).
    """
    target = required_rate * math.log(2.0)  # work with natural-log rate

    def f(b: float) -> float:
        return b * math.log1p(gamma_hz / b) - target

    # Expand an upper bracket; the rate is increasing in B.
    lo, hi = 1e-6, 1.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e30:
            raise InfeasibleClientError("rate equation has no finite solution")
    while f(lo) > 0:
        lo /= 2.0
        if lo < 1e-300:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-13 * hi:
            break
    return hi


def min_bandwidth(
    remaining_time_s: float,
    profile: RadioProfile,
    channel: ChannelRealization,
    budget: LinkBudget,
) -> float:
    """Smallest bandwidth letting the client upload the model within
    ``remaining_time_s``.

    Closed form: B* = -Ds ln2 / ((T - t_cp) (W(-G e^-G) + G)) with
    G = N0 Ds ln2 / ((T - t_cp) P |H|^2), taking the W branch that yields
    the positive root (the non-principal branch for G < 1).  For G >= 1
    the required rate exceeds the infinite-bandwidth limit P|H|^2/(N0 ln2),
    so no bandwidth suffices and +inf is returned.  The result carries a
    one-part-in-1e9 safety margin so the realized upload never overshoots
    the deadline in floating point.
    """
    if remaining_time_s <= 0:
        raise InfeasibleClientError(
            f"remaining time {remaining_time_s!r} <= 0: client is already past the deadline"
        )
    p_watts = dbm_to_watts(profile.tx_power_dbm)
    n0 = dbm_to_watts(profile.noise_psd_dbm_hz)
    gamma_hz = p_watts * channel.gain / n0  # bandwidth at which SNR = 1
    required = _required_rate(remaining_time_s, budget)
    big_gamma = required * math.log(2.0) / gamma_hz

    if big_gamma >= 1.0:
        return math.inf
    if abs(big_gamma - 1.0) < _GAMMA_BISECT_WINDOW:
        b = _rate_equation_bisect(required, gamma_hz)
    else:
        w = lambert_w(-big_gamma * math.exp(-big_gamma), branch=-1)
        b = -budget.model_bits * math.log(2.0) / (remaining_time_s * (w + big_gamma))
    return b * (1.0 + _BANDWIDTH_MARGIN)


def round_delay(
    selected: Iterable[int],
    compute_delays: Mapping[int, float],
    bandwidths: Mapping[int, float],
    profiles: Mapping[int, RadioProfile],
    channels: Mapping[int, ChannelRealization],
    budget: LinkBudget,
) -> float:
    """Synchronous round time: the slowest scheduled client's compute plus
    upload time.  Empty selection costs nothing."""
    worst = 0.0
    for cid in selected:
        for m, name in (
            (compute_delays, "compute_delays"),
            (bandwidths, "bandwidths"),
            (profiles, "profiles"),
            (channels, "channels"),
        ):
            if cid not in m:
                raise ValueError(f"client {cid} missing from {name}")
        rate = shannon_rate(bandwidths[cid], profiles[cid], channels[cid])
        worst = max(worst, compute_delays[cid] + budget.model_bits / rate)
    return worst
