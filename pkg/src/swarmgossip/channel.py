"""Interference-limited wireless links.

Power-law path loss with Rayleigh fading (unit-mean exponential power
gains), exact SIR evaluation against a set of active transmitters, the
closed-form reception probability of a thinned Poisson field, and the
brute-force Monte-Carlo estimator used to cross-validate it. Thermal noise
is zero throughout: decoding is a pure SIR comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats


@dataclass(frozen=True)
class ChannelParams:
    """Wireless layer parameters.

    intensity: node density (points per unit area)
    access_p:  per-slot transmit probability
    theta:     SIR decoding threshold (linear scale, never dB)
    alpha:     path-loss exponent; received power decays as distance**-alpha
    """

    intensity: float
    access_p: float
    theta: float
    alpha: float

    def __post_init__(self):
        if not self.intensity > 0:
            raise ValueError(f"intensity must be positive, got {self.intensity}")
        if not 0.0 <= self.access_p <= 1.0:
            raise ValueError(f"access probability must be in [0, 1], got {self.access_p}")
        if not self.theta > 0:
            raise ValueError(f"SIR threshold must be positive, got {self.theta}")
        if not self.alpha > 2.0:
            raise ValueError(f"path-loss exponent must exceed 2, got {self.alpha}")


def interference_constant(alpha):
    """Dimensionless scale of the aggregate-interference integral.

    Equals Gamma(1 + 2/alpha) * Gamma(1 - 2/alpha), identically
    (2*pi/alpha) * csc(2*pi/alpha). Blows up as alpha -> 2 from above,
    where the underlying radial integral stops converging.
    """
    if not alpha > 2.0:
        raise ValueError(
            f"interference integral diverges for path-loss exponent <= 2, got {alpha}")
    return float(special.gamma(1.0 + 2.0 / alpha) * special.gamma(1.0 - 2.0 / alpha))


def spatial_contention(r, theta, alpha):
    """Contention area pi * r**2 * theta**(2/alpha) * C(alpha) of a link of length r.

    Accepts scalar or array r; zero at r = 0.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("link distance must be nonnegative")
    if not theta > 0:
        raise ValueError(f"SIR threshold must be positive, got {theta}")
    out = math.pi * theta ** (2.0 / alpha) * interference_constant(alpha) * r * r
    return float(out) if out.ndim == 0 else out


def closed_form_success(params, r):
    """Reception probability exp(-intensity * access_p * K(r)) over distance r.

    Equals 1 when the transmitter field is empty (intensity * access_p = 0)
    or the link has zero length; strictly decreasing in intensity, access
    probability, distance, and threshold otherwise.
    """
    k = spatial_contention(r, params.theta, params.alpha)
    out = np.exp(-params.intensity * params.access_p * np.asarray(k))
    return float(out) if out.ndim == 0 else out


def rayleigh_power_gains(rng, size=None):
    """Unit-mean exponential power gains (Rayleigh amplitude fading)."""
    return rng.standard_exponential(size)


def sir_exact(receiver_pos, tx_index, tx_positions, gains, alpha, window=None):
    """Signal-to-interference ratio at a receiver for one chosen transmitter.

    ``tx_positions`` holds every active transmitter (the chosen one at
    ``tx_index`` plus all interferers) and ``gains`` the matching fading
    draws. The receiver must itself be silent (half-duplex); it may not
    appear among the transmitters. Distances wrap when a torus window is
    given. Returns +inf when the interference sum is empty or the desired
    link has zero length (guaranteed decode by convention).
    """
    txp = np.asarray(tx_positions, dtype=float).reshape(-1, 2)
    g = np.asarray(gains, dtype=float).reshape(-1)
    if g.shape[0] != txp.shape[0]:
        raise ValueError(f"{txp.shape[0]} transmitters but {g.shape[0]} gains")
    if not 0 <= tx_index < txp.shape[0]:
        raise ValueError(f"tx_index {tx_index} out of range")
    rec = np.asarray(receiver_pos, dtype=float)
    diff = np.abs(txp - rec)
    if window is not None and window.boundary == "torus":
        diff = np.minimum(diff, window.side - diff)
    dist = np.sqrt((diff * diff).sum(axis=1))
    if dist[tx_index] == 0.0:
        return math.inf
    with np.errstate(divide="ignore"):
        power = g * dist ** (-alpha)
    desired = float(power[tx_index])
    interference = float(power.sum() - power[tx_index])
    if interference == 0.0:
        return math.inf
    return desired / interference


@dataclass(frozen=True)
class SuccessEstimate:
    """Monte-Carlo reception probability with a 95% Wilson interval."""

    point_estimate: float
    ci_low: float
    ci_high: float
    trials: int


def wilson_interval(successes, trials, level=0.95):
    """Wilson score interval for a binomial proportion."""
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2.0 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _far_field_mean(alpha, half_side):
    """Expected interference per unit transmitter intensity from outside a
    centered square of half-width ``half_side`` (unit-mean fading)."""
    corner = half_side * math.sqrt(2.0)
    ring, _ = integrate.quad(
        lambda u: u ** (1.0 - alpha) * math.acos(half_side / u), half_side, corner)
    tail = 2.0 * math.pi * corner ** (2.0 - alpha) / (alpha - 2.0)
    return 8.0 * ring + tail


def monte_carlo_success(params, r, window, trials, rng, far_field="mean",
                        _chunk_points=4_000_000):
    """Empirical reception probability over distance r by direct simulation.

    Every trial drops a fresh Poisson field of interferers with intensity
    ``intensity * access_p`` in the window, draws i.i.d. unit-mean
    exponential gains for them and for the desired link, and checks whether
    the desired signal beats ``theta`` times the interference sum. The
    receiver sits at the window center, so open and torus windows give the
    same interference geometry.

    The simulated field necessarily ends at the window edge. With
    far_field="mean" (default) the expected interference originating beyond
    the window is added to every trial, which removes the leading-order
    truncation bias; residual effects are far below Monte-Carlo noise once
    side >= 20 r. Pass far_field="none" for the raw truncated-window
    estimate.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if far_field not in ("mean", "none"):
        raise ValueError(f"far_field must be 'mean' or 'none', got {far_field!r}")
    r = float(r)
    if r < 0:
        raise ValueError("link distance must be nonnegative")
    if 2.0 * r > window.side:
        raise ValueError(
            f"window side {window.side} too small for a centered link of length {r}")

    if r == 0.0:
        # zero-length link: guaranteed decode by convention
        lo, hi = wilson_interval(trials, trials)
        return SuccessEstimate(1.0, lo, hi, trials)

    lamp = params.intensity * params.access_p
    mu = lamp * window.area
    m_far = lamp * _far_field_mean(params.alpha, window.side / 2.0) if far_field == "mean" else 0.0
    center = window.side / 2.0
    signal_scale = r ** (-params.alpha)
    theta = params.theta
    half_alpha = 0.5 * params.alpha

    successes = 0
    done = 0
    chunk = max(1, int(_chunk_points / max(mu, 1.0)))
    while done < trials:
        m = min(chunk, trials - done)
        if mu > 0.0:
            counts = rng.poisson(mu, m)
            total = int(counts.sum())
            xs = rng.uniform(0.0, window.side, total)
            ys = rng.uniform(0.0, window.side, total)
            dx = xs - center
            dy = ys - center
            d2 = dx * dx + dy * dy
            h = rng.standard_exponential(total)
            with np.errstate(divide="ignore"):
                w = h * d2 ** (-half_alpha)
            trial_id = np.repeat(np.arange(m), counts)
            interference = np.bincount(trial_id, weights=w, minlength=m)
        else:
            interference = np.zeros(m)
        h_sig = rng.standard_exponential(m)
        successes += int(np.count_nonzero(h_sig * signal_scale > theta * (interference + m_far)))
        done += m

    lo, hi = wilson_interval(successes, trials)
    return SuccessEstimate(successes / trials, lo, hi, trials)
