"""Closed-form design rules and the empirical contraction estimator.

Wraps the per-slot successful-update lower bound, the availability versus
reliability proxy and its closed-form maximizer, consensus-time bounds, and
the sampled estimate of the ideal one-step contraction factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import mac
from .channel import spatial_contention


@dataclass(frozen=True)
class ProxyCoefficients:
    """Exponent coefficients of the access-probability tradeoff.

    ``a`` scales the chance that some in-range neighbor transmits,
    ``b`` the interference penalty paid per unit of access probability.
    """

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"coefficients must be positive, got a={self.a}, b={self.b}")


def ab_coefficients(intensity, range_r, theta, alpha):
    """Coefficients (a, b) = (intensity*pi*R^2, intensity*K(R)) for range-R links.

    Their ratio b/a equals theta**(2/alpha) * C(alpha) by construction.
    """
    if not intensity > 0:
        raise ValueError(f"intensity must be positive, got {intensity}")
    if not range_r > 0:
        raise ValueError(f"range must be positive, got {range_r}")
    return ProxyCoefficients(
        a=intensity * math.pi * range_r * range_r,
        b=intensity * float(spatial_contention(range_r, theta, alpha)),
    )


def q_lower_bound(p, intensity, range_r, theta, alpha):
    """Lower bound on the chance that a typical node completes an exchange in a slot.

    Product of three factors: the node listens (1-p), at least one in-range
    neighbor transmits, and a transmission from the edge of the range
    decodes. Vanishes at both p=0 and p=1. Accepts scalar or array p.
    """
    p = np.asarray(p, dtype=float)
    if np.any((p < 0.0) | (p > 1.0)):
        raise ValueError("access probability must lie in [0, 1]")
    a = intensity * math.pi * range_r * range_r
    k = float(spatial_contention(range_r, theta, alpha))
    out = (1.0 - p) * (-np.expm1(-a * p)) * np.exp(-intensity * k * p)
    return float(out) if out.ndim == 0 else out


def optimal_access(coeffs):
    """Access probability maximizing (1 - exp(-a p)) * exp(-b p) over [0, 1].

    The unclamped maximizer log((a+b)/b) / a satisfies the stationarity
    identity exp(-a p) = b / (a + b); the result is clamped to 1.
    """
    a, b = coeffs.a, coeffs.b
    return min(1.0, math.log((a + b) / b) / a)


def optimal_access_dense(b):
    """Dense-neighborhood simplification of the optimizer: min(1, 1/b).

    For fixed range, threshold, and path-loss exponent this scales
    inversely with node density.
    """
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")
    return min(1.0, 1.0 / b)


class ConsensusTimeBound(NamedTuple):
    tight: float  # log(V0/eps) / -log(1 - gamma*q)
    loose: float  # log(V0/eps) / (gamma*q), always >= tight


def consensus_time_bound(gamma, q, v0, eps):
    """Slot counts after which the expected disagreement falls below eps.

    Both bounds follow from the per-slot contraction factor (1 - gamma*q);
    the loose form uses -log(1-x) >= x, so tight <= loose always.
    """
    gq = gamma * q
    if not 0.0 < gq < 1.0:
        raise ValueError(f"gamma*q must lie in (0, 1), got {gq}")
    if not 0.0 < eps < v0:
        raise ValueError(f"need 0 < eps < V0, got eps={eps}, V0={v0}")
    lv = math.log(v0 / eps)
    return ConsensusTimeBound(tight=lv / -math.log1p(-gq), loose=lv / gq)


@dataclass(frozen=True)
class ContractionEstimate:
    """Sampled ideal one-step contraction: rho, its gap gamma = 1 - rho, and
    a delta-method standard error along the leading eigenvector."""

    rho: float
    gamma: float
    samples: int
    stderr: float


def estimate_rho(deployment, params, samples, rng):
    """Largest disagreement-mode eigenvalue of the mean ideal update form.

    Draws i.i.d. exchange sets from the slot process with every scheduled
    exchange succeeding, averages the per-slot quadratic form W' Pi W (for
    matching updates this equals W - 11'/n exactly, by idempotence and
    double stochasticity), and eigensolves with the all-ones direction
    projected out. The standard error freezes the leading eigenvector and
    takes the sample spread of the per-slot quadratic form along it.
    """
    n = deployment.n
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")

    lap = np.zeros((n, n))
    matchings = []
    for _ in range(samples):
        pairs = mac.sample_matching(deployment, params.access_p, rng)
        matchings.append(pairs)
        if pairs.size:
            a, b = pairs[:, 0], pairs[:, 1]
            np.add.at(lap, (a, a), 1.0)
            np.add.at(lap, (b, b), 1.0)
            np.add.at(lap, (a, b), -1.0)
            np.add.at(lap, (b, a), -1.0)

    mean_w = np.eye(n) - 0.5 * lap / samples
    h = mean_w - 1.0 / n               # mean of W' Pi W across the samples
    proj = np.eye(n) - 1.0 / n
    sym = proj @ (0.5 * (h + h.T)) @ proj
    evals, evecs = np.linalg.eigh(sym)
    rho = float(min(1.0, max(0.0, evals[-1])))
    v = evecs[:, -1]

    per_sample = np.empty(samples)
    base = float(v @ v) - float(v.sum()) ** 2 / n
    for k, pairs in enumerate(matchings):
        if pairs.size:
            dv = v[pairs[:, 0]] - v[pairs[:, 1]]
            per_sample[k] = base - 0.5 * float(dv @ dv)
        else:
            per_sample[k] = base
    stderr = float(per_sample.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return ContractionEstimate(rho=rho, gamma=1.0 - rho, samples=samples, stderr=stderr)
