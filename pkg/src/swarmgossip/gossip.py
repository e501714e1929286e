"""Average-preserving pairwise gossip dynamics.

Matched pairs replace their scalar states by the pair average, which keeps
the global mean fixed and never increases the disagreement energy
(the squared distance to consensus).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import mac


class DegenerateStartError(ValueError):
    """Initial state already at consensus (zero disagreement energy)."""


def _checked_pairs(matching, n):
    pairs = np.asarray(matching, dtype=np.int64).reshape(-1, 2)
    if pairs.size:
        flat = pairs.ravel()
        if flat.min() < 0 or flat.max() >= n:
            raise ValueError("matching references nodes outside the state vector")
        if np.unique(flat).size != flat.size:
            raise ValueError("matching pairs must be node-disjoint")
    return pairs


def apply_matching(x, matching):
    """Replace every matched pair by its average; other entries pass through."""
    x = np.asarray(x, dtype=float)
    out = x.copy()
    pairs = _checked_pairs(matching, x.size)
    if pairs.size:
        avg = 0.5 * (out[pairs[:, 0]] + out[pairs[:, 1]])
        out[pairs[:, 0]] = avg
        out[pairs[:, 1]] = avg
    return out


def update_matrix(matching, n):
    """Dense linear form of one gossip step.

    The returned matrix is symmetric, doubly stochastic, and idempotent, and
    multiplying it with a state vector reproduces apply_matching.
    """
    w = np.eye(n)
    pairs = _checked_pairs(matching, n)
    if pairs.size:
        a, b = pairs[:, 0], pairs[:, 1]
        w[a, a] = 0.5
        w[b, b] = 0.5
        w[a, b] = 0.5
        w[b, a] = 0.5
    return w


def disagreement_energy(x):
    """Squared distance to consensus: sum((x - mean(x))**2)."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("state vector must be non-empty")
    d = x - x.mean()
    return float(d @ d)


@dataclass
class Trajectory:
    """Disagreement-energy record of one simulated run."""

    v_series: np.ndarray      # V(0..T)
    epsilon_t: float          # V(T) / V(0), the achieved contraction
    x_final: np.ndarray
    outcomes: list | None = None


def run_trajectory(deployment, params, mode, horizon, rng, init=None,
                   decode_order="match_first", keep_outcomes=False):
    """Iterate slots for a fixed horizon, averaging the successful exchanges.

    ``init`` may be a state vector, a callable ``(n, rng) -> vector``, or
    None for i.i.d. uniform [0, 1) states. The initial state must not
    already be at consensus. Failed exchanges leave both endpoints
    untouched, so V(t) stays flat on slots without successful pairs.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    n = deployment.n
    if init is None:
        x = rng.uniform(0.0, 1.0, n)
    elif callable(init):
        x = np.asarray(init(n, rng), dtype=float)
    else:
        x = np.array(init, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"initial state must have shape ({n},), got {x.shape}")

    v = np.empty(horizon + 1)
    v[0] = disagreement_energy(x)
    if v[0] == 0.0:
        raise DegenerateStartError("initial state has zero disagreement energy")

    outcomes = [] if keep_outcomes else None
    for t in range(1, horizon + 1):
        outcome = mac.simulate_slot(deployment, params, mode, rng, decode_order)
        x = apply_matching(x, outcome.successes)
        v[t] = disagreement_energy(x)
        if outcomes is not None:
            outcomes.append(outcome)
    return Trajectory(v_series=v, epsilon_t=float(v[-1] / v[0]), x_final=x,
                      outcomes=outcomes)


def write_trajectory_csv(trajectory, stream):
    """Dump the V(t) series as CSV with columns slot,V."""
    stream.write("slot,V\n")
    for t, val in enumerate(trajectory.v_series):
        stream.write(f"{t},{float(val)!r}\n")
