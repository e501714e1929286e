"""Slotted-Aloha medium access and per-slot exchange resolution.

Each slot: every node transmits independently with probability ``access_p``
(half-duplex, so transmitters cannot listen), every listening node picks one
transmitting neighbor uniformly at random, and the resulting picks are
thinned to a node-disjoint matching by greedy conflict resolution in a
uniformly random order. Matched pairs then decode either analytically (the
closed-form reception probability at the realized link distance) or by
drawing the exact SIR against all active transmitters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .channel import interference_constant

MODES = ("analytic", "exact_sir")
DECODE_ORDERS = ("match_first", "decode_first")


@dataclass(frozen=True)
class SlotOutcome:
    """Everything one slot produced: who talked, who picked whom, which pairs
    formed, and which of those decoded."""

    transmitters: np.ndarray  # sorted node indices
    candidates: np.ndarray    # (k, 2) [listener, transmitter] picks
    matching: np.ndarray      # (m, 2) node-disjoint subset of the candidates
    successes: np.ndarray     # (s, 2) matched pairs that decoded

    def to_record(self, slot):
        """JSON-serializable debug record for line-delimited dumps."""
        return {
            "slot": int(slot),
            "transmitters": self.transmitters.tolist(),
            "matching": self.matching.tolist(),
            "successes": self.successes.tolist(),
        }


def dump_outcomes(outcomes, stream, start_slot=0):
    """Write one JSON object per line for a sequence of slot outcomes."""
    for k, outcome in enumerate(outcomes, start=start_slot):
        stream.write(json.dumps(outcome.to_record(k), separators=(",", ":")) + "\n")


def aloha_thinning(n, access_p, rng):
    """Indices of the nodes that transmit: each included independently with
    probability access_p."""
    if not 0.0 <= access_p <= 1.0:
        raise ValueError(f"access probability must be in [0, 1], got {access_p}")
    return np.flatnonzero(rng.random(n) < access_p)


def select_candidate(listener, deployment, transmitters, rng):
    """Uniform pick among the listener's transmitting neighbors, or None.

    The listener must itself be silent (half-duplex).
    """
    tx_mask = np.zeros(deployment.n, dtype=bool)
    tx_mask[np.asarray(transmitters, dtype=np.int64)] = True
    if tx_mask[listener]:
        raise ValueError(f"node {listener} is transmitting and cannot listen")
    nbrs = deployment.neighbors(listener)
    talking = nbrs[tx_mask[nbrs]]
    if talking.size == 0:
        return None
    return int(talking[rng.integers(talking.size)])


def _greedy_accept(listeners, txs, order, n):
    """Greedy matching: walk the candidates in ``order`` and accept a pair iff
    neither endpoint is matched yet. Returns a keep-mask aligned with the input."""
    used = np.zeros(n, dtype=bool)
    keep = np.zeros(listeners.shape[0], dtype=bool)
    for idx in order:
        i = listeners[idx]
        j = txs[idx]
        if not used[i] and not used[j]:
            used[i] = True
            used[j] = True
            keep[idx] = True
    return keep


def resolve_matching(candidates, rng):
    """Thin (listener, transmitter) picks to a node-disjoint matching.

    Candidates are processed in a uniformly random order and accepted
    greedily; each listener may appear at most once in the input. Returns
    the accepted pairs in acceptance order.
    """
    pairs = np.asarray(list(candidates), dtype=np.int64).reshape(-1, 2)
    if pairs.shape[0] == 0:
        return []
    if np.unique(pairs[:, 0]).size != pairs.shape[0]:
        raise ValueError("each listener may appear at most once in the candidate list")
    order = rng.permutation(pairs.shape[0])
    keep = _greedy_accept(pairs[:, 0], pairs[:, 1], order, int(pairs.max()) + 1)
    return [(int(pairs[i, 0]), int(pairs[i, 1])) for i in order if keep[i]]


def _draw_candidates(deployment, tx_mask, rng):
    """Vectorized per-listener pick: every listening node with at least one
    transmitting neighbor selects one uniformly at random.

    Implemented by giving each (listener, transmitting neighbor) entry an
    i.i.d. uniform key and keeping the per-listener argmax, which is an
    exactly uniform choice. Returns (listeners, transmitters, distances).
    """
    empty = np.zeros(0, dtype=np.int64)
    if deployment.indices.size == 0 or not tx_mask.any():
        return empty, empty, np.zeros(0)
    valid = tx_mask[deployment.indices] & ~tx_mask[deployment.entry_src]
    if not valid.any():
        return empty, empty, np.zeros(0)
    keys = np.where(valid, rng.random(valid.size), -1.0)
    best = np.full(deployment.n, -1.0)
    np.maximum.at(best, deployment.entry_src, keys)
    sel = np.flatnonzero(valid & (keys == best[deployment.entry_src]))
    src = deployment.entry_src[sel]
    if np.unique(src).size != src.size:
        # duplicate keys within one listener (vanishingly rare): keep the first
        _, first = np.unique(src, return_index=True)
        sel = sel[np.sort(first)]
        src = deployment.entry_src[sel]
    return src, deployment.indices[sel], deployment.entry_dist[sel]


def _pairs(a, b):
    if a.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.stack([a, b], axis=1)


def _decode(deployment, params, mode, rng, tx_mask, listeners, txs, dists):
    """Per-pair decode indicators for (listener, transmitter) links."""
    m = listeners.shape[0]
    if m == 0:
        return np.zeros(0, dtype=bool)
    if mode == "analytic":
        coef = math.pi * params.theta ** (2.0 / params.alpha) * interference_constant(params.alpha)
        p_succ = np.exp(-params.intensity * params.access_p * coef * dists * dists)
        return rng.random(m) < p_succ

    # exact_sir: realized SIR against every active transmitter, fresh fading per link
    tx_idx = np.flatnonzero(tx_mask)
    diff = np.abs(deployment.positions[tx_idx][None, :, :]
                  - deployment.positions[listeners][:, None, :])
    if deployment.window.boundary == "torus":
        diff = np.minimum(diff, deployment.window.side - diff)
    d2 = (diff * diff).sum(axis=-1)
    gains = rng.standard_exponential(d2.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        power = gains * d2 ** (-0.5 * params.alpha)
    col_of = np.empty(deployment.n, dtype=np.int64)
    col_of[tx_idx] = np.arange(tx_idx.size)
    cols = col_of[txs]
    rows = np.arange(m)
    desired = power[rows, cols].copy()
    power[rows, cols] = 0.0
    interference = power.sum(axis=1)
    with np.errstate(invalid="ignore"):
        ok = desired > params.theta * interference
    ok |= d2[rows, cols] == 0.0  # zero-length link decodes by convention
    return ok


def simulate_slot(deployment, params, mode, rng, decode_order="match_first"):
    """Run one slot end to end and return its SlotOutcome.

    decode_order picks the variant: "match_first" resolves the matching and
    then decides decoding for the matched pairs only (default);
    "decode_first" decides decoding for every candidate pick and resolves
    the matching among the survivors.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if decode_order not in DECODE_ORDERS:
        raise ValueError(f"decode_order must be one of {DECODE_ORDERS}, got {decode_order!r}")

    tx_mask = np.zeros(deployment.n, dtype=bool)
    tx_mask[aloha_thinning(deployment.n, params.access_p, rng)] = True
    listeners, txs, dists = _draw_candidates(deployment, tx_mask, rng)

    if decode_order == "match_first":
        order = rng.permutation(listeners.shape[0])
        keep = _greedy_accept(listeners, txs, order, deployment.n)
        m_l, m_t, m_d = listeners[keep], txs[keep], dists[keep]
        ok = _decode(deployment, params, mode, rng, tx_mask, m_l, m_t, m_d)
        matching = _pairs(m_l, m_t)
        successes = _pairs(m_l[ok], m_t[ok])
    else:
        ok = _decode(deployment, params, mode, rng, tx_mask, listeners, txs, dists)
        s_l, s_t = listeners[ok], txs[ok]
        order = rng.permutation(s_l.shape[0])
        keep = _greedy_accept(s_l, s_t, order, deployment.n)
        matching = _pairs(s_l[keep], s_t[keep])
        successes = matching

    return SlotOutcome(
        transmitters=np.flatnonzero(tx_mask),
        candidates=_pairs(listeners, txs),
        matching=matching,
        successes=successes,
    )


def sample_matching(deployment, access_p, rng):
    """One slot's exchange set when every scheduled exchange succeeds.

    This is the matching distribution of the idealized (decode-free) slot
    process; it is what the contraction estimator averages over.
    """
    tx_mask = np.zeros(deployment.n, dtype=bool)
    tx_mask[aloha_thinning(deployment.n, access_p, rng)] = True
    listeners, txs, _ = _draw_candidates(deployment, tx_mask, rng)
    order = rng.permutation(listeners.shape[0])
    keep = _greedy_accept(listeners, txs, order, deployment.n)
    return _pairs(listeners[keep], txs[keep])
