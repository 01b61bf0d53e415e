"""Independent reference computations shared by the unit and acceptance tests."""
import itertools

import numpy as np
import scipy.stats as sps


def brute_wilcoxon_p(d):
    """Two-sided signed-rank p by listing all 2^n sign assignments."""
    d = np.asarray([v for v in d if v != 0.0], dtype=float)
    ranks = sps.rankdata(np.abs(d))
    observed = min(ranks[d > 0].sum(), ranks[d < 0].sum())
    hits = 0
    for signs in itertools.product((0, 1), repeat=d.size):
        if float(np.dot(signs, ranks)) <= observed + 1e-9:
            hits += 1
    return min(1.0, 2.0 * hits / 2 ** d.size)


def permutation_posthoc_p(m, n_perm, rng):
    """Two-sided p of every |R_i - R_j| by shuffling each row independently.

    Returns ``{(i, j): p}``.
    """
    ranks = np.vstack([sps.rankdata(r) for r in m])
    keys = rng.random((n_perm, *ranks.shape))
    perm = np.take_along_axis(np.broadcast_to(ranks, keys.shape), np.argsort(keys, axis=2), axis=2)
    sums = perm.sum(axis=1)
    observed = ranks.sum(axis=0)
    out = {}
    for i, j in itertools.combinations(range(ranks.shape[1]), 2):
        obs = abs(observed[i] - observed[j])
        out[(i, j)] = float(np.mean(np.abs(sums[:, i] - sums[:, j]) >= obs - 1e-9))
    return out


def constant_torque_closed_form(tau_mnm, t, j, b):
    """Rotor from rest under constant torque: (angle deg, velocity dps)."""
    tau = tau_mnm * 1e-3
    a = b / j
    w = tau / b * (1 - np.exp(-a * t))
    theta = tau / b * (t - (1 - np.exp(-a * t)) / a)
    return np.degrees(theta), np.degrees(w)


def kettle_trace_oracle(tilts, params):
    """Kettle outcome name and step count from a cumulative sum of the flow."""
    low, high = params.target_band
    flow = params.flow_gain * np.maximum(0.0, np.asarray(tilts) - params.tilt_threshold_deg)
    fill = np.cumsum(flow * params.dt_s)
    n_limit = int(round(params.time_limit_s / params.dt_s))
    over = np.flatnonzero(fill[:n_limit] > high)
    if over.size:
        return "Overfilled", int(over[0]) + 1
    return ("Underfilled" if fill[n_limit - 1] < low else "Success"), n_limit


def door_reachable_without_deadbolt(transition, states, events, start, goal, gate, max_len):
    """Whether ``goal`` is reachable by some event sequence of length <= max_len
    that never visits ``gate``.

    Tracks the set of (state, gate_seen) pairs reached after each length,
    which covers every sequence of that length exactly.
    """
    frontier = {(start, start is gate)}
    for _ in range(max_len):
        frontier = {(nxt := transition(s, e), seen or nxt is gate) for s, seen in frontier for e in events}
        if (goal, False) in frontier:
            return True
    return False
