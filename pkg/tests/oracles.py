"""Reference computations that share no code with the package.

Everything here works from plain dicts and the edge-by-node incidence
matrix, and solves least squares with a dense pseudoinverse.
"""

from itertools import combinations

import numpy as np


def incidence_system(nodes, weights):
    """``weights`` maps (a, b) -> Y_ab.  Returns (B, y) with rows e_a - e_b."""
    idx = {n: k for k, n in enumerate(nodes)}
    B = np.zeros((len(weights), len(nodes)))
    y = np.zeros(len(weights))
    for r, ((a, b), v) in enumerate(sorted(weights.items())):
        B[r, idx[a]] = 1.0
        B[r, idx[b]] = -1.0
        y[r] = v
    return B, y


def pinv_scores(nodes, weights):
    """Minimum-norm least-squares solution: sum zero per component, zero on isolated nodes."""
    if not weights:
        return dict.fromkeys(nodes, 0.0)
    B, y = incidence_system(nodes, weights)
    s = np.linalg.pinv(B) @ y
    return dict(zip(nodes, s.tolist()))


def objective(nodes, weights, s):
    return sum(((s[a] - s[b]) - v) ** 2 for (a, b), v in weights.items())


def pinv_cycle_ratio(nodes, weights):
    s = pinv_scores(nodes, weights)
    total = sum(v * v for v in weights.values())
    if total == 0:
        return 0.0
    return objective(nodes, weights, s) / total


def fd_gradient(nodes, weights, s, h=1e-6):
    """Central finite differences of the least-squares objective."""
    grad = {}
    for n in nodes:
        up, dn = dict(s), dict(s)
        up[n] += h
        dn[n] -= h
        grad[n] = (objective(nodes, weights, up) - objective(nodes, weights, dn)) / (2 * h)
    return grad


def mean_weights(orderings, exclude=None):
    """``orderings`` maps ranker -> list lowest-first.  Returns {(a, b): Y_ab} with a < b."""
    votes = {}
    for ranker, order in orderings.items():
        if ranker == exclude:
            continue
        for p, q in combinations(range(len(order)), 2):
            lo, hi = order[p], order[q]
            a, b = sorted((lo, hi))
            votes.setdefault((a, b), []).append(1 if hi == a else -1)
    return {k: float(np.mean(v)) for k, v in votes.items()}


def loo_scores(nodes, orderings):
    """Leave-one-out scores by brute force; unscored nodes map to None."""
    out = {}
    for n in nodes:
        w = mean_weights(orderings, exclude=n)
        touched = {x for pair in w for x in pair}
        out[n] = pinv_scores(nodes, w)[n] if n in touched else None
    return out
