"""Space-filling designs: maximin Latin hypercubes over [-1, 1]^p."""

from __future__ import annotations

import numpy as np
from scipy.stats import qmc


def min_pairwise_distance(X) -> float:
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        return np.inf
    d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    return float(np.sqrt(d2.min()))


def maximin_lhc(n, p, seed, restarts=20) -> np.ndarray:
    """Latin hypercube on [-1,1]^p keeping the best of ``restarts`` draws."""
    rng = np.random.default_rng(seed)
    best, best_score = None, -np.inf
    for _ in range(max(1, restarts)):
        sampler = qmc.LatinHypercube(d=p, seed=rng)
        X = 2.0 * sampler.random(n) - 1.0
        score = min_pairwise_distance(X)
        if score > best_score:
            best, best_score = X, score
    return best


def greedy_maximin_subset(X, k) -> np.ndarray:
    """Indices of a k-subset chosen greedily for large minimum distance.

    Starts from the farthest pair, then repeatedly adds the candidate whose
    distance to the chosen set is largest (ties resolved by lowest index).
    """
    X = np.asarray(X, dtype=float)
    m = X.shape[0]
    if k > m:
        raise ValueError(f"cannot thin {m} candidates to {k}")
    if k == m:
        return np.arange(m)
    if k == 1:
        return np.array([0])
    d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    iu = np.triu_indices(m, 1)
    start = int(np.argmax(d2[iu]))
    chosen = [int(iu[0][start]), int(iu[1][start])]
    dist_to_chosen = np.minimum(d2[:, chosen[0]], d2[:, chosen[1]])
    dist_to_chosen[chosen] = -np.inf
    while len(chosen) < k:
        nxt = int(np.argmax(dist_to_chosen))
        chosen.append(nxt)
        dist_to_chosen = np.minimum(dist_to_chosen, d2[:, nxt])
        dist_to_chosen[nxt] = -np.inf
    return np.array(sorted(chosen))
