"""Pure-NumPy implementations of the hot kernels.

Drop-in equivalents of the compiled extension, selected at import time when
the extension is unavailable or ``TUPLELEARN_PURE=1``. Outputs agree with
the native kernels to floating-point rounding (summation order differs).
"""

from __future__ import annotations

import numpy as np


def ranking_weights(dists: np.ndarray, mu: float, perms: np.ndarray) -> np.ndarray:
    """Unnormalized adjacent-pair product weight for every permutation.

    ``dists`` holds raw (unsquared) distances for the body items; ``perms``
    is an (n_perms, n_body) index table. Returns positive weights.
    """
    d2 = np.asarray(dists, dtype=np.float64) ** 2
    lead = d2[perms[:, :-1]]
    trail = d2[perms[:, 1:]]
    return np.prod((trail + mu) / (lead + trail + 2.0 * mu), axis=1)


def mi_from_samples(samples: np.ndarray, mu: float, perms: np.ndarray) -> float:
    """Entropy of the sample-averaged ranking pmf minus the average entropy.

    ``samples`` is (n_samples, n_body) of raw distances; the result is in
    nats and nonnegative up to rounding.
    """
    d2 = np.asarray(samples, dtype=np.float64) ** 2
    lead = d2[:, perms[:, :-1]]
    trail = d2[:, perms[:, 1:]]
    weights = np.prod((trail + mu) / (lead + trail + 2.0 * mu), axis=2)
    pmf = weights / weights.sum(axis=1, keepdims=True)
    entropies = -(pmf * np.log(pmf)).sum(axis=1)
    mean_pmf = pmf.sum(axis=0) / pmf.shape[0]
    h_of_mean = float(-(mean_pmf * np.log(mean_pmf)).sum())
    return h_of_mean - float(entropies.sum() / entropies.shape[0])


def loss_and_grad(
    k: np.ndarray, triplets: np.ndarray, mu: float, want_grad: bool = True
) -> tuple[float, np.ndarray | None]:
    """Total negative log-likelihood of triplet rows (head, closer, farther) under ``k``.

    Squared distances are read off the matrix as
    d2(i, j) = k_ii + k_jj - k_ij - k_ji, so the gradient is symmetric by
    construction. Returns ``(loss, grad)`` with ``grad`` None when not
    requested.
    """
    k = np.asarray(k, dtype=np.float64)
    t = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    n = k.shape[0]
    if t.shape[0] == 0:
        return 0.0, (np.zeros((n, n)) if want_grad else None)
    a, c, f = t[:, 0], t[:, 1], t[:, 2]
    diag = np.diagonal(k)
    d2c = diag[a] + diag[c] - k[a, c] - k[c, a]
    d2f = diag[a] + diag[f] - k[a, f] - k[f, a]
    den = d2c + d2f + 2.0 * mu
    num = d2f + mu
    loss = float(np.sum(np.log(den) - np.log(num)))
    if not want_grad:
        return loss, None
    gc = 1.0 / den
    gf = 1.0 / den - 1.0 / num
    grad = np.zeros((n, n), dtype=np.float64)
    np.add.at(grad, (a, a), gc + gf)
    np.add.at(grad, (c, c), gc)
    np.add.at(grad, (f, f), gf)
    np.add.at(grad, (a, c), -gc)
    np.add.at(grad, (c, a), -gc)
    np.add.at(grad, (a, f), -gf)
    np.add.at(grad, (f, a), -gf)
    return loss, grad
