"""Factor-recovery error metrics.

The mean squared factor error is sum_d ||truth_d - F_d||_F^2 divided by
R*(N1+N2+N3).  CP models are invariant to a shared column permutation, so
the aligned variant first picks the permutation of the estimate's columns
minimizing that error: exactly (enumeration) for rank <= EXACT_ALIGN_MAX,
greedily on cosine similarity of the vertically stacked factors above it.
"""

import itertools

import numpy as np

from .tensor import FactorSet

EXACT_ALIGN_MAX = 8


def _check_pair(fset, truth):
    if not isinstance(fset, FactorSet):
        fset = FactorSet(tuple(fset))
    if not isinstance(truth, FactorSet):
        truth = FactorSet(tuple(truth))
    if fset.rank != truth.rank:
        raise ValueError("rank mismatch: %d vs %d" % (fset.rank, truth.rank))
    if fset.dims != truth.dims:
        raise ValueError("dims mismatch: %r vs %r" % (fset.dims, truth.dims))
    return fset, truth


def best_column_permutation(fset, truth):
    """Shared column permutation ``p`` minimizing
    sum_d ||truth_d - F_d[:, p]||_F^2.

    Exact enumeration for rank <= EXACT_ALIGN_MAX; greedy matching on the
    cosine similarity of vertically concatenated factor columns otherwise.

    Returns
    -------
    ndarray of int, shape (R,)
        Estimate column p[r] is matched to truth column r.
    """
    fset, truth = _check_pair(fset, truth)
    rank = fset.rank
    # cost[r, s] = sum_d ||truth_d[:, r] - F_d[:, s]||^2
    cost = np.zeros((rank, rank))
    for ft, fe in zip(truth.factors, fset.factors):
        diff = ft[:, :, None] - fe[:, None, :]
        cost += (diff * diff).sum(axis=0)
    if rank <= EXACT_ALIGN_MAX:
        rows = np.arange(rank)
        best, best_cost = None, np.inf
        for perm in itertools.permutations(range(rank)):
            c = cost[rows, list(perm)].sum()
            if c < best_cost:
                best, best_cost = perm, c
        return np.asarray(best, dtype=int)
    stacked_t = np.concatenate(truth.factors, axis=0)
    stacked_e = np.concatenate(fset.factors, axis=0)
    nt = np.linalg.norm(stacked_t, axis=0)
    ne = np.linalg.norm(stacked_e, axis=0)
    sim = (stacked_t.T @ stacked_e) / np.outer(
        np.maximum(nt, 1e-300), np.maximum(ne, 1e-300)
    )
    perm = np.full(rank, -1, dtype=int)
    work = sim.copy()
    for _ in range(rank):
        r, s = np.unravel_index(np.argmax(work), work.shape)
        perm[r] = s
        work[r, :] = -np.inf
        work[:, s] = -np.inf
    return perm


def mse(fset, truth, aligned=False):
    """Mean squared factor error against the ground truth.

    Parameters
    ----------
    fset, truth : FactorSet
        Estimate and ground truth with matching rank and dims.
    aligned : bool
        Apply the best shared column permutation to the estimate first.

    Returns
    -------
    float
    """
    fset, truth = _check_pair(fset, truth)
    if aligned:
        perm = best_column_permutation(fset, truth)
        factors = tuple(f[:, perm] for f in fset.factors)
    else:
        factors = fset.factors
    total = 0.0
    for ft, fe in zip(truth.factors, factors):
        diff = ft - fe
        total += float(np.vdot(diff, diff))
    return total / (fset.rank * sum(fset.dims))
