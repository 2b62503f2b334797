"""Primal-dual splitting solver for one mode's convex subproblem.

For the matricized least-squares term ½||Yd - mask*(W F)||_F^2 plus a hard
constraint C and a composed regularizer h(L(F)), each inner iteration does

    F+  := P_C(F - gamma1 * (grad(F) + L'(G)))
    G+  := G + gamma2 * L(2 F+ - F), then the conjugate-prox step of h

with the gradient A F - B (A = W'W, B = W'Yd) on the unmasked fast path and
the exact masked gradient otherwise.  The step sizes keep the primal-dual
product inside the convergence region; the dual branch is skipped entirely
when there is no regularizer.
"""

import math
from dataclasses import dataclass

import numpy as np

from .operators import linop_adjoint, linop_forward, project, prox_conjugate


@dataclass(frozen=True)
class StepSizes:
    """Primal step gamma1, dual step gamma2, and the bounds they came from."""

    gamma1: float
    gamma2: float
    trace_bound: float
    op_norm: float


@dataclass
class SubproblemState:
    """Warm-startable inner-solver state: primal F (R x N_d, the transposed
    factor) and dual G (matching the operator's output shape, or None when
    the mode has no regularizer)."""

    F: np.ndarray
    G: np.ndarray = None


def compute_stepsizes(trace_bound, op_norm):
    """Step sizes from the Lipschitz trace bound and the operator norm.

    gamma1 = 0.99 * 2 / trace_bound, and, when op_norm > 0,
    gamma2 = 1/(gamma1 * op_norm) - trace_bound/(2 * op_norm), which makes
    gamma1 * (trace_bound/2 + gamma2 * op_norm) == 1 with the 0.99 margin
    carried inside gamma1 (gamma1 * trace_bound/2 == 0.99).  With
    op_norm == 0 there is no dual variable and gamma2 = 0.

    Parameters
    ----------
    trace_bound : float
        trace(W^T W), an upper bound on the gradient's Lipschitz constant.
    op_norm : float
        Upper bound on ||L*L||; 0 when the mode has no operator.

    Returns
    -------
    StepSizes
    """
    trace_bound = float(trace_bound)
    op_norm = float(op_norm)
    if not (math.isfinite(trace_bound) and trace_bound > 0):
        raise ValueError("trace_bound must be positive, got %r" % (trace_bound,))
    if not (math.isfinite(op_norm) and op_norm >= 0):
        raise ValueError("op_norm must be nonnegative, got %r" % (op_norm,))
    gamma1 = 0.99 * 2.0 / trace_bound
    if op_norm > 0:
        gamma2 = 1.0 / (gamma1 * op_norm) - trace_bound / (2.0 * op_norm)
    else:
        gamma2 = 0.0
    return StepSizes(gamma1, gamma2, trace_bound, op_norm)


def subproblem_gradient(F, W, Yd, mask=None):
    """Gradient of ½||Yd - mask*(W F)||_F^2 with respect to F.

    Parameters
    ----------
    F : ndarray, shape (R, N)
    W : ndarray, shape (P, R)
        Khatri-Rao product of the fixed factors.
    Yd : ndarray, shape (P, N)
        Matricized data (missing entries already zero).
    mask : ndarray of bool, shape (P, N), optional
        Sampling mask in matricized form; None means fully observed.
    """
    F = np.asarray(F)
    W = np.asarray(W)
    Yd = np.asarray(Yd)
    if F.ndim != 2 or W.ndim != 2 or Yd.ndim != 2:
        raise ValueError("F, W, Yd must be 2-D")
    if W.shape[1] != F.shape[0] or Yd.shape != (W.shape[0], F.shape[1]):
        raise ValueError(
            "inconsistent shapes: W %r, F %r, Yd %r" % (W.shape, F.shape, Yd.shape)
        )
    if mask is None:
        return (W.T @ W) @ F - W.T @ Yd
    mask = np.asarray(mask)
    if mask.shape != Yd.shape:
        raise ValueError("mask shape %r != Yd shape %r" % (mask.shape, Yd.shape))
    return W.T @ (np.where(mask, W @ F, 0.0) - Yd)


def solve_subproblem(state, spec, W, Yd, mask, steps, n_inner):
    """Run exactly n_inner primal-dual iterations, warm-started from state.

    Parameters
    ----------
    state : SubproblemState
        Current (F, G); G is ignored and stays None when the mode has no
        regularizer.
    spec : ModeSpec
        Projection, regularizer, and operator for this mode.
    W, Yd, mask : arrays
        As in :func:`subproblem_gradient`.
    steps : StepSizes
    n_inner : int
        Number of iterations, at least 1.

    Returns
    -------
    SubproblemState
        Updated state; F satisfies the hard constraint exactly.
    """
    if n_inner < 1:
        raise ValueError("n_inner must be >= 1, got %r" % (n_inner,))
    F = state.F
    G = state.G
    has_dual = spec.operator is not None and spec.regularizer.kind != "zero"
    gamma1 = steps.gamma1
    gamma2 = steps.gamma2
    if mask is None:
        A = W.T @ W
    WtYd = W.T @ Yd
    for _ in range(n_inner):
        if mask is None:
            grad = A @ F - WtYd
        else:
            grad = W.T @ np.where(mask, W @ F, 0.0) - WtYd
        if has_dual:
            grad = grad + linop_adjoint(spec.operator, G)
        F_new = project(spec.projection, F - gamma1 * grad)
        if has_dual:
            G = prox_conjugate(
                spec.regularizer,
                G + gamma2 * linop_forward(spec.operator, 2.0 * F_new - F),
                gamma2,
            )
        F = F_new
    if not np.isfinite(F).all() or (G is not None and not np.isfinite(G).all()):
        raise FloatingPointError(
            "non-finite inner iterate; step sizes inconsistent with the data"
        )
    return SubproblemState(F=F, G=G)
