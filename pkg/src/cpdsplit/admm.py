"""Alternating optimization with an ADMM inner solver, the comparison
baseline.

The outer loop matches the primal-dual driver; the per-mode subproblem is
solved in scaled form with a Cholesky factorization of (W^T W + rho I)
computed once per mode visit and reused by every inner iteration.  The
auxiliary variable Z absorbs both the regularizer and the hard constraint,
which restricts this solver to separable regularizers composed with the
identity: structured operators and masked data are rejected, that is the
gap the primal-dual solver exists to fill.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .driver import FitResult, _StopRule, _prepare, _trace_entry, init_factors
from .operators import project, prox_apply
from .tensor import FactorSet, khatri_rao, matricize

_SUPPORTED_PROX = ("zero", "l1", "squared_frobenius")


class UnsupportedSpecError(ValueError):
    """Mode spec outside this baseline's closed-form support."""


@dataclass
class AdmmState:
    """Warm-startable scaled-form state: primal F, feasible auxiliary Z,
    scaled dual U (all R x N_d), penalty rho, and a factorization counter."""

    F: np.ndarray
    Z: np.ndarray
    U: np.ndarray
    rho: float
    n_factorizations: int = 0


def check_supported(spec):
    """Reject mode specs without a closed-form composite prox."""
    if spec.operator is not None and spec.operator.kind != "identity":
        raise UnsupportedSpecError(
            "operator kind %r has no closed-form composite prox here; "
            "use the primal-dual solver" % (spec.operator.kind,)
        )
    if spec.regularizer.kind not in _SUPPORTED_PROX:
        raise UnsupportedSpecError(
            "regularizer kind %r is not supported by this baseline"
            % (spec.regularizer.kind,)
        )


def _composite_prox(spec, x, rho):
    # prox of (h + indicator)/rho: interval projection after the separable
    # prox is exact for every supported pair
    return project(spec.projection, prox_apply(spec.regularizer, x, 1.0 / rho))


def solve_subproblem_admm(state, spec, W, Yd, n_inner):
    """Advance one mode's ADMM state by n_inner iterations.

    Parameters
    ----------
    state : AdmmState
    spec : ModeSpec
        Must pass :func:`check_supported`.
    W : ndarray, shape (P, R)
        Khatri-Rao product of the fixed factors (fully observed data).
    Yd : ndarray, shape (P, N)
        Matricized data.
    n_inner : int
        Iterations, at least 1.

    Returns
    -------
    AdmmState
        Z is the feasible factor estimate.
    """
    check_supported(spec)
    if n_inner < 1:
        raise ValueError("n_inner must be >= 1, got %r" % (n_inner,))
    if not state.rho > 0:
        raise ValueError("rho must be positive, got %r" % (state.rho,))
    rank = W.shape[1]
    gram = W.T @ W
    B = W.T @ Yd
    factor = cho_factor(gram + state.rho * np.eye(rank))
    F, Z, U = state.F, state.Z, state.U
    for _ in range(n_inner):
        F = cho_solve(factor, B + state.rho * (Z - U))
        Z = _composite_prox(spec, F + U, state.rho)
        U = U + F - Z
    if not (np.isfinite(F).all() and np.isfinite(Z).all() and np.isfinite(U).all()):
        raise FloatingPointError("non-finite ADMM iterate")
    return AdmmState(F, Z, U, state.rho, state.n_factorizations + 1)


def ao_admm_factorize(Y, mask, specs, cfg, truth=None, rho=None):
    """Baseline CP decomposition: the same outer loop and trace schema as
    :func:`cpdsplit.driver.factorize`, with the ADMM inner solver.

    Parameters
    ----------
    Y, mask, specs, cfg, truth : as in the primal-dual driver; the mask must
        be None or all-true, and every mode spec must pass
        :func:`check_supported`.
    rho : float, optional
        Fixed penalty; default is trace(W^T W)/R recomputed per mode visit.

    Returns
    -------
    FitResult
        counters carries the Cholesky factorization count, one per mode
        visit.
    """
    for spec in specs:
        check_supported(spec)
    if mask is not None and not np.asarray(mask).all():
        raise UnsupportedSpecError("masked data is not supported by this baseline")
    if rho is not None and not rho > 0:
        raise ValueError("rho must be positive, got %r" % (rho,))
    Y, mask, specs = _prepare(Y, mask, specs, cfg, truth)
    rank = int(cfg.rank)
    Yd = [matricize(Y, d) for d in (1, 2, 3)]
    init = init_factors(Y.shape, rank, cfg.seed)
    states = []
    for d in range(3):
        F = np.ascontiguousarray(init.factors[d].T)
        states.append(AdmmState(F=F, Z=F.copy(), U=np.zeros_like(F), rho=1.0))
    started = time.perf_counter()
    trace = []
    stop_reason = "iteration_cap"
    rule = _StopRule(cfg.stop_metric, cfg.stop_tol)
    outer = 0
    for k in range(1, int(cfg.max_outer) + 1):
        for d in range(3):
            i, j = (a for a in range(3) if a != d)
            W = khatri_rao(states[i].Z.T, states[j].Z.T)
            trace_bound = float(np.vdot(W, W))
            if trace_bound <= 0:
                raise ValueError(
                    "mode %d subproblem degenerated: the other factors have a "
                    "zero Khatri-Rao product (likely over-regularization)"
                    % (d + 1,)
                )
            states[d].rho = rho if rho is not None else trace_bound / rank
            states[d] = solve_subproblem_admm(
                states[d], specs[d], W, Yd[d], cfg.n_inner
            )
        outer = k
        fset = FactorSet(tuple(np.ascontiguousarray(s.Z.T) for s in states))
        rec = _trace_entry(k, started, Y, mask, fset, specs, truth)
        trace.append(rec)
        if rule.fired(rec.objective, rec.mse_raw):
            stop_reason = "converged"
            break
    return FitResult(
        factors=FactorSet(tuple(np.ascontiguousarray(s.Z.T) for s in states)),
        duals=[s.U for s in states],
        trace=trace,
        outer_iterations=outer,
        stop_reason=stop_reason,
        counters={
            "inner_iterations": 3 * outer * int(cfg.n_inner),
            "cholesky_factorizations": sum(s.n_factorizations for s in states),
        },
    )
