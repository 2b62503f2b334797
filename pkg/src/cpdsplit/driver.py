"""Alternating optimization over the three modes with the primal-dual
inner solver.

Each outer iteration visits modes 1..3 in order.  A visit rebuilds the
Khatri-Rao product W of the other two factors (ascending mode order), the
trace bound trace(W^T W), and the step sizes, then advances the mode's
warm-started inner state by a fixed number of primal-dual iterations.  One
trace row (wall-clock seconds, objective, factor MSE when the ground truth
is known) is recorded per outer iteration.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import pds
from .metrics import mse
from .operators import (
    LinOp,
    ProxFn,
    Projection,
    estimate_norm,
    linop_forward,
    linop_output_cols,
    prox_value,
)
from .tensor import (
    FactorSet,
    apply_mask,
    cp_reconstruct,
    frobenius_norm_sq,
    khatri_rao,
    matricize,
)

STOP_METRICS = ("mse_vs_truth", "objective_rel_change")
_REL_EPS = 1e-12


@dataclass(frozen=True)
class ModeSpec:
    """Constraint set, regularizer, and composing operator for one mode.

    The operator is present exactly when the regularizer is nontrivial.
    """

    projection: Projection = Projection("none")
    regularizer: ProxFn = ProxFn("zero")
    operator: LinOp = None

    def __post_init__(self):
        if self.regularizer.kind == "zero":
            if self.operator is not None:
                raise ValueError("operator given but the regularizer is zero")
        elif self.operator is None:
            raise ValueError(
                "regularizer %r needs an operator (use identity_op())"
                % (self.regularizer.kind,)
            )


@dataclass(frozen=True)
class DriverConfig:
    rank: int
    n_inner: int = 5
    max_outer: int = 1000
    stop_tol: float = 1e-5
    stop_metric: str = "mse_vs_truth"
    seed: int = 0

    def __post_init__(self):
        if int(self.rank) < 1:
            raise ValueError("rank must be >= 1, got %r" % (self.rank,))
        if int(self.n_inner) < 1:
            raise ValueError("n_inner must be >= 1, got %r" % (self.n_inner,))
        if int(self.max_outer) < 1:
            raise ValueError("max_outer must be >= 1, got %r" % (self.max_outer,))
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be positive, got %r" % (self.stop_tol,))
        if self.stop_metric not in STOP_METRICS:
            raise ValueError(
                "stop_metric must be one of %r, got %r"
                % (STOP_METRICS, self.stop_metric)
            )


@dataclass
class TraceRecord:
    outer_iter: int
    elapsed_sec: float
    objective: float
    mse_raw: float = None
    mse_aligned: float = None


@dataclass
class FitResult:
    factors: FactorSet
    duals: list
    trace: list
    outer_iterations: int
    stop_reason: str
    counters: dict = field(default_factory=dict)


def objective(Y, mask, fset, specs):
    """½||Y - mask*reconstruction||_F^2 plus the weighted regularizers
    h_d(L_d(F_d^T)); indicator terms of the hard constraints excluded."""
    recon = cp_reconstruct(fset)
    if recon.shape != np.shape(Y):
        raise ValueError(
            "factor dims %r do not match data shape %r"
            % (recon.shape, np.shape(Y))
        )
    if mask is not None:
        recon = apply_mask(recon, mask)
    value = 0.5 * frobenius_norm_sq(Y - recon)
    for d, spec in enumerate(specs):
        if spec.regularizer.kind == "zero":
            continue
        ft = np.ascontiguousarray(fset.factors[d].T)
        value += prox_value(spec.regularizer, linop_forward(spec.operator, ft))
    return value


def init_factors(dims, rank, seed):
    """Uniform(0,1) factor matrices from a seeded generator, drawn in mode
    order; every entry is feasible for the nonnegativity constraint."""
    if rank < 1:
        raise ValueError("rank must be >= 1, got %r" % (rank,))
    rng = np.random.default_rng(seed)
    return FactorSet(tuple(rng.random((int(n), int(rank))) for n in dims))


class _StopRule:
    """Tracks the stopping metric across outer iterations.

    mse_vs_truth fires on |MSE_k - MSE_{k-1}| < tol (raw MSE: cheap and
    permutation-stable between consecutive iterates); objective_rel_change
    fires on |obj_k - obj_{k-1}| / max(obj_{k-1}, eps) < tol.
    """

    def __init__(self, metric, tol):
        self.metric = metric
        self.tol = tol
        self.prev = None

    def fired(self, objective_value, mse_raw):
        value = mse_raw if self.metric == "mse_vs_truth" else objective_value
        stop = False
        if self.prev is not None:
            if self.metric == "mse_vs_truth":
                stop = abs(value - self.prev) < self.tol
            else:
                stop = abs(value - self.prev) / max(self.prev, _REL_EPS) < self.tol
        self.prev = value
        return stop


def _bind_operator(spec, n_d, d):
    """Fill in / check the operator's declared width against the mode size."""
    if spec.operator is None:
        return spec
    op = spec.operator
    if op.n_cols is None:
        op = LinOp(op.kind, n_d, op.groups)
        return replace(spec, operator=op)
    if op.n_cols != n_d:
        raise ValueError(
            "mode %d operator declares %d columns but the mode has size %d"
            % (d + 1, op.n_cols, n_d)
        )
    return spec


def _prepare(Y, mask, specs, cfg, truth):
    Y = np.asarray(Y)
    if Y.ndim != 3:
        raise ValueError("Y must be a third-order tensor, got ndim=%d" % Y.ndim)
    if not np.isfinite(Y).all():
        raise ValueError("Y contains non-finite values")
    if len(specs) != 3:
        raise ValueError("exactly three mode specs required")
    specs = tuple(_bind_operator(s, Y.shape[d], d) for d, s in enumerate(specs))
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape != Y.shape or mask.dtype != np.bool_:
            raise ValueError("mask must be a boolean array of the data's shape")
        if mask.all():
            mask = None
    if truth is not None:
        if truth.rank != cfg.rank:
            raise ValueError(
                "truth rank %d != configured rank %d" % (truth.rank, cfg.rank)
            )
        if truth.dims != Y.shape:
            raise ValueError(
                "truth dims %r != data shape %r" % (truth.dims, Y.shape)
            )
    if cfg.stop_metric == "mse_vs_truth" and truth is None:
        raise ValueError("stop_metric 'mse_vs_truth' requires ground-truth factors")
    return Y, mask, specs


def _factors_from(states):
    return FactorSet(tuple(np.ascontiguousarray(s.F.T) for s in states))


def _trace_entry(k, started, Y, mask, fset, specs, truth):
    obj = objective(Y, mask, fset, specs)
    if not np.isfinite(obj):
        raise FloatingPointError("objective became non-finite at iteration %d" % k)
    raw = aligned = None
    if truth is not None:
        raw = mse(fset, truth, aligned=False)
        aligned = mse(fset, truth, aligned=True)
    return TraceRecord(k, time.perf_counter() - started, obj, raw, aligned)


def factorize(Y, mask, specs, cfg, truth=None):
    """Constrained CP decomposition by alternating optimization with the
    primal-dual inner solver.

    Parameters
    ----------
    Y : ndarray, shape (N1, N2, N3)
        Data tensor; missing entries must already be zeroed.
    mask : ndarray of bool or None
        Sampling mask; None or all-true means fully observed.
    specs : sequence of three ModeSpec
    cfg : DriverConfig
    truth : FactorSet, optional
        Ground-truth factors; required for the mse_vs_truth stopping rule
        and for the MSE trace columns.

    Returns
    -------
    FitResult
        Final factors (hard constraints hold exactly), final duals, the
        per-outer-iteration trace, and the stop reason ('converged' or
        'iteration_cap').
    """
    Y, mask, specs = _prepare(Y, mask, specs, cfg, truth)
    dims = Y.shape
    rank = int(cfg.rank)
    Yd = [matricize(Y, d) for d in (1, 2, 3)]
    Md = [matricize(mask, d) for d in (1, 2, 3)] if mask is not None else [None] * 3
    op_norms = []
    states = []
    init = init_factors(dims, rank, cfg.seed)
    for d, spec in enumerate(specs):
        has_dual = spec.regularizer.kind != "zero"
        op_norms.append(estimate_norm(spec.operator) if has_dual else 0.0)
        dual = np.zeros((rank, linop_output_cols(spec.operator))) if has_dual else None
        states.append(
            pds.SubproblemState(F=np.ascontiguousarray(init.factors[d].T), G=dual)
        )
    started = time.perf_counter()
    trace = []
    stop_reason = "iteration_cap"
    rule = _StopRule(cfg.stop_metric, cfg.stop_tol)
    outer = 0
    for k in range(1, int(cfg.max_outer) + 1):
        for d in range(3):
            i, j = (a for a in range(3) if a != d)
            W = khatri_rao(states[i].F.T, states[j].F.T)
            trace_bound = float(np.vdot(W, W))
            if trace_bound <= 0:
                raise ValueError(
                    "mode %d subproblem degenerated: the other factors have a "
                    "zero Khatri-Rao product (likely over-regularization)"
                    % (d + 1,)
                )
            steps = pds.compute_stepsizes(trace_bound, op_norms[d])
            states[d] = pds.solve_subproblem(
                states[d], specs[d], W, Yd[d], Md[d], steps, cfg.n_inner
            )
        outer = k
        rec = _trace_entry(k, started, Y, mask, _factors_from(states), specs, truth)
        trace.append(rec)
        if rule.fired(rec.objective, rec.mse_raw):
            stop_reason = "converged"
            break
    return FitResult(
        factors=_factors_from(states),
        duals=[s.G for s in states],
        trace=trace,
        outer_iterations=outer,
        stop_reason=stop_reason,
        counters={"inner_iterations": 3 * outer * int(cfg.n_inner)},
    )
