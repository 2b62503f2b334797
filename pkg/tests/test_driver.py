import numpy as np
import pytest

import cpdsplit.driver as driver_mod
import cpdsplit.pds as pds
from cpdsplit.driver import DriverConfig, ModeSpec, factorize, init_factors, objective
from cpdsplit.operators import Projection, ProxFn, identity_op, row_difference_op
from cpdsplit.tensor import FactorSet, cp_reconstruct

import oracles


def _plain_specs():
    return (ModeSpec(), ModeSpec(), ModeSpec())


def _nonneg_specs():
    c = Projection("nonnegative")
    return tuple(ModeSpec(projection=c) for _ in range(3))


def _small_problem(seed=0, dims=(6, 5, 4), rank=2, noise=0.0):
    rng = np.random.default_rng(seed)
    truth = FactorSet(tuple(rng.random((n, rank)) for n in dims))
    Y = cp_reconstruct(truth)
    if noise:
        Y = Y + noise * rng.standard_normal(dims)
    return Y, truth


def test_mode_spec_requires_operator_for_regularizer():
    with pytest.raises(ValueError):
        ModeSpec(regularizer=ProxFn("l1", 1.0))
    with pytest.raises(ValueError):
        ModeSpec(operator=identity_op())
    spec = ModeSpec(regularizer=ProxFn("l1", 1.0), operator=identity_op())
    assert spec.operator.kind == "identity"


def test_driver_config_validation():
    with pytest.raises(ValueError):
        DriverConfig(rank=0)
    with pytest.raises(ValueError):
        DriverConfig(rank=2, n_inner=0)
    with pytest.raises(ValueError):
        DriverConfig(rank=2, max_outer=0)
    with pytest.raises(ValueError):
        DriverConfig(rank=2, stop_tol=0.0)
    with pytest.raises(ValueError):
        DriverConfig(rank=2, stop_metric="wall_clock")


def test_objective_examples():
    Y, truth = _small_problem(seed=1)
    assert objective(Y, None, truth, _plain_specs()) == pytest.approx(0.0, abs=1e-20)

    zeros = FactorSet(tuple(np.zeros_like(f) for f in truth.factors))
    want = 0.5 * float(np.vdot(Y, Y))
    assert objective(Y, None, zeros, _plain_specs()) == pytest.approx(want)

    reg = ModeSpec(regularizer=ProxFn("l1", 5.0), operator=identity_op())
    specs = (reg, ModeSpec(), ModeSpec())
    base = objective(Y, None, truth, _plain_specs())
    got = objective(Y, None, truth, specs)
    assert got == pytest.approx(base + 5.0 * float(np.abs(truth.factors[0]).sum()))


def test_objective_matches_dense_oracle_with_mask():
    rng = np.random.default_rng(2)
    Y, truth = _small_problem(seed=2)
    mask = rng.random(Y.shape) < 0.7
    est = FactorSet(tuple(rng.random(f.shape) for f in truth.factors))
    got = objective(np.where(mask, Y, 0.0), mask, est, _plain_specs())
    recon = oracles.cp_dense(est.factors)
    want = 0.0
    for idx in np.ndindex(Y.shape):
        if mask[idx]:
            want += 0.5 * (Y[idx] - recon[idx]) ** 2
    assert got == pytest.approx(want, rel=1e-12)


def test_init_factors_seeded_uniform():
    a = init_factors((4, 5, 6), 3, seed=7)
    b = init_factors((4, 5, 6), 3, seed=7)
    for fa, fb in zip(a.factors, b.factors):
        assert np.array_equal(fa, fb)
    c = init_factors((4, 5, 6), 3, seed=8)
    assert not np.array_equal(a.factors[0], c.factors[0])
    big = init_factors((100000, 100000, 100000), 1, seed=0)
    flat = np.concatenate([f.ravel() for f in big.factors])
    assert flat.min() > 0.0 and flat.max() < 1.0
    assert abs(flat.mean() - 0.5) < 0.01


def test_single_outer_iteration_hits_cap():
    Y, truth = _small_problem(seed=3)
    cfg = DriverConfig(rank=2, n_inner=2, max_outer=1, stop_tol=1e-12,
                       stop_metric="objective_rel_change", seed=5)
    res = factorize(Y, None, _plain_specs(), cfg)
    assert res.outer_iterations == 1
    assert res.stop_reason == "iteration_cap"
    assert len(res.trace) == 1
    assert res.counters["inner_iterations"] == 6


def test_inner_solver_is_warm_started():
    # the driver must hand each mode's previous state back to the solver
    Y, truth = _small_problem(seed=4)
    cfg = DriverConfig(rank=2, n_inner=1, max_outer=3, stop_tol=1e-30,
                       stop_metric="objective_rel_change", seed=6)
    seen = []
    real = pds.solve_subproblem

    def spy(state, spec, W, Yd, mask, steps, n_inner):
        out = real(state, spec, W, Yd, mask, steps, n_inner)
        seen.append((state, out))
        return out

    try:
        pds.solve_subproblem = spy
        factorize(Y, None, _plain_specs(), cfg)
    finally:
        pds.solve_subproblem = real
    assert len(seen) == 9
    # each mode's call in round k receives the object returned in round k-1
    for mode in range(3):
        calls = seen[mode::3]
        for (prev_in, prev_out), (next_in, _) in zip(calls, calls[1:]):
            assert next_in is prev_out


def test_factorize_is_deterministic():
    Y, truth = _small_problem(seed=5, noise=0.05)
    cfg = DriverConfig(rank=2, n_inner=3, max_outer=10, stop_tol=1e-30,
                       stop_metric="objective_rel_change", seed=9)
    r1 = factorize(Y, None, _nonneg_specs(), cfg)
    r2 = factorize(Y, None, _nonneg_specs(), cfg)
    for f1, f2 in zip(r1.factors.factors, r2.factors.factors):
        assert np.array_equal(f1, f2)
    assert [t.objective for t in r1.trace] == [t.objective for t in r2.trace]


def test_mse_stop_requires_truth():
    Y, _ = _small_problem(seed=6)
    cfg = DriverConfig(rank=2, stop_metric="mse_vs_truth")
    with pytest.raises(ValueError, match="ground-truth"):
        factorize(Y, None, _plain_specs(), cfg)


def test_convergence_reported_with_reason():
    # noise keeps the objective floor positive so the relative change
    # actually shrinks (a noiseless exact fit decays geometrically forever)
    Y, truth = _small_problem(seed=7, noise=0.05)
    cfg = DriverConfig(rank=2, n_inner=5, max_outer=500, stop_tol=1e-8,
                       stop_metric="objective_rel_change", seed=8)
    res = factorize(Y, None, _nonneg_specs(), cfg)
    assert res.stop_reason == "converged"
    assert res.outer_iterations < 500


def test_trace_invariants_and_objective_decrease():
    Y, truth = _small_problem(seed=8, noise=0.02)
    cfg = DriverConfig(rank=2, n_inner=4, max_outer=40, stop_tol=1e-30,
                       stop_metric="objective_rel_change", seed=11)
    res = factorize(Y, None, _nonneg_specs(), cfg, truth=truth)
    iters = [t.outer_iter for t in res.trace]
    assert iters == list(range(1, len(res.trace) + 1))
    elapsed = [t.elapsed_sec for t in res.trace]
    assert all(b >= a for a, b in zip(elapsed, elapsed[1:]))
    assert len(res.trace) == res.outer_iterations
    assert all(t.mse_raw is not None and t.mse_aligned is not None for t in res.trace)
    assert res.trace[-1].objective < res.trace[0].objective


def test_trace_has_no_mse_without_truth():
    Y, _ = _small_problem(seed=9)
    cfg = DriverConfig(rank=2, max_outer=2, stop_metric="objective_rel_change")
    res = factorize(Y, None, _plain_specs(), cfg)
    assert all(t.mse_raw is None and t.mse_aligned is None for t in res.trace)


def test_hard_constraints_hold_exactly_on_output():
    Y, truth = _small_problem(seed=10, noise=0.1)
    box = Projection("box", 0.0, 0.8)
    specs = tuple(ModeSpec(projection=box) for _ in range(3))
    cfg = DriverConfig(rank=2, n_inner=3, max_outer=15, stop_tol=1e-30,
                       stop_metric="objective_rel_change", seed=12)
    res = factorize(Y, None, specs, cfg)
    for f in res.factors.factors:
        assert (f >= 0.0).all() and (f <= 0.8).all()


def test_masked_fit_and_full_mask_equivalence():
    rng = np.random.default_rng(11)
    Y, truth = _small_problem(seed=11, noise=0.05)
    cfg = DriverConfig(rank=2, n_inner=3, max_outer=8, stop_tol=1e-30,
                       stop_metric="objective_rel_change", seed=13)
    mask = rng.random(Y.shape) < 0.7
    res = factorize(np.where(mask, Y, 0.0), mask, _nonneg_specs(), cfg)
    assert res.outer_iterations == 8

    full = np.ones(Y.shape, dtype=bool)
    a = factorize(Y, full, _nonneg_specs(), cfg)
    b = factorize(Y, None, _nonneg_specs(), cfg)
    for fa, fb in zip(a.factors.factors, b.factors.factors):
        assert np.array_equal(fa, fb)


def test_shape_and_spec_mismatches_raise():
    Y, truth = _small_problem(seed=12)
    cfg = DriverConfig(rank=3, stop_metric="objective_rel_change")
    with pytest.raises(ValueError, match="rank"):
        factorize(Y, None, _plain_specs(), cfg, truth=truth)
    bad_op = ModeSpec(regularizer=ProxFn("l1", 0.1), operator=row_difference_op(99))
    cfg2 = DriverConfig(rank=2, stop_metric="objective_rel_change")
    with pytest.raises(ValueError, match="operator"):
        factorize(Y, None, (bad_op, ModeSpec(), ModeSpec()), cfg2)
    with pytest.raises(ValueError):
        factorize(Y[0], None, _plain_specs(), cfg2)
    with pytest.raises(ValueError):
        factorize(Y, np.ones(Y.shape), _plain_specs(), cfg2)
    with pytest.raises(ValueError):
        factorize(Y, None, (ModeSpec(), ModeSpec()), cfg2)


def test_unbound_operator_width_is_filled_from_mode():
    Y, _ = _small_problem(seed=13)
    spec = ModeSpec(regularizer=ProxFn("l1", 0.05), operator=identity_op())
    cfg = DriverConfig(rank=2, n_inner=2, max_outer=2, stop_tol=1e-30,
                       stop_metric="objective_rel_change", seed=14)
    res = factorize(Y, None, (spec, ModeSpec(), ModeSpec()), cfg)
    assert res.duals[0].shape == (2, Y.shape[0])
    assert res.duals[1] is None and res.duals[2] is None
