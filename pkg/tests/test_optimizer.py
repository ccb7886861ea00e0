from __future__ import annotations

import math

import numpy as np
import pytest

from superatom import (
    Bounds,
    DEConfig,
    GrapeObjective,
    GrapeProblem,
    InvalidArgument,
    LocalConfig,
    OptimizationFailure,
    PhysicalParams,
    PulseParams,
    Shape,
    build_model,
    evolve,
    finite_diff_gradient,
    grape_optimize,
    leak_target,
    loss,
    optimize_parametrized,
)
from superatom.optimizer import (
    FAST_INTEGRATOR,
    initial_from_pulse,
    make_pulse,
    random_initial,
    read_result,
    write_result,
)
from superatom.propagator import IntegratorConfig

TWO_PI = 2 * math.pi
SMALL_DE = DEConfig(popsize=5, maxiter=4)
SMALL_LOCAL = LocalConfig(maxiter=5)


class TestLoss:
    def test_perfect_and_none(self):
        rho = np.zeros((20, 20))
        rho[1, 1] = 1
        assert loss(rho) == 0.0
        rho = np.zeros((20, 20))
        rho[0, 0] = 1
        assert loss(rho) == 1.0

    def test_trajectory(self, experimental_model):
        traj = evolve(experimental_model, PulseParams(), 0.25)
        assert loss(traj) == pytest.approx(1 - traj.final_populations["R0"], abs=1e-15)


class TestBounds:
    def test_defaults(self):
        b = Bounds.default(Shape.NON_PERTURBATIVE_DRAG, 0.25)
        assert b.names == ("A", "delta_d", "alpha")
        assert b.upper[0] == pytest.approx(TWO_PI * 12)
        assert b.lower[1] == pytest.approx(-TWO_PI * 5)
        assert b.upper[2] == b.upper[0]

    def test_multilevel_box(self):
        b = Bounds.default(Shape.MULTI_LEVEL_DRAG, 0.5)
        assert b.names == ("A", "delta_d", "alpha", "alpha1", "alpha2")
        assert b.upper[3] == b.upper[0] == pytest.approx(TWO_PI * 6)
        assert (b.lower[4], b.upper[4]) == (-1.0, 1.0)

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgument):
            Bounds((), (), ())
        with pytest.raises(InvalidArgument):
            Bounds(("A",), (1.0,), (0.0,))

    def test_sine_squared_not_optimizable(self):
        with pytest.raises(InvalidArgument):
            Bounds.default(Shape.SINE_SQUARED, 0.25)


class TestFiniteDiff:
    def test_quadratic(self):
        g = finite_diff_gradient(lambda x: float(np.sum(x**2)), [1.0, 2.0], 1e-4)
        np.testing.assert_allclose(g, [2.0, 4.0], atol=1e-6)

    def test_constant(self):
        g = finite_diff_gradient(lambda x: 3.0, np.ones(4), 1e-3)
        assert np.all(g == 0)

    def test_nan_propagates(self):
        g = finite_diff_gradient(lambda x: float("nan"), [0.0], 1e-3)
        assert np.isnan(g[0])


class TestParametrized:
    def test_small_run_is_deterministic(self, experimental_model):
        tg = leak_target(experimental_model, 3)
        kw = dict(T=0.25, targets=tg)
        a = optimize_parametrized(Shape.PERTURBATIVE_DRAG, experimental_model, None, SMALL_DE, SMALL_LOCAL, 5, **kw)
        b = optimize_parametrized(Shape.PERTURBATIVE_DRAG, experimental_model, None, SMALL_DE, SMALL_LOCAL, 5, **kw)
        assert a.params == b.params and a.loss == b.loss and a.n_evals == b.n_evals
        assert a.stage_losses["local"] <= a.stage_losses["global"]
        assert a.loss == pytest.approx(min(a.stage_losses.values()), abs=1e-7)
        assert a.loss == pytest.approx(1 - a.final_populations["R0"], abs=1e-15)

    def test_returned_loss_recomputed(self, experimental_model):
        res = optimize_parametrized(Shape.DETUNED_SINE_SQUARED, experimental_model, None, SMALL_DE, SMALL_LOCAL, 1)
        fresh = evolve(experimental_model, res.pulse, 0.25, FAST_INTEGRATOR)
        assert loss(fresh) == res.loss

    def test_bounds_must_match_shape(self, experimental_model):
        b = Bounds.default(Shape.DETUNED_SINE_SQUARED, 0.25)
        with pytest.raises(InvalidArgument):
            optimize_parametrized(Shape.PERTURBATIVE_DRAG, experimental_model, b, targets={"delta_leak": -1.0})

    def test_missing_target_fails_fast(self, experimental_model):
        with pytest.raises(InvalidArgument):
            optimize_parametrized(Shape.NON_PERTURBATIVE_DRAG, experimental_model)

    def test_all_failures(self, experimental_model):
        cfg = IntegratorConfig(method="expo", max_steps=1)
        with pytest.raises(OptimizationFailure):
            optimize_parametrized(Shape.DETUNED_SINE_SQUARED, experimental_model, None, SMALL_DE, SMALL_LOCAL,
                                  0, search_integrator=cfg)

    def test_make_pulse(self):
        p = make_pulse("PerturbativeDrag", [1.0, 2.0, 3.0], {"delta_leak": -4.0})
        assert (p.A, p.delta_d, p.alpha, p.delta_leak) == (1.0, 2.0, 3.0, -4.0)

    def test_leak_target(self, experimental_model, tables):
        t = leak_target(experimental_model, 3)
        assert t["beta_leak"] == tables.beta[0, 3]
        assert t["delta_leak"] / TWO_PI == pytest.approx(-1.973, abs=1e-3)

    def test_result_export(self, tmp_path, experimental_model):
        res = optimize_parametrized(Shape.DETUNED_SINE_SQUARED, experimental_model, None, SMALL_DE, SMALL_LOCAL, 2)
        write_result(res, tmp_path / "r.txt", {"note": "x"})
        kv = read_result(tmp_path / "r.txt")
        assert float(kv["loss"]) == pytest.approx(res.loss)
        assert kv["seed"] == "2" and kv["note"] == "x"
        assert float(kv["param.A"]) == pytest.approx(res.params["A"])
        assert float(kv["population.R0"]) == pytest.approx(res.final_populations["R0"])


class TestGrapeProblem:
    def test_parameter_count(self):
        assert GrapeProblem(0.25).n_params == 150

    def test_box_endpoints(self):
        lo, hi = GrapeProblem(0.25, 4).box()
        lo, hi = lo.reshape(4, 3), hi.reshape(4, 3)
        assert np.all(lo[[0, -1], :2] == 0) and np.all(hi[[0, -1], :2] == 0)
        assert lo[0, 2] < 0 < hi[0, 2]

    def test_projection_feasible(self):
        prob = GrapeProblem(0.25, 10)
        u = np.random.default_rng(0).normal(scale=20, size=(10, 3))
        x = prob.project(u)
        assert prob.violation(x) <= 1e-9

    def test_projection_saturated_input(self):
        prob = GrapeProblem(0.25, 8)
        u = np.full((8, 3), 65.07907308)
        u[0, 2] = u[1, 0] = 0.0
        x = prob.project(u)
        assert prob.violation(x) <= 1e-9
        np.testing.assert_allclose(prob.project(x), x, atol=1e-9)

    def test_projection_is_closest_point(self):
        from scipy.optimize import Bounds as Box
        from scipy.optimize import LinearConstraint, minimize

        prob = GrapeProblem(0.25, 8)
        lo, hi = prob.box()
        u = np.random.default_rng(4).uniform(-100, 100, 24)
        ref = minimize(lambda z: 0.5 * np.sum((z - u) ** 2), np.clip(u, lo, hi), jac=lambda z: z - u,
                       method="SLSQP", bounds=Box(lo, hi),
                       constraints=[LinearConstraint(prob.slew_matrix(), -prob.slew, prob.slew)],
                       options=dict(maxiter=1000, ftol=1e-15))
        x = prob.project(u.reshape(8, 3)).ravel()
        assert np.sum((x - u) ** 2) == pytest.approx(np.sum((ref.x - u) ** 2), rel=1e-8)

    def test_zero_pulse_feasible(self):
        prob = GrapeProblem(0.25, 6)
        assert prob.violation(np.zeros((6, 3))) == 0

    def test_infeasible(self):
        with pytest.raises(InvalidArgument):
            GrapeProblem(0.25, 4, lower=(1.0, -1, -1), upper=(2.0, 1, 1))
        with pytest.raises(InvalidArgument):
            GrapeProblem(0.25, 4, lower=(1.0, 0, 0), upper=(0.0, 0, 0))
        with pytest.raises(InvalidArgument):
            GrapeProblem(0.25, 4, initial=np.zeros((3, 3)))

    def test_initial_from_pulse(self):
        u = initial_from_pulse(PulseParams(), 0.25, 50)
        assert u.shape == (50, 3)
        assert u[:, 0].max() < TWO_PI * 4


@pytest.fixture(scope="module")
def grape_setup():
    model = build_model(PhysicalParams())
    prob = GrapeProblem(0.25, 8)
    cfg = IntegratorConfig(method="expo", rel_tol=1e-11, abs_tol=1e-13)
    return model, prob, GrapeObjective(model, prob, cfg)


class TestGrapeGradient:
    def test_loss_matches_evolve(self, grape_setup):
        model, prob, obj = grape_setup
        u = prob.project(initial_from_pulse(PulseParams(), 0.25, 8))
        p = PulseParams(Shape.PIECEWISE_CONSTANT, segments=u, edges=prob.edges)
        assert obj(u) == pytest.approx(loss(evolve(model, p, 0.25)), abs=1e-8)

    def test_adjoint_matches_finite_differences(self, grape_setup):
        _, prob, obj = grape_setup
        for seed in range(10):
            u = prob.project(random_initial(prob, seed, fraction=0.5))
            f, g = obj.gradient(u)
            # step control also sees the sensitivities, so agreement is at tolerance level
            assert f == pytest.approx(obj(u), abs=1e-8)
            lo, hi = prob.box()
            free = lo < hi
            x = u.ravel()
            fd = finite_diff_gradient(lambda z: obj(z), x, 1e-4)
            big = free & (np.abs(fd) > 1e-8)
            rel = np.abs(g[big] - fd[big]) / np.abs(fd[big])
            assert rel.max() < 1e-4, (seed, rel.max())


class TestGrapeOptimize:
    def test_frozen_bounds_return_zero_pulse(self, experimental_model):
        prob = GrapeProblem(0.25, 6, lower=(0, 0, 0), upper=(0, 0, 0))
        res = grape_optimize(prob, experimental_model)
        assert np.all(res.pulse.segments == 0)
        assert res.loss == 1.0

    def test_short_run_improves_and_stays_feasible(self, experimental_model):
        prob = GrapeProblem(0.25, 10, initial=initial_from_pulse(PulseParams(), 0.25, 10), maxiter=5)
        res = grape_optimize(prob, experimental_model, seed=0)
        assert res.loss <= res.stage_losses["initial"]
        assert prob.violation(res.pulse.segments) <= 1e-9
        u = res.pulse.segments
        assert np.all(u[[0, -1], :2] == 0)
        assert np.max(np.abs(np.diff(u, axis=0))) <= prob.slew + 1e-9
        assert res.controls.grid.shape == (10,)
