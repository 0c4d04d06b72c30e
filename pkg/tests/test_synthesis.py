import itertools
import json
import math

import numpy as np
import pytest

from wstl.formula import AffineExpr, Always, And, Eventually, Not, Predicate, box_region
from wstl.semantics import Engine, SemanticsConfig, Verdict, rob_traditional, rob_weighted_agm, robustness
from wstl.synthesis import (
    ConfigError,
    DynamicalSystem,
    InputOutOfBounds,
    NonSmoothEngine,
    OptimizerOptions,
    SynthesisProblem,
    _ascend,
    case_study_problem,
    gradient,
    load_problem,
    objective,
    problem_from_config,
    simulate,
    single_integrator,
    synthesize,
    trajectory_csv,
    unicycle,
)


def random_inputs(rng, problem):
    s = problem.system
    return rng.uniform(s.u_lo, s.u_hi, size=(problem.T, s.m))


class TestSimulate:
    def test_one_step(self):
        traj = simulate(unicycle(), [0, 0, 0], np.array([[1.0, 1.0]]))
        np.testing.assert_allclose(traj.samples, [[0, 0, 0], [1, 0, 1]])
        assert traj.components == ("x", "y", "theta")

    def test_zero_inputs_hold_state(self):
        traj = simulate(unicycle(), [1, 1, math.pi / 4], np.zeros((20, 2)))
        assert len(traj) == 21
        assert np.all(traj.samples == [1, 1, math.pi / 4])

    def test_diagonal_motion(self):
        traj = simulate(unicycle(), [1, 1, math.pi / 4], np.tile([math.sqrt(2) / 2, 0.0], (10, 1)))
        np.testing.assert_allclose(traj.column("x"), traj.column("y"), atol=1e-12)
        np.testing.assert_allclose(traj.column("x")[-1], 6.0)

    def test_rejects_out_of_bounds(self):
        with pytest.raises(InputOutOfBounds):
            simulate(unicycle(), [0, 0, 0], np.array([[2.5, 0.0]]))

    def test_single_integrator(self):
        traj = simulate(single_integrator(2), [0, 0], np.array([[1.0, -1.0], [0.5, 0.5]]))
        np.testing.assert_allclose(traj.samples[-1], [1.5, -0.5])


class TestObjectiveAndGradient:
    def test_lambda_zero_is_robustness(self):
        rng = np.random.default_rng(0)
        p = case_study_problem()
        free = SynthesisProblem(p.system, p.q0, p.T, p.formula, lam=0.0, cfg=p.cfg)
        u = random_inputs(rng, p)
        assert objective(free, u) == robustness(p.formula, simulate(p.system, p.q0, u), 0, p.cfg)

    def test_zero_input_has_no_cost(self):
        p = case_study_problem()
        u = np.zeros((p.T, 2))
        assert objective(p, u) == robustness(p.formula, simulate(p.system, p.q0, u), 0, p.cfg)

    def test_objective_matches_hand_rollout(self):
        rng = np.random.default_rng(1)
        p = case_study_problem()
        u = random_inputs(rng, p)
        q = [np.array(p.q0)]
        for v, w in u:
            x, y, th = q[-1]
            q.append(np.array([x + math.cos(th) * v, y + math.sin(th) * v, th + v * w]))
        traj = simulate(p.system, p.q0, u)
        np.testing.assert_allclose(traj.samples, np.array(q), atol=1e-12)
        assert np.isfinite(objective(p, u))

    def test_analytic_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        p = case_study_problem()
        for _ in range(5):
            u = random_inputs(rng, p)
            np.testing.assert_allclose(gradient(p, u), gradient(p, u, mode="fd", h=1e-5), atol=1e-6)

    def test_cost_gradient(self):
        p = case_study_problem()
        # a formula over the initial state alone makes robustness independent of u
        fixed = Predicate(AffineExpr.of({"x": 1.0}))
        q = SynthesisProblem(p.system, p.q0, p.T, fixed, lam=0.3, cfg=p.cfg)
        u = random_inputs(np.random.default_rng(3), p)
        np.testing.assert_allclose(gradient(q, u), -0.3 * u, atol=1e-15)

    def test_late_inputs_have_zero_gradient(self):
        p = case_study_problem()
        early = Eventually((1, 5), box_region("A", [7, 1], [9, 3], ("x", "y")))
        q = SynthesisProblem(p.system, p.q0, p.T, early, lam=0.0, cfg=p.cfg)
        u = random_inputs(np.random.default_rng(4), p)
        g = gradient(q, u)
        assert np.all(g[5:] == 0)
        assert np.all(gradient(q, u, mode="fd")[5:] == 0)
        assert np.any(g[:5] != 0)

    def test_exact_engine_needs_fd(self):
        p = case_study_problem()
        exact = SynthesisProblem(p.system, p.q0, p.T, p.formula, cfg=SemanticsConfig(Engine.WEIGHTED_AGM))
        u = np.zeros((p.T, 2))
        with pytest.raises(NonSmoothEngine):
            gradient(exact, u)
        assert gradient(exact, u, mode="fd").shape == (p.T, 2)

    def test_horizon_check(self):
        p = case_study_problem()
        with pytest.raises(ConfigError):
            SynthesisProblem(p.system, p.q0, 10, p.formula)


class TestOptimizer:
    def test_ascent_is_monotone_and_projected(self):
        p = case_study_problem()
        rng = np.random.default_rng(5)
        u, f, iters, history = _ascend(p, random_inputs(rng, p), OptimizerOptions(max_iters=60))
        assert np.all(np.diff(history) >= 0)
        assert np.all(u >= p.system.u_lo) and np.all(u <= p.system.u_hi)
        assert f == pytest.approx(objective(p, u))

    def test_deterministic(self):
        p = case_study_problem()
        opts = OptimizerOptions(restarts=2, max_iters=40, seed=7)
        a, b = synthesize(p, opts), synthesize(p, opts)
        assert np.array_equal(a.u, b.u)
        assert a.objective == b.objective and a.iterations == b.iterations and a.start == b.start

    def test_infeasible_is_not_an_error(self):
        sys1 = single_integrator(1, -0.1, 0.1, ["x"])
        far = Eventually((1, 3), Predicate(AffineExpr.of({"x": 1.0}, -5.0)))
        p = SynthesisProblem(sys1, [0.0], 3, far, lam=0.0)
        r = synthesize(p, OptimizerOptions(restarts=2, max_iters=50))
        assert r.satisfied is Verdict.NO
        np.testing.assert_allclose(r.u.ravel(), 0.1)

    def test_smooth_exact_gap_is_bounded(self):
        p = case_study_problem()
        r = synthesize(p, OptimizerOptions(restarts=1, max_iters=300))
        depth = 4  # And > F/G > Or/And > And of half-planes
        assert abs(r.robustness_smooth - r.robustness_exact) <= depth * math.log(20) / p.cfg.beta
        assert r.trajectory == simulate(p.system, p.q0, r.u)


def car_lane_problem(p):
    """Reach Green, avoid Blocked, stay in the lane; x advances one unit per step."""
    green = box_region("Green", [7, 0], [8, 2], ("x", "y"))
    blocked = box_region("Blocked", [3, 0], [5, 2], ("x", "y"))
    lane = And((Predicate(AffineExpr.of({"y": -1.0}, 2.0)), Predicate(AffineExpr.of({"y": 1.0}))))
    parts = (Eventually((0, 7), green), Always((0, 7), Not(blocked)), Always((0, 7), lane))
    system = DynamicalSystem(
        ("x", "y"),
        ("u",),
        lambda q, u: np.array([q[0] + 1.0, q[1] + u[0]]),
        -2.0,
        2.0,
        lambda q, u: (np.eye(2), np.array([[0.0], [1.0]])),
        "car",
    )
    phi = And(parts, p)
    return SynthesisProblem(system, [0.5, 1.0], 7, phi, lam=0.0), parts


def test_car_lane_conflict_agrees_with_lattice():
    problem, (_, avoid, lane) = car_lane_problem((1.0, 3.0, 1.0))
    best = None
    for ys in itertools.product((1.0, 3.0), repeat=7):
        u = np.diff((1.0,) + ys)[:, None]
        v = rob_weighted_agm(problem.formula, simulate(problem.system, problem.q0, u))
        if best is None or v > best[0]:
            best = (v, u)
    lattice = simulate(problem.system, problem.q0, best[1])
    assert rob_traditional(avoid, lattice) > 0 > rob_traditional(lane, lattice)

    r = synthesize(problem, OptimizerOptions(restarts=2, max_iters=200))
    assert rob_traditional(avoid, r.trajectory) > 0 > rob_traditional(lane, r.trajectory)


CONFIG = {
    "system": {"type": "unicycle", "params": {"u_lo": -2, "u_hi": 2}},
    "q0": [1, 1, 0.7853981633974483],
    "T": 20,
    "formula": "F[1,10] x >= 7",
    "lambda": 0.05,
    "engine": "weighted-smooth",
    "beta": 10,
    "epsilon": 0,
    "optimizer": {"restarts": 3, "max_iters": 50, "seed": 4},
}


class TestConfig:
    def test_inline_formula(self):
        problem, opts = problem_from_config(CONFIG)
        assert problem.T == 20 and problem.lam == 0.05 and problem.cfg.beta == 10
        assert (opts.restarts, opts.max_iters, opts.seed) == (3, 50, 4)

    def test_formula_file(self, tmp_path):
        (tmp_path / "reach.wstl").write_text("F[1,10] x >= 7  # reach\n")
        (tmp_path / "p.json").write_text(json.dumps({**CONFIG, "formula": "reach.wstl"}))
        problem, _ = load_problem(tmp_path / "p.json")
        assert problem.formula == problem_from_config(CONFIG)[0].formula

    def test_missing_key(self):
        with pytest.raises(ConfigError):
            problem_from_config({k: v for k, v in CONFIG.items() if k != "q0"})

    def test_unknown_system(self):
        with pytest.raises(ConfigError):
            problem_from_config({**CONFIG, "system": {"type": "boat"}})

    def test_trajectory_csv(self):
        problem, opts = problem_from_config(CONFIG)
        r = synthesize(problem, OptimizerOptions(restarts=1, max_iters=5))
        lines = trajectory_csv(r, problem.system).splitlines()
        assert lines[0] == "t,x,y,theta,v,w"
        assert len(lines) == 22
        assert lines[-1].endswith(",,")
