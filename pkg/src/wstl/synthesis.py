"""Control synthesis by projected gradient ascent on weighted robustness."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import Signal, WstlError
from .formula import Formula, box_region, horizon, strip_weights
from .parser import parse, to_text
from .semantics import (
    Engine,
    SemanticsConfig,
    Verdict,
    rob_traditional,
    robustness,
    smooth_gradient,
)


class InputOutOfBounds(WstlError, ValueError):
    pass


class NonSmoothEngine(WstlError, ValueError):
    pass


class ConfigError(WstlError, ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DynamicalSystem:
    """Discrete-time system ``q(t+1) = step(q(t), u(t))`` with box-bounded inputs.

    ``jacobian(q, u)`` returns ``(df/dq, df/du)``; when omitted the reverse pass
    falls back to central differences of ``step``.
    """

    state_names: tuple[str, ...]
    input_names: tuple[str, ...]
    step: Callable[[np.ndarray, np.ndarray], np.ndarray]
    u_lo: np.ndarray
    u_hi: np.ndarray
    jacobian: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "state_names", tuple(self.state_names))
        object.__setattr__(self, "input_names", tuple(self.input_names))
        names = self.state_names + self.input_names
        if len(set(names)) != len(names):
            raise ValueError(f"state and input names must be unique, got {names}")
        lo = np.broadcast_to(np.asarray(self.u_lo, dtype=float), (self.m,)).copy()
        hi = np.broadcast_to(np.asarray(self.u_hi, dtype=float), (self.m,)).copy()
        if np.any(lo > hi):
            raise ValueError("input box needs lo <= hi")
        object.__setattr__(self, "u_lo", lo)
        object.__setattr__(self, "u_hi", hi)

    @property
    def n(self) -> int:
        return len(self.state_names)

    @property
    def m(self) -> int:
        return len(self.input_names)

    def clip(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.u_lo, self.u_hi)

    def linearize(self, q: np.ndarray, u: np.ndarray, h: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
        if self.jacobian is not None:
            return self.jacobian(q, u)
        A = np.empty((self.n, self.n))
        B = np.empty((self.n, self.m))
        for j in range(self.n):
            d = np.zeros(self.n)
            d[j] = h
            A[:, j] = (self.step(q + d, u) - self.step(q - d, u)) / (2 * h)
        for j in range(self.m):
            d = np.zeros(self.m)
            d[j] = h
            B[:, j] = (self.step(q, u + d) - self.step(q, u - d)) / (2 * h)
        return A, B


def _unicycle_step(q, u):
    x, y, th = q
    v, w = u
    return np.array([x + math.cos(th) * v, y + math.sin(th) * v, th + v * w])


def _unicycle_jacobian(q, u):
    _, _, th = q
    v, w = u
    c, s = math.cos(th), math.sin(th)
    A = np.array([[1.0, 0.0, -s * v], [0.0, 1.0, c * v], [0.0, 0.0, 1.0]])
    B = np.array([[c, 0.0], [s, 0.0], [w, v]])
    return A, B


def unicycle(u_lo: float | Sequence[float] = -2.0, u_hi: float | Sequence[float] = 2.0) -> DynamicalSystem:
    """``x+ = x + cos(theta) v``, ``y+ = y + sin(theta) v``, ``theta+ = theta + v w``."""
    return DynamicalSystem(("x", "y", "theta"), ("v", "w"), _unicycle_step, u_lo, u_hi, _unicycle_jacobian, "unicycle")


def single_integrator(
    dim: int = 2, u_lo: float | Sequence[float] = -1.0, u_hi: float | Sequence[float] = 1.0, names: Sequence[str] | None = None
) -> DynamicalSystem:
    """``q+ = q + u``."""
    names = tuple(names) if names is not None else ("x", "y", "z")[:dim] if dim <= 3 else tuple(f"q{i}" for i in range(dim))
    eye = np.eye(dim)
    return DynamicalSystem(
        names,
        tuple(f"u_{n}" for n in names),
        lambda q, u: q + u,
        u_lo,
        u_hi,
        lambda q, u: (eye, eye),
        "single_integrator",
    )


def quadratic_cost(u: np.ndarray) -> tuple[float, np.ndarray]:
    """``J = 1/2 * sum_t ||u(t)||^2`` and its gradient."""
    return 0.5 * float(np.sum(u * u)), u.copy()


@dataclass(frozen=True, eq=False)
class SynthesisProblem:
    system: DynamicalSystem
    q0: np.ndarray
    T: int
    formula: Formula
    lam: float = 0.05
    cfg: SemanticsConfig = SemanticsConfig(Engine.WEIGHTED_SMOOTH, beta=10.0)
    epsilon: float = 0.0
    cost: Callable[[np.ndarray], tuple[float, np.ndarray]] = quadratic_cost

    def __post_init__(self):
        q0 = np.asarray(self.q0, dtype=float)
        if q0.shape != (self.system.n,):
            raise ConfigError(f"q0 must have {self.system.n} entries, got {q0.shape}")
        object.__setattr__(self, "q0", q0)
        if self.T < horizon(self.formula):
            raise ConfigError(f"T={self.T} is shorter than the formula horizon {horizon(self.formula)}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be non-negative, got {self.lam}")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be non-negative, got {self.epsilon}")


@dataclass
class SynthesisResult:
    u: np.ndarray
    trajectory: Signal
    objective: float
    robustness_smooth: float
    robustness_exact: float
    satisfied: Verdict
    iterations: int
    wall_time: float
    start: int = 0
    history: list[float] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "objective": self.objective,
            "robustness_smooth": self.robustness_smooth,
            "robustness_exact": self.robustness_exact,
            "satisfied": self.satisfied.value,
            "iterations": self.iterations,
            "wall_time_ms": self.wall_time * 1000.0,
        }


# ---------------------------------------------------------------------------


def _check_inputs(system: DynamicalSystem, u: np.ndarray, T: int | None = None) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim == 1 and system.m == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[1] != system.m or (T is not None and u.shape[0] != T):
        want = f"({T}, {system.m})" if T is not None else f"(T, {system.m})"
        raise ConfigError(f"input sequence must have shape {want}, got {u.shape}")
    tol = 1e-12
    if np.any(u < system.u_lo - tol) or np.any(u > system.u_hi + tol):
        raise InputOutOfBounds(f"inputs leave the box [{system.u_lo.tolist()}, {system.u_hi.tolist()}]")
    return u


def simulate(system: DynamicalSystem, q0: Sequence[float], u: np.ndarray) -> Signal:
    """Roll the dynamics forward; sample 0 is ``q0`` and sample t+1 is ``step(q(t), u(t))``."""
    u = _check_inputs(system, u)
    q = np.empty((u.shape[0] + 1, system.n))
    q[0] = q0
    for t in range(u.shape[0]):
        q[t + 1] = system.step(q[t], u[t])
    return Signal(system.state_names, q)


def objective(problem: SynthesisProblem, u: np.ndarray) -> float:
    """Robustness of the rolled-out trajectory minus ``lam * J(u)``."""
    u = _check_inputs(problem.system, u, problem.T)
    traj = simulate(problem.system, problem.q0, u)
    return robustness(problem.formula, traj, 0, problem.cfg) - problem.lam * problem.cost(u)[0]


def gradient(problem: SynthesisProblem, u: np.ndarray, mode: str = "analytic", h: float = 1e-5) -> np.ndarray:
    """Gradient of :func:`objective` w.r.t. ``u`` (shape ``(T, m)``).

    ``mode="analytic"`` runs the reverse pass of the smooth robustness and the
    adjoint recursion of the dynamics; ``mode="fd"`` uses central differences
    with step ``h`` and works with every engine.
    """
    u = _check_inputs(problem.system, u, problem.T)
    if mode == "fd":
        return _fd_gradient(problem, u, h)
    if mode != "analytic":
        raise ValueError(f"unknown gradient mode {mode!r}")
    if problem.cfg.engine is not Engine.WEIGHTED_SMOOTH:
        raise NonSmoothEngine(f"analytic gradients need the weighted-smooth engine, not {problem.cfg.engine.value}")
    return _analytic_gradient(problem, u)[1]


def _analytic_gradient(problem: SynthesisProblem, u: np.ndarray) -> tuple[float, np.ndarray]:
    system = problem.system
    traj = simulate(system, problem.q0, u)
    rob, dS = smooth_gradient(problem.formula, traj, 0, problem.cfg.beta)
    q = traj.samples
    du = np.zeros_like(u)
    adj = dS[-1].copy()
    for t in range(u.shape[0] - 1, -1, -1):
        A, B = system.linearize(q[t], u[t])
        du[t] = B.T @ adj
        adj = dS[t] + A.T @ adj
    J, dJ = problem.cost(u)
    return rob - problem.lam * J, du - problem.lam * dJ


def _fd_gradient(problem: SynthesisProblem, u: np.ndarray, h: float) -> np.ndarray:
    # Unconstrained evaluation: a probe may step just outside the input box.
    def f(v):
        traj = _rollout(problem.system, problem.q0, v)
        return robustness(problem.formula, traj, 0, problem.cfg) - problem.lam * problem.cost(v)[0]

    g = np.zeros_like(u)
    for idx in np.ndindex(*u.shape):
        up = u.copy()
        dn = u.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (f(up) - f(dn)) / (2 * h)
    return g


def _rollout(system, q0, u):
    q = np.empty((u.shape[0] + 1, system.n))
    q[0] = q0
    for t in range(u.shape[0]):
        q[t + 1] = system.step(q[t], u[t])
    return Signal(system.state_names, q)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerOptions:
    restarts: int = 8
    max_iters: int = 500
    seed: int = 0
    step: float | None = None
    tol: float = 1e-5
    armijo: float = 1e-4
    gradient: str = "analytic"
    # phase 2 keeps exact robustness above epsilon + margin
    margin: float = 1e-2


def _ascend(problem: SynthesisProblem, u: np.ndarray, opts: OptimizerOptions, *, feasible_only=False, stop_when_feasible=False):
    """Projected gradient ascent with Armijo backtracking from one input sequence.

    With ``feasible_only`` a candidate is accepted only if its trajectory keeps
    the exact robustness of the unweighted formula above ``epsilon``. With
    ``stop_when_feasible`` the loop ends at the first such iterate.
    """
    system = problem.system
    analytic = opts.gradient == "analytic"

    def value_and_grad(v):
        if analytic:
            return _analytic_gradient(problem, v)
        return objective(problem, v), _fd_gradient(problem, v, 1e-5)

    def feasible(v):
        traj = simulate(system, problem.q0, v)
        return rob_traditional(problem.formula, traj, 0) > problem.epsilon + opts.margin

    width = float(np.max(system.u_hi - system.u_lo)) or 1.0
    alpha = opts.step if opts.step is not None else 0.1 * width
    f, g = value_and_grad(u)
    history = [f]
    iters = 0
    while iters < opts.max_iters:
        if stop_when_feasible and feasible(u):
            break
        # projected gradient: zero in components pinned at an active bound
        if np.linalg.norm(system.clip(u + g) - u) < opts.tol:
            break
        while alpha > 1e-12:
            cand = system.clip(u + alpha * g)
            fc = objective(problem, cand)
            if fc >= f + opts.armijo * float(np.sum(g * (cand - u))) and (not feasible_only or feasible(cand)):
                break
            alpha *= 0.5
        else:
            break
        iters += 1
        u = cand
        f, g = value_and_grad(u)
        history.append(f)
        alpha *= 2.0
    return u, f, iters, history


def _solve_start(problem: SynthesisProblem, u0: np.ndarray, opts: OptimizerOptions):
    # Phase 1 climbs robustness alone until the trajectory satisfies the
    # unweighted formula; phase 2 trades robustness against cost without
    # leaving the satisfying set. Without a satisfying iterate phase 2 runs
    # unconstrained and returns the least-violating point it reaches.
    feasibility = replace(problem, lam=0.0)
    u, _, n1, _ = _ascend(feasibility, u0, opts, stop_when_feasible=True)
    traj = simulate(problem.system, problem.q0, u)
    found = rob_traditional(problem.formula, traj, 0) > problem.epsilon + opts.margin
    if not found:
        u = u0
    u, f, n2, history = _ascend(problem, u, opts, feasible_only=found)
    return u, f, n1 + n2, history


def synthesize(problem: SynthesisProblem, opts: OptimizerOptions | None = None) -> SynthesisResult:
    """Multi-start projected gradient ascent on ``robustness - lam * J``.

    Start 0 begins from the input closest to zero, which keeps symmetric
    problems symmetric so that weights alone break ties; the other starts draw
    their initial inputs uniformly from the input box. The returned result is the best-objective start among those whose trajectory
    satisfies the unweighted formula by more than ``epsilon`` (exact
    traditional robustness), or the best-objective start overall if none does.
    """
    opts = opts or OptimizerOptions()
    if opts.gradient == "analytic" and problem.cfg.engine is not Engine.WEIGHTED_SMOOTH:
        raise NonSmoothEngine("synthesis with analytic gradients needs the weighted-smooth engine")
    system = problem.system
    results = []
    for k in range(opts.restarts):
        t0 = time.perf_counter()
        if k == 0:
            u0 = np.tile(system.clip(np.zeros(system.m)), (problem.T, 1))
        else:
            rng = np.random.default_rng([opts.seed, k])
            u0 = rng.uniform(system.u_lo, system.u_hi, size=(problem.T, system.m))
        u, f, iters, history = _solve_start(problem, u0, opts)
        traj = simulate(system, problem.q0, u)
        exact = rob_traditional(problem.formula, traj, 0)
        results.append(
            SynthesisResult(
                u=u,
                trajectory=traj,
                objective=f,
                robustness_smooth=robustness(problem.formula, traj, 0, problem.cfg),
                robustness_exact=exact,
                satisfied=Verdict.from_value(exact, problem.epsilon),
                iterations=iters,
                wall_time=time.perf_counter() - t0,
                start=k,
                history=history,
            )
        )
    satisfying = [r for r in results if r.satisfied is Verdict.YES]
    pool = satisfying or results
    # max() keeps the first maximal element, i.e. the lowest start index on ties
    best = max(pool, key=lambda r: r.objective)
    best.wall_time = sum(r.wall_time for r in results)
    return best


# ---------------------------------------------------------------------------
# Case study and config files
# ---------------------------------------------------------------------------

REGIONS = {
    "A": ([7.0, 1.0], [9.0, 3.0]),
    "B": ([1.0, 7.0], [3.0, 9.0]),
    "C": ([7.0, 7.0], [9.0, 9.0]),
    "Unsafe": ([3.0, 3.0], [6.0, 6.0]),
    "Boundary": ([0.0, 0.0], [10.0, 10.0]),
}


def region(name: str) -> Formula:
    lo, hi = REGIONS[name]
    return box_region(name, lo, hi, ("x", "y"))


def case_study_formula(p_a: float = 2.0, p_b: float = 1.0) -> Formula:
    """Eventually A or B in [1,10], then C in [11,20], always avoid Unsafe and stay in Boundary."""
    from .formula import Always, And, Eventually, Not, Or

    return And(
        (
            Eventually((1, 10), Or((region("A"), region("B")), (p_a, p_b))),
            Eventually((11, 20), region("C")),
            Always((1, 20), Not(region("Unsafe"))),
            Always((1, 20), region("Boundary")),
        )
    )


def case_study_problem(p_a: float = 2.0, p_b: float = 1.0, beta: float = 10.0) -> SynthesisProblem:
    return SynthesisProblem(
        system=unicycle(-2.0, 2.0),
        q0=np.array([1.0, 1.0, math.pi / 4]),
        T=20,
        formula=case_study_formula(p_a, p_b),
        lam=0.05,
        cfg=SemanticsConfig(Engine.WEIGHTED_SMOOTH, beta=beta),
    )


def _system_from_config(entry: dict) -> DynamicalSystem:
    kind = entry.get("type")
    params = entry.get("params", {})
    if kind == "unicycle":
        return unicycle(params.get("u_lo", -2.0), params.get("u_hi", 2.0))
    if kind == "single_integrator":
        return single_integrator(
            int(params.get("dim", 2)), params.get("u_lo", -1.0), params.get("u_hi", 1.0), params.get("names")
        )
    raise ConfigError(f"unknown system type {kind!r} (expected 'unicycle' or 'single_integrator')")


def problem_from_config(config: dict, base_dir: str | Path = ".") -> tuple[SynthesisProblem, OptimizerOptions]:
    """Build a problem from the JSON config schema used by the CLI."""
    try:
        system = _system_from_config(config["system"])
        text = config["formula"]
        candidate = Path(base_dir) / text
        if not any(ch in text for ch in "()[]&|!<>=") and candidate.is_file():
            text = candidate.read_text(encoding="utf-8")
        engine = Engine(config.get("engine", Engine.WEIGHTED_SMOOTH.value))
        cfg = SemanticsConfig(engine, beta=float(config.get("beta", 10.0)))
        problem = SynthesisProblem(
            system=system,
            q0=np.asarray(config["q0"], dtype=float),
            T=int(config["T"]),
            formula=parse(text),
            lam=float(config.get("lambda", 0.05)),
            cfg=cfg,
            epsilon=float(config.get("epsilon", 0.0)),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config key {exc.args[0]!r}") from None
    opt = config.get("optimizer", {})
    opts = OptimizerOptions(
        restarts=int(opt.get("restarts", 8)),
        max_iters=int(opt.get("max_iters", 500)),
        seed=int(opt.get("seed", 0)),
    )
    return problem, opts


def load_problem(path: str | Path) -> tuple[SynthesisProblem, OptimizerOptions]:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        config = json.load(fh)
    return problem_from_config(config, path.parent)


def trajectory_csv(result: SynthesisResult, system: DynamicalSystem) -> str:
    """Trajectory with the input applied at each step; the final row has no input."""
    header = ["t", *system.state_names, *system.input_names]
    lines = [",".join(header)]
    q = result.trajectory.samples
    for t in range(q.shape[0]):
        cells = [str(t)] + [repr(float(v)) for v in q[t]]
        if t < result.u.shape[0]:
            cells += [repr(float(v)) for v in result.u[t]]
        else:
            cells += [""] * system.m
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
