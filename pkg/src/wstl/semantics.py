"""Qualitative satisfaction and quantitative robustness of wSTL formulae.

All engines share one recursive skeleton. A node is evaluated once over every
time step at which it is defined (``0 .. len(S) - 1 - horizon(node)``), so
nested temporal operators cost ``O(|phi| * T * |I|)``. Engines differ only in
the aggregators used for conjunction/always (``conj``) and
disjunction/eventually (``disj``) and in the robustness assigned to ``TRUE``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Signal, WstlError, normalize
from .formula import (
    Always,
    And,
    Boolean,
    Bottom,
    Formula,
    Not,
    Or,
    Predicate,
    Top,
    _NAry,
    _Temporal,
    horizon,
    max_arity,
    strip_weights,
)


class HorizonExceedsSignal(WstlError, ValueError):
    pass


class Engine(enum.Enum):
    TRADITIONAL = "traditional"
    WEIGHTED_TRADITIONAL = "weighted-traditional"
    WEIGHTED_AGM = "weighted-agm"
    WEIGHTED_SMOOTH = "weighted-smooth"


class Verdict(enum.Enum):
    YES = "Yes"
    NO = "No"
    INCONCLUSIVE = "Inconclusive"

    @classmethod
    def from_value(cls, value: float, epsilon: float = 0.0) -> "Verdict":
        if value > epsilon:
            return cls.YES
        if value < -epsilon:
            return cls.NO
        return cls.INCONCLUSIVE


@dataclass(frozen=True)
class SemanticsConfig:
    engine: Engine = Engine.WEIGHTED_TRADITIONAL
    beta: float = 10.0
    epsilon: float | None = None

    def __post_init__(self):
        if isinstance(self.engine, str):
            object.__setattr__(self, "engine", Engine(self.engine))
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")

    def threshold(self, phi: Formula) -> float:
        """Soundness dead-band; defaults to ``ln(N_max) / beta`` for the smooth engine, else 0."""
        if self.epsilon is not None:
            return self.epsilon
        if self.engine is Engine.WEIGHTED_SMOOTH:
            return math.log(max_arity(phi)) / self.beta
        return 0.0


@dataclass
class RobustnessReport:
    value: float
    satisfied: Verdict
    trace: dict[str, list[float]] | None = None


# ---------------------------------------------------------------------------
# Aggregators. X has shape (K, n): K operands (or interval points) by n time
# steps; w holds K normalized weights. Each returns an (n,) array.
# ---------------------------------------------------------------------------


def _sign_weighted(X, w, sign):
    # ((1/2 - w) * sign(x) + 1/2) * x
    return ((0.5 - w)[:, None] * sign + 0.5) * X


def _nan_safe(f):
    def wrapped(*args, **kwargs):
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            return f(*args, **kwargs)

    return wrapped


class _Traditional:
    top = math.inf

    @staticmethod
    def conj(X, w):
        return X.min(axis=0)

    @staticmethod
    def disj(X, w):
        return X.max(axis=0)


class _WeightedTraditional:
    top = math.inf

    @staticmethod
    def conj(X, w):
        return _sign_weighted(X, w, np.sign(X)).min(axis=0)

    @classmethod
    def disj(cls, X, w):
        return -cls.conj(-X, w)


class _WeightedAGM:
    top = 1.0

    @staticmethod
    @_nan_safe
    def conj(X, w):
        positive = np.all(X > 0, axis=0)
        geometric = np.exp(np.sum(w[:, None] * np.log(np.where(X > 0, X, 1.0)), axis=0))
        arithmetic = np.sum(w[:, None] * np.minimum(X, 0.0), axis=0)
        return np.where(positive, geometric, arithmetic)

    @classmethod
    def disj(cls, X, w):
        return -cls.conj(-X, w)


@_nan_safe
def softmin(x, beta: float, axis: int = 0):
    """``-(1/beta) * log(sum(exp(-beta * x)))``, shifted by the true min for stability."""
    x = np.asarray(x, dtype=float)
    m = np.min(x, axis=axis, keepdims=True)
    finite = np.isfinite(m)
    shift = np.where(finite, m, 0.0)
    s = np.sum(np.exp(-beta * (x - shift)), axis=axis, keepdims=True)
    out = np.where(finite, shift - np.log(s) / beta, m)
    return np.squeeze(out, axis=axis)


@_nan_safe
def softmax(x, beta: float, axis: int = 0):
    """``sum(x * exp(beta * x)) / sum(exp(beta * x))``: an exp-weighted mean below the max."""
    x = np.asarray(x, dtype=float)
    M = np.max(x, axis=axis, keepdims=True)
    finite = np.isfinite(M)
    shift = np.where(finite, M, 0.0)
    e = np.exp(beta * (x - shift))
    num = np.sum(np.where(e > 0, x * e, 0.0), axis=axis, keepdims=True)
    out = np.where(finite, num / np.sum(e, axis=axis, keepdims=True), M)
    return np.squeeze(out, axis=axis)


class _WeightedSmooth:
    """Weighted aggregators with softmin/softmax and ``sign ~ tanh(beta x)``.

    ``conj_vjp``/``disj_vjp`` also return the vector-Jacobian product closure
    used by the reverse pass in :func:`smooth_gradient`.
    """

    top = math.inf

    def __init__(self, beta: float):
        self.beta = beta

    def conj(self, X, w):
        return self.conj_vjp(X, w)[0]

    def disj(self, X, w):
        return self.disj_vjp(X, w)[0]

    @_nan_safe
    def _factor(self, X, w, sign):
        b = self.beta
        th = np.tanh(b * X)
        c = sign * (0.5 - w)[:, None]
        Z = (c * th + 0.5) * X
        dZ = c * th + 0.5 + np.where(np.isfinite(X), c * b * (1.0 - th**2) * X, 0.0)
        return Z, dZ

    @_nan_safe
    def conj_vjp(self, X, w):
        Z, dZ = self._factor(X, w, 1.0)
        y = softmin(Z, self.beta)
        # d softmin / dZ_k = exp(-beta (Z_k - y)) = normalized exp weights
        s = np.where(np.isfinite(Z) & np.isfinite(y), np.exp(-self.beta * (Z - y)), 0.0)

        def vjp(g):
            return g[None, :] * s * np.where(s > 0, dZ, 0.0)

        return y, vjp

    @_nan_safe
    def disj_vjp(self, X, w):
        Z, dZ = self._factor(X, w, -1.0)
        y = softmax(Z, self.beta)
        M = np.max(Z, axis=0)
        e = np.exp(self.beta * (Z - np.where(np.isfinite(M), M, 0.0)))
        ok = np.isfinite(Z) & np.isfinite(y)
        s = np.where(ok, e / np.sum(e, axis=0), 0.0)
        dy = np.where(ok, s * (1.0 + self.beta * (Z - y)), 0.0)

        def vjp(g):
            return g[None, :] * dy * np.where(dy != 0, dZ, 0.0)

        return y, vjp


def _aggregator(cfg: SemanticsConfig):
    return {
        Engine.TRADITIONAL: _Traditional,
        Engine.WEIGHTED_TRADITIONAL: _WeightedTraditional,
        Engine.WEIGHTED_AGM: _WeightedAGM,
        Engine.WEIGHTED_SMOOTH: _WeightedSmooth(cfg.beta),
    }[cfg.engine]


# ---------------------------------------------------------------------------
# Shared recursion
# ---------------------------------------------------------------------------


def _operands(node: Formula, child_values: Sequence[np.ndarray], n: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack the values a node aggregates into (K, n) with their normalized weights."""
    if isinstance(node, _NAry):
        return np.stack([v[:n] for v in child_values]), normalize(node.weights)
    (v,) = child_values
    a = node.interval.a
    K = len(node.interval)
    X = np.stack([v[a + k : a + k + n] for k in range(K)])
    return X, normalize(node.weight.realize(node.interval))


def _is_conj(node: Formula) -> bool:
    return isinstance(node, (And, Always))


def _evaluate(phi: Formula, signal: Signal, agg, trace=None, path: str = "") -> np.ndarray:
    n = len(signal) - horizon(phi)
    if isinstance(phi, Predicate):
        out = phi.robustness(signal)
    elif isinstance(phi, Top):
        out = np.full(n, agg.top)
    elif isinstance(phi, Bottom):
        out = np.full(n, -agg.top)
    elif isinstance(phi, Not):
        out = -_evaluate(phi.sub, signal, agg, trace, _child(path, 0))
    elif isinstance(phi, (_NAry, _Temporal)):
        kids = [_evaluate(k, signal, agg, trace, _child(path, i)) for i, k in enumerate(phi.children)]
        X, w = _operands(phi, kids, n)
        if X.shape[0] == 1:
            # a single aggregated value passes through unchanged
            out = X[0]
        else:
            out = agg.conj(X, w) if _is_conj(phi) else agg.disj(X, w)
    else:
        raise TypeError(f"not a formula: {phi!r}")
    if trace is not None:
        trace[path or "root"] = [float(v) for v in out]
    return out


def _child(path: str, i: int) -> str:
    return f"{path}.{i}" if path else str(i)


def _check_time(phi: Formula, signal: Signal, t: int) -> None:
    h = horizon(phi)
    if t < 0 or t + h > signal.last_index:
        raise HorizonExceedsSignal(
            f"evaluating at t={t} needs samples up to {t + h}, signal ends at {signal.last_index}"
        )


def robustness(phi: Formula, signal: Signal, t: int = 0, cfg: SemanticsConfig | None = None) -> float:
    cfg = cfg or SemanticsConfig()
    _check_time(phi, signal, t)
    if cfg.engine is Engine.TRADITIONAL:
        phi = strip_weights(phi)
    return float(_evaluate(phi, signal, _aggregator(cfg))[t])


def rob_traditional(phi: Formula, signal: Signal, t: int = 0) -> float:
    """Min/max robustness of the unweighted formula."""
    return robustness(phi, signal, t, SemanticsConfig(Engine.TRADITIONAL))


def rob_weighted_traditional(phi: Formula, signal: Signal, t: int = 0) -> float:
    return robustness(phi, signal, t, SemanticsConfig(Engine.WEIGHTED_TRADITIONAL))


def rob_weighted_agm(phi: Formula, signal: Signal, t: int = 0) -> float:
    return robustness(phi, signal, t, SemanticsConfig(Engine.WEIGHTED_AGM))


def rob_weighted_smooth(phi: Formula, signal: Signal, t: int = 0, beta: float = 10.0) -> float:
    return robustness(phi, signal, t, SemanticsConfig(Engine.WEIGHTED_SMOOTH, beta=beta))


def robustness_trace(
    phi: Formula, signal: Signal, cfg: SemanticsConfig | None = None
) -> dict[str, list[float]]:
    """Per-node robustness keyed by AST path ("root", "0", "0.1", ...).

    Each entry lists the node's value at t = 0, 1, ... for every time the node
    is defined on ``signal``.
    """
    cfg = cfg or SemanticsConfig()
    _check_time(phi, signal, 0)
    if cfg.engine is Engine.TRADITIONAL:
        phi = strip_weights(phi)
    trace: dict[str, list[float]] = {}
    _evaluate(phi, signal, _aggregator(cfg), trace)
    return trace


def satisfies(phi: Formula, signal: Signal, t: int = 0, cfg: SemanticsConfig | None = None) -> Verdict:
    """Boolean verdict from the traditional robustness of the unweighted formula.

    Values inside ``[-epsilon, epsilon]`` are inconclusive.
    """
    cfg = cfg or SemanticsConfig()
    return Verdict.from_value(rob_traditional(phi, signal, t), cfg.threshold(phi))


def monitor(
    phi: Formula, signal: Signal, t: int = 0, cfg: SemanticsConfig | None = None, trace: bool = False
) -> RobustnessReport:
    cfg = cfg or SemanticsConfig()
    value = robustness(phi, signal, t, cfg)
    report = RobustnessReport(value, Verdict.from_value(value, cfg.threshold(phi)))
    if trace:
        report.trace = robustness_trace(phi, signal, cfg)
    return report


def rank_signals(
    phi: Formula, signals: Sequence[Signal], cfg: SemanticsConfig | None = None, t: int = 0
) -> list[tuple[int, float]]:
    """``(index, robustness)`` pairs sorted by descending robustness; ties keep input order."""
    values = [robustness(phi, s, t, cfg) for s in signals]
    order = sorted(range(len(values)), key=lambda i: -values[i])
    return [(i, values[i]) for i in order]


# ---------------------------------------------------------------------------
# Reverse pass for the smooth engine
# ---------------------------------------------------------------------------


def smooth_gradient(phi: Formula, signal: Signal, t: int = 0, beta: float = 10.0) -> tuple[float, np.ndarray]:
    """Smooth robustness at ``t`` and its gradient w.r.t. every signal sample.

    The gradient has the shape of ``signal.samples``. Boolean-mode predicates
    are piecewise constant and contribute zero.
    """
    _check_time(phi, signal, t)
    agg = _WeightedSmooth(beta)
    grad = np.zeros(signal.samples.shape)
    values, backward = _forward(phi, signal, agg, grad)
    seed = np.zeros_like(values)
    seed[t] = 1.0
    backward(seed)
    return float(values[t]), grad


def _forward(phi: Formula, signal: Signal, agg: _WeightedSmooth, grad: np.ndarray):
    n = len(signal) - horizon(phi)
    if isinstance(phi, Predicate):
        values = phi.robustness(signal)
        if isinstance(phi.mode, Boolean):
            return values, lambda g: None
        cols = [(signal.index(name), coef * phi.mode.scale) for name, coef in phi.expr.terms]

        def backward(g):
            for idx, coef in cols:
                grad[: g.size, idx] += coef * g

        return values, backward
    if isinstance(phi, (Top, Bottom)):
        return np.full(n, agg.top if isinstance(phi, Top) else -agg.top), lambda g: None
    if isinstance(phi, Not):
        v, back = _forward(phi.sub, signal, agg, grad)
        return -v, lambda g: back(-g)

    kids = [_forward(k, signal, agg, grad) for k in phi.children]
    X, w = _operands(phi, [v for v, _ in kids], n)
    if X.shape[0] == 1:
        y, vjp = X[0], lambda g: g[None, :]
    else:
        y, vjp = agg.conj_vjp(X, w) if _is_conj(phi) else agg.disj_vjp(X, w)

    def backward(g):
        dX = vjp(g)
        if isinstance(phi, _NAry):
            for k, (v, back) in enumerate(kids):
                gk = np.zeros_like(v)
                gk[:n] = dX[k]
                back(gk)
        else:
            (v, back), = kids
            gv = np.zeros_like(v)
            a = phi.interval.a
            for k in range(dX.shape[0]):
                gv[a + k : a + k + n] += dX[k]
            back(gv)

    return y, backward

