"""wSTL abstract syntax tree and structural utilities."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Sequence, Union

import numpy as np

from .core import UNIT, ConstWeight, TimeInterval, WeightFn, WstlError, NonPositiveWeight, LengthMismatch


class DegenerateBox(WstlError, ValueError):
    pass


class Formula:
    """Base class of all AST nodes."""

    __slots__ = ()

    @property
    def children(self) -> tuple["Formula", ...]:
        return ()

    def __invert__(self) -> "Not":
        return Not(self)

    def __and__(self, other: "Formula") -> "And":
        return And((self, other))

    def __or__(self, other: "Formula") -> "Or":
        return Or((self, other))

    def __str__(self) -> str:
        from .parser import to_text

        return to_text(self)


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bottom(Formula):
    pass


@dataclass(frozen=True)
class AffineExpr:
    """``sum_k coef_k * S[name_k] + offset``; a predicate asserts it is ``>= 0``."""

    terms: tuple[tuple[str, float], ...]
    offset: float = 0.0

    def __post_init__(self):
        merged: dict[str, float] = {}
        for name, coef in self.terms:
            merged[name] = merged.get(name, 0.0) + float(coef)
        terms = tuple((n, c) for n, c in merged.items() if c != 0.0)
        if not terms:
            raise ValueError("affine expression needs at least one nonzero coefficient")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def of(cls, coefficients: Mapping[str, float], offset: float = 0.0) -> "AffineExpr":
        return cls(tuple(coefficients.items()), offset)

    @property
    def coefficients(self) -> dict[str, float]:
        return dict(self.terms)

    def negated(self) -> "AffineExpr":
        return AffineExpr(tuple((n, -c) for n, c in self.terms), -self.offset)

    def evaluate(self, signal) -> np.ndarray:
        """Value at every time step of ``signal``."""
        out = np.full(len(signal), self.offset)
        for name, coef in self.terms:
            out = out + coef * signal.column(name)
        return out


@dataclass(frozen=True)
class Metric:
    """Predicate robustness is ``scale * l(S(t))``."""

    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"metric scale must be positive, got {self.scale}")


@dataclass(frozen=True)
class Boolean:
    """Predicate robustness is ``+c`` when ``l(S(t)) >= 0`` and ``-c`` otherwise."""

    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"boolean magnitude must be positive, got {self.c}")


PredicateMode = Union[Metric, Boolean]


@dataclass(frozen=True)
class Predicate(Formula):
    expr: AffineExpr
    mode: PredicateMode = Metric()

    def robustness(self, signal) -> np.ndarray:
        values = self.expr.evaluate(signal)
        if isinstance(self.mode, Boolean):
            return np.where(values >= 0, self.mode.c, -self.mode.c)
        return self.mode.scale * values


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula

    @property
    def children(self):
        return (self.sub,)


def _operand_weights(weights, n: int) -> tuple[float, ...]:
    if weights is None:
        return (1.0,) * n
    if isinstance(weights, WeightFn):
        return tuple(float(v) for v in weights.realize(n))
    values = tuple(float(v) for v in weights)
    if len(values) != n:
        raise LengthMismatch(f"{len(values)} weights given for {n} operands")
    if any(not v > 0 or v == float("inf") for v in values):
        raise NonPositiveWeight(f"operand weights must be positive, got {list(values)}")
    return values


@dataclass(frozen=True)
class _NAry(Formula):
    subs: tuple[Formula, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        subs = tuple(self.subs)
        if len(subs) < 2:
            raise ValueError(f"{type(self).__name__} needs at least two operands, got {len(subs)}")
        object.__setattr__(self, "subs", subs)
        object.__setattr__(self, "weights", _operand_weights(self.weights, len(subs)))

    @property
    def children(self):
        return self.subs

    @property
    def is_weighted(self) -> bool:
        return any(w != 1.0 for w in self.weights)


class And(_NAry):
    pass


class Or(_NAry):
    pass


@dataclass(frozen=True)
class _Temporal(Formula):
    interval: TimeInterval
    sub: Formula
    weight: WeightFn = UNIT

    def __post_init__(self):
        if isinstance(self.interval, tuple):
            object.__setattr__(self, "interval", TimeInterval(*self.interval))
        # validate eagerly so a bad weight function fails at construction time
        self.weight.realize(self.interval)

    @property
    def children(self):
        return (self.sub,)

    @property
    def is_weighted(self) -> bool:
        return not self.weight.is_unit


class Always(_Temporal):
    pass


class Eventually(_Temporal):
    pass


# ---------------------------------------------------------------------------
# Structural utilities
# ---------------------------------------------------------------------------


def horizon(phi: Formula) -> int:
    """Number of samples past ``t`` that evaluating ``phi`` at ``t`` reads."""
    if isinstance(phi, _Temporal):
        return phi.interval.b + horizon(phi.sub)
    kids = phi.children
    return max((horizon(k) for k in kids), default=0)


def strip_weights(phi: Formula) -> Formula:
    """The same formula with every weight replaced by 1."""
    if isinstance(phi, Not):
        return Not(strip_weights(phi.sub))
    if isinstance(phi, _NAry):
        return type(phi)(tuple(strip_weights(s) for s in phi.subs))
    if isinstance(phi, _Temporal):
        return type(phi)(phi.interval, strip_weights(phi.sub), UNIT)
    return phi


def walk(phi: Formula, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], Formula]]:
    """Pre-order traversal yielding ``(path, node)``; the path lists child indices."""
    yield path, phi
    for i, kid in enumerate(phi.children):
        yield from walk(kid, path + (i,))


def max_arity(phi: Formula) -> int:
    """Largest number of values any single node aggregates (operands or interval points)."""
    best = 1
    for _, node in walk(phi):
        if isinstance(node, _NAry):
            best = max(best, len(node.subs))
        elif isinstance(node, _Temporal):
            best = max(best, len(node.interval))
    return best


def aggregation_depth(phi: Formula) -> int:
    """Nesting depth counted in aggregating nodes (And/Or/G/F) only."""
    below = max((aggregation_depth(k) for k in phi.children), default=0)
    return below + (1 if isinstance(phi, (_NAry, _Temporal)) else 0)


def predicates(phi: Formula) -> list[Predicate]:
    return [node for _, node in walk(phi) if isinstance(node, Predicate)]


def with_predicate_mode(phi: Formula, mode: PredicateMode) -> Formula:
    """Rebuild ``phi`` with every predicate switched to ``mode``."""
    if isinstance(phi, Predicate):
        return replace(phi, mode=mode)
    if isinstance(phi, Not):
        return Not(with_predicate_mode(phi.sub, mode))
    if isinstance(phi, _NAry):
        return type(phi)(tuple(with_predicate_mode(s, mode) for s in phi.subs), phi.weights)
    if isinstance(phi, _Temporal):
        return type(phi)(phi.interval, with_predicate_mode(phi.sub, mode), phi.weight)
    return phi


def box_region(
    name: str,
    lo: Sequence[float],
    hi: Sequence[float],
    components: Sequence[str],
    mode: PredicateMode = Metric(),
) -> And:
    """Membership in the axis-aligned box ``[lo, hi]`` as a conjunction of half-planes.

    ``name`` labels the region in error messages only.
    """
    if not (len(lo) == len(hi) == len(components)) or not components:
        raise DegenerateBox(f"region {name!r}: lo, hi and components must have equal non-zero length")
    preds: list[Formula] = []
    for comp, l, h in zip(components, lo, hi):
        if not l < h:
            raise DegenerateBox(f"region {name!r}: need lo < hi on {comp!r}, got [{l}, {h}]")
        preds.append(Predicate(AffineExpr(((comp, 1.0),), -float(l)), mode))
        preds.append(Predicate(AffineExpr(((comp, -1.0),), float(h)), mode))
    return And(tuple(preds))
