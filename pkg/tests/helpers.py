"""Independent reference semantics and random instance generators for the tests.

The reference evaluator recomputes robustness one time step at a time with
plain Python arithmetic. It shares nothing with the vectorized engines except
the AST classes.
"""

import math

import numpy as np

from wstl.core import ConstWeight, DiscountWeight, GaussianWeight, Signal, TimeInterval, VectorWeight
from wstl.formula import (
    AffineExpr,
    Always,
    And,
    Boolean,
    Bottom,
    Eventually,
    Metric,
    Not,
    Or,
    Predicate,
    Top,
    horizon,
)

COMPONENTS = ("x", "y")


def _pred_value(pred, signal, t):
    row = dict(zip(signal.components, signal.samples[t]))
    l = pred.expr.offset + sum(c * row[n] for n, c in pred.expr.terms)
    if isinstance(pred.mode, Boolean):
        return pred.mode.c if l >= 0 else -pred.mode.c
    return pred.mode.scale * l


def _sign(x):
    return (x > 0) - (x < 0)


def _softmin(zs, beta):
    m = min(zs)
    if math.isinf(m):
        return m
    # +inf operands carry zero weight
    return m - math.log(sum(math.exp(-beta * (z - m)) for z in zs if z != math.inf)) / beta


def _softmax(zs, beta):
    m = max(zs)
    if math.isinf(m):
        return m
    zs = [z for z in zs if z != -math.inf]
    e = [math.exp(beta * (z - m)) for z in zs]
    return sum(z * w for z, w in zip(zs, e)) / sum(e)


def _aggregate(engine, conj, xs, ws, beta):
    if len(xs) == 1:
        return xs[0]
    total = sum(ws)
    ps = [w / total for w in ws]
    if engine == "traditional":
        return min(xs) if conj else max(xs)
    if engine == "weighted-traditional":
        if conj:
            # satisfied operand scaled by 1 - p, violated by p
            return min((1 - p) * x if x > 0 else p * x for x, p in zip(xs, ps))
        return max(p * x if x > 0 else (1 - p) * x for x, p in zip(xs, ps))
    if engine == "weighted-agm":
        if conj:
            if all(x > 0 for x in xs):
                return math.prod(x**p for x, p in zip(xs, ps))
            return sum(p * min(x, 0.0) for x, p in zip(xs, ps))
        if all(x < 0 for x in xs):
            return -math.prod((-x) ** p for x, p in zip(xs, ps))
        return sum(p * max(x, 0.0) for x, p in zip(xs, ps))
    if engine == "weighted-smooth":
        if conj:
            zs = [((0.5 - p) * math.tanh(beta * x) + 0.5) * x for x, p in zip(xs, ps)]
            return _softmin(zs, beta)
        zs = [(-(0.5 - p) * math.tanh(beta * x) + 0.5) * x for x, p in zip(xs, ps)]
        return _softmax(zs, beta)
    raise ValueError(engine)


def _weight_at(w, k, interval):
    # each family evaluated directly at one interval point k
    if isinstance(w, ConstWeight):
        return w.c
    if isinstance(w, DiscountWeight):
        return w.gamma ** (k - 1)
    if isinstance(w, VectorWeight):
        return w.values[k - interval.a]
    if isinstance(w, GaussianWeight):
        widths = w.widths * len(w.centers) if len(w.widths) == 1 else w.widths
        return w.floor + w.amp * sum(math.exp(-(((k - c) / s) ** 2)) for c, s in zip(w.centers, widths))
    raise TypeError(w)


def reference(phi, signal, t=0, engine="weighted-traditional", beta=10.0):
    top = 1.0 if engine == "weighted-agm" else math.inf
    if isinstance(phi, Predicate):
        return _pred_value(phi, signal, t)
    if isinstance(phi, Top):
        return top
    if isinstance(phi, Bottom):
        return -top
    if isinstance(phi, Not):
        return -reference(phi.sub, signal, t, engine, beta)
    if isinstance(phi, (And, Or)):
        xs = [reference(s, signal, t, engine, beta) for s in phi.subs]
        ws = list(phi.weights) if engine != "traditional" else [1.0] * len(xs)
        return _aggregate(engine, isinstance(phi, And), xs, ws, beta)
    I = phi.interval
    xs = [reference(phi.sub, signal, t + k, engine, beta) for k in range(I.a, I.b + 1)]
    if engine == "traditional":
        ws = [1.0] * len(xs)
    else:
        ws = [_weight_at(phi.weight, k, I) for k in range(I.a, I.b + 1)]
    return _aggregate(engine, isinstance(phi, Always), xs, ws, beta)


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------


def random_predicate(rng, components=COMPONENTS, positive=False):
    k = int(rng.integers(1, len(components) + 1))
    names = rng.choice(components, size=k, replace=False)
    terms = []
    for n in names:
        c = float(np.round(rng.uniform(0.2, 2.0), 3))
        if not positive and rng.random() < 0.5:
            c = -c
        terms.append((str(n), c))
    return Predicate(AffineExpr(tuple(terms), float(np.round(rng.uniform(-2, 2), 3))))


def random_weights(rng, n, weighted=True):
    if not weighted or rng.random() < 0.3:
        return None
    return tuple(float(np.round(rng.uniform(0.1, 5.0), 3)) for _ in range(n))


def random_temporal_weight(rng, interval, weighted=True):
    if not weighted:
        return ConstWeight(1.0)
    r = rng.random()
    if r < 0.25:
        return ConstWeight(1.0)
    if r < 0.4:
        return ConstWeight(float(np.round(rng.uniform(0.1, 5), 3)))
    if r < 0.65:
        return DiscountWeight(float(np.round(rng.uniform(0.1, 1.5), 3)))
    if r < 0.9:
        return VectorWeight(tuple(float(np.round(rng.uniform(0.1, 5), 3)) for _ in range(len(interval))))
    centers = tuple(float(c) for c in rng.integers(interval.a, interval.b + 1, size=2))
    return GaussianWeight(centers, (float(np.round(rng.uniform(0.3, 2), 3)),), 0.2, 3.0)


def random_formula(
    rng,
    depth=4,
    weighted=True,
    components=COMPONENTS,
    allow_not=True,
    allow_constants=True,
    positive_predicates=False,
):
    """A random AST of nesting depth at most ``depth``."""
    leaf_p = 0.25 if depth > 0 else 1.0
    if rng.random() < leaf_p:
        if allow_constants and rng.random() < 0.05:
            return Top() if rng.random() < 0.5 else Bottom()
        return random_predicate(rng, components, positive_predicates)
    kinds = ["and", "or", "G", "F"] + (["not"] if allow_not else [])
    kind = kinds[int(rng.integers(len(kinds)))]
    sub = lambda: random_formula(
        rng, depth - 1, weighted, components, allow_not, allow_constants, positive_predicates
    )
    if kind == "not":
        return Not(sub())
    if kind in ("and", "or"):
        n = int(rng.integers(2, 4))
        cls = And if kind == "and" else Or
        return cls(tuple(sub() for _ in range(n)), random_weights(rng, n, weighted))
    a = int(rng.integers(0, 4))
    b = a + int(rng.integers(0, 4))
    interval = TimeInterval(a, b)
    cls = Always if kind == "G" else Eventually
    return cls(interval, sub(), random_temporal_weight(rng, interval, weighted))


def random_signal(rng, phi, max_len=30, components=COMPONENTS, scale=2.0):
    h = horizon(phi)
    n = min(max_len, h + 1 + int(rng.integers(0, 6)))
    n = max(n, h + 1)
    return Signal(components, np.round(rng.uniform(-scale, scale, size=(n, len(components))), 4))


# ---------------------------------------------------------------------------
# Worked examples shared by several test modules
# ---------------------------------------------------------------------------

TABLE_SIGNALS = {
    "S4": (0.0, 0.0, 0.5, 1.0),
    "S5": (1.0, 0.5, 0.0, 0.0),
    "S6": (0.0, 1.0, 0.0, 0.5),
}

# weighted-AGM value of F[0,3]{disc gamma}(s >= 0) per signal and gamma
TABLE_AGM = {
    "S4": {0.9: 0.330, 0.5: 0.133, 0.1: 0.005},
    "S5": {0.9: 0.420, 0.5: 0.666, 0.1: 0.945},
    "S6": {0.9: 0.367, 0.5: 0.300, 0.1: 0.090},
}


def table_signal(name):
    return Signal(("s",), np.array(TABLE_SIGNALS[name]).reshape(-1, 1))


def table_formula(gamma):
    return Eventually((0, 3), Predicate(AffineExpr.of({"s": 1.0})), DiscountWeight(gamma))


def car_formula(p=(1.0, 1.0, 1.0)):
    """Reach Green, avoid Blocked and keep in the lane, with Boolean predicates."""
    from wstl.formula import box_region

    green = box_region("Green", [7, 0], [8, 2], ("x", "y"), Boolean())
    blocked = box_region("Blocked", [3, 0], [5, 2], ("x", "y"), Boolean())
    lane = Predicate(AffineExpr.of({"y": -1.0}, 2.0), Boolean())
    phi1 = Eventually((0, 7), green)
    phi2 = Always((0, 7), Not(blocked))
    phi3 = Always((0, 7), lane)
    return And((phi1, phi2, phi3), tuple(p)), (phi1, phi2, phi3)


def car_trajectory(detour):
    x = 0.5 + np.arange(8.0)
    y = np.ones(8)
    if detour:
        y[3:5] = 3.0
    return Signal(("x", "y"), np.column_stack([x, y]))
