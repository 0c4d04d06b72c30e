import itertools

import numpy as np
import pytest

from wstl.core import ConstWeight, DiscountWeight, Signal, TimeInterval
from wstl.formula import (
    AffineExpr,
    Always,
    And,
    Boolean,
    DegenerateBox,
    Eventually,
    Metric,
    Not,
    Or,
    Predicate,
    Top,
    aggregation_depth,
    box_region,
    horizon,
    max_arity,
    predicates,
    strip_weights,
    walk,
    with_predicate_mode,
)
from wstl.semantics import rob_traditional

S_GE_0 = Predicate(AffineExpr.of({"s": 1.0}))


def test_affine_merges_terms_and_evaluates():
    e = AffineExpr((("x", 1.0), ("y", 2.0), ("x", 3.0)), -1.0)
    assert e.coefficients == {"x": 4.0, "y": 2.0}
    sig = Signal(("x", "y"), np.array([[1.0, 0.5], [0.0, 0.0]]))
    np.testing.assert_allclose(e.evaluate(sig), [4.0, -1.0])
    np.testing.assert_allclose(e.negated().evaluate(sig), [-4.0, 1.0])


def test_affine_requires_a_nonzero_coefficient():
    with pytest.raises(ValueError):
        AffineExpr((("x", 0.0),), 1.0)


def test_predicate_modes():
    sig = Signal(("s",), np.array([[-0.3], [0.0], [2.0]]))
    e = AffineExpr.of({"s": 1.0})
    np.testing.assert_allclose(Predicate(e).robustness(sig), [-0.3, 0.0, 2.0])
    np.testing.assert_allclose(Predicate(e, Metric(0.5)).robustness(sig), [-0.15, 0.0, 1.0])
    np.testing.assert_allclose(Predicate(e, Boolean(1.0)).robustness(sig), [-1.0, 1.0, 1.0])


@pytest.mark.parametrize(
    "phi,expected",
    [
        (Eventually((0, 3), S_GE_0), 3),
        (Always((0, 7), Eventually((0, 3), S_GE_0)), 10),
        (And((S_GE_0, Always((2, 4), S_GE_0))), 4),
        (Not(Eventually((1, 1), S_GE_0)), 1),
        (S_GE_0, 0),
    ],
)
def test_horizon(phi, expected):
    assert horizon(phi) == expected


def test_weights_default_to_one_and_are_validated():
    a = And((S_GE_0, S_GE_0))
    assert a.weights == (1.0, 1.0) and not a.is_weighted
    assert And((S_GE_0, S_GE_0), (4, 2)).is_weighted
    with pytest.raises(ValueError):
        And((S_GE_0, S_GE_0), (1.0,))
    with pytest.raises(ValueError):
        Or((S_GE_0, S_GE_0), (1.0, -2.0))
    with pytest.raises(ValueError):
        Always((0, 2), S_GE_0, DiscountWeight(-1.0))


def test_strip_weights():
    phi = Or((Always((0, 3), S_GE_0, DiscountWeight(0.5)), Not(S_GE_0)), (10, 1))
    bare = strip_weights(phi)
    assert bare == Or((Always((0, 3), S_GE_0), Not(S_GE_0)))
    assert bare.subs[0].weight == ConstWeight(1.0)
    assert strip_weights(bare) == bare


def test_structural_queries():
    phi = And((Always((0, 4), S_GE_0), Or((S_GE_0, Not(S_GE_0), Top()))))
    paths = [p for p, _ in walk(phi)]
    assert paths[0] == () and (1, 1, 0) in paths
    assert max_arity(phi) == 5
    assert aggregation_depth(phi) == 2
    assert len(predicates(phi)) == 3
    boolean = with_predicate_mode(phi, Boolean())
    assert all(isinstance(p.mode, Boolean) for p in predicates(boolean))


def test_operator_sugar():
    assert (S_GE_0 & S_GE_0) == And((S_GE_0, S_GE_0))
    assert (S_GE_0 | S_GE_0) == Or((S_GE_0, S_GE_0))
    assert ~S_GE_0 == Not(S_GE_0)


def test_box_region_matches_membership_on_a_grid():
    box = box_region("R", [1.0, -1.0], [3.0, 2.0], ("x", "y"))
    for x, y in itertools.product(np.linspace(0, 4, 17), np.linspace(-2, 3, 21)):
        sig = Signal(("x", "y"), np.array([[x, y]]))
        r = rob_traditional(box, sig)
        inside = 1 <= x <= 3 and -1 <= y <= 2
        if inside:
            assert r >= 0
        else:
            assert r < 0
        # distance to the nearest face along an axis
        assert r == pytest.approx(min(x - 1, 3 - x, y + 1, 2 - y))


def test_box_region_rejects_degenerate_boxes():
    with pytest.raises(DegenerateBox):
        box_region("R", [1.0], [1.0], ("x",))
    with pytest.raises(DegenerateBox):
        box_region("R", [0.0, 0.0], [1.0], ("x", "y"))


def test_interval_coercion():
    assert Always((1, 6), S_GE_0).interval == TimeInterval(1, 6)
