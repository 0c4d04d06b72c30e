"""Weighted Signal Temporal Logic: parsing, robustness and control synthesis."""

from .core import (
    ConstWeight,
    DiscountWeight,
    GaussianWeight,
    Signal,
    TimeInterval,
    VectorWeight,
    WeightFn,
    WstlError,
    normalize,
    realize_weights,
    signal_from_csv,
    signal_to_csv,
)
from .formula import (
    AffineExpr,
    Always,
    And,
    Boolean,
    Bottom,
    Eventually,
    Formula,
    Metric,
    Not,
    Or,
    Predicate,
    Top,
    box_region,
    horizon,
    strip_weights,
)
from .parser import ParseError, parse, to_text
from .semantics import (
    Engine,
    HorizonExceedsSignal,
    SemanticsConfig,
    Verdict,
    monitor,
    rank_signals,
    rob_traditional,
    rob_weighted_agm,
    rob_weighted_smooth,
    rob_weighted_traditional,
    robustness,
    satisfies,
)

__version__ = "0.1.0"
