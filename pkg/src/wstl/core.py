"""Time, interval, signal and weight primitives."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np


class WstlError(Exception):
    """Base class for all library errors."""


class NonPositiveWeight(WstlError, ValueError):
    pass


class LengthMismatch(WstlError, ValueError):
    pass


class InvalidWeightFn(WstlError, ValueError):
    pass


class SignalError(WstlError, ValueError):
    pass


class CsvParseError(SignalError):
    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class RaggedRows(CsvParseError):
    pass


class EmptySignal(RaggedRows):
    pass


@dataclass(frozen=True)
class TimeInterval:
    """Closed integer interval ``[a, b]``; iterating yields ``a, a+1, ..., b``."""

    a: int
    b: int

    def __post_init__(self):
        if int(self.a) != self.a or int(self.b) != self.b:
            raise ValueError(f"interval bounds must be integers, got [{self.a}, {self.b}]")
        if not 0 <= self.a <= self.b:
            raise ValueError(f"invalid interval [{self.a}, {self.b}]: need 0 <= a <= b")

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.a, self.b + 1))

    def __len__(self) -> int:
        return self.b - self.a + 1

    def shift(self, t: int) -> "TimeInterval":
        return TimeInterval(self.a + t, self.b + t)

    def __str__(self) -> str:
        return f"[{self.a},{self.b}]"


# ---------------------------------------------------------------------------
# Weight functions
# ---------------------------------------------------------------------------

Domain = Union[int, TimeInterval]


def _points(domain: Domain) -> np.ndarray:
    # Operand counts are indexed 1..n so a discount starts at gamma**0.
    if isinstance(domain, TimeInterval):
        return np.arange(domain.a, domain.b + 1, dtype=float)
    n = int(domain)
    if n < 1:
        raise LengthMismatch(f"weight domain must have at least one point, got {n}")
    return np.arange(1, n + 1, dtype=float)


class WeightFn:
    """A positive weight function, realized eagerly on a discrete domain."""

    def _raw(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def realize(self, domain: Domain) -> np.ndarray:
        pts = _points(domain)
        values = np.asarray(self._raw(pts), dtype=float)
        if values.shape != pts.shape:
            raise LengthMismatch(f"{self} yields {values.size} weights, domain has {pts.size} points")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise NonPositiveWeight(f"{self} realizes non-positive weights {values.tolist()}")
        return values

    @property
    def is_unit(self) -> bool:
        return False


@dataclass(frozen=True)
class ConstWeight(WeightFn):
    c: float = 1.0

    def _raw(self, pts):
        if not self.c > 0:
            raise NonPositiveWeight(f"constant weight must be positive, got {self.c}")
        return np.full(pts.shape, float(self.c))

    @property
    def is_unit(self) -> bool:
        return self.c == 1.0


@dataclass(frozen=True)
class DiscountWeight(WeightFn):
    """``w(t) = gamma ** (t - 1)`` evaluated at every point of the domain."""

    gamma: float

    def _raw(self, pts):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise InvalidWeightFn(f"discount factor must be positive, got {self.gamma}")
        return float(self.gamma) ** (pts - 1.0)


@dataclass(frozen=True)
class VectorWeight(WeightFn):
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def _raw(self, pts):
        if len(self.values) != pts.size:
            raise LengthMismatch(
                f"explicit weight vector has {len(self.values)} entries, domain has {pts.size} points"
            )
        return np.array(self.values)


@dataclass(frozen=True)
class GaussianWeight(WeightFn):
    """Sum of gaussian bumps on a positive floor.

    ``w(t) = floor + amp * sum_k exp(-((t - c_k) / width_k) ** 2)``. A single
    width is broadcast to every center.
    """

    centers: tuple[float, ...]
    widths: tuple[float, ...]
    floor: float = 0.0
    amp: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))

    def _raw(self, pts):
        if not self.centers:
            raise InvalidWeightFn("gaussian weight needs at least one center")
        widths = self.widths
        if len(widths) == 1:
            widths = widths * len(self.centers)
        if len(widths) != len(self.centers):
            raise InvalidWeightFn("gaussian weight needs one width or one width per center")
        if any(w <= 0 for w in widths) or self.amp < 0 or self.floor < 0:
            raise InvalidWeightFn("gaussian widths must be positive; floor and amp non-negative")
        c = np.array(self.centers)[:, None]
        w = np.array(widths)[:, None]
        bumps = np.exp(-(((pts[None, :] - c) / w) ** 2)).sum(axis=0)
        return self.floor + self.amp * bumps


UNIT = ConstWeight(1.0)


def realize_weights(w: WeightFn, n: Domain) -> np.ndarray:
    """Realize ``w`` on ``n`` operands or on the points of an interval (not normalized)."""
    return w.realize(n)


def normalize(weights: Sequence[float]) -> np.ndarray:
    """Scale positive weights so they sum to one."""
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise LengthMismatch("cannot normalize an empty weight vector")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise NonPositiveWeight(f"weights must be strictly positive, got {w.tolist()}")
    # Divide by the max first: exact for uniform vectors and immune to the scale of w.
    w = w / w.max()
    return w / w.sum()


# ---------------------------------------------------------------------------
# Signals
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Signal:
    """Discrete-time trace with named components, sampled at t = 0..T."""

    components: tuple[str, ...]
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        comps = tuple(self.components)
        data = np.array(self.samples, dtype=float)
        if data.ndim == 1 and len(comps) == 1:
            data = data[:, None]
        if data.ndim != 2 or data.shape[1] != len(comps):
            raise SignalError(
                f"samples must have shape (T+1, {len(comps)}), got {np.shape(self.samples)}"
            )
        if data.shape[0] == 0:
            raise EmptySignal("signal has no samples")
        if len(set(comps)) != len(comps):
            raise SignalError(f"duplicate component names in {comps}")
        if not np.all(np.isfinite(data)):
            raise SignalError("signal samples must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "samples", data)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def last_index(self) -> int:
        return len(self) - 1

    def index(self, name: str) -> int:
        try:
            return self.components.index(name)
        except ValueError:
            raise SignalError(f"signal has no component {name!r} (has {list(self.components)})") from None

    def column(self, name: str) -> np.ndarray:
        return self.samples[:, self.index(name)]

    def __getitem__(self, t: int) -> np.ndarray:
        return self.samples[t]

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return self.components == other.components and np.array_equal(self.samples, other.samples)

    def __hash__(self):
        return hash((self.components, self.samples.tobytes()))

    @classmethod
    def from_columns(cls, **columns: Sequence[float]) -> "Signal":
        names = tuple(columns)
        return cls(names, np.column_stack([np.asarray(columns[n], dtype=float) for n in names]))


def signal_from_csv(text: str | io.TextIOBase) -> Signal:
    """Parse a header row of component names followed by one numeric row per time step."""
    if not isinstance(text, str):
        text = text.read()
    rows = [
        (lineno, row)
        for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1)
        if row and any(cell.strip() for cell in row)
    ]
    if not rows:
        raise EmptySignal("empty input: expected a header row")
    header_line, header = rows[0]
    names = [h.strip() for h in header]
    for col, name in enumerate(names, start=1):
        if not name:
            raise CsvParseError("empty component name", row=header_line, column=col)
    if len(rows) == 1:
        raise EmptySignal("no data rows after header", row=header_line)

    data = []
    for lineno, row in rows[1:]:
        if len(row) != len(names):
            raise RaggedRows(f"expected {len(names)} cells, got {len(row)}", row=lineno)
        values = []
        for col, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise CsvParseError(f"not a number: {cell.strip()!r}", row=lineno, column=col) from None
            if not math.isfinite(v):
                raise CsvParseError(f"non-finite value {cell.strip()!r}", row=lineno, column=col)
            values.append(v)
        data.append(values)
    return Signal(tuple(names), np.array(data))


def signal_to_csv(signal: Signal) -> str:
    """Inverse of :func:`signal_from_csv`; floats are written with ``repr`` precision."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(signal.components)
    for row in signal.samples:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
