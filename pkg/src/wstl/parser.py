"""Text grammar for wSTL formulae.

::

    formula   := chain
    chain     := unary ( "&&" wlist? unary ( "&&" unary )* )?
               | unary ( "||" wlist? unary ( "||" unary )* )?
    unary     := "!" unary | temporal | atom
    temporal  := ("G" | "F") interval wspec? unary
    atom      := "TRUE" | "FALSE" | "(" formula ")" | predicate
    predicate := affine (">=" | "<=" | ">" | "<") number pmode?
    affine    := "-"? term (("+" | "-") term)*
    term      := number ("*" ident)? | ident
    interval  := "[" int "," int "]"
    wlist     := "[" number ("," number)* "]"
    wspec     := "{" ( "const" number | "disc" number | "vec" wlist
                     | "gauss" "c" "=" wlist "w" "=" wlist
                       ("floor" "=" number)? ("amp" "=" number)? ) "}"
    pmode     := "{" ( "bool" number? | "scale" number ) "}"

A chain of one operator forms a single n-ary node whose weight list, if any,
follows the first operator. ``&&`` and ``||`` cannot share a level without
parentheses. ``#`` starts a comment running to the end of the line.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum

from .core import (
    ConstWeight,
    DiscountWeight,
    GaussianWeight,
    TimeInterval,
    VectorWeight,
    WeightFn,
    WstlError,
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
    _NAry,
    _Temporal,
)

__all__ = ["ParseError", "ErrorKind", "SourceSpan", "parse", "to_text"]


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int
    line: int
    column: int


class ErrorKind(Enum):
    UNEXPECTED_TOKEN = "UnexpectedToken"
    BAD_WEIGHT = "BadWeight"
    BAD_INTERVAL = "BadInterval"
    BAD_PREDICATE = "BadPredicate"


class ParseError(WstlError, ValueError):
    def __init__(self, kind: ErrorKind, span: SourceSpan, message: str):
        self.kind = kind
        self.span = span
        self.message = message
        super().__init__(f"{span.line}:{span.column}: {kind.value}: {message}")


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>&&|\|\||>=|<=|[<>!()\[\]{},+\-*=])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"G", "F", "TRUE", "FALSE"}


@dataclass(frozen=True)
class _Token:
    kind: str  # "number" | "ident" | "op" | "eof"
    text: str
    start: int
    end: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(
                ErrorKind.UNEXPECTED_TOKEN,
                _span(text, pos, pos + 1),
                f"unexpected character {text[pos]!r}; expected an operator, number or identifier",
            )
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), m.start(), m.end()))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text), len(text)))
    return tokens


def _span(text: str, start: int, end: int) -> SourceSpan:
    line = text.count("\n", 0, start) + 1
    column = start - (text.rfind("\n", 0, start) + 1) + 1
    return SourceSpan(start, end, line, column)


def _describe(tok: _Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    # -- token helpers ----------------------------------------------------

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "ident") and self.tok.text == text

    def error(self, kind: ErrorKind, message: str, start: int | None = None, end: int | None = None):
        tok = self.tok
        s = tok.start if start is None else start
        e = tok.end if end is None else end
        return ParseError(kind, _span(self.text, s, e), message)

    def expect(self, text: str, what: str | None = None) -> _Token:
        if not self.at(text):
            raise self.error(
                ErrorKind.UNEXPECTED_TOKEN,
                f"expected {what or repr(text)}, found {_describe(self.tok)}",
            )
        return self.advance()

    def number(self, kind: ErrorKind, what: str = "a number") -> float:
        start = self.tok.start
        sign = 1.0
        if self.at("-"):
            self.advance()
            sign = -1.0
        if self.tok.kind != "number":
            raise self.error(kind, f"expected {what}, found {_describe(self.tok)}", start=start)
        return sign * float(self.advance().text)

    def weight(self) -> tuple[float, int, int]:
        start = self.tok.start
        value = self.number(ErrorKind.BAD_WEIGHT, "a positive weight")
        end = self.tokens[self.i - 1].end
        if not (value > 0 and math.isfinite(value)):
            raise self.error(ErrorKind.BAD_WEIGHT, f"weights must be positive, got {value:g}", start, end)
        return value, start, end

    def weight_list(self) -> tuple[list[float], int, int]:
        start = self.expect("[", "'[' opening a weight list").start
        values = [self.weight()[0]]
        while self.at(","):
            self.advance()
            values.append(self.weight()[0])
        end = self.expect("]", "',' or ']' in weight list").end
        return values, start, end

    # -- grammar ----------------------------------------------------------

    def parse(self) -> Formula:
        phi = self.formula()
        if self.tok.kind != "eof":
            raise self.error(
                ErrorKind.UNEXPECTED_TOKEN,
                f"expected '&&', '||' or end of input, found {_describe(self.tok)}",
            )
        return phi

    def formula(self) -> Formula:
        first = self.unary()
        if not (self.at("&&") or self.at("||")):
            return first
        op = self.tok.text
        self.advance()
        weights = None
        if self.at("["):
            weights = self.weight_list()
        operands = [first, self.unary()]
        while self.at("&&") or self.at("||"):
            if self.tok.text != op:
                raise self.error(
                    ErrorKind.UNEXPECTED_TOKEN,
                    f"cannot mix '&&' and '||' at one level; expected {op!r} or parentheses",
                )
            self.advance()
            if self.at("["):
                raise self.error(
                    ErrorKind.BAD_WEIGHT,
                    "a weight list must follow the first operator of a chain",
                )
            operands.append(self.unary())
        cls = And if op == "&&" else Or
        if weights is None:
            return cls(tuple(operands))
        values, start, end = weights
        if len(values) != len(operands):
            raise self.error(
                ErrorKind.BAD_WEIGHT,
                f"weight list has {len(values)} entries but the chain has {len(operands)} operands",
                start,
                end,
            )
        return cls(tuple(operands), tuple(values))

    def unary(self) -> Formula:
        if self.at("!"):
            self.advance()
            return Not(self.unary())
        if self.tok.kind == "ident" and self.tok.text in ("G", "F"):
            cls = Always if self.advance().text == "G" else Eventually
            interval = self.interval()
            weight = self.wspec(interval) if self.at("{") else ConstWeight(1.0)
            return cls(interval, self.unary(), weight)
        return self.atom()

    def interval(self) -> TimeInterval:
        start = self.expect("[", "'[' opening a time interval").start
        bounds = []
        for closer in (",", "]"):
            tok = self.tok
            if tok.kind != "number" or not tok.text.isdigit():
                raise self.error(
                    ErrorKind.BAD_INTERVAL, f"expected a non-negative integer time bound, found {_describe(tok)}"
                )
            bounds.append(int(self.advance().text))
            self.expect(closer, f"{closer!r} in time interval")
        a, b = bounds
        if a > b:
            raise self.error(
                ErrorKind.BAD_INTERVAL,
                f"interval lower bound {a} exceeds upper bound {b}",
                start,
                self.tokens[self.i - 1].end,
            )
        return TimeInterval(a, b)

    def wspec(self, interval: TimeInterval) -> WeightFn:
        start = self.expect("{").start
        tok = self.tok
        kind = tok.text if tok.kind == "ident" else None
        if kind not in ("const", "disc", "vec", "gauss"):
            raise self.error(
                ErrorKind.BAD_WEIGHT,
                f"expected a weight kind ('const', 'disc', 'vec' or 'gauss'), found {_describe(tok)}",
            )
        self.advance()
        if kind == "const":
            w: WeightFn = ConstWeight(self.weight()[0])
        elif kind == "disc":
            w = DiscountWeight(self.weight()[0])
        elif kind == "vec":
            values, vstart, vend = self.weight_list()
            if len(values) != len(interval):
                raise self.error(
                    ErrorKind.BAD_WEIGHT,
                    f"weight vector has {len(values)} entries but interval {interval} has {len(interval)} points",
                    vstart,
                    vend,
                )
            w = VectorWeight(tuple(values))
        else:
            w = self.gauss()
        end = self.expect("}", "'}' closing the weight spec").end
        try:
            w.realize(interval)
        except WstlError as exc:
            raise self.error(ErrorKind.BAD_WEIGHT, str(exc), start, end) from None
        return w

    def gauss(self) -> GaussianWeight:
        params: dict[str, object] = {}
        while self.tok.kind == "ident" and self.tok.text in ("c", "w", "floor", "amp"):
            key = self.advance().text
            if key in params:
                raise self.error(ErrorKind.BAD_WEIGHT, f"duplicate gaussian parameter {key!r}")
            self.expect("=")
            if key in ("c", "w"):
                if key == "c":
                    # centers may sit anywhere, including outside the interval
                    self.expect("[", "'[' opening the center list")
                    vals = [self.number(ErrorKind.BAD_WEIGHT)]
                    while self.at(","):
                        self.advance()
                        vals.append(self.number(ErrorKind.BAD_WEIGHT))
                    self.expect("]", "',' or ']' in center list")
                else:
                    vals = self.weight_list()[0]
                params[key] = tuple(vals)
            else:
                value = self.number(ErrorKind.BAD_WEIGHT)
                if value < 0:
                    raise self.error(ErrorKind.BAD_WEIGHT, f"{key} must be non-negative")
                params[key] = value
        if "c" not in params or "w" not in params:
            raise self.error(ErrorKind.BAD_WEIGHT, "gaussian weight needs 'c=[...]' and 'w=[...]'")
        return GaussianWeight(
            params["c"], params["w"], float(params.get("floor", 0.0)), float(params.get("amp", 1.0))
        )

    def atom(self) -> Formula:
        tok = self.tok
        if tok.kind == "ident" and tok.text == "TRUE":
            self.advance()
            return Top()
        if tok.kind == "ident" and tok.text == "FALSE":
            self.advance()
            return Bottom()
        if self.at("("):
            self.advance()
            phi = self.formula()
            self.expect(")", "')' or a binary operator")
            return phi
        if tok.kind in ("number", "ident") or self.at("-"):
            return self.predicate()
        raise self.error(
            ErrorKind.UNEXPECTED_TOKEN,
            f"expected a formula ('!', 'G', 'F', 'TRUE', 'FALSE', '(' or a predicate), found {_describe(tok)}",
        )

    def predicate(self) -> Predicate:
        start = self.tok.start
        terms: list[tuple[str, float]] = []
        offset = 0.0
        sign = 1.0
        if self.at("-"):
            self.advance()
            sign = -1.0
        while True:
            tok = self.tok
            if tok.kind == "number":
                value = float(self.advance().text)
                if self.at("*"):
                    self.advance()
                    terms.append((self.ident(), sign * value))
                else:
                    offset += sign * value
            elif tok.kind == "ident":
                terms.append((self.ident(), sign))
            else:
                raise self.error(
                    ErrorKind.BAD_PREDICATE, f"expected a number or component name, found {_describe(tok)}"
                )
            if self.at("+") or self.at("-"):
                sign = 1.0 if self.advance().text == "+" else -1.0
                continue
            break
        rel = self.tok
        if not (rel.kind == "op" and rel.text in (">=", "<=", ">", "<")):
            raise self.error(
                ErrorKind.BAD_PREDICATE, f"expected a comparison ('>=', '<=', '>' or '<'), found {_describe(rel)}"
            )
        self.advance()
        rhs = self.number(ErrorKind.BAD_PREDICATE, "a numeric right-hand side")
        end = self.tokens[self.i - 1].end
        try:
            expr = AffineExpr(tuple(terms), offset - rhs)
        except ValueError:
            raise self.error(
                ErrorKind.BAD_PREDICATE, "predicate needs at least one nonzero component coefficient", start, end
            ) from None
        if rel.text in ("<=", "<"):
            expr = expr.negated()
        mode = self.pmode() if self.at("{") else Metric()
        return Predicate(expr, mode)

    def ident(self) -> str:
        tok = self.tok
        if tok.kind != "ident" or tok.text in _KEYWORDS:
            raise self.error(ErrorKind.BAD_PREDICATE, f"expected a component name, found {_describe(tok)}")
        return self.advance().text

    def pmode(self):
        self.expect("{")
        tok = self.tok
        if tok.kind == "ident" and tok.text == "bool":
            self.advance()
            mode = Boolean(self.weight()[0]) if not self.at("}") else Boolean()
        elif tok.kind == "ident" and tok.text == "scale":
            self.advance()
            mode = Metric(self.weight()[0])
        else:
            raise self.error(
                ErrorKind.BAD_PREDICATE, f"expected predicate mode 'bool' or 'scale', found {_describe(tok)}"
            )
        self.expect("}", "'}' closing the predicate mode")
        return mode


def parse(text: str) -> Formula:
    """Parse ``text`` into a formula; raises :class:`ParseError` on the first error."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _affine(expr: AffineExpr) -> str:
    parts = []
    for k, (name, coef) in enumerate(expr.terms):
        mag = abs(coef)
        body = name if mag == 1.0 else f"{_num(mag)}*{name}"
        if k == 0:
            parts.append(("-" if coef < 0 else "") + body)
        else:
            parts.append(("- " if coef < 0 else "+ ") + body)
    if expr.offset != 0.0:
        parts.append(("- " if expr.offset < 0 else "+ ") + _num(abs(expr.offset)))
    return " ".join(parts)


def _wspec(w: WeightFn) -> str:
    if w.is_unit:
        return ""
    if isinstance(w, ConstWeight):
        return f"{{const {_num(w.c)}}}"
    if isinstance(w, DiscountWeight):
        return f"{{disc {_num(w.gamma)}}}"
    if isinstance(w, VectorWeight):
        return f"{{vec {_wlist(w.values)}}}"
    if isinstance(w, GaussianWeight):
        return (
            f"{{gauss c={_wlist(w.centers)} w={_wlist(w.widths)} "
            f"floor={_num(w.floor)} amp={_num(w.amp)}}}"
        )
    raise TypeError(f"cannot print weight function {w!r}")


def _wlist(values) -> str:
    return "[" + ",".join(_num(v) for v in values) + "]"


def _wrap(phi: Formula) -> str:
    if isinstance(phi, (Top, Bottom)):
        return to_text(phi)
    return f"({to_text(phi)})"


def to_text(phi: Formula) -> str:
    """Canonical text; ``parse(to_text(phi)) == phi``."""
    if isinstance(phi, Top):
        return "TRUE"
    if isinstance(phi, Bottom):
        return "FALSE"
    if isinstance(phi, Predicate):
        suffix = ""
        if isinstance(phi.mode, Boolean):
            suffix = " {bool}" if phi.mode.c == 1.0 else f" {{bool {_num(phi.mode.c)}}}"
        elif phi.mode.scale != 1.0:
            suffix = f" {{scale {_num(phi.mode.scale)}}}"
        return f"{_affine(phi.expr)} >= 0{suffix}"
    if isinstance(phi, Not):
        return "!" + _wrap(phi.sub)
    if isinstance(phi, _NAry):
        op = "&&" if isinstance(phi, And) else "||"
        first = f" {op}{_wlist(phi.weights)} " if phi.is_weighted else f" {op} "
        out = _wrap(phi.subs[0]) + first + _wrap(phi.subs[1])
        for sub in phi.subs[2:]:
            out += f" {op} " + _wrap(sub)
        return out
    if isinstance(phi, _Temporal):
        op = "G" if isinstance(phi, Always) else "F"
        return f"{op}{phi.interval}{_wspec(phi.weight)} {_wrap(phi.sub)}"
    raise TypeError(f"not a formula: {phi!r}")
