"""Formula parsing, structural identity, and dimensional analysis.

Formulae are small arithmetic expressions over single-token identifiers
with at most one top-level ``=``. The grammar covers identifiers,
integer/decimal literals, ``+ - * / ^``, unary minus, and parentheses.
Implicit multiplication is not accepted ("m*a", never "ma"), and there
are no function calls; both are deliberate restrictions that keep
identity checking unambiguous.

Identity between formulae is *structural*: two formulae are identical
iff their ASTs are equal after whitespace-insensitive parsing. No
algebraic rewriting is applied, so ``m*a`` and ``a*m`` are different —
exactly the kind of silent mutation the verifier exists to detect.

Dimensional analysis maps every expression to an integer exponent
vector over the seven base dimensions (mass, length, time, current,
temperature, amount, luminosity). Multiplication adds vectors, division
subtracts, powers with integer literals scale, and both sides of ``=``
(or of any ``+``/``-``) must agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence, Union

from .errors import (
    AdditionMismatch,
    FractionalExponent,
    MultipleEquals,
    ParseError,
    UnknownSymbol,
)
from .jsonio import read_json

# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    """Numeric literal. The source text is kept verbatim, so 2 and 2.0
    are distinct nodes."""

    text: str

    def value(self) -> Fraction:
        return Fraction(self.text)


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Equation:
    lhs: "Expr"
    rhs: "Expr"


Expr = Union[Num, Sym, Neg, BinOp]
Node = Union[Expr, Equation]


@dataclass(frozen=True)
class Formula:
    """A parsed formula: original text, AST, and identifier leaves in
    first-occurrence order."""

    source: str
    ast: Node
    symbols: tuple[str, ...]

    def canonical(self) -> str:
        return render(self.ast)

    def is_equation(self) -> bool:
        return isinstance(self.ast, Equation)


# --------------------------------------------------------------------------
# tokenizer

_OPERATOR_CHARS = "+-*/^=()"
_ATOM_EXPECTED = ("number", "identifier", "(", "-")


@dataclass(frozen=True)
class _Token:
    kind: str  # number | ident | op | end
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit():
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                if j + 1 >= n or not text[j + 1].isdigit():
                    raise ParseError("malformed number", offset=j, expected=("digit",))
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(_Token("number", text[i:j], i))
            i = j
            continue
        if c.isalpha():
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], i))
            i = j
            continue
        if c in _OPERATOR_CHARS:
            tokens.append(_Token("op", c, i))
            i += 1
            continue
        raise ParseError(
            f"unexpected character {c!r}",
            offset=i,
            expected=("number", "identifier", "operator", "(", ")"),
        )
    tokens.append(_Token("end", "", n))
    return tokens


# --------------------------------------------------------------------------
# recursive-descent parser
#
# precedence, loosest to tightest:  =  <  + -  <  * /  <  unary -  <  ^
# binary + - * / are left-associative, ^ is right-associative, and the
# exponent position re-admits unary minus so "x ^ -2" parses.


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    def _peek(self) -> _Token:
        return self.tokens[self.pos]

    def _advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _at_op(self, chars: str) -> bool:
        tok = self._peek()
        return tok.kind == "op" and tok.text in chars

    def parse(self) -> Node:
        lhs = self._sum()
        if self._at_op("="):
            self._advance()
            rhs = self._sum()
            if self._at_op("="):
                tok = self._peek()
                raise MultipleEquals(
                    "more than one top-level '='",
                    offset=tok.offset,
                    expected=("end of input",),
                )
            self._expect_end()
            return Equation(lhs, rhs)
        self._expect_end()
        return lhs

    def _expect_end(self) -> None:
        tok = self._peek()
        if tok.kind != "end":
            raise ParseError(
                f"unexpected token {tok.text!r}",
                offset=tok.offset,
                expected=("end of input", "operator"),
            )

    def _sum(self) -> Expr:
        node = self._term()
        while self._at_op("+-"):
            op = self._advance().text
            node = BinOp(op, node, self._term())
        return node

    def _term(self) -> Expr:
        node = self._unary()
        while self._at_op("*/"):
            op = self._advance().text
            node = BinOp(op, node, self._unary())
        return node

    def _unary(self) -> Expr:
        if self._at_op("-"):
            self._advance()
            return Neg(self._unary())
        return self._power()

    def _power(self) -> Expr:
        base = self._atom()
        if self._at_op("^"):
            self._advance()
            return BinOp("^", base, self._unary())
        return base

    def _atom(self) -> Expr:
        tok = self._peek()
        if tok.kind == "number":
            self._advance()
            return Num(tok.text)
        if tok.kind == "ident":
            self._advance()
            return Sym(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self._advance()
            node = self._sum()
            closing = self._peek()
            if not (closing.kind == "op" and closing.text == ")"):
                raise ParseError(
                    "unbalanced parenthesis",
                    offset=closing.offset,
                    expected=(")",),
                )
            self._advance()
            return node
        raise ParseError(
            f"unexpected token {tok.text or '<end>'!r}",
            offset=tok.offset,
            expected=_ATOM_EXPECTED,
        )


def parse_formula(text: str) -> Formula:
    """Parse ``text`` into a :class:`Formula`.

    Raises :class:`ParseError` (with byte offset and the expected token
    set) on malformed input and :class:`MultipleEquals` when more than
    one top-level ``=`` is present.
    """
    if not text or not text.strip():
        raise ParseError("empty formula", offset=0, expected=_ATOM_EXPECTED)
    ast = _Parser(_tokenize(text)).parse()
    return Formula(source=text, ast=ast, symbols=_collect_symbols(ast))


def _collect_symbols(node: Node) -> tuple[str, ...]:
    seen: dict[str, None] = {}

    def walk(n: Node) -> None:
        if isinstance(n, Sym):
            seen.setdefault(n.name, None)
        elif isinstance(n, Neg):
            walk(n.operand)
        elif isinstance(n, BinOp):
            walk(n.left)
            walk(n.right)
        elif isinstance(n, Equation):
            walk(n.lhs)
            walk(n.rhs)

    walk(node)
    return tuple(seen)


# --------------------------------------------------------------------------
# canonical rendering

_BIN_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3
_ATOM_PREC = 5


def _prec(node: Node) -> int:
    if isinstance(node, (Num, Sym)):
        return _ATOM_PREC
    if isinstance(node, Neg):
        return _NEG_PREC
    if isinstance(node, BinOp):
        return _BIN_PREC[node.op]
    return 0  # Equation


def render(node: Node) -> str:
    """Canonical text: minimal parentheses, single spaces around binary
    operators, unary minus attached to its operand. ``render`` composed
    with :func:`parse_formula` is a fixed point."""
    if isinstance(node, Num):
        return node.text
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Neg):
        inner = render(node.operand)
        if _prec(node.operand) < _NEG_PREC:
            inner = f"({inner})"
        return "-" + inner
    if isinstance(node, BinOp):
        left, right = render(node.left), render(node.right)
        if node.op == "^":
            # base must be an atom; exponent re-admits unary minus
            if _prec(node.left) < _ATOM_PREC:
                left = f"({left})"
            if _prec(node.right) < _NEG_PREC:
                right = f"({right})"
        else:
            p = _BIN_PREC[node.op]
            if _prec(node.left) < p:
                left = f"({left})"
            if _prec(node.right) <= p:
                right = f"({right})"
        return f"{left} {node.op} {right}"
    if isinstance(node, Equation):
        return f"{render(node.lhs)} = {render(node.rhs)}"
    raise TypeError(f"not an AST node: {node!r}")


def formulae_identical(a: Formula, b: Formula) -> bool:
    """Structural equality of the two ASTs.

    Whitespace differences vanish in parsing; everything else counts,
    including operand order (``m*a`` != ``a*m``) and literal spelling
    (``2`` != ``2.0``).
    """
    return a.ast == b.ast


def equation_lhs_key(f: Formula) -> str | None:
    """Canonical rendering of the left side if ``f`` is an equation,
    else None. Used to decide when two strings show "the same" formula."""
    if isinstance(f.ast, Equation):
        return render(f.ast.lhs)
    return None


# --------------------------------------------------------------------------
# dimensions

BASE_DIMENSIONS = (
    "mass",
    "length",
    "time",
    "current",
    "temperature",
    "amount",
    "luminosity",
)


@dataclass(frozen=True)
class Dimension:
    """Integer exponent vector over the seven base dimensions."""

    exponents: tuple[int, ...]

    def __post_init__(self):
        if len(self.exponents) != len(BASE_DIMENSIONS):
            raise ValueError(
                f"dimension vector must have {len(BASE_DIMENSIONS)} entries, "
                f"got {len(self.exponents)}"
            )
        if not all(isinstance(e, int) and not isinstance(e, bool) for e in self.exponents):
            raise ValueError("dimension exponents must be integers")

    @classmethod
    def dimensionless(cls) -> "Dimension":
        return cls((0,) * len(BASE_DIMENSIONS))

    @property
    def is_dimensionless(self) -> bool:
        return all(e == 0 for e in self.exponents)

    def multiply(self, other: "Dimension") -> "Dimension":
        return Dimension(tuple(a + b for a, b in zip(self.exponents, other.exponents)))

    def divide(self, other: "Dimension") -> "Dimension":
        return Dimension(tuple(a - b for a, b in zip(self.exponents, other.exponents)))

    def power(self, k: int) -> "Dimension":
        return Dimension(tuple(a * k for a in self.exponents))

    def __str__(self) -> str:
        parts = [f"{n}^{e}" for n, e in zip(BASE_DIMENSIONS, self.exponents) if e != 0]
        return "[" + " ".join(parts) + "]" if parts else "[dimensionless]"


DimensionTable = Mapping[str, Dimension]


def dimension_table_from_json(obj: Mapping[str, Sequence[int]]) -> dict[str, Dimension]:
    return {symbol: Dimension(tuple(int(e) for e in vec)) for symbol, vec in obj.items()}


def load_dimension_table(path: Path | str) -> dict[str, Dimension]:
    """Load a symbol -> 7-element integer array map from a JSON file."""
    return dimension_table_from_json(read_json(path))


def _d(*exps: int) -> Dimension:
    return Dimension(tuple(exps))


# Common mechanics symbols; enough for the bundled lessons and tests.
STANDARD_DIMENSIONS: dict[str, Dimension] = {
    "F": _d(1, 1, -2, 0, 0, 0, 0),
    "m": _d(1, 0, 0, 0, 0, 0, 0),
    "a": _d(0, 1, -2, 0, 0, 0, 0),
    "g": _d(0, 1, -2, 0, 0, 0, 0),
    "E": _d(1, 2, -2, 0, 0, 0, 0),
    "W": _d(1, 2, -2, 0, 0, 0, 0),
    "P": _d(1, 2, -3, 0, 0, 0, 0),
    "p": _d(1, 1, -1, 0, 0, 0, 0),
    "c": _d(0, 1, -1, 0, 0, 0, 0),
    "v": _d(0, 1, -1, 0, 0, 0, 0),
    "u": _d(0, 1, -1, 0, 0, 0, 0),
    "t": _d(0, 0, 1, 0, 0, 0, 0),
    "d": _d(0, 1, 0, 0, 0, 0, 0),
    "x": _d(0, 1, 0, 0, 0, 0, 0),
    "h": _d(0, 1, 0, 0, 0, 0, 0),
    "T": _d(0, 0, 0, 0, 1, 0, 0),
    "q": _d(0, 0, 1, 1, 0, 0, 0),
    "I": _d(0, 0, 0, 1, 0, 0, 0),
    "k": _d(0, 0, 0, 0, 0, 0, 0),
}


@dataclass(frozen=True)
class BalanceVerdict:
    """Outcome of checking an equation: do both sides carry the same
    dimension vector?"""

    balanced: bool
    lhs: Dimension
    rhs: Dimension


def _integer_exponent(node: Expr) -> int | None:
    sign = 1
    while isinstance(node, Neg):
        sign = -sign
        node = node.operand
    if isinstance(node, Num):
        value = node.value()
        if value.denominator == 1:
            return sign * int(value)
    return None


def _dim(node: Expr, table: DimensionTable) -> Dimension:
    if isinstance(node, Num):
        return Dimension.dimensionless()
    if isinstance(node, Sym):
        try:
            return table[node.name]
        except KeyError:
            raise UnknownSymbol(node.name) from None
    if isinstance(node, Neg):
        return _dim(node.operand, table)
    if isinstance(node, BinOp):
        if node.op in "+-":
            lhs = _dim(node.left, table)
            rhs = _dim(node.right, table)
            if lhs != rhs:
                raise AdditionMismatch(node.op, lhs, rhs)
            return lhs
        if node.op == "*":
            return _dim(node.left, table).multiply(_dim(node.right, table))
        if node.op == "/":
            return _dim(node.left, table).divide(_dim(node.right, table))
        if node.op == "^":
            base = _dim(node.left, table)
            exponent_dim = _dim(node.right, table)
            if not exponent_dim.is_dimensionless:
                raise FractionalExponent(
                    f"exponent {render(node.right)!r} is not dimensionless"
                )
            k = _integer_exponent(node.right)
            if k is not None:
                return base.power(k)
            if base.is_dimensionless:
                return base
            raise FractionalExponent(
                f"non-integer exponent {render(node.right)!r} on dimensioned base "
                f"{render(node.left)!r}"
            )
    raise TypeError(f"not an expression node: {node!r}")


def check_dimension(f: Formula, table: DimensionTable) -> Dimension | BalanceVerdict:
    """Derive the dimension of ``f`` under ``table``.

    For a bare expression the derived :class:`Dimension` is returned.
    For an equation, both sides are derived and a :class:`BalanceVerdict`
    reports whether they agree.

    Raises :class:`UnknownSymbol`, :class:`FractionalExponent`, or
    :class:`AdditionMismatch` when the expression itself is dimensionally
    ill-formed.
    """
    if isinstance(f.ast, Equation):
        lhs = _dim(f.ast.lhs, table)
        rhs = _dim(f.ast.rhs, table)
        return BalanceVerdict(balanced=lhs == rhs, lhs=lhs, rhs=rhs)
    return _dim(f.ast, table)
