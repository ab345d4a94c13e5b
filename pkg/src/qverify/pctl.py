"""Parser for the ``P=? [ F pred ]`` / ``P=? [ pred U pred ]`` query fragment.

Predicates combine label names (``Goal``) and feature comparisons
(``pos<=3``, ``pos=7``) with ``&`` and ``|``; ``&`` binds tighter, and
parentheses group. ``true`` and ``false`` are constants. ``F``, ``U`` and
``P`` are reserved words.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Union

from .errors import BindError, ParseError

COMPARISONS = ("<=", ">=", "=", "<", ">")
RESERVED = {"F", "U", "P", "true", "false"}


@dataclass(frozen=True)
class Const:
    value: bool

    def __str__(self):
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Label:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Compare:
    feature: str
    op: str
    value: int

    def __str__(self):
        return f"{self.feature}{self.op}{self.value}"


@dataclass(frozen=True)
class And:
    left: "Pred"
    right: "Pred"

    def __str__(self):
        return f"{_wrap(self.left, (Or,))} & {_wrap(self.right, (Or, And))}"


@dataclass(frozen=True)
class Or:
    left: "Pred"
    right: "Pred"

    def __str__(self):
        return f"{self.left} | {_wrap(self.right, (Or,))}"


Pred = Union[Const, Label, Compare, And, Or]
TRUE = Const(True)


def _wrap(p: Pred, kinds) -> str:
    return f"({p})" if isinstance(p, kinds) else str(p)


@dataclass(frozen=True)
class PctlProperty:
    form: str  # "eventually" or "until"
    right: Pred
    left: Pred | None = None

    def __post_init__(self):
        if self.form not in ("eventually", "until"):
            raise ValueError(f"unknown path form {self.form!r}")
        if (self.form == "until") != (self.left is not None):
            raise ValueError("until needs a left predicate; eventually must not have one")

    def as_until(self) -> tuple[Pred, Pred]:
        """F phi is true U phi."""
        return (TRUE if self.left is None else self.left), self.right

    def __str__(self):
        if self.form == "eventually":
            return f"P=? [ F {self.right} ]"
        return f"P=? [ {self.left} U {self.right} ]"


def eventually(target: Pred) -> PctlProperty:
    return PctlProperty("eventually", target)


def until(left: Pred, right: Pred) -> PctlProperty:
    return PctlProperty("until", right, left)


# tokenizer / recursive descent -------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<query>P\s*=\s*\?)|(?P<cmp><=|>=|=|<|>)|(?P<int>-?\d+)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[\[\]()&|]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            offset = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[offset]!r}", position=offset)
        kind = m.lastgroup
        value = m.group(kind)
        tokens.append((kind, value, m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def fail(self, expected: str):
        kind, value, pos = self.tok
        got = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"expected {expected}, got {got}", position=pos)

    def accept(self, value: str) -> bool:
        if self.tok[1] == value and self.tok[0] != "end":
            self.i += 1
            return True
        return False

    def expect(self, value: str):
        if not self.accept(value):
            self.fail(repr(value))

    def prop(self) -> PctlProperty:
        if self.tok[0] != "query":
            self.fail("'P=?'")
        self.i += 1
        self.expect("[")
        if self.accept("F"):
            prop = eventually(self.pred())
        else:
            left = self.pred()
            self.expect("U")
            prop = until(left, self.pred())
        self.expect("]")
        if self.tok[0] != "end":
            self.fail("end of input")
        return prop

    def pred(self) -> Pred:
        node = self.conj()
        while self.accept("|"):
            node = Or(node, self.conj())
        return node

    def conj(self) -> Pred:
        node = self.atom()
        while self.accept("&"):
            node = And(node, self.atom())
        return node

    def atom(self) -> Pred:
        kind, value, _ = self.tok
        if self.accept("("):
            node = self.pred()
            self.expect(")")
            return node
        if kind == "ident" and value in ("true", "false"):
            self.i += 1
            return Const(value == "true")
        if kind != "ident" or value in RESERVED:
            self.fail("a predicate")
        self.i += 1
        if self.tok[0] == "cmp":
            op = self.tok[1]
            self.i += 1
            if self.tok[0] != "int":
                self.fail("an integer constant")
            number = int(self.tok[1])
            self.i += 1
            return Compare(value, op, number)
        return Label(value)


def parse_property(text: str) -> PctlProperty:
    return _Parser(text).prop()


# binding -------------------------------------------------------------------------

StateTest = Callable[[tuple, frozenset], bool]

_OPS = {
    "=": lambda a, b: a == b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def bind_pred(pred: Pred, feature_names: Iterable[str], label_names: Iterable[str] | None = None) -> StateTest:
    """Compile ``pred`` into ``test(state_values, state_labels) -> bool``."""
    index = {name: i for i, name in enumerate(feature_names)}
    known = None if label_names is None else set(label_names)

    def build(p: Pred) -> StateTest:
        if isinstance(p, Const):
            return lambda s, l, v=p.value: v
        if isinstance(p, Label):
            if known is not None and p.name not in known:
                raise BindError(f"unknown label {p.name!r}; known labels: {sorted(known)}")
            return lambda s, l, n=p.name: n in l
        if isinstance(p, Compare):
            if p.feature not in index:
                raise BindError(f"unknown feature {p.feature!r}; known features: {sorted(index)}")
            op, i, c = _OPS[p.op], index[p.feature], p.value
            return lambda s, l: op(s[i], c)
        left, right = build(p.left), build(p.right)
        if isinstance(p, And):
            return lambda s, l: left(s, l) and right(s, l)
        return lambda s, l: left(s, l) or right(s, l)

    return build(pred)


@dataclass(frozen=True)
class BoundProperty:
    prop: PctlProperty
    left: StateTest
    right: StateTest

    def absorbing(self, s, labels) -> bool:
        """True where the query's value is already decided: target reached or path condition broken."""
        return self.right(s, labels) or not self.left(s, labels)


def bind(prop: PctlProperty, feature_names: Iterable[str], label_names: Iterable[str] | None = None) -> BoundProperty:
    names = list(feature_names)
    left, right = prop.as_until()
    return BoundProperty(prop, bind_pred(left, names, label_names), bind_pred(right, names, label_names))
