"""Feature diagrams, products and Boolean feature expressions.

A feature diagram is kept abstract: an ordered signature of Boolean feature
names plus one constraint expression.  Its semantics is the set of valid
products, enumerated exhaustively in a fixed canonical order so that every
engine reports results in the same product order.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import EnumerationLimitError, ParseError, UnboundFeatureError

# ---------------------------------------------------------------------------
# Feature expressions
# ---------------------------------------------------------------------------


class FeatureExpression:
    """Base class of the Boolean guard AST."""

    __slots__ = ()

    def evaluate(self, assignment: Mapping[str, bool]) -> bool:
        raise NotImplementedError

    def variables(self) -> frozenset[str]:
        raise NotImplementedError

    def __str__(self) -> str:
        return print_expression(self)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({print_expression(self)!r})"


@dataclass(frozen=True, repr=False)
class FTrue(FeatureExpression):
    __slots__ = ()

    def evaluate(self, assignment):
        return True

    def variables(self):
        return frozenset()


@dataclass(frozen=True, repr=False)
class FFalse(FeatureExpression):
    __slots__ = ()

    def evaluate(self, assignment):
        return False

    def variables(self):
        return frozenset()


@dataclass(frozen=True, repr=False)
class FVar(FeatureExpression):
    name: str

    def evaluate(self, assignment):
        try:
            return bool(assignment[self.name])
        except KeyError:
            raise UnboundFeatureError(self.name) from None

    def variables(self):
        return frozenset((self.name,))


@dataclass(frozen=True, repr=False)
class FNot(FeatureExpression):
    operand: FeatureExpression

    def evaluate(self, assignment):
        return not self.operand.evaluate(assignment)

    def variables(self):
        return self.operand.variables()


class _Binary(FeatureExpression):
    __slots__ = ()

    def variables(self):
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True, repr=False)
class FAnd(_Binary):
    left: FeatureExpression
    right: FeatureExpression

    def evaluate(self, assignment):
        return self.left.evaluate(assignment) and self.right.evaluate(assignment)


@dataclass(frozen=True, repr=False)
class FOr(_Binary):
    left: FeatureExpression
    right: FeatureExpression

    def evaluate(self, assignment):
        return self.left.evaluate(assignment) or self.right.evaluate(assignment)


@dataclass(frozen=True, repr=False)
class FImplies(_Binary):
    left: FeatureExpression
    right: FeatureExpression

    def evaluate(self, assignment):
        return (not self.left.evaluate(assignment)) or self.right.evaluate(assignment)


@dataclass(frozen=True, repr=False)
class FXor(_Binary):
    left: FeatureExpression
    right: FeatureExpression

    def evaluate(self, assignment):
        return self.left.evaluate(assignment) != self.right.evaluate(assignment)


TRUE = FTrue()
FALSE = FFalse()


def var(name: str) -> FVar:
    return FVar(name)


def conj(*exprs: FeatureExpression) -> FeatureExpression:
    """Right-folded conjunction; empty conjunction is true."""
    terms = [e for e in exprs if not isinstance(e, FTrue)]
    if any(isinstance(e, FFalse) for e in terms):
        return FALSE
    if not terms:
        return TRUE
    out = terms[-1]
    for e in reversed(terms[:-1]):
        out = FAnd(e, out)
    return out


def negate(expr: FeatureExpression) -> FeatureExpression:
    if isinstance(expr, FTrue):
        return FALSE
    if isinstance(expr, FFalse):
        return TRUE
    if isinstance(expr, FNot):
        return expr.operand
    return FNot(expr)


def substitute(expr: FeatureExpression, binding: Mapping[str, bool]) -> FeatureExpression:
    """Partially evaluate: bound variables become constants, the rest stay.

    The result is simplified on the fly, so an expression whose outcome is
    forced by the binding collapses to TRUE or FALSE.
    """
    if isinstance(expr, (FTrue, FFalse)):
        return expr
    if isinstance(expr, FVar):
        if expr.name in binding:
            return TRUE if binding[expr.name] else FALSE
        return expr
    if isinstance(expr, FNot):
        inner = substitute(expr.operand, binding)
        return negate(inner)
    left = substitute(expr.left, binding)
    right = substitute(expr.right, binding)
    if isinstance(expr, FAnd):
        if isinstance(left, FFalse) or isinstance(right, FFalse):
            return FALSE
        if isinstance(left, FTrue):
            return right
        if isinstance(right, FTrue):
            return left
        return FAnd(left, right)
    if isinstance(expr, FOr):
        if isinstance(left, FTrue) or isinstance(right, FTrue):
            return TRUE
        if isinstance(left, FFalse):
            return right
        if isinstance(right, FFalse):
            return left
        return FOr(left, right)
    if isinstance(expr, FImplies):
        if isinstance(left, FFalse) or isinstance(right, FTrue):
            return TRUE
        if isinstance(left, FTrue):
            return right
        if isinstance(right, FFalse):
            return negate(left)
        return FImplies(left, right)
    if isinstance(expr, FXor):
        if isinstance(left, FFalse):
            return right
        if isinstance(right, FFalse):
            return left
        if isinstance(left, FTrue):
            return negate(right)
        if isinstance(right, FTrue):
            return negate(left)
        return FXor(left, right)
    raise TypeError(f"unknown expression node {expr!r}")


# Precedence levels for printing with minimal parentheses.
_PREC = {FImplies: 1, FOr: 2, FXor: 3, FAnd: 4, FNot: 5, FVar: 6, FTrue: 6, FFalse: 6}
_OPS = {FImplies: "->", FOr: "|", FXor: "^", FAnd: "&"}


def print_expression(expr: FeatureExpression) -> str:
    def render(e, parent_prec):
        prec = _PREC[type(e)]
        if isinstance(e, FTrue):
            text = "true"
        elif isinstance(e, FFalse):
            text = "false"
        elif isinstance(e, FVar):
            text = e.name
        elif isinstance(e, FNot):
            text = "!" + render(e.operand, prec)
        else:
            op = _OPS[type(e)]
            # binary operators associate to the right
            text = f"{render(e.left, prec + 1)} {op} {render(e.right, prec)}"
        if prec < parent_prec:
            return f"({text})"
        return text

    return render(expr, 0)


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<arrow>->)|(?P<op>[!&|^()])|(?P<name>[A-Za-z_][A-Za-z0-9_]*))"
)


def _tokenize_expr(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            col = len(text) - len(stripped) + 1
            raise ParseError(f"unexpected character {stripped[0]!r}", column=col)
        pos = match.end()
        kind = match.lastgroup
        tokens.append((match.group(kind), match.start(kind) + 1))
    return tokens


def parse_feature_expression(text: str) -> FeatureExpression:
    """Parse the guard syntax: ``!``, ``&``, ``^``, ``|``, ``->``, parens.

    Precedence from tightest to loosest: ``!``, ``&``, ``^``, ``|``, ``->``;
    binary operators associate to the right.  ``true`` and ``false`` are
    keywords, anything else alphanumeric is a feature name.
    """
    tokens = _tokenize_expr(text)
    index = 0

    def peek():
        return tokens[index][0] if index < len(tokens) else None

    def take():
        nonlocal index
        tok = tokens[index]
        index += 1
        return tok

    def error(message):
        col = tokens[index][1] if index < len(tokens) else len(text) + 1
        raise ParseError(message, column=col)

    def parse_atom():
        tok = peek()
        if tok is None:
            error("unexpected end of expression")
        if tok == "(":
            take()
            inner = parse_implies()
            if peek() != ")":
                error("expected ')'")
            take()
            return inner
        if tok == "!":
            take()
            return FNot(parse_atom())
        if tok == "true":
            take()
            return TRUE
        if tok == "false":
            take()
            return FALSE
        if tok.isidentifier():
            take()
            return FVar(tok)
        error(f"unexpected token {tok!r}")

    def parse_and():
        left = parse_atom()
        if peek() == "&":
            take()
            return FAnd(left, parse_and())
        return left

    def parse_xor():
        left = parse_and()
        if peek() == "^":
            take()
            return FXor(left, parse_xor())
        return left

    def parse_or():
        left = parse_xor()
        if peek() == "|":
            take()
            return FOr(left, parse_or())
        return left

    def parse_implies():
        left = parse_or()
        if peek() == "->":
            take()
            return FImplies(left, parse_implies())
        return left

    result = parse_implies()
    if index != len(tokens):
        error(f"trailing input {tokens[index][0]!r}")
    return result


# ---------------------------------------------------------------------------
# Products and diagrams
# ---------------------------------------------------------------------------


class Product:
    """A total Boolean assignment over a signature.

    Hashable and immutable; the signature order is preserved so two products
    over the same diagram compare canonically.
    """

    __slots__ = ("_names", "_values", "_map")

    def __init__(self, names: Sequence[str], values: Sequence[bool]):
        if len(names) != len(values):
            raise ValueError("names and values must have the same length")
        self._names = tuple(names)
        self._values = tuple(bool(v) for v in values)
        self._map = dict(zip(self._names, self._values))

    @classmethod
    def from_dict(cls, assignment: Mapping[str, bool], order: Sequence[str] | None = None):
        names = tuple(order) if order is not None else tuple(assignment)
        missing = [n for n in names if n not in assignment]
        if missing:
            raise UnboundFeatureError(missing[0])
        return cls(names, tuple(assignment[n] for n in names))

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def values(self) -> tuple[bool, ...]:
        return self._values

    def __getitem__(self, name: str) -> bool:
        try:
            return self._map[name]
        except KeyError:
            raise UnboundFeatureError(name) from None

    def __contains__(self, name: str) -> bool:
        return name in self._map

    def as_dict(self) -> dict[str, bool]:
        return dict(self._map)

    def restrict(self, sub: Iterable[str]) -> "Product":
        """Keep only the listed features; order follows ``sub``."""
        sub = tuple(sub)
        for name in sub:
            if name not in self._map:
                raise UnboundFeatureError(name)
        return Product(sub, tuple(self._map[n] for n in sub))

    def enabled(self) -> frozenset[str]:
        return frozenset(n for n, v in self._map.items() if v)

    def __eq__(self, other):
        return (
            isinstance(other, Product)
            and self._names == other._names
            and self._values == other._values
        )

    def __hash__(self):
        return hash((self._names, self._values))

    def __str__(self):
        on = [n for n in self._names if self._map[n]]
        return "{" + ",".join(on) + "}" if on else "{}"

    def __repr__(self):
        body = ", ".join(f"{n}={int(v)}" for n, v in zip(self._names, self._values))
        return f"Product({body})"


def evaluate_expr(expr: FeatureExpression, product: Product | Mapping[str, bool]) -> bool:
    if isinstance(product, Product):
        product = product.as_dict()
    return expr.evaluate(product)


#: Widest signature enumerated exhaustively by default (2^24 candidates).
DEFAULT_ENUMERATION_LIMIT = 24


class FeatureDiagram:
    """Signature plus constraint; the product line is derived, then cached."""

    __slots__ = ("signature", "constraint", "_products", "_index")

    def __init__(self, signature: Sequence[str], constraint: FeatureExpression = TRUE):
        signature = tuple(signature)
        if len(set(signature)) != len(signature):
            raise ValueError("duplicate feature names in signature")
        unknown = constraint.variables() - set(signature)
        if unknown:
            raise UnboundFeatureError(sorted(unknown)[0])
        self.signature = signature
        self.constraint = constraint
        self._products: tuple[Product, ...] | None = None
        self._index: dict[Product, int] | None = None

    def valid_products(self, limit: int = DEFAULT_ENUMERATION_LIMIT) -> tuple[Product, ...]:
        """All satisfying assignments in canonical order.

        Canonical order is lexicographic over the signature with false
        before true, i.e. plain binary counting with the first feature as
        the most significant bit.
        """
        if self._products is None:
            if len(self.signature) > limit:
                raise EnumerationLimitError(
                    f"signature has {len(self.signature)} features, enumeration "
                    f"limit is {limit}; raise the limit to proceed"
                )
            products = []
            for values in itertools.product((False, True), repeat=len(self.signature)):
                candidate = Product(self.signature, values)
                if self.constraint.evaluate(candidate._map):
                    products.append(candidate)
            self._products = tuple(products)
            self._index = {p: i for i, p in enumerate(products)}
        return self._products

    def normalize(self, product: Product) -> Product:
        """Reorder (and project, if wider) a product onto this signature."""
        if product.names == self.signature:
            return product
        return product.restrict(self.signature)

    def product_index(self, product: Product) -> int:
        self.valid_products()
        try:
            return self._index[self.normalize(product)]
        except KeyError:
            from .errors import InvalidProductError

            raise InvalidProductError(f"{product} is not a valid product") from None

    def is_valid(self, product: Product) -> bool:
        self.valid_products()
        try:
            return self.normalize(product) in self._index
        except UnboundFeatureError:
            return False

    def __eq__(self, other):
        return (
            isinstance(other, FeatureDiagram)
            and self.signature == other.signature
            and self.constraint == other.constraint
        )

    def __hash__(self):
        return hash((self.signature, self.constraint))

    def __repr__(self):
        return f"FeatureDiagram({self.signature!r}, {self.constraint})"


def conjoin(d1: FeatureDiagram, d2: FeatureDiagram) -> FeatureDiagram:
    """Combine two diagrams: union of signatures, conjunction of constraints.

    Shared names are identified.  The combined product line restricted to
    either signature gives back exactly the component's product line.
    """
    signature = d1.signature + tuple(n for n in d2.signature if n not in d1.signature)
    return FeatureDiagram(signature, conj(d1.constraint, d2.constraint))


def iter_assignments(names: Sequence[str]) -> Iterator[dict[str, bool]]:
    """All total assignments over ``names`` in canonical order."""
    for values in itertools.product((False, True), repeat=len(names)):
        yield dict(zip(names, values))


def satisfiable(expr: FeatureExpression, limit: int = 12) -> bool:
    """Cheap satisfiability probe by enumeration over the expression's own
    variables.  Expressions over more than ``limit`` variables are assumed
    satisfiable; callers use this to prune dead guards, which is sound."""
    if isinstance(expr, FFalse):
        return False
    if isinstance(expr, (FTrue, FVar)):
        return True
    names = sorted(expr.variables())
    if len(names) > limit:
        return True
    return any(expr.evaluate(assignment) for assignment in iter_assignments(names))
