"""
User-supplied closed-form vector fields: parsing, symbolic differentiation
and evaluation

Grammar (standard precedence, left associative - and /):
    field      := expression ',' expression ',' expression
    expression := term (('+' | '-') term)*
    term       := unary (('*' | '/') unary)*
    unary      := ('-' | '+') unary | power
    power      := atom ('^' unary)?
    atom       := NUMBER | 'x' | 'y' | 'z' | 'pi' | 'e' | FUNC '(' expression ')' | '(' expression ')'
"""
import logging
import math
import re
import threading
from dataclasses import dataclass
from functools import singledispatch
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from app.config import settings
from app.exceptions import CatalogError, ExpressionSyntaxError, UnknownIdentifierError
from app.models import BallDomain, TorusDomain
from app.services.fields import BeltramiField, MultiIndex

logger = logging.getLogger(__name__)

AnyDomain = Union[TorusDomain, BallDomain]

VARIABLES = ("x", "y", "z")
FUNCTIONS = {
    "sin": (np.sin, math.sin),
    "cos": (np.cos, math.cos),
    "exp": (np.exp, math.exp),
    "sqrt": (np.sqrt, math.sqrt),
    "log": (np.log, math.log),
}
CONSTANTS = {"pi": math.pi, "e": math.e}


# Expression tree

class Expr:
    precedence = 5


@dataclass(frozen=True)
class Num(Expr):
    value: float

    @property
    def precedence(self) -> int:
        return 3 if self.value < 0 else 5


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr
    precedence = 3


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr
    precedence = 1
    symbol = "+"


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr
    precedence = 1
    symbol = "-"


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr
    precedence = 2
    symbol = "*"


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr
    precedence = 2
    symbol = "/"


@dataclass(frozen=True)
class Pow(Expr):
    left: Expr
    right: Expr
    precedence = 4
    symbol = "^"


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


ZERO = Num(0.0)
ONE = Num(1.0)


def _is_num(node: Expr, value: Optional[float] = None) -> bool:
    return isinstance(node, Num) and (value is None or node.value == value)


def _fold(op, *values) -> Optional[Num]:
    try:
        result = op(*values)
    except (ArithmeticError, ValueError):
        return None
    if isinstance(result, complex) or not math.isfinite(result):
        return None
    return Num(float(result))


# Simplifying constructors: constant folding and 0/1 identities only

def add(a: Expr, b: Expr) -> Expr:
    if _is_num(a) and _is_num(b):
        return _fold(lambda u, v: u + v, a.value, b.value) or Add(a, b)
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_num(a) and _is_num(b):
        return _fold(lambda u, v: u - v, a.value, b.value) or Sub(a, b)
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_num(a) and _is_num(b):
        return _fold(lambda u, v: u * v, a.value, b.value) or Mul(a, b)
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return ZERO
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a, -1.0):
        return neg(b)
    if _is_num(b, -1.0):
        return neg(a)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_num(a) and _is_num(b) and b.value != 0.0:
        return _fold(lambda u, v: u / v, a.value, b.value) or Div(a, b)
    if _is_num(b, 1.0):
        return a
    if _is_num(a, 0.0) and not _is_num(b, 0.0):
        return ZERO
    return Div(a, b)


def power(a: Expr, b: Expr) -> Expr:
    if _is_num(a) and _is_num(b):
        return _fold(math.pow, a.value, b.value) or Pow(a, b)
    if _is_num(b, 0.0):
        return ONE
    if _is_num(b, 1.0):
        return a
    if _is_num(a, 1.0):
        return ONE
    return Pow(a, b)


def neg(a: Expr) -> Expr:
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def call(func: str, arg: Expr) -> Expr:
    if _is_num(arg):
        folded = _fold(FUNCTIONS[func][1], arg.value)
        if folded is not None:
            return folded
    return Call(func, arg)


# Parsing

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int


def tokenize(source: str) -> List[Token]:
    tokens = []
    position = 0
    while position < len(source):
        match = _TOKEN_RE.match(source, position)
        if not match:
            raise ExpressionSyntaxError(f"unexpected character {source[position]!r}", position)
        kind = match.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, match.group(), position))
        position = match.end()
    tokens.append(Token("end", "", len(source)))
    return tokens


class Parser:
    """Recursive-descent parser over the token stream"""

    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _advance(self) -> Token:
        token = self.current
        self.index += 1
        return token

    def _accept(self, text: str) -> bool:
        if self.current.kind == "op" and self.current.text == text:
            self.index += 1
            return True
        return False

    def _expect(self, text: str) -> None:
        if not self._accept(text):
            raise self._error(f"'{text}'")

    def _error(self, expected: str) -> ExpressionSyntaxError:
        token = self.current
        found = "end of input" if token.kind == "end" else repr(token.text)
        return ExpressionSyntaxError(f"unexpected {found}", token.offset, expected)

    def parse_field(self) -> Tuple[Expr, Expr, Expr]:
        components = [self.expression()]
        for _ in range(2):
            self._expect(",")
            components.append(self.expression())
        if self.current.kind != "end":
            raise self._error("end of input")
        return tuple(components)

    def parse_expression(self) -> Expr:
        node = self.expression()
        if self.current.kind != "end":
            raise self._error("end of input")
        return node

    def expression(self) -> Expr:
        node = self.term()
        while True:
            if self._accept("+"):
                node = Add(node, self.term())
            elif self._accept("-"):
                node = Sub(node, self.term())
            else:
                return node

    def term(self) -> Expr:
        node = self.unary()
        while True:
            if self._accept("*"):
                node = Mul(node, self.unary())
            elif self._accept("/"):
                node = Div(node, self.unary())
            else:
                return node

    def unary(self) -> Expr:
        if self._accept("-"):
            return Neg(self.unary())
        if self._accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self._accept("^"):
            return Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        token = self.current
        if token.kind == "number":
            self._advance()
            return Num(float(token.text))
        if token.kind == "ident":
            self._advance()
            name = token.text
            if name in VARIABLES:
                return Var(name)
            if name in CONSTANTS:
                return Num(CONSTANTS[name])
            if name in FUNCTIONS:
                self._expect("(")
                arg = self.expression()
                self._expect(")")
                return Call(name, arg)
            raise UnknownIdentifierError(f"unknown identifier {name!r}", token.offset)
        if self._accept("("):
            node = self.expression()
            self._expect(")")
            return node
        raise self._error("number, identifier or '('")


def parse_expression(source: str) -> Expr:
    return Parser(source).parse_expression()


# Symbolic derivative

@singledispatch
def differentiate(node: Expr, var: str) -> Expr:
    raise TypeError(f"Cannot differentiate a {type(node).__name__}")


@differentiate.register(Num)
def _(node: Num, var: str) -> Expr:
    return ZERO


@differentiate.register(Var)
def _(node: Var, var: str) -> Expr:
    return ONE if node.name == var else ZERO


@differentiate.register(Neg)
def _(node: Neg, var: str) -> Expr:
    return neg(differentiate(node.arg, var))


@differentiate.register(Add)
def _(node: Add, var: str) -> Expr:
    return add(differentiate(node.left, var), differentiate(node.right, var))


@differentiate.register(Sub)
def _(node: Sub, var: str) -> Expr:
    return sub(differentiate(node.left, var), differentiate(node.right, var))


@differentiate.register(Mul)
def _(node: Mul, var: str) -> Expr:
    """Product rule"""
    return add(
        mul(differentiate(node.left, var), node.right),
        mul(node.left, differentiate(node.right, var)),
    )


@differentiate.register(Div)
def _(node: Div, var: str) -> Expr:
    """Quotient rule"""
    numerator = sub(
        mul(differentiate(node.left, var), node.right),
        mul(node.left, differentiate(node.right, var)),
    )
    return div(numerator, power(node.right, Num(2.0)))


@differentiate.register(Pow)
def _(node: Pow, var: str) -> Expr:
    base, exponent = node.left, node.right
    d_base = differentiate(base, var)
    d_exponent = differentiate(exponent, var)
    if _is_num(d_exponent, 0.0):
        # n u^(n-1) u'
        return mul(mul(exponent, power(base, sub(exponent, ONE))), d_base)
    # u^v (v' log u + v u' / u)
    return mul(
        node,
        add(mul(d_exponent, call("log", base)), div(mul(exponent, d_base), base)),
    )


@differentiate.register(Call)
def _(node: Call, var: str) -> Expr:
    inner = differentiate(node.arg, var)
    if _is_num(inner, 0.0):
        return ZERO
    if node.func == "sin":
        outer = call("cos", node.arg)
    elif node.func == "cos":
        outer = neg(call("sin", node.arg))
    elif node.func == "exp":
        outer = node
    elif node.func == "sqrt":
        outer = div(ONE, mul(Num(2.0), node))
    elif node.func == "log":
        outer = div(ONE, node.arg)
    else:
        raise TypeError(f"Unknown function {node.func}")
    return mul(outer, inner)


def symbolic_derivative(e: Expr, var: str) -> Expr:
    """Exact derivative tree with constant folding and 0/1 identities"""
    if var not in VARIABLES:
        raise ValueError(f"variable must be one of {VARIABLES}")
    return differentiate(e, var)


def simplify(node: Expr) -> Expr:
    """Rebuild a tree bottom-up through the simplifying constructors"""
    if isinstance(node, Neg):
        return neg(simplify(node.arg))
    if isinstance(node, Call):
        return call(node.func, simplify(node.arg))
    builders = {Add: add, Sub: sub, Mul: mul, Div: div, Pow: power}
    builder = builders.get(type(node))
    if builder is not None:
        return builder(simplify(node.left), simplify(node.right))
    return node


# Evaluation

@singledispatch
def evaluate(node: Expr, env: Dict[str, np.ndarray]):
    raise TypeError(f"Cannot evaluate a {type(node).__name__}")


@evaluate.register(Num)
def _(node: Num, env):
    return node.value


@evaluate.register(Var)
def _(node: Var, env):
    return env[node.name]


@evaluate.register(Neg)
def _(node: Neg, env):
    return -evaluate(node.arg, env)


@evaluate.register(Add)
def _(node: Add, env):
    return evaluate(node.left, env) + evaluate(node.right, env)


@evaluate.register(Sub)
def _(node: Sub, env):
    return evaluate(node.left, env) - evaluate(node.right, env)


@evaluate.register(Mul)
def _(node: Mul, env):
    return evaluate(node.left, env) * evaluate(node.right, env)


@evaluate.register(Div)
def _(node: Div, env):
    return np.divide(evaluate(node.left, env), evaluate(node.right, env))


@evaluate.register(Pow)
def _(node: Pow, env):
    return np.power(evaluate(node.left, env), evaluate(node.right, env))


@evaluate.register(Call)
def _(node: Call, env):
    return FUNCTIONS[node.func][0](evaluate(node.arg, env))


# Pretty printing

def _wrap(node: Expr, parenthesize: bool) -> str:
    text = to_source(node)
    return f"({text})" if parenthesize else text


@singledispatch
def to_source(node: Expr) -> str:
    raise TypeError(f"Cannot print a {type(node).__name__}")


@to_source.register(Num)
def _(node: Num) -> str:
    return repr(node.value)


@to_source.register(Var)
def _(node: Var) -> str:
    return node.name


@to_source.register(Neg)
def _(node: Neg) -> str:
    return "-" + _wrap(node.arg, node.arg.precedence < Neg.precedence)


@to_source.register(Call)
def _(node: Call) -> str:
    return f"{node.func}({to_source(node.arg)})"


def _binary_source(node) -> str:
    if isinstance(node, Pow):
        left = _wrap(node.left, node.left.precedence <= Pow.precedence)
        right = _wrap(node.right, node.right.precedence < 5)
        return f"{left}^{right}"
    left = _wrap(node.left, node.left.precedence < node.precedence)
    right = _wrap(node.right, node.right.precedence <= node.precedence)
    return f"{left} {node.symbol} {right}"


for _node_type in (Add, Sub, Mul, Div, Pow):
    to_source.register(_node_type)(_binary_source)


def tree_size(node: Expr) -> int:
    if isinstance(node, (Num, Var)):
        return 1
    if isinstance(node, (Neg, Call)):
        return 1 + tree_size(node.arg)
    return 1 + tree_size(node.left) + tree_size(node.right)


# Vector fields

class ExprField(BeltramiField):
    """
    Field given by three expression trees in Euclidean coordinates

    Partial derivatives are computed symbolically on demand up to the
    configured degree cap and cached; the proportionality function is
    estimated pointwise.
    """

    def __init__(self, components: Tuple[Expr, Expr, Expr], domain: AnyDomain, name: str = "expr",
                 scale: float = 1.0):
        super().__init__(name=name, domain=domain, lam=None, scale=scale)
        self.components = tuple(components)
        self.degree_cap = settings.MAX_DERIVATIVE_ORDER
        self._cache: Dict[Tuple[int, MultiIndex], Expr] = {}
        self._lock = threading.Lock()
        self._div_curl: Optional[Tuple[Expr, Tuple[Expr, Expr, Expr]]] = None
        if isinstance(domain, BallDomain):
            self.tangent_to_boundary = self._check_tangency()

    def _evaluate_trees(self, trees, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        env = {"x": p[..., 0], "y": p[..., 1], "z": p[..., 2]}
        with np.errstate(all="ignore"):
            values = [np.broadcast_to(np.asarray(evaluate(tree, env), dtype=float), p.shape[:-1])
                      for tree in trees]
        return np.stack(values, axis=-1)

    def eval(self, points) -> np.ndarray:
        return self._evaluate_trees(self.components, points)

    def derivative_tree(self, component: int, alpha: MultiIndex) -> Optional[Expr]:
        """d^alpha of one component; None beyond the degree cap"""
        alpha = tuple(int(a) for a in alpha)
        if sum(alpha) == 0:
            return self.components[component]
        if sum(alpha) > self.degree_cap:
            return None
        key = (component, alpha)
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached
        axis = next(i for i, a in enumerate(alpha) if a > 0)
        lower = list(alpha)
        lower[axis] -= 1
        tree = symbolic_derivative(self.derivative_tree(component, tuple(lower)), VARIABLES[axis])
        with self._lock:
            self._cache.setdefault(key, tree)
        return tree

    def partial(self, alpha: MultiIndex, points) -> Optional[np.ndarray]:
        trees = [self.derivative_tree(i, alpha) for i in range(3)]
        if any(tree is None for tree in trees):
            return None
        return self._evaluate_trees(trees, points)

    def jacobian(self, points) -> np.ndarray:
        columns = [self.partial(tuple(int(i == axis) for i in range(3)), points) for axis in range(3)]
        return np.stack(columns, axis=-1)

    def curl(self, points) -> np.ndarray:
        _, rotation = divergence_and_curl(self)
        return self._evaluate_trees(rotation, points)

    def divergence(self, points) -> np.ndarray:
        divergence, _ = divergence_and_curl(self)
        return self._evaluate_trees((divergence,), points)[..., 0]

    def _check_tangency(self) -> bool:
        radius = self.domain.radius
        theta = (np.arange(64) + 0.5) * np.pi / 64
        phi = np.arange(128) * 2.0 * np.pi / 128
        tt, pp = np.meshgrid(theta, phi, indexing="ij")
        normals = np.stack([np.sin(tt) * np.cos(pp), np.sin(tt) * np.sin(pp), np.cos(tt)], axis=-1)
        radial = np.sum(self.eval(radius * normals) * normals, axis=-1)
        return bool(np.nanmax(np.abs(radial)) <= 1e-10 * self.scale)

    def source(self) -> str:
        return ", ".join(to_source(tree) for tree in self.components)


def divergence_and_curl(f: ExprField) -> Tuple[Expr, Tuple[Expr, Expr, Expr]]:
    """Exact symbolic divergence and curl in Euclidean coordinates"""
    if f._div_curl is None:
        d = [[f.derivative_tree(i, tuple(int(k == j) for k in range(3))) for j in range(3)] for i in range(3)]
        divergence = add(add(d[0][0], d[1][1]), d[2][2])
        rotation = (
            sub(d[2][1], d[1][2]),
            sub(d[0][2], d[2][0]),
            sub(d[1][0], d[0][1]),
        )
        f._div_curl = (divergence, rotation)
    return f._div_curl


def parse_field(source: str, domain: Optional[AnyDomain] = None, name: Optional[str] = None) -> ExprField:
    """
    Parse three comma-separated component expressions

    Args:
        source: e.g. "sin(z)-cos(y), cos(z), -sin(y)"
        domain: domain the field lives on (default: the 2*pi torus)
        name: display name

    Returns:
        ExprField evaluating the expressions
    """
    components = Parser(source).parse_field()
    domain = domain or TorusDomain()
    logger.debug(f"Parsed field components: {[to_source(c) for c in components]}")
    return ExprField(components, domain, name=name or f"expr({source.strip()})")


def load_field_file(path: str, domain: Optional[AnyDomain] = None) -> ExprField:
    """Read a field from a file with three lines or one comma-separated line"""
    file_path = Path(path)
    try:
        text = file_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CatalogError(f"cannot read expression file {path!r}: {exc.strerror}", "fields.catalog_lookup")
    lines = [line.strip() for line in text.splitlines() if line.strip() and not line.strip().startswith("#")]
    if len(lines) == 3:
        source = ", ".join(lines)
    elif len(lines) == 1:
        source = lines[0]
    else:
        raise ExpressionSyntaxError(f"expected one or three non-empty lines, found {len(lines)}", 0)
    field = parse_field(source, domain, name=f"expr:{path}")
    logger.info(f"Loaded expression field from {path}: {field.source()}")
    return field
