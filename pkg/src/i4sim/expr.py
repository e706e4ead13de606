"""Rate-equation expression language: parser, evaluator, compiler.

Expressions are infix arithmetic over identifiers, decimal literals, and the
reserved symbol `time`, with a small set of simulation builtins.  The same
tree supports three uses: direct tree-walk evaluation (`evaluate`), a
compiled fast path for the inner simulation loop (`compile_expr`), and
source round-tripping (`to_source`).  The compiled path performs the exact
same float operations as the tree walk, so results are bit-identical.
"""

from __future__ import annotations

import re
from typing import Callable, Iterator, Optional, Sequence

from .errors import (
    DivisionByZeroError,
    ExpressionSyntaxError,
    UnboundIdentifierError,
    UnknownFunctionError,
)

TIME = "time"

# builtin name -> arity (None = variadic, >= 2)
BUILTINS = {
    "min": None,
    "max": None,
    "clamp": 3,
    "if_positive": 3,
    "smooth": 2,
    "step_at": 2,
    "pulse": 3,
    "lookup": 2,
}


# ---------------------------------------------------------------------------
# AST nodes


class Node:
    __slots__ = ()


class Num(Node):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)

    def __eq__(self, other):
        return isinstance(other, Num) and self.value == other.value

    def __repr__(self):
        return f"Num({self.value!r})"


class Ident(Node):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __eq__(self, other):
        return isinstance(other, Ident) and self.name == other.name

    def __repr__(self):
        return f"Ident({self.name!r})"


class Unary(Node):
    __slots__ = ("operand",)

    def __init__(self, operand: Node):
        self.operand = operand

    def __eq__(self, other):
        return isinstance(other, Unary) and self.operand == other.operand

    def __repr__(self):
        return f"Unary({self.operand!r})"


class Binary(Node):
    __slots__ = ("op", "left", "right")

    def __init__(self, op: str, left: Node, right: Node):
        self.op = op
        self.left = left
        self.right = right

    def __eq__(self, other):
        return (
            isinstance(other, Binary)
            and self.op == other.op
            and self.left == other.left
            and self.right == other.right
        )

    def __repr__(self):
        return f"Binary({self.op!r}, {self.left!r}, {self.right!r})"


class Call(Node):
    __slots__ = ("func", "args", "state_key")

    def __init__(self, func: str, args: Sequence[Node]):
        self.func = func
        self.args = list(args)
        # assigned by the engine for smooth() instances; identifies the
        # hidden state variable carried in the evaluation environment
        self.state_key: Optional[str] = None

    def __eq__(self, other):
        return (
            isinstance(other, Call)
            and self.func == other.func
            and self.args == other.args
        )

    def __repr__(self):
        return f"Call({self.func!r}, {self.args!r})"


Expression = Node


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[+\-*/(),])
  | (?P<ws>\s+)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(source: str) -> Iterator[_Token]:
    line, col = 1, 1
    for m in _TOKEN_RE.finditer(source):
        kind = m.lastgroup
        text = m.group()
        if kind == "bad":
            raise ExpressionSyntaxError(line, col, "a token", text)
        if kind != "ws":
            yield _Token(kind, text, line, col)
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
    yield _Token("eof", "", line, col)


# ---------------------------------------------------------------------------
# Parser (recursive descent, standard precedence)


class _Parser:
    def __init__(self, source: str):
        self.tokens = list(_tokenize(source))
        self.pos = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.cur
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        if self.cur.kind == "op" and self.cur.text == text:
            return self.advance()
        raise ExpressionSyntaxError(self.cur.line, self.cur.col, repr(text), self.cur.text or "end of input")

    def parse(self) -> Node:
        node = self.expr()
        if self.cur.kind != "eof":
            raise ExpressionSyntaxError(self.cur.line, self.cur.col, "end of input", self.cur.text)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.cur.kind == "op" and self.cur.text in "+-":
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.cur.kind == "op" and self.cur.text in "*/":
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.cur.kind == "op" and self.cur.text == "-":
            self.advance()
            return Unary(self.unary())
        return self.primary()

    def primary(self) -> Node:
        tok = self.cur
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if self.cur.kind == "op" and self.cur.text == "(":
                return self.call(tok)
            return Ident(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionSyntaxError(tok.line, tok.col, "an expression", tok.text or "end of input")

    def call(self, name_tok: _Token) -> Node:
        name = name_tok.text
        if name not in BUILTINS:
            raise UnknownFunctionError(name, name_tok.line, name_tok.col)
        self.expect("(")
        args = [self.expr()]
        while self.cur.kind == "op" and self.cur.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect(")")
        arity = BUILTINS[name]
        if arity is None:
            if len(args) < 2:
                raise ExpressionSyntaxError(
                    name_tok.line, name_tok.col, f"at least 2 arguments to {name}", f"{len(args)}"
                )
        elif len(args) != arity:
            raise ExpressionSyntaxError(
                name_tok.line, name_tok.col, f"{arity} arguments to {name}", f"{len(args)}"
            )
        if name == "lookup" and not isinstance(args[0], Ident):
            raise ExpressionSyntaxError(
                name_tok.line, name_tok.col, "a table name as first argument to lookup", ""
            )
        return Call(name, args)


def parse_expr(source: str) -> Expression:
    """Parse an expression string into a tree."""
    return _Parser(source).parse()


# ---------------------------------------------------------------------------
# Printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_source(node: Node) -> str:
    """Render a tree back to canonical source; parse(to_source(e)) == e."""
    return _render(node, 0)


def _render(node: Node, parent_prec: int) -> str:
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Ident):
        return node.name
    if isinstance(node, Unary):
        inner = _render(node.operand, 3)
        s = f"-{inner}"
        return f"({s})" if parent_prec >= 3 else s
    if isinstance(node, Binary):
        prec = _PREC[node.op]
        left = _render(node.left, prec - 1)
        # right side binds one tighter so non-associative - and / re-parse
        right = _render(node.right, prec)
        s = f"{left} {node.op} {right}"
        return f"({s})" if parent_prec >= prec else s
    if isinstance(node, Call):
        args = ", ".join(_render(a, 0) for a in node.args)
        return f"{node.func}({args})"
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# Analysis helpers


def walk(node: Node) -> Iterator[Node]:
    yield node
    if isinstance(node, Unary):
        yield from walk(node.operand)
    elif isinstance(node, Binary):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Call):
        args = node.args
        if node.func == "lookup":
            args = args[1:]  # first arg is a table name, not a variable
        for a in args:
            yield from walk(a)


def identifiers(node: Node) -> set[str]:
    """Variable names referenced by the expression (`time` excluded)."""
    return {n.name for n in walk(node) if isinstance(n, Ident) and n.name != TIME}


def referenced_tables(node: Node) -> set[str]:
    out = set()
    for n in walk(node):
        if isinstance(n, Call) and n.func == "lookup":
            out.add(n.args[0].name)
    return out


def smooth_calls(node: Node) -> list[Call]:
    """All smooth() instances in evaluation order (post-order)."""
    out = []

    def visit(n: Node):
        if isinstance(n, Unary):
            visit(n.operand)
        elif isinstance(n, Binary):
            visit(n.left)
            visit(n.right)
        elif isinstance(n, Call):
            for a in n.args:
                visit(a)
            if n.func == "smooth":
                out.append(n)

    visit(node)
    return out


# ---------------------------------------------------------------------------
# Evaluation

LookupTable = Sequence[tuple[float, float]]


def _div(n: float, d: float) -> float:
    if d == 0.0:
        if n == 0.0:
            return 0.0
        raise DivisionByZeroError(n)
    return n / d


def _clamp(x: float, lo: float, hi: float) -> float:
    return min(max(x, lo), hi)


def _step(t: float, t0: float, height: float) -> float:
    return height if t > t0 else 0.0


def _pulse(t: float, t0: float, width: float, height: float) -> float:
    return height if (t > t0 and t <= t0 + width) else 0.0


def _lookup(table: LookupTable, x: float) -> float:
    pts = table
    if x <= pts[0][0]:
        return pts[0][1]
    if x >= pts[-1][0]:
        return pts[-1][1]
    for i in range(1, len(pts)):
        x1, y1 = pts[i]
        if x <= x1:
            x0, y0 = pts[i - 1]
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    return pts[-1][1]


def _smooth_get(env: dict, key: Optional[str], input_value: float) -> float:
    # smooth output is its state; the caller (the engine) carries the state
    # in env and integrates it.  A missing state self-initializes to the
    # current input (the t0 initialization convention) and is written back
    # so the engine can harvest it.
    if key is None:
        return input_value
    if key in env:
        return env[key]
    env[key] = input_value
    return input_value


def evaluate(node: Node, env: dict, t: float, tables: Optional[dict] = None) -> float:
    """Tree-walk evaluation with exact arithmetic semantics.

    0/0 evaluates to 0 (share-ratio guard); any other division by zero
    raises DivisionByZeroError.
    """
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Ident):
        if node.name == TIME:
            return t
        try:
            return env[node.name]
        except KeyError:
            raise UnboundIdentifierError(node.name) from None
    if isinstance(node, Unary):
        return -evaluate(node.operand, env, t, tables)
    if isinstance(node, Binary):
        lv = evaluate(node.left, env, t, tables)
        rv = evaluate(node.right, env, t, tables)
        if node.op == "+":
            return lv + rv
        if node.op == "-":
            return lv - rv
        if node.op == "*":
            return lv * rv
        return _div(lv, rv)
    if isinstance(node, Call):
        f = node.func
        if f == "lookup":
            table_name = node.args[0].name
            if not tables or table_name not in tables:
                raise UnboundIdentifierError(table_name)
            x = evaluate(node.args[1], env, t, tables)
            return _lookup(tables[table_name], x)
        if f == "smooth":
            value = evaluate(node.args[0], env, t, tables)
            return _smooth_get(env, node.state_key, value)
        vals = [evaluate(a, env, t, tables) for a in node.args]
        if f == "min":
            return min(vals)
        if f == "max":
            return max(vals)
        if f == "clamp":
            return _clamp(*vals)
        if f == "if_positive":
            return vals[1] if vals[0] > 0.0 else vals[2]
        if f == "step_at":
            return _step(t, vals[0], vals[1])
        if f == "pulse":
            return _pulse(t, vals[0], vals[1], vals[2])
    raise TypeError(f"unknown node {node!r}")


# ---------------------------------------------------------------------------
# Compilation (fast path for the simulation loop)


def compile_expr(node: Node, tables: Optional[dict] = None) -> Callable[[dict, float], float]:
    """Compile a tree to a python callable f(env, t) performing the same

    operations as `evaluate` (bit-identical results)."""
    src = _codegen(node)
    namespace = {
        "_div": _div,
        "_clamp": _clamp,
        "_step": _step,
        "_pulse": _pulse,
        "_lookup": _lookup,
        "_smooth_get": _smooth_get,
        "_tables": tables or {},
        "min": min,
        "max": max,
    }
    code = compile(f"lambda env, t: {src}", "<expr>", "eval")
    return eval(code, namespace)


def _codegen(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Ident):
        if node.name == TIME:
            return "t"
        return f"env[{node.name!r}]"
    if isinstance(node, Unary):
        return f"(-{_codegen(node.operand)})"
    if isinstance(node, Binary):
        l, r = _codegen(node.left), _codegen(node.right)
        if node.op == "/":
            return f"_div({l}, {r})"
        return f"({l} {node.op} {r})"
    if isinstance(node, Call):
        f = node.func
        if f == "lookup":
            x = _codegen(node.args[1])
            return f"_lookup(_tables[{node.args[0].name!r}], {x})"
        if f == "smooth":
            return f"_smooth_get(env, {node.state_key!r}, {_codegen(node.args[0])})"
        args = [_codegen(a) for a in node.args]
        if f in ("min", "max"):
            return f"{f}({', '.join(args)})"
        if f == "clamp":
            return f"_clamp({', '.join(args)})"
        if f == "if_positive":
            return f"({args[1]} if {args[0]} > 0.0 else {args[2]})"
        if f == "step_at":
            return f"_step(t, {args[0]}, {args[1]})"
        if f == "pulse":
            return f"_pulse(t, {args[0]}, {args[1]}, {args[2]})"
    raise TypeError(f"unknown node {node!r}")
