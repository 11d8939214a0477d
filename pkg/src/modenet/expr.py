"""Small expression language shared by guards, arc inscriptions and updates.

Values are plain ints or symbolic colour constants (strings).  The grammar is
deliberately tiny: boolean combinations of comparisons over integer-affine
terms and colour symbols.

    expr    := or_
    or_     := and_ ("or" and_)*
    and_    := not_ ("and" not_)*
    not_    := "not" not_ | cmp
    cmp     := sum (("=="|"!="|"<="|">="|"<"|">") sum)?
    sum     := term (("+"|"-") term)*
    term    := factor ("*" factor)*        # at least one factor per "*" literal
    factor  := INT | NAME | "-" factor | "(" expr ")" | "true" | "false"

ASTs are nested tuples so they hash and compare structurally:
("int", k), ("bool", b), ("name", s), ("neg", e), ("add"|"sub"|"mul", l, r),
("cmp", op, l, r), ("not", e), ("and"|"or", l, r).
"""

from __future__ import annotations

import re

__all__ = [
    "ExprError",
    "EvalError",
    "parse_expr",
    "eval_expr",
    "expr_names",
    "render_expr",
    "subst_expr",
    "comparison_atoms",
    "TRUE",
]


class ExprError(ValueError):
    """Syntax error; `pos` is the 0-based character offset."""

    def __init__(self, message, pos=None):
        super().__init__(message if pos is None else f"{message} (at column {pos})")
        self.pos = pos


class EvalError(ValueError):
    """Type or name error while evaluating an expression."""


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>==|!=|<=|>=|[<>+\-*()]))"
)

_KEYWORDS = {"and", "or", "not", "true", "false"}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            offender = pos + len(text[pos:]) - len(stripped)
            raise ExprError(f"unexpected character {stripped[0]!r}", offender)
        if m.group("int") is not None:
            tokens.append(("int", int(m.group("int")), m.start("int")))
        elif m.group("name") is not None:
            name = m.group("name")
            kind = "kw" if name in _KEYWORDS else "name"
            tokens.append((kind, name, m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, value, pos = self.peek()
        if kind == "op" and value == op:
            return self.next()
        raise ExprError(f"expected {op!r}", pos)

    def at_op(self, *ops):
        kind, value, _ = self.peek()
        return kind == "op" and value in ops

    def at_kw(self, word):
        kind, value, _ = self.peek()
        return kind == "kw" and value == word

    def parse(self):
        node = self.or_()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExprError(f"trailing input {value!r}", pos)
        return node

    def or_(self):
        node = self.and_()
        while self.at_kw("or"):
            self.next()
            node = ("or", node, self.and_())
        return node

    def and_(self):
        node = self.not_()
        while self.at_kw("and"):
            self.next()
            node = ("and", node, self.not_())
        return node

    def not_(self):
        if self.at_kw("not"):
            self.next()
            return ("not", self.not_())
        return self.cmp()

    def cmp(self):
        node = self.sum_()
        if self.at_op("==", "!=", "<=", ">=", "<", ">"):
            _, op, _ = self.next()
            node = ("cmp", op, node, self.sum_())
        return node

    def sum_(self):
        node = self.term()
        while self.at_op("+", "-"):
            _, op, _ = self.next()
            node = ("add" if op == "+" else "sub", node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.at_op("*"):
            _, _, pos = self.next()
            rhs = self.factor()
            if expr_names(node) and expr_names(rhs):
                raise ExprError("non-affine product (both factors symbolic)", pos)
            node = ("mul", node, rhs)
        return node

    def factor(self):
        kind, value, pos = self.next()
        if kind == "int":
            return ("int", value)
        if kind == "name":
            return ("name", value)
        if kind == "kw" and value in ("true", "false"):
            return ("bool", value == "true")
        if kind == "op" and value == "-":
            return ("neg", self.factor())
        if kind == "op" and value == "(":
            node = self.or_()
            self.expect_op(")")
            return node
        raise ExprError(f"unexpected token {value!r}", pos)


def parse_expr(text):
    """Parse `text` into an AST tuple; raises ExprError with column info."""
    return _Parser(text).parse()


def expr_names(ast):
    """Frozenset of identifiers referenced by the expression."""
    head = ast[0]
    if head == "name":
        return frozenset((ast[1],))
    if head in ("int", "bool"):
        return frozenset()
    out = frozenset()
    for child in ast[1:]:
        if isinstance(child, tuple):
            out |= expr_names(child)
    return out


def _want_int(value, what):
    if isinstance(value, bool) or not isinstance(value, int):
        raise EvalError(f"{what} needs an integer, got {value!r}")
    return value


def eval_expr(ast, env):
    """Evaluate under `env` (name -> int | colour symbol).

    Comparisons other than ==/!= require integers; and/or/not require booleans.
    """
    head = ast[0]
    if head == "int":
        return ast[1]
    if head == "bool":
        return ast[1]
    if head == "name":
        try:
            return env[ast[1]]
        except KeyError:
            raise EvalError(f"unknown identifier {ast[1]!r}") from None
    if head == "neg":
        return -_want_int(eval_expr(ast[1], env), "negation")
    if head in ("add", "sub", "mul"):
        left = _want_int(eval_expr(ast[1], env), "arithmetic")
        right = _want_int(eval_expr(ast[2], env), "arithmetic")
        if head == "add":
            return left + right
        if head == "sub":
            return left - right
        return left * right
    if head == "cmp":
        op = ast[1]
        left = eval_expr(ast[2], env)
        right = eval_expr(ast[3], env)
        if op in ("==", "!="):
            if isinstance(left, bool) or isinstance(right, bool):
                raise EvalError("cannot compare booleans")
            if isinstance(left, int) != isinstance(right, int):
                raise EvalError(f"cannot compare {left!r} with {right!r}")
            return (left == right) if op == "==" else (left != right)
        left = _want_int(left, f"comparison {op}")
        right = _want_int(right, f"comparison {op}")
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        return left >= right
    if head == "not":
        value = eval_expr(ast[1], env)
        if not isinstance(value, bool):
            raise EvalError("'not' needs a boolean")
        return not value
    if head in ("and", "or"):
        left = eval_expr(ast[1], env)
        if not isinstance(left, bool):
            raise EvalError(f"'{head}' needs booleans")
        if head == "and" and not left:
            return False
        if head == "or" and left:
            return True
        right = eval_expr(ast[2], env)
        if not isinstance(right, bool):
            raise EvalError(f"'{head}' needs booleans")
        return right
    raise EvalError(f"malformed expression node {head!r}")


_PRECEDENCE = {
    "or": 1,
    "and": 2,
    "not": 3,
    "cmp": 4,
    "add": 5,
    "sub": 5,
    "mul": 6,
    "neg": 7,
    "int": 8,
    "bool": 8,
    "name": 8,
}


def render_expr(ast):
    """Deterministic textual form; parse_expr(render_expr(a)) == a."""

    def wrap(child, parent_prec, right_side=False):
        text = render_expr(child)
        child_prec = _PRECEDENCE[child[0]]
        if child_prec < parent_prec or (right_side and child_prec == parent_prec):
            return f"({text})"
        return text

    head = ast[0]
    if head == "int":
        return str(ast[1])
    if head == "bool":
        return "true" if ast[1] else "false"
    if head == "name":
        return ast[1]
    if head == "neg":
        return f"-{wrap(ast[1], _PRECEDENCE['neg'])}"
    if head == "not":
        return f"not {wrap(ast[1], _PRECEDENCE['not'])}"
    if head == "cmp":
        prec = _PRECEDENCE["cmp"]
        return f"{wrap(ast[2], prec, True)} {ast[1]} {wrap(ast[3], prec, True)}"
    symbol = {"add": "+", "sub": "-", "mul": "*", "and": "and", "or": "or"}[head]
    prec = _PRECEDENCE[head]
    return f"{wrap(ast[1], prec)} {symbol} {wrap(ast[2], prec, True)}"


def subst_expr(ast, mapping):
    """Replace name nodes per `mapping` (name -> AST)."""
    head = ast[0]
    if head == "name":
        return mapping.get(ast[1], ast)
    if head in ("int", "bool"):
        return ast
    return tuple(
        subst_expr(child, mapping) if isinstance(child, tuple) else child
        for child in ast
    )


def comparison_atoms(ast):
    """Yield every ("cmp", op, l, r) node, including nested ones."""
    if ast[0] == "cmp":
        yield ast
    for child in ast[1:]:
        if isinstance(child, tuple):
            yield from comparison_atoms(child)


TRUE = ("bool", True)
