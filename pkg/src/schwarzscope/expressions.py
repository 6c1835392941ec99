"""Piecewise map expressions: parsing, differentiation, evaluation.

The expression grammar is deliberately small:

    expr   := ['-'] term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := base ('^' integer)?
    base   := number | 'x' | identifier | '(' expr ')' | func '(' expr ')'
    func   := sqrt | exp | log | sin | cos | tan

A leading unary minus is accepted at expr level (so pieces like
"-4*(2*a+1)*(x-1/2)^3 + (x-1/2) + a" parse without a synthetic "0 -").
Exponents are non-negative integer literals; everything else is spelled
with * and /.

ASTs are plain nested tuples, so they hash and compare structurally:

    ("num", 2.0)  ("var",)  ("param", "a")  ("neg", a)
    ("add", a, b) ("sub", a, b) ("mul", a, b) ("div", a, b)
    ("pow", a, n) ("call", "sin", a)

A MapExpr is an immutable piecewise map on a closed interval.  Pieces are
half-open [lo, hi) except the last, which is closed.  Four evaluation modes
share the one AST: compiled float lambdas (fast orbit iteration), Jet3
(derivatives through order 3), outward-rounded intervals with subdivision
(sound range enclosures), and numpy arrays (grids and histograms).
"""

import bisect
import json
import math
import re

import numpy as np

from .errors import DomainError, ParseError, PieceError, PoleError
from .intervals import Interval
from .jets import Jet3

FUNCTIONS = ("sqrt", "exp", "log", "sin", "cos", "tan")

_TOKEN_RE = re.compile(r"""
    \s*(?:
      (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
    | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
    | (?P<op>[-+*/^()])
    )""", re.VERBOSE)


def tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError("unexpected character %r" % stripped[0],
                             len(text) - len(stripped))
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num")), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.next()
        if kind != "op" or val != op:
            raise ParseError("expected %r" % op, pos)

    def parse(self):
        node = self.expr()
        kind, _, pos = self.peek()
        if kind != "end":
            raise ParseError("trailing input", pos)
        return node

    def expr(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.next()
            node = ("neg", self.term())
        else:
            node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.next()
                rhs = self.term()
                node = ("add" if val == "+" else "sub", node, rhs)
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.next()
                rhs = self.factor()
                node = ("mul" if val == "*" else "div", node, rhs)
            else:
                return node

    def factor(self):
        node = self.base()
        kind, val, _ = self.peek()
        if kind == "op" and val == "^":
            self.next()
            k2, v2, p2 = self.next()
            if k2 != "num" or v2 != int(v2):
                raise ParseError("exponent must be a non-negative integer", p2)
            node = ("pow", node, int(v2))
        return node

    def base(self):
        kind, val, pos = self.next()
        if kind == "num":
            return ("num", val)
        if kind == "name":
            if val in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return ("call", val, arg)
            if val == "x":
                return ("var",)
            return ("param", val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError("expected a number, name, or '('", pos)


def parse_expr(text):
    """Parse an expression string into an AST tuple."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# AST utilities: parameter collection, simplification, differentiation
# ---------------------------------------------------------------------------

def ast_params(ast):
    """Set of parameter names referenced by an AST."""
    kind = ast[0]
    if kind == "param":
        return {ast[1]}
    if kind in ("num", "var"):
        return set()
    if kind == "pow":
        return ast_params(ast[1])
    if kind == "call":
        return ast_params(ast[2])
    out = set()
    for child in ast[1:]:
        out |= ast_params(child)
    return out


def _is_num(ast, value=None):
    return ast[0] == "num" and (value is None or ast[1] == value)


def simplify(ast):
    """Light structural simplification: constant folding plus 0/1 identities.

    Keeps differentiated trees small; no algebraic rewriting beyond that,
    so interval evaluation sees essentially the expression the user wrote.
    """
    kind = ast[0]
    if kind in ("num", "var", "param"):
        return ast
    if kind == "neg":
        a = simplify(ast[1])
        if _is_num(a):
            return ("num", -a[1])
        if a[0] == "neg":
            return a[1]
        return ("neg", a)
    if kind == "pow":
        a = simplify(ast[1])
        n = ast[2]
        if n == 0:
            return ("num", 1.0)
        if n == 1:
            return a
        if _is_num(a):
            return ("num", a[1] ** n)
        return ("pow", a, n)
    if kind == "call":
        a = simplify(ast[2])
        if _is_num(a):
            fn = getattr(math, ast[1])
            try:
                return ("num", fn(a[1]))
            except ValueError:
                pass
        return ("call", ast[1], a)

    a = simplify(ast[1])
    b = simplify(ast[2])
    if _is_num(a) and _is_num(b):
        if kind == "add":
            return ("num", a[1] + b[1])
        if kind == "sub":
            return ("num", a[1] - b[1])
        if kind == "mul":
            return ("num", a[1] * b[1])
        if kind == "div" and b[1] != 0.0:
            return ("num", a[1] / b[1])
    if kind == "add":
        if _is_num(a, 0.0):
            return b
        if _is_num(b, 0.0):
            return a
    elif kind == "sub":
        if _is_num(b, 0.0):
            return a
        if _is_num(a, 0.0):
            return simplify(("neg", b))
    elif kind == "mul":
        if _is_num(a, 0.0) or _is_num(b, 0.0):
            return ("num", 0.0)
        if _is_num(a, 1.0):
            return b
        if _is_num(b, 1.0):
            return a
        if _is_num(a, -1.0):
            return simplify(("neg", b))
        if _is_num(b, -1.0):
            return simplify(("neg", a))
    elif kind == "div":
        if _is_num(a, 0.0):
            return ("num", 0.0)
        if _is_num(b, 1.0):
            return a
    return (kind, a, b)


def diff(ast):
    """Symbolic derivative with respect to x, simplified."""
    return simplify(_diff(ast))


def _diff(ast):
    kind = ast[0]
    if kind in ("num", "param"):
        return ("num", 0.0)
    if kind == "var":
        return ("num", 1.0)
    if kind == "neg":
        return ("neg", _diff(ast[1]))
    if kind == "add":
        return ("add", _diff(ast[1]), _diff(ast[2]))
    if kind == "sub":
        return ("sub", _diff(ast[1]), _diff(ast[2]))
    if kind == "mul":
        a, b = ast[1], ast[2]
        return ("add", ("mul", _diff(a), b), ("mul", a, _diff(b)))
    if kind == "div":
        a, b = ast[1], ast[2]
        num = ("sub", ("mul", _diff(a), b), ("mul", a, _diff(b)))
        return ("div", num, ("pow", b, 2))
    if kind == "pow":
        a, n = ast[1], ast[2]
        return ("mul", ("mul", ("num", float(n)), ("pow", a, n - 1)), _diff(a))
    if kind == "call":
        fname, a = ast[1], ast[2]
        da = _diff(a)
        if fname == "sqrt":
            return ("div", da, ("mul", ("num", 2.0), ("call", "sqrt", a)))
        if fname == "exp":
            return ("mul", da, ast)
        if fname == "log":
            return ("div", da, a)
        if fname == "sin":
            return ("mul", da, ("call", "cos", a))
        if fname == "cos":
            return ("neg", ("mul", da, ("call", "sin", a)))
        if fname == "tan":
            return ("mul", da, ("add", ("num", 1.0),
                                ("pow", ("call", "tan", a), 2)))
    raise ValueError("cannot differentiate node %r" % (ast[0],))


def subst(ast, replacement):
    """Substitute `replacement` for the variable x throughout `ast`."""
    kind = ast[0]
    if kind == "var":
        return replacement
    if kind in ("num", "param"):
        return ast
    if kind == "neg":
        return ("neg", subst(ast[1], replacement))
    if kind == "pow":
        return ("pow", subst(ast[1], replacement), ast[2])
    if kind == "call":
        return ("call", ast[1], subst(ast[2], replacement))
    return (kind, subst(ast[1], replacement), subst(ast[2], replacement))


def schwarzian_ast(ast):
    """AST of S(f) = f'''/f' - (3/2)(f''/f')^2 for a single-piece AST."""
    d1 = diff(ast)
    d2 = diff(d1)
    d3 = diff(d2)
    ratio = ("div", d2, d1)
    return simplify(("sub", ("div", d3, d1),
                     ("mul", ("num", 1.5), ("pow", ratio, 2))))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _emit(ast, params):
    kind = ast[0]
    if kind == "num":
        return repr(ast[1])
    if kind == "var":
        return "x"
    if kind == "param":
        try:
            return repr(float(params[ast[1]]))
        except KeyError:
            raise ParseError("unknown identifier %r" % ast[1])
    if kind == "neg":
        return "(-%s)" % _emit(ast[1], params)
    if kind == "pow":
        return "(%s)**%d" % (_emit(ast[1], params), ast[2])
    if kind == "call":
        return "_%s(%s)" % (ast[1], _emit(ast[2], params))
    op = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[kind]
    return "(%s %s %s)" % (_emit(ast[1], params), op, _emit(ast[2], params))


_MATH_ENV = {"_%s" % f: getattr(math, f) for f in FUNCTIONS}
_NUMPY_ENV = {"_%s" % f: getattr(np, f) for f in FUNCTIONS}


def compile_float(ast, params):
    """Compile an AST (with parameters bound) to a float -> float function."""
    src = "lambda x: " + _emit(ast, params)
    return eval(compile(src, "<map-expr>", "eval"), dict(_MATH_ENV))


def compile_array(ast, params):
    """Same as compile_float but numpy-vectorized."""
    src = "lambda x: " + _emit(ast, params)
    return eval(compile(src, "<map-expr>", "eval"), dict(_NUMPY_ENV))


def eval_jet(ast, jet, params):
    """Evaluate an AST on a Jet3 (components may be arrays)."""
    kind = ast[0]
    if kind == "num":
        return Jet3.constant(ast[1])
    if kind == "var":
        return jet
    if kind == "param":
        try:
            return Jet3.constant(float(params[ast[1]]))
        except KeyError:
            raise ParseError("unknown identifier %r" % ast[1])
    if kind == "neg":
        return -eval_jet(ast[1], jet, params)
    if kind == "pow":
        return eval_jet(ast[1], jet, params).pow_int(ast[2])
    if kind == "call":
        return getattr(eval_jet(ast[2], jet, params), ast[1])()
    a = eval_jet(ast[1], jet, params)
    b = eval_jet(ast[2], jet, params)
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    return a / b


def eval_interval_ast(ast, box, params):
    """Natural interval extension of an AST over a box."""
    kind = ast[0]
    if kind == "num":
        return Interval(ast[1])
    if kind == "var":
        return box
    if kind == "param":
        try:
            return Interval(float(params[ast[1]]))
        except KeyError:
            raise ParseError("unknown identifier %r" % ast[1])
    if kind == "neg":
        return -eval_interval_ast(ast[1], box, params)
    if kind == "pow":
        return eval_interval_ast(ast[1], box, params).pow_int(ast[2])
    if kind == "call":
        return getattr(eval_interval_ast(ast[2], box, params), ast[1])()
    a = eval_interval_ast(ast[1], box, params)
    b = eval_interval_ast(ast[2], box, params)
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    return a / b


def to_text(ast):
    """Render an AST back to grammar-conformant text."""
    kind = ast[0]
    if kind == "num":
        v = ast[1]
        if v < 0:
            return "(-%s)" % repr(-v)
        return repr(v)
    if kind == "var":
        return "x"
    if kind == "param":
        return ast[1]
    if kind == "neg":
        return "(0 - %s)" % to_text(ast[1])
    if kind == "pow":
        return "(%s)^%d" % (to_text(ast[1]), ast[2])
    if kind == "call":
        return "%s(%s)" % (ast[1], to_text(ast[2]))
    op = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[kind]
    return "(%s %s %s)" % (to_text(ast[1]), op, to_text(ast[2]))


# ---------------------------------------------------------------------------
# MapExpr
# ---------------------------------------------------------------------------

class Piece:
    __slots__ = ("lo", "hi", "ast", "src")

    def __init__(self, lo, hi, ast, src):
        self.lo = lo
        self.hi = hi
        self.ast = ast
        self.src = src

    def key(self):
        return (self.lo, self.hi, self.ast)


class MapExpr:
    """Immutable piecewise map on a closed real interval.

    Piece convention: piece i covers [lo_i, hi_i) except the last piece,
    which is closed.  Piece boundaries must abut exactly (no tolerance):
    they are taken verbatim from the input.
    """

    def __init__(self, domain, pieces, params=None):
        lo, hi = float(domain[0]), float(domain[1])
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
            raise DomainError("domain must be a finite interval [lo, hi], lo < hi")
        params = {k: float(v) for k, v in (params or {}).items()}
        if "x" in params or any(k in FUNCTIONS for k in params):
            raise PieceError("parameter names may not shadow 'x' or functions")

        built = []
        for p in pieces:
            if isinstance(p, Piece):
                built.append(p)
            else:
                a, b, src = p
                built.append(Piece(float(a), float(b), parse_expr(src), src))
        built.sort(key=lambda p: p.lo)
        if not built:
            raise PieceError("at least one piece is required")
        if built[0].lo != lo or built[-1].hi != hi:
            raise PieceError("pieces do not span the domain [%r, %r]" % (lo, hi))
        for cur, nxt in zip(built, built[1:]):
            if cur.hi != nxt.lo:
                raise PieceError("pieces must abut exactly: %r != %r"
                                 % (cur.hi, nxt.lo))
        for p in built:
            if p.lo >= p.hi:
                raise PieceError("empty piece [%r, %r]" % (p.lo, p.hi))
            missing = ast_params(p.ast) - set(params)
            if missing:
                raise ParseError("unknown identifier %r" % sorted(missing)[0])

        self._domain = (lo, hi)
        self._pieces = tuple(built)
        self._params = dict(params)
        self._bounds = np.array([p.lo for p in self._pieces] + [hi])
        self._inner_bounds = [p.hi for p in self._pieces[:-1]]
        self._float_fns = [compile_float(p.ast, params) for p in self._pieces]
        self._array_fns = [compile_array(p.ast, params) for p in self._pieces]
        self._deriv_cache = {}
        # a few ulps of the domain width: orbit iteration may land this far
        # outside due to roundoff, and clamping there is harmless
        self._edge_tol = 1e-13 * max(1.0, abs(lo), abs(hi), hi - lo)

    # -- identity ----------------------------------------------------------

    @property
    def domain(self):
        return self._domain

    @property
    def pieces(self):
        return self._pieces

    @property
    def params(self):
        return dict(self._params)

    def _key(self):
        return (self._domain, tuple(p.key() for p in self._pieces),
                tuple(sorted(self._params.items())))

    def __eq__(self, other):
        return isinstance(other, MapExpr) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return "MapExpr(domain=%r, %d piece(s))" % (self._domain, len(self._pieces))

    # -- piece lookup --------------------------------------------------------

    def clamp(self, x):
        lo, hi = self._domain
        if x < lo:
            if x < lo - self._edge_tol:
                raise DomainError("x=%r outside domain [%r, %r]" % (x, lo, hi))
            return lo
        if x > hi:
            if x > hi + self._edge_tol:
                raise DomainError("x=%r outside domain [%r, %r]" % (x, lo, hi))
            return hi
        return x

    def piece_index(self, x):
        x = self.clamp(x)
        # half-open [lo, hi) pieces, last piece closed
        return bisect.bisect_right(self._inner_bounds, x)

    # -- evaluation ----------------------------------------------------------

    def __call__(self, x):
        x = self.clamp(float(x))
        if self._inner_bounds:
            fn = self._float_fns[bisect.bisect_right(self._inner_bounds, x)]
        else:
            fn = self._float_fns[0]
        try:
            return fn(x)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise PoleError("evaluation failed at x=%r: %s" % (x, exc))

    def eval_jet(self, x, ast_order=0):
        """Jet3 of the map (or of its ast_order-th derivative) at x."""
        x = self.clamp(float(x))
        i = self.piece_index(x)
        ast = self._piece_ast(i, ast_order)
        try:
            return eval_jet(ast, Jet3.variable(x), self._params)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise PoleError("jet evaluation failed at x=%r: %s" % (x, exc))

    def eval_array(self, xs, ast_order=0):
        xs = np.asarray(xs, dtype=float)
        lo, hi = self._domain
        if xs.size and (xs.min() < lo - self._edge_tol
                        or xs.max() > hi + self._edge_tol):
            raise DomainError("array evaluation outside domain [%r, %r]" % (lo, hi))
        xs = np.clip(xs, lo, hi)
        idx = np.searchsorted(self._bounds, xs, side="right") - 1
        np.clip(idx, 0, len(self._pieces) - 1, out=idx)
        out = np.empty_like(xs)
        with np.errstate(all="ignore"):
            for i in range(len(self._pieces)):
                mask = idx == i
                if mask.any():
                    if ast_order == 0:
                        out[mask] = self._array_fns[i](xs[mask])
                    else:
                        fn = compile_array(self._piece_ast(i, ast_order),
                                           self._params)
                        out[mask] = fn(xs[mask])
        return out

    def _piece_ast(self, i, order):
        if order == 0:
            return self._pieces[i].ast
        key = (i, order)
        if key not in self._deriv_cache:
            self._deriv_cache[key] = diff(self._piece_ast(i, order - 1))
        return self._deriv_cache[key]

    def derivative(self, order=1):
        """New MapExpr whose pieces are the order-th derivative ASTs.

        The result is a piecewise function on the same domain, not
        necessarily a self-map; all evaluation modes still apply.
        """
        pieces = [Piece(p.lo, p.hi, self._piece_ast(i, order),
                        to_text(self._piece_ast(i, order)))
                  for i, p in enumerate(self._pieces)]
        return MapExpr(self._domain, pieces, self._params)

    def eval_interval(self, cell, ast_order=0, depth=8):
        """Sound enclosure of the map (or a derivative) over a cell.

        Subdivision-and-hull: the cell is cut at piece boundaries, each part
        is split into 2**depth uniform subcells, and the natural interval
        extensions are hulled.  PoleError propagates if any subcell hits a
        pole of the expression.
        """
        if isinstance(cell, Interval):
            a, b = cell.lo, cell.hi
        else:
            a, b = float(cell[0]), float(cell[1])
        lo, hi = self._domain
        if a < lo - self._edge_tol or b > hi + self._edge_tol or a > b:
            raise DomainError("cell [%r, %r] outside domain [%r, %r]"
                              % (a, b, lo, hi))
        a, b = max(a, lo), min(b, hi)
        if a == b:
            ast = self._piece_ast(self.piece_index(a), ast_order)
            return eval_interval_ast(ast, Interval(a), self._params)
        result = None
        n_sub = 2 ** depth
        for i, p in enumerate(self._pieces):
            pa, pb = max(a, p.lo), min(b, p.hi)
            if pa >= pb:
                continue
            ast = self._piece_ast(i, ast_order)
            edges = np.linspace(pa, pb, n_sub + 1)
            for j in range(n_sub):
                enc = eval_interval_ast(ast, Interval(edges[j], edges[j + 1]),
                                        self._params)
                result = enc if result is None else result.hull(enc)
        if result is None:
            raise DomainError("cell [%r, %r] does not meet any piece" % (a, b))
        return result

    def range_enclosure(self, depth=8):
        return self.eval_interval(self._domain, 0, depth)

    def is_self_map(self, depth=8, tol=None):
        lo, hi = self._domain
        if tol is None:
            tol = 1e-9 * (hi - lo)
        enc = self.range_enclosure(depth)
        return enc.lo >= lo - tol and enc.hi <= hi + tol

    # -- smoothness of the pasting -------------------------------------------

    def joint_report(self):
        """Jet mismatch at every interior piece boundary.

        Each entry compares (value, first, second, third derivative) of the
        two adjacent pieces evaluated at the shared boundary point, with a
        relative mismatch per jet component (scale max(1, |left|, |right|)).
        A side whose expression is singular exactly at the joint (a one-sided
        limit the written form cannot produce) reports nan components, which
        downstream reads as a jump.
        """
        out = []
        for i in range(len(self._pieces) - 1):
            b = self._pieces[i].hi
            left = self._jet_at_joint(self._pieces[i].ast, b)
            right = self._jet_at_joint(self._pieces[i + 1].ast, b)
            rel = []
            for lv, rv in zip(left.as_tuple(), right.as_tuple()):
                scale = max(1.0, abs(lv), abs(rv))
                rel.append(abs(lv - rv) / scale)
            out.append({"x": b, "left": left.as_tuple(),
                        "right": right.as_tuple(), "rel_jump": tuple(rel)})
        return out

    def _jet_at_joint(self, ast, b):
        try:
            return eval_jet(ast, Jet3.variable(b), self._params)
        except (ValueError, OverflowError, ZeroDivisionError, PoleError):
            return Jet3(math.nan, math.nan, math.nan, math.nan)

    def smoothness_class(self, tol=1e-9):
        """Largest r in {0..3} such that jets agree through order r at every
        interior boundary (relative tolerance `tol`), or -1 if values jump."""
        r = 3
        for joint in self.joint_report():
            k = 0
            while k < 4 and joint["rel_jump"][k] <= tol:
                k += 1
            r = min(r, k - 1)
        return r

    # -- (de)serialization -----------------------------------------------------

    def to_dict(self):
        return {
            "domain": [self._domain[0], self._domain[1]],
            "params": dict(sorted(self._params.items())),
            "pieces": [{"on": [p.lo, p.hi], "expr": p.src} for p in self._pieces],
        }


def parse_map(text, domain, params=None):
    """Single-piece MapExpr from an expression string."""
    return MapExpr(domain, [(domain[0], domain[1], text)], params)


def map_from_dict(d):
    try:
        domain = d["domain"]
        pieces = [(p["on"][0], p["on"][1], p["expr"]) for p in d["pieces"]]
    except (KeyError, TypeError, IndexError) as exc:
        raise PieceError("malformed map description: %s" % exc)
    return MapExpr(domain, pieces, d.get("params", {}))


def load_map(path):
    with open(path) as fh:
        return map_from_dict(json.load(fh))
