"""Symbolic scalar expressions over a small, differentiation-closed grammar.

Nodes: real constants, state variables, sums, products, negation, integer
powers, sin, cos, exp. Simplification is deliberately limited to constant
folding, 0/1 identities and flattening of nested sums/products so that
structural equality stays decidable. Division is excluded by design.

The parser accepts expressions over "x" (1-D) or "x1"/"x2" (2-D). Internally
higher variable indices are allowed (they arise for multi-state schemes) but
are not part of the textual grammar.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class EvalOverflowError(ExprError):
    """Evaluation produced a non-finite value."""


class Expr:
    __slots__ = ()

    def __str__(self) -> str:
        return to_string(self)


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    index: int


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple


@dataclass(frozen=True)
class Prod(Expr):
    factors: tuple


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Sin(Expr):
    arg: Expr


@dataclass(frozen=True)
class Cos(Expr):
    arg: Expr


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr


ZERO = Const(0.0)
ONE = Const(1.0)


def is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


# ---------------------------------------------------------------------------
# smart constructors (the only simplification layer)

def _coeff_core(e: Expr) -> tuple:
    """Split a term into (numeric coefficient, structural core) so that
    like terms can be collected: Neg flips the sign, a leading Const in a
    Prod is the coefficient."""
    coeff = 1.0
    if isinstance(e, Neg):
        coeff = -1.0
        e = e.arg
    if isinstance(e, Prod):
        rest = []
        for f in e.factors:
            if isinstance(f, Const):
                coeff *= f.value
            else:
                rest.append(f)
        if not rest:
            return coeff, ONE
        e = rest[0] if len(rest) == 1 else Prod(tuple(rest))
    return coeff, e


def add(*terms: Expr) -> Expr:
    const = 0.0
    coeffs: dict = {}
    order: list[Expr] = []
    for t in terms:
        parts = t.terms if isinstance(t, Sum) else (t,)
        for u in parts:
            if isinstance(u, Const):
                const += u.value
                continue
            c, core = _coeff_core(u)
            if core is ONE or (isinstance(core, Const) and core.value == 1.0):
                const += c
                continue
            if core not in coeffs:
                order.append(core)
            coeffs[core] = coeffs.get(core, 0.0) + c
    flat: list[Expr] = []
    for core in order:
        c = coeffs[core]
        if c == 0.0:
            continue
        flat.append(core if c == 1.0 else mul(Const(c), core))
    if const != 0.0 or not flat:
        flat.append(Const(const))
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(flat))


def mul(*factors: Expr) -> Expr:
    flat: list[Expr] = []
    const = 1.0
    for f in factors:
        parts = f.factors if isinstance(f, Prod) else (f,)
        for u in parts:
            if isinstance(u, Neg):
                const = -const
                u = u.arg
                if isinstance(u, Prod):
                    for v in u.factors:
                        if isinstance(v, Const):
                            const *= v.value
                        else:
                            flat.append(v)
                    continue
            if isinstance(u, Const):
                const *= u.value
            else:
                flat.append(u)
    if const == 0.0:
        return ZERO
    if const != 1.0 or not flat:
        flat.insert(0, Const(const))
    if len(flat) == 1:
        return flat[0]
    return Prod(tuple(flat))


def neg(e: Expr) -> Expr:
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.arg
    if isinstance(e, Prod):
        return mul(Const(-1.0), e)
    return Neg(e)


def powi(base: Expr, exponent: int) -> Expr:
    if exponent < 0:
        raise ExprError("negative exponents are outside the grammar")
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value ** exponent)
    return Pow(base, exponent)


def sin_of(e: Expr) -> Expr:
    return Const(math.sin(e.value)) if isinstance(e, Const) else Sin(e)


def cos_of(e: Expr) -> Expr:
    return Const(math.cos(e.value)) if isinstance(e, Const) else Cos(e)


def exp_of(e: Expr) -> Expr:
    if isinstance(e, Const):
        try:
            return Const(math.exp(e.value))
        except OverflowError:
            return Exp(e)  # fold only when the constant is representable
    return Exp(e)


# ---------------------------------------------------------------------------
# differentiation

def differentiate(e: Expr, axis: int = 0) -> Expr:
    """Exact symbolic derivative with respect to state variable `axis`."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == axis else ZERO
    if isinstance(e, Sum):
        return add(*(differentiate(t, axis) for t in e.terms))
    if isinstance(e, Neg):
        return neg(differentiate(e.arg, axis))
    if isinstance(e, Prod):
        pieces = []
        for i, f in enumerate(e.factors):
            df = differentiate(f, axis)
            if is_zero(df):
                continue
            rest = e.factors[:i] + e.factors[i + 1:]
            pieces.append(mul(df, *rest))
        return add(*pieces) if pieces else ZERO
    if isinstance(e, Pow):
        db = differentiate(e.base, axis)
        if is_zero(db):
            return ZERO
        return mul(Const(float(e.exponent)), powi(e.base, e.exponent - 1), db)
    if isinstance(e, Sin):
        return mul(cos_of(e.arg), differentiate(e.arg, axis))
    if isinstance(e, Cos):
        return neg(mul(sin_of(e.arg), differentiate(e.arg, axis)))
    if isinstance(e, Exp):
        return mul(exp_of(e.arg), differentiate(e.arg, axis))
    raise TypeError(f"unknown node {type(e).__name__}")


def nth_derivative(e: Expr, order: int, axis: int = 0) -> Expr:
    for _ in range(order):
        e = differentiate(e, axis)
    return e


def max_var_index(e: Expr) -> int:
    """Largest variable index used, or -1 for a constant expression."""
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Const):
        return -1
    if isinstance(e, Sum):
        return max((max_var_index(t) for t in e.terms), default=-1)
    if isinstance(e, Prod):
        return max((max_var_index(f) for f in e.factors), default=-1)
    if isinstance(e, (Neg, Sin, Cos, Exp)):
        return max_var_index(e.arg)
    if isinstance(e, Pow):
        return max_var_index(e.base)
    raise TypeError(type(e).__name__)


# ---------------------------------------------------------------------------
# printing (fully parenthesized, same grammar; parse(print(e)) == e)

def to_string(e: Expr) -> str:
    multi = max_var_index(e) >= 1

    def name(i: int) -> str:
        return f"x{i + 1}" if multi else "x"

    def render(u: Expr) -> str:
        if isinstance(u, Const):
            r = repr(u.value)
            return f"({r})" if u.value < 0 else r
        if isinstance(u, Var):
            return name(u.index)
        if isinstance(u, Sum):
            return "(" + " + ".join(render(t) for t in u.terms) + ")"
        if isinstance(u, Prod):
            return "(" + " * ".join(render(f) for f in u.factors) + ")"
        if isinstance(u, Neg):
            return "(-" + render(u.arg) + ")"
        if isinstance(u, Pow):
            return render(u.base) + "^" + str(u.exponent)
        if isinstance(u, Sin):
            return "sin(" + render(u.arg) + ")"
        if isinstance(u, Cos):
            return "cos(" + render(u.arg) + ")"
        if isinstance(u, Exp):
            return "exp(" + render(u.arg) + ")"
        raise TypeError(type(u).__name__)

    return render(e)


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
    r"|\d+(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_]\w*)|(?P<op>[-+*^()]))"
)

_FUNCS = {"sin": sin_of, "cos": cos_of, "exp": exp_of}


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            off = len(text) - len(stripped)
            raise ParseError(f"unexpected character {stripped[0]!r}", off)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def parse_expr(text: str, dim: int = 1) -> Expr:
    """Parse `text` over the fixed grammar; raises ParseError with offset."""
    if dim not in (1, 2):
        raise ExprError(f"dim must be 1 or 2, got {dim}")
    tokens = _tokenize(text)
    pos = 0

    def peek():
        return tokens[pos]

    def take():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        return tok

    def expect_op(op: str):
        kind, val, off = peek()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r}", off)
        take()

    def parse_e() -> Expr:
        kind, val, _ = peek()
        negate = False
        if kind == "op" and val in "+-":
            take()
            negate = val == "-"
        e = parse_term()
        if negate:
            e = neg(e)
        while True:
            kind, val, _ = peek()
            if kind == "op" and val in "+-":
                take()
                t = parse_term()
                e = add(e, neg(t) if val == "-" else t)
            else:
                return e

    def parse_term() -> Expr:
        e = parse_factor()
        while True:
            kind, val, _ = peek()
            if kind == "op" and val == "*":
                take()
                e = mul(e, parse_factor())
            else:
                return e

    def parse_factor() -> Expr:
        e = parse_primary()
        while True:
            kind, val, _ = peek()
            if kind == "op" and val == "^":
                take()
                k, v, off = peek()
                if k != "num" or not v.isdigit():
                    raise ParseError("expected unsigned integer exponent", off)
                take()
                e = powi(e, int(v))
            else:
                return e

    def parse_primary() -> Expr:
        kind, val, off = take()
        if kind == "num":
            return Const(float(val))
        if kind == "ident":
            if val in _FUNCS:
                expect_op("(")
                inner = parse_e()
                expect_op(")")
                return _FUNCS[val](inner)
            if val in ("x", "x1"):
                return Var(0)
            if val == "x2":
                if dim < 2:
                    raise ParseError("variable x2 used in a 1-D expression", off)
                return Var(1)
            raise ParseError(f"unknown identifier {val!r}", off)
        if kind == "op" and val == "(":
            inner = parse_e()
            expect_op(")")
            return inner
        raise ParseError("expected number, variable, function or '('", off)

    result = parse_e()
    kind, val, off = peek()
    if kind != "end":
        raise ParseError(f"unexpected trailing input {val!r}", off)
    return result


# ---------------------------------------------------------------------------
# evaluation

_NAMESPACE = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


def _codegen(e: Expr) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return f"p[{e.index}]"
    if isinstance(e, Sum):
        return "(" + "+".join(_codegen(t) for t in e.terms) + ")"
    if isinstance(e, Prod):
        return "(" + "*".join(_codegen(f) for f in e.factors) + ")"
    if isinstance(e, Neg):
        return "(-" + _codegen(e.arg) + ")"
    if isinstance(e, Pow):
        return "(" + _codegen(e.base) + f")**{e.exponent}"
    if isinstance(e, Sin):
        return "sin(" + _codegen(e.arg) + ")"
    if isinstance(e, Cos):
        return "cos(" + _codegen(e.arg) + ")"
    if isinstance(e, Exp):
        return "exp(" + _codegen(e.arg) + ")"
    raise TypeError(type(e).__name__)


@lru_cache(maxsize=None)
def compile_expr(e: Expr):
    """Compile to a callable f(p) where p is an indexable point (scalars or
    numpy arrays per axis). Safe on both; results are numpy scalars/arrays."""
    src = "lambda p: " + _codegen(e)
    return eval(src, dict(_NAMESPACE))  # noqa: S307 - generated from our own AST


def eval_expr(e: Expr, point) -> float:
    """IEEE-double evaluation at a point; raises on non-finite result."""
    point = tuple(float(v) for v in point)
    need = max_var_index(e) + 1
    if len(point) < need:
        raise ExprError(f"point of dim {len(point)} for expression using {need} variables")
    v = float(compile_expr(e)(point))
    if not math.isfinite(v):
        raise EvalOverflowError(f"non-finite value at {point}")
    return v


def eval_array(e: Expr, axes) -> np.ndarray:
    """Vectorized evaluation; `axes` is a sequence of equally-shaped arrays."""
    out = compile_expr(e)(list(np.asarray(a, dtype=float) for a in axes))
    return np.broadcast_to(np.asarray(out, dtype=float), np.asarray(axes[0]).shape).copy() \
        if np.ndim(out) == 0 else np.asarray(out, dtype=float)


# ---------------------------------------------------------------------------
# domains and sup-norm scanning

@dataclass(frozen=True)
class Domain:
    """Axis-aligned closed box, 1 or 2 axes."""
    intervals: tuple

    def __post_init__(self):
        if not 1 <= len(self.intervals) <= 2:
            raise ExprError("Domain supports 1 or 2 axes")
        for lo, hi in self.intervals:
            if not (lo < hi):
                raise ExprError(f"empty interval [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.intervals)


def Domain1D(lo: float, hi: float) -> Domain:
    return Domain(((float(lo), float(hi)),))


def Domain2D(lo1: float, hi1: float, lo2: float, hi2: float) -> Domain:
    return Domain(((float(lo1), float(hi1)), (float(lo2), float(hi2))))


@dataclass(frozen=True)
class SupNormEstimate:
    value: float
    grid_spacing: float
    location: tuple

    def __float__(self) -> float:
        return self.value


def _golden_max(f, lo: float, hi: float, iters: int = 80) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    xm = 0.5 * (a + b)
    return xm, f(xm)


def scan_supnorm(e: Expr, dom: Domain, samples_per_axis: int | None = None) -> SupNormEstimate:
    """Approximate sup |e| on the domain: dense uniform sampling followed by
    local golden-section refinement around the best sample. The result is a
    lower bound on the true sup, reported with the grid spacing."""
    if samples_per_axis is None:
        samples_per_axis = 20001 if dom.dim == 1 else 501
    fn = compile_expr(e)
    grids = [np.linspace(lo, hi, samples_per_axis) for lo, hi in dom.intervals]
    if dom.dim == 1:
        vals = np.abs(np.broadcast_to(fn([grids[0]]), grids[0].shape))
        if not np.all(np.isfinite(vals)):
            raise EvalOverflowError("non-finite sample during sup-norm scan")
        i = int(np.argmax(vals))
        spacing = (dom.intervals[0][1] - dom.intervals[0][0]) / (samples_per_axis - 1)
        lo = max(dom.intervals[0][0], grids[0][i] - spacing)
        hi = min(dom.intervals[0][1], grids[0][i] + spacing)
        x_ref, v_ref = _golden_max(lambda x: abs(float(fn([x]))), lo, hi)
        if v_ref >= vals[i]:
            return SupNormEstimate(float(v_ref), spacing, (float(x_ref),))
        return SupNormEstimate(float(vals[i]), spacing, (float(grids[0][i]),))
    xx, yy = np.meshgrid(grids[0], grids[1], indexing="ij")
    vals = np.abs(np.broadcast_to(fn([xx, yy]), xx.shape))
    if not np.all(np.isfinite(vals)):
        raise EvalOverflowError("non-finite sample during sup-norm scan")
    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    spacings = [(hi - lo) / (samples_per_axis - 1) for lo, hi in dom.intervals]
    best = [float(grids[0][i]), float(grids[1][j])]
    best_val = float(vals[i, j])
    for _ in range(3):  # coordinate-wise refinement sweeps
        for axis in range(2):
            lo = max(dom.intervals[axis][0], best[axis] - spacings[axis])
            hi = min(dom.intervals[axis][1], best[axis] + spacings[axis])

            def f1(x, axis=axis):
                pt = list(best)
                pt[axis] = x
                return abs(float(fn(pt)))

            xr, vr = _golden_max(f1, lo, hi)
            if vr > best_val:
                best[axis], best_val = xr, vr
    return SupNormEstimate(best_val, max(spacings), tuple(best))


def scan_argmin(e: Expr, dom: Domain, samples_per_axis: int | None = None) -> tuple:
    """Location of the minimum of e on the domain (dense scan + refinement)."""
    if samples_per_axis is None:
        samples_per_axis = 20001 if dom.dim == 1 else 501
    fn = compile_expr(e)
    if dom.dim == 1:
        xs = np.linspace(*dom.intervals[0], samples_per_axis)
        vals = np.broadcast_to(fn([xs]), xs.shape)
        i = int(np.argmin(vals))
        spacing = (dom.intervals[0][1] - dom.intervals[0][0]) / (samples_per_axis - 1)
        lo = max(dom.intervals[0][0], xs[i] - spacing)
        hi = min(dom.intervals[0][1], xs[i] + spacing)
        xm, vm = _golden_max(lambda x: -float(fn([x])), lo, hi)
        return (float(xm) if -vm <= vals[i] else float(xs[i]),)
    grids = [np.linspace(lo, hi, samples_per_axis) for lo, hi in dom.intervals]
    xx, yy = np.meshgrid(grids[0], grids[1], indexing="ij")
    vals = np.broadcast_to(fn([xx, yy]), xx.shape)
    i, j = np.unravel_index(int(np.argmin(vals)), vals.shape)
    return (float(grids[0][i]), float(grids[1][j]))
