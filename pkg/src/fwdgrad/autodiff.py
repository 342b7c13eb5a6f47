"""Forward-mode (dual number) and reverse-mode (tape) differentiation.

Programs are plain Python callables written against the primitives in this
module (``sqrt``, ``exp``, ``log``, ``sin``, ``cos``, ``abs``, ``sum``,
``prod``) together with the arithmetic operators and indexing. The same body
then runs on three kinds of input:

* a float64 numpy array (plain evaluation),
* a :class:`Dual` whose primal and tangent are arrays (one jvp sweep),
* a :class:`Var` recorded on a :class:`Tape` (accumulation pass for
  reverse mode).

Values are elementwise: a ``Dual`` holding arrays is a bundle of dual scalars
sharing one sweep. Reductions (``sum``, ``prod``) and indexing are the only
operations that mix coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "ADDomainError",
    "TapeCapacityError",
    "Dual",
    "Var",
    "Tape",
    "Program",
    "EvalCounter",
    "sqrt",
    "exp",
    "log",
    "sin",
    "cos",
    "abs",
    "sum",
    "prod",
    "jvp",
    "grad_reverse",
    "grad_forward_full",
    "record",
]


class ADDomainError(ArithmeticError):
    """An atomic operation was evaluated outside its domain."""

    def __init__(self, op: str, detail: str):
        super().__init__(f"{op}: {detail}")
        self.op = op


class TapeCapacityError(RuntimeError):
    pass


class EvalCounter:
    """Counts program evaluations. One instance per trial; never shared."""

    __slots__ = ("count",)

    def __init__(self) -> None:
        self.count = 0

    def add(self, k: int = 1) -> None:
        self.count += k


# ---------------------------------------------------------------------------
# primal kernels, shared by every evaluation mode so primal values agree
# bit-for-bit
# ---------------------------------------------------------------------------


def _div(a, b):
    if (b == 0.0) if type(b) is float else (np.asarray(b) == 0.0).any():
        raise ADDomainError("div", "division by zero")
    return a / b


def _log(p):
    if (np.asarray(p) <= 0.0).any():
        raise ADDomainError("log", "argument must be positive")
    return np.log(p)


def _sqrt(p):
    if (np.asarray(p) < 0.0).any():
        raise ADDomainError("sqrt", "argument must be non-negative")
    return np.sqrt(p)


def _pow(p, c):
    if type(c) is int or (type(c) is float and c.is_integer()):
        return p**c
    c_arr = np.asarray(c)
    if np.any(c_arr != np.round(c_arr)) and np.any(np.asarray(p) < 0.0):
        raise ADDomainError("pow", "negative base with non-integer exponent")
    return p**c


def _dsqrt(p, s):
    # subgradient 0 at the origin; jvp separately rejects a nonzero tangent there
    with np.errstate(divide="ignore"):
        return np.where(p > 0.0, 0.5 / np.where(p > 0.0, s, 1.0), 0.0)


def _dpow(p, c):
    if type(c) is int or type(c) is float:
        if c == 2:
            return 2.0 * p
        return c * _pow(p, c - 1)
    c_arr = np.asarray(c, dtype=float)
    return c_arr * _pow(p, c_arr - 1.0)


def _prod_partials(p):
    """d prod(p) / d p_i, exact when some entries are zero."""
    p = np.asarray(p, dtype=float)
    left = np.concatenate(([1.0], np.cumprod(p[:-1])))
    right = np.concatenate((np.cumprod(p[::-1][:-1])[::-1], [1.0]))
    return left * right


# ---------------------------------------------------------------------------
# forward mode
# ---------------------------------------------------------------------------


class Dual:
    """Primal value paired with its tangent along one direction.

    ``primal`` and ``tangent`` have matching shapes (scalar or 1-D array).
    """

    __slots__ = ("primal", "tangent")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, primal, tangent=0.0):
        self.primal = primal
        self.tangent = tangent

    @classmethod
    def constant(cls, value) -> "Dual":
        value = np.asarray(value, dtype=float)
        return cls(value, np.zeros_like(value))

    def __repr__(self) -> str:
        return f"Dual({self.primal!r}, {self.tangent!r})"

    def __len__(self) -> int:
        return len(self.primal)

    def __getitem__(self, key) -> "Dual":
        return Dual(self.primal[key], self.tangent[key])

    def __neg__(self) -> "Dual":
        return Dual(-self.primal, -self.tangent)

    def _widen(self, other):
        # tangent of self broadcast to the shape of a constant operand
        if type(other) is not float and np.ndim(other) > np.ndim(self.tangent):
            return self.tangent + np.zeros(np.shape(other))
        return self.tangent

    def __add__(self, other) -> "Dual":
        if type(other) is Dual:
            return Dual(self.primal + other.primal, self.tangent + other.tangent)
        return Dual(self.primal + other, self._widen(other))

    __radd__ = __add__

    def __sub__(self, other) -> "Dual":
        if type(other) is Dual:
            return Dual(self.primal - other.primal, self.tangent - other.tangent)
        return Dual(self.primal - other, self._widen(other))

    def __rsub__(self, other) -> "Dual":
        return Dual(other - self.primal, -self._widen(other))

    def __mul__(self, other) -> "Dual":
        if type(other) is Dual:
            return Dual(
                self.primal * other.primal,
                self.tangent * other.primal + self.primal * other.tangent,
            )
        return Dual(self.primal * other, self.tangent * other)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Dual":
        if isinstance(other, Dual):
            q = _div(self.primal, other.primal)
            return Dual(q, (self.tangent - q * other.tangent) / other.primal)
        return Dual(_div(self.primal, other), self.tangent / other)

    def __rtruediv__(self, other) -> "Dual":
        q = _div(other, self.primal)
        return Dual(q, -q * self.tangent / self.primal)

    def __pow__(self, c) -> "Dual":
        if isinstance(c, (Dual, Var)):
            raise TypeError("only constant exponents are supported")
        return Dual(_pow(self.primal, c), _dpow(self.primal, c) * self.tangent)


# ---------------------------------------------------------------------------
# reverse mode
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Select:
    """Local partial of an indexing node: scatter the adjoint back."""

    key: object
    shape: tuple


class Tape:
    """Wengert list: one node per intermediate, parents always earlier.

    A node is ``(op, args, parents, partials, value)``: ``args`` holds node
    references and inline constants in call order, ``parents`` the indices
    of the referenced nodes, ``partials`` the local derivative with respect
    to each parent at the recorded primals.
    """

    def __init__(self, capacity: Optional[int] = None):
        self.capacity = capacity
        self.nodes: list[tuple] = []

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def ops(self) -> list[str]:
        return [node[0] for node in self.nodes]

    def push(self, op: str, value, args: tuple = (), parents: tuple = (), partials: tuple = ()) -> "Var":
        nodes = self.nodes
        if self.capacity is not None and len(nodes) >= self.capacity:
            raise TapeCapacityError(f"tape capacity of {self.capacity} nodes exceeded")
        nodes.append((op, args, parents, partials, value))
        return Var(self, len(nodes) - 1, value)

    def backprop(self, output: int, seed=1.0) -> list:
        """Return the adjoint of every node for cotangent ``seed`` at ``output``."""
        nodes = self.nodes
        adj: list = [None] * len(nodes)
        adj[output] = seed
        for k in range(output, -1, -1):
            a = adj[k]
            if a is None:
                continue
            _, _, parents, partials, _ = nodes[k]
            for pi, d in zip(parents, partials):
                if type(d) is _Select:
                    contrib = np.zeros(d.shape)
                    np.add.at(contrib, d.key, a)
                else:
                    contrib = a * d
                    if np.ndim(contrib) > np.ndim(nodes[pi][4]):
                        contrib = np.sum(contrib)
                adj[pi] = contrib if adj[pi] is None else adj[pi] + contrib
        return adj

    def dump(self) -> str:
        """Render the list as ``w_k <- op(args)`` lines."""
        lines = []
        for k, (op, args, _, _, _) in enumerate(self.nodes):
            if op == "input":
                rhs = "x"
            elif op == "index":
                rhs = f"w_{args[0].index}[{_fmt_key(args[1])}]"
            else:
                rhs = f"{op}({', '.join(_fmt_arg(a) for a in args)})"
            lines.append(f"w_{k} <- {rhs}")
        return "\n".join(lines)


def _fmt_arg(a) -> str:
    if type(a) is Var:
        return f"w_{a.index}"
    arr = np.asarray(a)
    if arr.ndim == 0:
        return repr(float(arr))
    if arr.size <= 4:
        return "[" + ", ".join(repr(float(v)) for v in arr) + "]"
    return f"const[{arr.size}]"


def _fmt_key(key) -> str:
    if isinstance(key, slice):
        start = "" if key.start is None else key.start
        stop = "" if key.stop is None else key.stop
        return f"{start}:{stop}"
    return str(key)


class Var:
    """A scalar or vector tracked on a :class:`Tape`."""

    __slots__ = ("tape", "index", "value")
    __array_ufunc__ = None

    def __init__(self, tape: Tape, index: int, value):
        self.tape = tape
        self.index = index
        self.value = value

    def __repr__(self) -> str:
        return f"Var(w_{self.index}={self.value!r})"

    def __len__(self) -> int:
        return len(self.value)

    def __getitem__(self, key) -> "Var":
        return self.tape.push(
            "index", self.value[key], (self, key), (self.index,),
            (_Select(key, np.shape(self.value)),),
        )

    def __neg__(self) -> "Var":
        return self.tape.push("neg", -self.value, (self,), (self.index,), (-1.0,))

    def __add__(self, other) -> "Var":
        if type(other) is Var:
            return self.tape.push(
                "add", self.value + other.value, (self, other), (self.index, other.index), (1.0, 1.0)
            )
        return self.tape.push("add", self.value + other, (self, other), (self.index,), (1.0,))

    def __radd__(self, other) -> "Var":
        return self.tape.push("add", other + self.value, (other, self), (self.index,), (1.0,))

    def __sub__(self, other) -> "Var":
        if type(other) is Var:
            return self.tape.push(
                "sub", self.value - other.value, (self, other), (self.index, other.index), (1.0, -1.0)
            )
        return self.tape.push("sub", self.value - other, (self, other), (self.index,), (1.0,))

    def __rsub__(self, other) -> "Var":
        return self.tape.push("sub", other - self.value, (other, self), (self.index,), (-1.0,))

    def __mul__(self, other) -> "Var":
        if type(other) is Var:
            return self.tape.push(
                "mul", self.value * other.value, (self, other), (self.index, other.index),
                (other.value, self.value),
            )
        return self.tape.push("mul", self.value * other, (self, other), (self.index,), (other,))

    def __rmul__(self, other) -> "Var":
        return self.tape.push("mul", other * self.value, (other, self), (self.index,), (other,))

    def __truediv__(self, other) -> "Var":
        if type(other) is Var:
            q = _div(self.value, other.value)
            return self.tape.push(
                "div", q, (self, other), (self.index, other.index),
                (1.0 / other.value, -q / other.value),
            )
        return self.tape.push(
            "div", _div(self.value, other), (self, other), (self.index,), (1.0 / np.asarray(other),)
        )

    def __rtruediv__(self, other) -> "Var":
        q = _div(other, self.value)
        return self.tape.push("div", q, (other, self), (self.index,), (-q / self.value,))

    def __pow__(self, c) -> "Var":
        if isinstance(c, (Dual, Var)):
            raise TypeError("only constant exponents are supported")
        return self.tape.push(
            "pow", _pow(self.value, c), (self, c), (self.index,), (_dpow(self.value, c),)
        )


# ---------------------------------------------------------------------------
# atomic functions, dispatching on the argument kind
# ---------------------------------------------------------------------------


def sqrt(x):
    if isinstance(x, Dual):
        s = _sqrt(x.primal)
        if np.any((np.asarray(x.primal) == 0.0) & (np.asarray(x.tangent) != 0.0)):
            raise ADDomainError("sqrt", "not differentiable at 0 along a nonzero tangent")
        return Dual(s, _dsqrt(x.primal, s) * x.tangent)
    if isinstance(x, Var):
        s = _sqrt(x.value)
        return x.tape.push("sqrt", s, (x,), (x.index,), (_dsqrt(x.value, s),))
    return _sqrt(x)


def exp(x):
    if isinstance(x, Dual):
        e = np.exp(x.primal)
        return Dual(e, e * x.tangent)
    if isinstance(x, Var):
        e = np.exp(x.value)
        return x.tape.push("exp", e, (x,), (x.index,), (e,))
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(_log(x.primal), x.tangent / x.primal)
    if isinstance(x, Var):
        return x.tape.push("log", _log(x.value), (x,), (x.index,), (1.0 / x.value,))
    return _log(x)


def sin(x):
    if isinstance(x, Dual):
        return Dual(np.sin(x.primal), np.cos(x.primal) * x.tangent)
    if isinstance(x, Var):
        return x.tape.push("sin", np.sin(x.value), (x,), (x.index,), (np.cos(x.value),))
    return np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return Dual(np.cos(x.primal), -np.sin(x.primal) * x.tangent)
    if isinstance(x, Var):
        return x.tape.push("cos", np.cos(x.value), (x,), (x.index,), (-np.sin(x.value),))
    return np.cos(x)


def abs(x):  # noqa: A001 - part of the atomic op vocabulary
    """Absolute value; differentiates as sign(x) with 0 at the kink."""
    if isinstance(x, Dual):
        return Dual(np.abs(x.primal), np.sign(x.primal) * x.tangent)
    if isinstance(x, Var):
        return x.tape.push("abs", np.abs(x.value), (x,), (x.index,), (np.sign(x.value),))
    return np.abs(x)


def sum(x):  # noqa: A001
    if isinstance(x, Dual):
        return Dual(np.sum(x.primal), np.sum(x.tangent))
    if isinstance(x, Var):
        return x.tape.push("sum", np.sum(x.value), (x,), (x.index,), (np.ones(np.shape(x.value)),))
    return np.sum(x)


def prod(x):
    if isinstance(x, Dual):
        d = _prod_partials(x.primal)
        return Dual(np.prod(x.primal), np.dot(d, x.tangent))
    if isinstance(x, Var):
        return x.tape.push("prod", np.prod(x.value), (x,), (x.index,), (_prod_partials(x.value),))
    return np.prod(x)


# ---------------------------------------------------------------------------
# programs and differentiation entry points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Program:
    """A scalar function of ``dimension`` reals, written over the primitives above."""

    dimension: int
    body: Callable

    def __call__(self, x) -> float:
        return float(self.body(self._check(x)))

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ValueError(f"expected a point of shape ({self.dimension},), got {x.shape}")
        return x


def jvp(f: Program, x: Sequence[float], v: Sequence[float], counter: Optional[EvalCounter] = None):
    """Return ``(f(x), grad f(x) . v)`` from a single dual-number sweep."""
    x = f._check(x)
    v = np.asarray(v, dtype=float)
    if v.shape != x.shape:
        raise ValueError(f"tangent shape {v.shape} does not match point shape {x.shape}")
    out = f.body(Dual(x, v))
    if counter is not None:
        counter.add()
    if not isinstance(out, Dual):  # body ignored its input
        return float(out), 0.0
    return float(out.primal), float(out.tangent)


def record(f: Program, x: Sequence[float], capacity: Optional[int] = None) -> tuple[Tape, Var]:
    """Run the accumulation pass only; returns the tape and the output node."""
    x = f._check(x)
    tape = Tape(capacity)
    out = f.body(tape.push("input", x))
    if not isinstance(out, Var):
        out = tape.push("const", out, (out,))
    return tape, out


def grad_reverse(
    f: Program,
    x: Sequence[float],
    counter: Optional[EvalCounter] = None,
    capacity: Optional[int] = None,
) -> tuple[float, np.ndarray]:
    """Full gradient by one recording pass and one backpropagation pass."""
    tape, out = record(f, x, capacity)
    if counter is not None:
        counter.add()
    adj = tape.backprop(out.index)
    g = adj[0]
    if g is None:
        g = np.zeros(f.dimension)
    return float(out.value), np.array(g, dtype=float)


def grad_forward_full(
    f: Program, x: Sequence[float], counter: Optional[EvalCounter] = None
) -> np.ndarray:
    """Gradient assembled from ``n`` jvp sweeps along the canonical basis."""
    n = f.dimension
    g = np.empty(n)
    basis = np.eye(n)
    for i in range(n):
        _, g[i] = jvp(f, x, basis[i], counter)
    return g

