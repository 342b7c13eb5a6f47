"""Benchmark objectives with known minima.

Minima, minimizers and search domains follow the usual references for these
functions: Jamil & Yang, "A literature survey of benchmark functions for
global optimization problems" (2013), and the Surjanovic & Bingham virtual
library of simulation experiments (sfu.ca/~ssurjano). Every constant is
re-checked by the test suite rather than trusted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .rng import SeededRng

PI = math.pi


def _idx(x, start=1):
    return np.arange(start, len(x) + start, dtype=float)


def sphere(x):
    return ad.sum(x**2)


def hyperellipsoid(x):
    return ad.sum(_idx(x) * x**2)


def rosenbrock(x):
    return ad.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2)


def ackley(x):
    n = len(x)
    r = ad.sqrt(ad.sum(x**2) / n)
    return -20.0 * ad.exp(-0.2 * r) - ad.exp(ad.sum(ad.cos(2.0 * PI * x)) / n) + 20.0 + math.e


def rastrigin(x):
    return 10.0 * len(x) + ad.sum(x**2 - 10.0 * ad.cos(2.0 * PI * x))


def griewank(x):
    return 1.0 + ad.sum(x**2) / 4000.0 - ad.prod(ad.cos(x / np.sqrt(_idx(x))))


def levy(x):
    w = 1.0 + (x - 1.0) / 4.0
    head = ad.sin(PI * w[0]) ** 2
    body = ad.sum((w[:-1] - 1.0) ** 2 * (1.0 + 10.0 * ad.sin(PI * w[:-1] + 1.0) ** 2))
    tail = (w[-1] - 1.0) ** 2 * (1.0 + ad.sin(2.0 * PI * w[-1]) ** 2)
    return head + body + tail


def zakharov(x):
    s = ad.sum(0.5 * _idx(x) * x)
    return ad.sum(x**2) + s**2 + s**4


def styblinski_tang(x):
    return 0.5 * ad.sum(x**4 - 16.0 * x**2 + 5.0 * x)


def sum_of_different_powers(x):
    return ad.sum(ad.abs(x) ** (_idx(x) + 1.0))


def schwefel_2_22(x):
    a = ad.abs(x)
    return ad.sum(a) + ad.prod(a)


def dixon_price(x):
    i = _idx(x)
    return (x[0] - 1.0) ** 2 + ad.sum(i[1:] * (2.0 * x[1:] ** 2 - x[:-1]) ** 2)


def beale(x):
    a, b = x[0], x[1]
    return (
        (1.5 - a + a * b) ** 2
        + (2.25 - a + a * b**2) ** 2
        + (2.625 - a + a * b**3) ** 2
    )


def booth(x):
    a, b = x[0], x[1]
    return (a + 2.0 * b - 7.0) ** 2 + (2.0 * a + b - 5.0) ** 2


def linear(x, mu):
    return ad.sum(np.asarray(mu) * x)


# Styblinski-Tang: per-coordinate minimizer is the negative root of
# 4x^3 - 32x + 5 = 0; value 0.5 (x^4 - 16x^2 + 5x) there.
_ST_X = -2.903534027771178
_ST_F = -39.16616570377142


def _dixon_price_xstar(n: int) -> np.ndarray:
    i = np.arange(1, n + 1, dtype=float)
    return 2.0 ** (-(2.0**i - 2.0) / 2.0**i)


@dataclass(frozen=True)
class Family:
    name: str
    body: Callable
    f_star: Callable[[int], float]
    x_star: Callable[[int], np.ndarray]
    bounds: tuple[float, float]
    tags: frozenset
    min_dim: int = 1
    fixed_dim: Optional[int] = None


def _zeros(n):
    return np.zeros(n)


def _ones(n):
    return np.ones(n)


def _const(value, n):
    return value


def _fill(value, n):
    return np.full(n, value)


def _st_f(n):
    return _ST_F * n


def _fixed(point, n):
    return np.array(point, dtype=float)


_Z = partial(_const, 0.0)

FAMILIES: dict[str, Family] = {
    f.name: f
    for f in [
        Family("sphere", sphere, _Z, _zeros, (-5.0, 5.0), frozenset({"convex", "separable"})),
        Family(
            "hyperellipsoid", hyperellipsoid, _Z, _zeros, (-5.12, 5.12),
            frozenset({"convex", "separable"}),
        ),
        Family("rosenbrock", rosenbrock, _Z, _ones, (-2.0, 2.0), frozenset({"nonseparable"}), min_dim=2),
        Family(
            "ackley", ackley, _Z, _zeros, (-32.768, 32.768),
            frozenset({"multimodal", "nonseparable"}),
        ),
        Family(
            "rastrigin", rastrigin, _Z, _zeros, (-5.12, 5.12),
            frozenset({"multimodal", "separable"}),
        ),
        Family(
            "griewank", griewank, _Z, _zeros, (-600.0, 600.0),
            frozenset({"multimodal", "nonseparable"}),
        ),
        Family("levy", levy, _Z, _ones, (-10.0, 10.0), frozenset({"multimodal", "nonseparable"})),
        Family("zakharov", zakharov, _Z, _zeros, (-5.0, 10.0), frozenset({"convex", "nonseparable"})),
        Family(
            "styblinski-tang", styblinski_tang, _st_f, partial(_fill, _ST_X), (-5.0, 5.0),
            frozenset({"multimodal", "separable"}),
        ),
        Family(
            "sum-of-different-powers", sum_of_different_powers, _Z, _zeros, (-1.0, 1.0),
            frozenset({"convex", "separable"}),
        ),
        Family("schwefel-2.22", schwefel_2_22, _Z, _zeros, (-10.0, 10.0), frozenset({"nonseparable"})),
        Family(
            "dixon-price", dixon_price, _Z, _dixon_price_xstar, (-10.0, 10.0),
            frozenset({"nonseparable"}),
        ),
        Family(
            "beale", beale, _Z, partial(_fixed, (3.0, 0.5)), (-4.5, 4.5),
            frozenset({"multimodal", "nonseparable"}), fixed_dim=2,
        ),
        Family(
            "booth", booth, _Z, partial(_fixed, (1.0, 3.0)), (-10.0, 10.0),
            frozenset({"convex", "nonseparable"}), fixed_dim=2,
        ),
    ]
}


@dataclass(frozen=True, eq=False)
class Problem:
    family: str
    program: ad.Program
    f_star: float
    x_star: Optional[np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    tags: frozenset = frozenset()

    @property
    def dimension(self) -> int:
        return self.program.dimension

    @property
    def name(self) -> str:
        return f"{self.family}-{self.dimension}"

    def __call__(self, x) -> float:
        return self.program(x)


def make_problem(family: str, n: int) -> Problem:
    try:
        fam = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown problem {family!r}; known: {', '.join(FAMILIES)}") from None
    if fam.fixed_dim is not None and n != fam.fixed_dim:
        raise ValueError(f"{family} is only defined for n={fam.fixed_dim}")
    if n < fam.min_dim:
        raise ValueError(f"{family} needs n >= {fam.min_dim}, got {n}")
    lo, hi = fam.bounds
    return Problem(
        family=fam.name,
        program=ad.Program(n, fam.body),
        f_star=float(fam.f_star(n)),
        x_star=np.asarray(fam.x_star(n), dtype=float),
        lower=np.full(n, lo),
        upper=np.full(n, hi),
        tags=fam.tags,
    )


@dataclass
class ProblemSet:
    problems: list[Problem]
    dimensions: tuple[int, ...] = field(default=())

    def __iter__(self) -> Iterator[Problem]:
        return iter(self.problems)

    def __len__(self) -> int:
        return len(self.problems)

    def __getitem__(self, name: str) -> Problem:
        for p in self.problems:
            if p.name == name:
                return p
        raise KeyError(name)

    def names(self) -> list[str]:
        return [p.name for p in self.problems]

    def by_dimension(self) -> dict[int, list[Problem]]:
        out: dict[int, list[Problem]] = {}
        for p in self.problems:
            out.setdefault(p.dimension, []).append(p)
        return out


def catalog(dimensions: Sequence[int] = (2, 10, 100), families: Optional[Sequence[str]] = None) -> ProblemSet:
    """Every arbitrary-dimension family at each requested dimension, plus the 2-D ones.

    Fixed-dimension families join only when their dimension is requested.
    """
    dimensions = tuple(int(d) for d in dimensions)
    if not dimensions:
        raise ValueError("at least one dimension is required")
    wanted = list(FAMILIES) if families is None else list(families)
    for name in wanted:
        if name not in FAMILIES:
            raise ValueError(f"unknown problem {name!r}")
    problems = []
    for n in dimensions:
        for name in wanted:
            fam = FAMILIES[name]
            if fam.fixed_dim is not None:
                if n == fam.fixed_dim:
                    problems.append(make_problem(name, n))
                continue
            problems.append(make_problem(name, n))
    return ProblemSet(problems, dimensions)


def linear_objective(mu) -> Problem:
    """f(theta) = mu . theta; unbounded below, so f_star is -inf."""
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or not np.all(np.isfinite(mu)):
        raise ValueError("mu must be a finite vector")
    n = len(mu)
    return Problem(
        family="linear",
        program=ad.Program(n, partial(linear, mu=tuple(mu.tolist()))),
        f_star=-math.inf,
        x_star=None,
        lower=np.full(n, -1.0),
        upper=np.full(n, 1.0),
        tags=frozenset({"convex", "separable"}),
    )


def sample_start(problem: Problem, rng: SeededRng) -> np.ndarray:
    """Uniform draw from the problem's start box."""
    return rng.uniform(problem.lower, problem.upper)
