"""Gradient oracles: true reverse-mode gradients and forward gradients."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import autodiff as ad
from .rng import SeededRng
from .tangents import TangentSampler, rademacher_vertices

EXHAUSTIVE_MAX_DIM = 20


@dataclass(frozen=True)
class GradientSample:
    value: float
    estimate: np.ndarray
    evals_charged: int
    tangent_used: Optional[np.ndarray] = None


@dataclass(frozen=True)
class GradientOracle:
    """``sampler=None`` is the true gradient; otherwise the forward gradient.

    The forward gradient draws one fresh tangent per call and returns
    ``(grad f . v) v`` from a single jvp. Both kinds charge one evaluation.
    """

    sampler: Optional[TangentSampler] = None

    @classmethod
    def true(cls) -> "GradientOracle":
        return cls(None)

    @classmethod
    def forward(cls, kind: str = "rademacher", rotation=None) -> "GradientOracle":
        return cls(TangentSampler(kind, rotation))

    @property
    def is_forward(self) -> bool:
        return self.sampler is not None

    @property
    def label(self) -> str:
        return "true" if self.sampler is None else f"forward-{self.sampler.label}"

    def estimate(self, f: ad.Program, theta, rng: SeededRng) -> GradientSample:
        if self.sampler is None:
            value, grad = ad.grad_reverse(f, theta)
            return GradientSample(value, grad, 1)
        v = self.sampler.sample(f.dimension, rng)
        return self.estimate_with(f, theta, v)

    def estimate_with(self, f: ad.Program, theta, v) -> GradientSample:
        """Forward gradient along a caller-supplied tangent."""
        v = np.asarray(v, dtype=float)
        value, d = ad.jvp(f, theta, v)
        return GradientSample(value, d * v, 1, v)


def exhaustive_forward_mean(f: ad.Program, theta) -> np.ndarray:
    """Average of the forward gradient over all 2**n Rademacher tangents.

    Runs one jvp per tangent; by unbiasedness the result is the gradient.
    """
    n = f.dimension
    if n > EXHAUSTIVE_MAX_DIM:
        raise ValueError(f"exhaustive enumeration capped at n={EXHAUSTIVE_MAX_DIM}, got {n}")
    oracle = GradientOracle.forward("rademacher")
    total = np.zeros(n)
    vertices = rademacher_vertices(n)
    for v in vertices:
        total += oracle.estimate_with(f, theta, v).estimate
    return total / len(vertices)
