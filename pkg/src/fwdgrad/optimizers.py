"""SGD, clipped SGD, Adam and AdaBelief as pure state transitions."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

KINDS = ("sgd", "clipped-sgd", "adam", "adabelief")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "sgd"
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown optimizer {self.kind!r}; expected one of {KINDS}")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        if not self.clip > 0:
            raise ValueError("clip must be positive")

    @property
    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class OptimizerState:
    theta: np.ndarray
    t: int
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def initial(cls, theta) -> "OptimizerState":
        theta = np.array(theta, dtype=float)
        return cls(theta, 0, np.zeros_like(theta), np.zeros_like(theta))


def clip(g: np.ndarray, threshold: float) -> np.ndarray:
    """Coordinate-wise projection onto the box ``|g_i| <= threshold``."""
    return np.clip(g, -threshold, threshold)


def _moment(old, new, beta, t):
    """EMA update; beta == 1 is read as its limit, the running mean."""
    if beta == 1.0:
        return old + (new - old) / (t + 1)
    return beta * old + (1.0 - beta) * new


def _correct(acc, beta, t):
    if beta == 1.0:
        return acc
    return acc / (1.0 - beta ** (t + 1))


def _scaled(m, v, eps):
    denom = np.sqrt(v + eps)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0.0, m / np.where(denom > 0.0, denom, 1.0), 0.0)


def step(state: OptimizerState, config: OptimizerConfig, g) -> OptimizerState:
    """One update of ``state`` by gradient (estimate) ``g``.

    Adam and AdaBelief divide by sqrt(v + eps), eps inside the root. The
    bias corrections at counter t use exponent t + 1. AdaBelief's
    second moment tracks (g - m)**2 with the freshly updated, uncorrected m.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != state.theta.shape:
        raise ValueError(f"gradient shape {g.shape} does not match parameter shape {state.theta.shape}")
    bad = np.flatnonzero(~np.isfinite(g))
    if bad.size:
        raise FloatingPointError(f"non-finite gradient coordinate {bad[0]}: {g[bad[0]]}")

    c = config
    if c.kind == "sgd":
        return replace(state, theta=state.theta - c.lr * g, t=state.t + 1)
    if c.kind == "clipped-sgd":
        return replace(state, theta=state.theta - c.lr * clip(g, c.clip), t=state.t + 1)

    m = _moment(state.m, g, c.beta1, state.t)
    if c.kind == "adam":
        v = _moment(state.v, g * g, c.beta2, state.t)
    else:
        v = _moment(state.v, (g - m) ** 2, c.beta2, state.t)
    m_hat = _correct(m, c.beta1, state.t)
    v_hat = _correct(v, c.beta2, state.t)
    theta = state.theta - c.lr * _scaled(m_hat, v_hat, c.eps)
    return OptimizerState(theta, state.t + 1, m, v)


def adam_sign_decomposition(m, v) -> tuple[np.ndarray, np.ndarray]:
    """Split m / sqrt(v) into sign(m) times 1 / sqrt(1 + eta**2).

    ``eta**2 = (v - m**2) / m**2`` is the relative variance estimate.
    Coordinates with m == 0 get sign 0 and weight 0.
    """
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(v < m * m):
        i = int(np.flatnonzero(v < m * m)[0])
        raise ValueError(f"inconsistent moments at coordinate {i}: v={v[i]} < m^2={m[i] ** 2}")
    signs = np.sign(m)
    nz = m != 0.0
    weights = np.zeros_like(m)
    safe_m = np.where(nz, m, 1.0)
    eta2 = (v - m * m) / (safe_m * safe_m)
    weights[nz] = 1.0 / np.sqrt(1.0 + eta2[nz])
    return signs, weights
