"""Tangent laws: distributions of the initial tangent v of a forward sweep."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rng import SeededRng

KINDS = ("gaussian", "rademacher", "sphere", "rotated")


def haar_orthogonal(n: int, rng: SeededRng, size: Optional[int] = None) -> np.ndarray:
    """Haar-distributed orthogonal matrix (or a stack of ``size`` of them).

    QR of an i.i.d. Gaussian matrix, with the columns of Q flipped so that
    R has a positive diagonal. Without the flip the law is not Haar.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    shape = (n, n) if size is None else (size, n, n)
    q, r = np.linalg.qr(rng.standard_normal(shape))
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    return q * d[..., None, :]


@dataclass(frozen=True, eq=False)
class TangentSampler:
    """Description of a tangent law.

    ``kind`` is one of ``gaussian``, ``rademacher``, ``sphere`` (uniform on the
    sphere of radius sqrt(n)) or ``rotated`` (``q @ r`` with ``r`` Rademacher).
    For ``rotated``, a fixed ``rotation`` matrix gives an almost-surely
    constant q; ``rotation=None`` draws a fresh Haar q for every sample.
    """

    kind: str
    rotation: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown tangent law {self.kind!r}; expected one of {KINDS}")
        if self.rotation is not None:
            if self.kind != "rotated":
                raise ValueError("rotation only applies to the rotated law")
            q = np.asarray(self.rotation, dtype=float)
            if q.ndim != 2 or q.shape[0] != q.shape[1]:
                raise ValueError("rotation must be a square matrix")
            if not np.allclose(q.T @ q, np.eye(len(q)), atol=1e-10):
                raise ValueError("rotation must be orthogonal")
            object.__setattr__(self, "rotation", q)

    @property
    def label(self) -> str:
        return self.kind

    def sample(self, n: int, rng: SeededRng) -> np.ndarray:
        """One tangent vector of length ``n``."""
        return self.sample_batch(n, 1, rng)[0]

    def sample_batch(self, n: int, size: int, rng: SeededRng) -> np.ndarray:
        """``size`` independent tangents as rows of a ``(size, n)`` array."""
        if n < 1:
            raise ValueError("n must be >= 1")
        if self.kind == "gaussian":
            return rng.standard_normal((size, n))
        if self.kind == "rademacher":
            return rng.signs((size, n))
        if self.kind == "sphere":
            z = rng.standard_normal((size, n))
            return z * (np.sqrt(n) / np.linalg.norm(z, axis=1, keepdims=True))
        r = rng.signs((size, n))
        if self.rotation is not None:
            if self.rotation.shape[0] != n:
                raise ValueError(f"rotation is {self.rotation.shape[0]}-dimensional, asked for n={n}")
            return r @ self.rotation.T
        q = haar_orthogonal(n, rng, size=size)
        return np.einsum("kij,kj->ki", q, r)


def rademacher_vertices(n: int) -> np.ndarray:
    """All 2**n vectors of {-1, +1}**n as rows, in binary counting order."""
    if n < 0:
        raise ValueError("n must be >= 0")
    bits = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
    return bits * 2.0 - 1.0


@dataclass
class MomentReport:
    """Empirical tangent moments with 5-standard-error verdicts."""

    kind: str
    n: int
    samples: int
    mean: np.ndarray
    variance: np.ndarray  # E[v_i^2]
    max_abs_cross_covariance: float
    fourth_moment: np.ndarray  # E[v_i^4]
    mean_se: np.ndarray
    variance_se: np.ndarray
    cross_covariance_se: float
    fourth_moment_se: np.ndarray
    verdicts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def arr(a):
            return [float(x) for x in np.asarray(a)]

        return {
            "kind": self.kind,
            "n": self.n,
            "samples": self.samples,
            "mean": arr(self.mean),
            "variance": arr(self.variance),
            "max_abs_cross_covariance": float(self.max_abs_cross_covariance),
            "fourth_moment": arr(self.fourth_moment),
            "mean_se": arr(self.mean_se),
            "variance_se": arr(self.variance_se),
            "cross_covariance_se": float(self.cross_covariance_se),
            "fourth_moment_se": arr(self.fourth_moment_se),
            "verdicts": dict(self.verdicts),
        }


def _within(dev, se, k=5.0):
    # a zero standard error means the statistic is exact; allow rounding only
    return bool(np.all(np.abs(dev) <= np.maximum(k * se, 1e-12)))


def check_tangent_law_properties(
    sampler: TangentSampler, n: int, samples: int, rng: SeededRng, chunk: int = 100_000
) -> MomentReport:
    """Estimate centering, unit variance, decorrelation and E[v_i^4].

    Moments are accumulated in chunks so that large ``n * samples`` fits in
    memory. ``minimal`` is the extra condition Var[v_i^2] = 0 that singles
    out the Rademacher law; the other three verdicts are the tangent law
    properties themselves.
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    s1 = np.zeros(n)
    s2 = np.zeros(n)
    s4 = np.zeros(n)
    s8 = np.zeros(n)
    cross = np.zeros((n, n))
    cross_sq = np.zeros((n, n))
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        v = sampler.sample_batch(n, k, rng)
        v2 = v * v
        s1 += v.sum(0)
        s2 += v2.sum(0)
        s4 += (v2 * v2).sum(0)
        s8 += (v2**4).sum(0)
        cross += v.T @ v
        cross_sq += v2.T @ v2
        done += k
    N = float(samples)
    mean = s1 / N
    m2 = s2 / N
    m4 = s4 / N
    m8 = s8 / N
    mean_se = np.sqrt(np.maximum(m2 - mean**2, 0.0) / N)
    var_se = np.sqrt(np.maximum(m4 - m2**2, 0.0) / N)
    fourth_se = np.sqrt(np.maximum(m8 - m4**2, 0.0) / N)
    off = ~np.eye(n, dtype=bool)
    if n > 1:
        cov = cross / N - np.outer(mean, mean)
        cov_se = np.sqrt(cross_sq / N / N)
        worst = np.argmax(np.where(off, np.abs(cov) / np.maximum(cov_se, 1e-300), -1.0))
        i, j = np.unravel_index(worst, cov.shape)
        max_cross = float(np.max(np.abs(cov[off])))
        worst_dev, worst_se = float(cov[i, j]), float(cov_se[i, j])
    else:
        max_cross, worst_dev, worst_se = 0.0, 0.0, 0.0
    verdicts = {
        "centered": _within(mean, mean_se),
        "unit_variance": _within(m2 - 1.0, var_se),
        "uncorrelated": _within(worst_dev, worst_se),
        "minimal": _within(m4 - m2**2, fourth_se),
    }
    return MomentReport(
        kind=sampler.kind,
        n=n,
        samples=samples,
        mean=mean,
        variance=m2,
        max_abs_cross_covariance=max_cross,
        fourth_moment=m4,
        mean_se=mean_se,
        variance_se=var_se,
        cross_covariance_se=worst_se,
        fourth_moment_se=fourth_se,
        verdicts=verdicts,
    )
