"""Counter-based random streams keyed by (master seed, stream index)."""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_index(*labels) -> int:
    """Stable 64-bit index for an arbitrary tuple of labels.

    Uses blake2b rather than ``hash`` so the value does not depend on
    PYTHONHASHSEED or the platform.
    """
    text = "\x1f".join(str(label) for label in labels)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


class SeededRng:
    """A Philox stream whose key is ``(master_seed, stream)``.

    Philox is counter-based, so two streams with different keys are
    independent and each one is reproducible on any platform.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        self.generator = np.random.Generator(
            np.random.Philox(key=(self.seed << 64) | self.stream)
        )

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, stream={self.stream})"

    def child(self, *labels) -> "SeededRng":
        """Independent stream under the same master seed."""
        return SeededRng(self.seed, stream_index(self.stream, *labels))

    # thin pass-throughs used throughout the package
    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def signs(self, size) -> np.ndarray:
        """Independent +-1 draws with probability 1/2 each."""
        return self.generator.integers(0, 2, size=size, dtype=np.int8) * 2.0 - 1.0
