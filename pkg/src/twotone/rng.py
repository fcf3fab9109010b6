"""SplitMix64 random streams.

Every stochastic stage draws from its own ``Rng`` so that a pipeline seeded
once reproduces bit-identically regardless of evaluation order. Sub-streams
are seeded with ``seed ^ label_hash(label)`` where ``label_hash`` is 64-bit
FNV-1a over the UTF-8 label.
"""

from __future__ import annotations

import math

import numba
import numpy as np
from scipy.special import ndtri

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def label_hash(label: str) -> int:
    """64-bit FNV-1a hash of ``label``."""
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & MASK64
    return h


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic in numpy wraps modulo 2**64, which is what SplitMix64 needs
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def _complex_normals_kernel(state, n, scale):
    # Box-Muller on consecutive output pairs: (u1, u2) -> one complex sample
    out = np.empty(n, dtype=np.complex128)
    gamma = np.uint64(GOLDEN_GAMMA)
    m1 = np.uint64(_MIX1)
    m2 = np.uint64(_MIX2)
    s30, s27, s31, s11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
    for i in range(n):
        state = state + gamma
        z = state
        z = (z ^ (z >> s30)) * m1
        z = (z ^ (z >> s27)) * m2
        z = z ^ (z >> s31)
        u1 = (float(z >> s11) + 0.5) * 1.1102230246251565e-16
        state = state + gamma
        z = state
        z = (z ^ (z >> s30)) * m1
        z = (z ^ (z >> s27)) * m2
        z = z ^ (z >> s31)
        u2 = (float(z >> s11) + 0.5) * 1.1102230246251565e-16
        r = scale * math.sqrt(-2.0 * math.log(u1))
        out[i] = complex(r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2))
    return out, state


class Rng:
    """Explicit-state SplitMix64 generator.

    The bulk methods (``u64s``, ``uniforms``, ``normals``) consume exactly one
    64-bit output per returned value, so drawing ``n`` values in one call or in
    several smaller calls yields the same numbers.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def __repr__(self) -> str:
        return f"Rng(state=0x{self.state:016X})"

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return _mix(self.state)

    def u64s(self, n: int) -> np.ndarray:
        if n <= 0:
            return np.zeros(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            states = np.uint64(self.state) + steps * np.uint64(GOLDEN_GAMMA)
            out = _mix_array(states)
        self.state = (self.state + n * GOLDEN_GAMMA) & MASK64
        return out

    def uniforms(self, n: int) -> np.ndarray:
        """Doubles in the open interval (0, 1), 53-bit resolution."""
        bits = self.u64s(n) >> np.uint64(11)
        return (bits.astype(np.float64) + 0.5) * 2.0**-53

    def normals(self, n: int) -> np.ndarray:
        """Standard normal draws by inverse-CDF transform of ``uniforms``."""
        return ndtri(self.uniforms(n))

    def complex_normals(self, n: int, variance: float = 1.0) -> np.ndarray:
        """Circular complex Gaussian with E|z|^2 == variance (Box-Muller, two outputs per sample)."""
        out, state = _complex_normals_kernel(np.uint64(self.state), int(n), math.sqrt(variance / 2.0))
        self.state = int(state)
        return out

    def spawn(self, label: str) -> "Rng":
        """Independent sub-stream keyed by ``label``; does not advance self."""
        return Rng(self.state ^ label_hash(label))


def rng_next(rng: Rng) -> int:
    return rng.next_u64()


def substream(master_seed: int, label: str) -> Rng:
    return Rng((int(master_seed) & MASK64) ^ label_hash(label))
