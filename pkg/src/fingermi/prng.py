"""Explicitly seeded PCG32 random number generation.

Every stochastic step in the toolkit (parameter init, dropout masks, fold
shuffling, synthetic EEG) draws from a `Pcg32` instance so results are
bit-reproducible across runs and platforms. The generator is the PCG
XSH-RR 64/32 variant; `next_u32_array` produces the exact same stream as
repeated scalar calls but vectorised for bulk noise synthesis.
"""

from __future__ import annotations

import numpy as np

_MULT = 6364136223846793005
_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1

# Fixed stream selectors so independent consumers never share a sequence.
STREAM_INIT = 1
STREAM_DROPOUT = 2
STREAM_SHUFFLE = 3
STREAM_SYNTH = 4


class Pcg32:
    """PCG32 generator: 64-bit LCG state, 32-bit xorshift-rotate output."""

    def __init__(self, seed: int, stream: int = 0):
        self._inc = (((int(stream) << 1) | 1)) & _MASK64
        self._state = 0
        self._advance()
        self._state = (self._state + (int(seed) & _MASK64)) & _MASK64
        self._advance()

    def _advance(self) -> None:
        self._state = (self._state * _MULT + self._inc) & _MASK64

    def next_u32(self) -> int:
        old = self._state
        self._advance()
        xorshifted = (((old >> 18) ^ old) >> 27) & _MASK32
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((32 - rot) & 31))) & _MASK32

    def next_u32_array(self, n: int) -> np.ndarray:
        """Draw ``n`` outputs at once (identical to n scalar draws).

        The LCG recurrence s_{i+1} = A*s_i + C unrolls to
        s_i = A^i * s_0 + C * sum_{j<i} A^j, which vectorises with
        wrapping uint64 arithmetic.
        """
        if n < 0:
            raise ValueError("n must be nonnegative")
        if n == 0:
            return np.empty(0, dtype=np.uint64)
        mult = np.uint64(_MULT)
        powers = np.empty(n, dtype=np.uint64)
        powers[0] = 1
        if n > 1:
            np.cumprod(np.full(n - 1, mult, dtype=np.uint64), out=powers[1:])
        geo = np.zeros(n, dtype=np.uint64)
        np.cumsum(powers[:-1], out=geo[1:])
        old = powers * np.uint64(self._state) + geo * np.uint64(self._inc)
        # advance the scalar state past the block: s_n = A*s_{n-1} + C
        self._state = (int(old[-1]) * _MULT + self._inc) & _MASK64
        xorshifted = (((old >> np.uint64(18)) ^ old) >> np.uint64(27)) & np.uint64(_MASK32)
        rot = old >> np.uint64(59)
        out = (xorshifted >> rot) | (
            (xorshifted << ((np.uint64(32) - rot) & np.uint64(31))) & np.uint64(_MASK32)
        )
        return out

    def uniform(self, n: int | None = None):
        """Uniform doubles in [0, 1); scalar when n is None."""
        if n is None:
            return self.next_u32() * 2.0**-32
        return self.next_u32_array(n).astype(np.float64) * 2.0**-32

    def uniform_range(self, low: float, high: float, n: int) -> np.ndarray:
        return low + (high - low) * self.uniform(n)

    def normal(self, n: int) -> np.ndarray:
        """Standard normals via Box-Muller on paired uniforms."""
        m = (n + 1) // 2
        u = (self.next_u32_array(2 * m).astype(np.float64) + 0.5) * 2.0**-32
        r = np.sqrt(-2.0 * np.log(u[:m]))
        theta = 2.0 * np.pi * u[m:]
        return np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]

    def randint(self, bound: int) -> int:
        """Unbiased integer in [0, bound) by rejection."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        lim = (1 << 32) - ((1 << 32) % bound)
        while True:
            u = self.next_u32()
            if u < lim:
                return u % bound

    def shuffle(self, arr) -> None:
        """In-place Fisher-Yates shuffle of a 1-d sequence."""
        for i in range(len(arr) - 1, 0, -1):
            j = self.randint(i + 1)
            arr[i], arr[j] = arr[j], arr[i]

    def permutation(self, n: int) -> np.ndarray:
        idx = np.arange(n)
        self.shuffle(idx)
        return idx
