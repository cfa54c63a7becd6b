"""Seed-keyed random time-varying tree code.

Every branch label is a pure function of ``(seed, t, path)``.  Paths are
folded into a 64-bit key one symbol at a time so that a node's key is
derived from its parent's in O(1); branch words are then drawn from a
counter-based mixer keyed by that path key and the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Sequence

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_ROOT_TAG = 0x6A09E667F3BCC909


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a bijection on 64-bit words."""
    z = (z + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def split_seed(seed: int) -> tuple[int, int]:
    seed &= (1 << 128) - 1
    return seed & MASK64, seed >> 64


def exact_rate(rate) -> Fraction:
    """Rate as an exact fraction; floats are read through their shortest decimal repr."""
    if isinstance(rate, Fraction):
        return rate
    if isinstance(rate, float):
        return Fraction(repr(rate))
    return Fraction(rate)


def bits_at(rate, t: int) -> int:
    """Number of parity bits emitted at time t >= 1: floor(tR) - floor((t-1)R)."""
    r = exact_rate(rate)
    return floor(t * r) - floor((t - 1) * r)


@dataclass(frozen=True)
class TreeCode:
    """Random tree code shared by encoder and decoder through ``seed``.

    Exactly one of ``rate`` (SI mode) or ``lam`` (JSC mode) is set.  In JSC
    mode ``input_dist`` gives the IID law of the channel inputs on branches.
    """

    seed: int
    alphabet_size: int
    rate: float | None = None
    lam: int | None = None
    input_dist: tuple[float, ...] | None = None

    def __post_init__(self):
        if (self.rate is None) == (self.lam is None):
            raise ValueError("TreeCode needs exactly one of rate (SI) or lam (JSC)")
        if self.alphabet_size < 1:
            raise ValueError("alphabet_size must be positive")
        if self.rate is not None:
            if self.rate < 0:
                raise ValueError("rate must be non-negative")
            object.__setattr__(self, "_rate", exact_rate(self.rate))
        if self.lam is not None:
            if int(self.lam) != self.lam or self.lam < 1:
                raise ValueError("lam must be a positive integer")
            if self.input_dist is None:
                raise ValueError("JSC mode needs input_dist")
            beta = np.asarray(self.input_dist, float)
            object.__setattr__(self, "input_dist", tuple(float(b) for b in beta))
            cdf = np.cumsum(beta)
            cdf[-1] = 1.0
            # thresholds on the 53-bit uniform grid for exact integer inverse-CDF
            object.__setattr__(self, "_thresholds", tuple(int(c * (1 << 53)) for c in cdf))
        k0, k1 = split_seed(self.seed)
        object.__setattr__(self, "_k0", k0)
        object.__setattr__(self, "_k1", mix64(k1 ^ _ROOT_TAG))

    @property
    def mode(self) -> str:
        return "si" if self.rate is not None else "jsc"

    # -- path keys --------------------------------------------------------

    @property
    def root_key(self) -> int:
        return self._k1

    def child_key(self, parent_key: int, symbol: int) -> int:
        return mix64(((parent_key * self.alphabet_size + symbol + 1) & MASK64) ^ self._k0)

    def path_key(self, path: Sequence[int]) -> int:
        key = self._k1
        for s in path:
            key = self.child_key(key, int(s))
        return key

    def _word(self, key: int, t: int, j: int) -> int:
        return mix64(key ^ mix64((self._k0 + t * _GOLDEN + j) & MASK64))

    # -- SI ---------------------------------------------------------------

    def bits_at(self, t: int) -> int:
        return bits_at(self._rate, t)

    def branch_parity(self, key: int, t: int) -> int:
        """Parity segment of the branch ending at the node ``key`` (depth t), packed in an int."""
        n = bits_at(self._rate, t)
        if n == 0:
            return 0
        out = 0
        j = 0
        while n > 0:
            take = min(n, 64)
            out = (out << take) | (self._word(key, t, j) & ((1 << take) - 1))
            n -= take
            j += 1
        return out

    def branch_bits(self, path: Sequence[int], t: int) -> list[int]:
        """Parity bits on the branch at time t of ``path`` (length t), MSB first."""
        if self.mode != "si":
            raise ValueError("branch_bits requires an SI-mode code")
        if len(path) != t:
            raise ValueError(f"path length {len(path)} != t={t}")
        n = bits_at(self._rate, t)
        word = self.branch_parity(self.path_key(path), t)
        return [(word >> (n - 1 - i)) & 1 for i in range(n)]

    # -- JSC --------------------------------------------------------------

    def branch_inputs(self, key: int, t: int) -> tuple[int, ...]:
        """lam channel inputs on the branch ending at node ``key`` (depth t)."""
        thr = self._thresholds
        out = []
        for j in range(self.lam):
            u = self._word(key, t, j) >> 11
            x = 0
            while u >= thr[x]:
                x += 1
            out.append(x)
        return tuple(out)

    def branch_symbols(self, path: Sequence[int], t: int) -> tuple[int, ...]:
        if self.mode != "jsc":
            raise ValueError("branch_symbols requires a JSC-mode code")
        if len(path) != t:
            raise ValueError(f"path length {len(path)} != t={t}")
        return self.branch_inputs(self.path_key(path), t)
