"""Bit strings, Hamming geometry, and exact Hamming-ball volumes.

The shared vocabulary of every protocol module: fixed-length binary words
packed into Python integers (arbitrary precision, hardware popcount via
``int.bit_count``), promise instances, and exact combinatorial volumes.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "BitString",
    "Promise",
    "GhdInstance",
    "hamming_distance",
    "ball_volume",
    "log2_ball_volume",
    "log2_exact",
    "random_pair_at_distance",
]


@dataclass(frozen=True)
class BitString:
    """Fixed-length binary word packed into a single integer.

    Position 0 is the leftmost character of the textual form, so
    ``BitString.from_text("10110").bit(0) == 1``.  All bits beyond the
    declared length are zero by construction.
    """

    length: int
    value: int

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError(f"length must be >= 1, got {self.length}")
        if not 0 <= self.value < (1 << self.length):
            raise ValueError(f"value does not fit in {self.length} bits")

    @classmethod
    def zeros(cls, length: int) -> "BitString":
        return cls(length, 0)

    @classmethod
    def ones(cls, length: int) -> "BitString":
        return cls(length, (1 << length) - 1)

    @classmethod
    def from_text(cls, text: str) -> "BitString":
        """Parse a most-significant-first 0/1 string, e.g. ``"10110"``."""
        if not text or any(ch not in "01" for ch in text):
            raise ValueError(f"not a 0/1 string: {text!r}")
        return cls(len(text), int(text, 2))

    @classmethod
    def random(cls, length: int, rng: random.Random) -> "BitString":
        return cls(length, rng.getrandbits(length))

    def bit(self, position: int) -> int:
        if not 0 <= position < self.length:
            raise IndexError(f"position {position} out of range")
        return (self.value >> (self.length - 1 - position)) & 1

    def weight(self) -> int:
        return self.value.bit_count()

    def complement(self) -> "BitString":
        return BitString(self.length, self.value ^ ((1 << self.length) - 1))

    def flip(self, positions) -> "BitString":
        mask = 0
        for p in positions:
            if not 0 <= p < self.length:
                raise IndexError(f"position {p} out of range")
            mask |= 1 << (self.length - 1 - p)
        return BitString(self.length, self.value ^ mask)

    def bit_array(self) -> np.ndarray:
        """The positions as a uint8 vector, index 0 = position 0."""
        nbytes = (self.length + 7) // 8
        raw = np.frombuffer(self.value.to_bytes(nbytes, "big"), dtype=np.uint8)
        return np.unpackbits(raw)[8 * nbytes - self.length:]

    def __str__(self) -> str:
        return format(self.value, f"0{self.length}b")


def hamming_distance(x: BitString, y: BitString) -> int:
    """Number of positions where two equal-length bit strings differ."""
    if x.length != y.length:
        raise ValueError(f"length mismatch: {x.length} != {y.length}")
    return (x.value ^ y.value).bit_count()


class Promise(Enum):
    """Which side of the gap promise an instance falls on."""

    CLOSE = 0
    FAR = 1
    VIOLATED = 2


@dataclass(frozen=True)
class GhdInstance:
    """A pair of n-bit inputs with a (close_bound, far_bound) gap promise.

    The promise holds when the Hamming distance is <= close_bound (answer 0)
    or >= far_bound (answer 1); anything strictly between violates it.
    """

    n: int
    close_bound: int
    far_bound: int
    x: BitString
    y: BitString

    def __post_init__(self) -> None:
        if not 0 <= self.close_bound < self.far_bound <= self.n:
            raise ValueError(
                f"need 0 <= close_bound < far_bound <= n, got "
                f"({self.close_bound}, {self.far_bound}, n={self.n})"
            )
        if self.x.length != self.n or self.y.length != self.n:
            raise ValueError("input lengths do not match n")

    @property
    def distance(self) -> int:
        return hamming_distance(self.x, self.y)

    @property
    def promise(self) -> Promise:
        d = self.distance
        if d <= self.close_bound:
            return Promise.CLOSE
        if d >= self.far_bound:
            return Promise.FAR
        return Promise.VIOLATED

    def truth_bit(self) -> int:
        """The required protocol output; rejects promise violations."""
        p = self.promise
        if p is Promise.VIOLATED:
            raise ValueError("instance violates the promise; no ground truth")
        return p.value

    @classmethod
    def at_distance(
        cls,
        n: int,
        close_bound: int,
        far_bound: int,
        distance: int,
        seed: int,
    ) -> "GhdInstance":
        x, y = random_pair_at_distance(n, distance, seed)
        return cls(n, close_bound, far_bound, x, y)


def _partial_binomial_sum(n: int, r: int) -> int:
    # sum_{i<=r} C(n, i), exact, by the multiplicative recurrence
    term = 1
    total = 1
    for i in range(1, r + 1):
        term = term * (n - i + 1) // i
        total += term
    return total


def ball_volume(n: int, r: int) -> int:
    """Exact number of points within Hamming distance r of a fixed center.

    Always an exact integer (sum of binomial coefficients); valid for any n
    Python can hold, in particular n up to 10**6 and beyond.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= r <= n:
        raise ValueError(f"radius must satisfy 0 <= r <= n, got r={r}, n={n}")
    if r == n:
        return 1 << n
    if 2 * r > n:
        # complement of the shell above r: 2^n - sum_{i>r} C(n,i)
        return (1 << n) - _partial_binomial_sum(n, n - r - 1)
    return _partial_binomial_sum(n, r)


def log2_exact(value: int) -> float:
    """log2 of a positive integer, computed from its exact representation.

    Uses the bit length plus a correction from the top 64 significant bits,
    so the result is accurate to well under 1e-9 even when the integer is
    far too large for float conversion.
    """
    if value <= 0:
        raise ValueError("value must be positive")
    bit_length = value.bit_length()
    if bit_length <= 53:
        return math.log2(value)
    shift = bit_length - 64
    return math.log2(value >> shift) + shift


def log2_ball_volume(n: int, r: int) -> float:
    """log2 of the exact Hamming-ball volume (never a floating-point sum)."""
    return log2_exact(ball_volume(n, r))


def random_pair_at_distance(n: int, d: int, seed: int) -> tuple[BitString, BitString]:
    """A uniformly random x and a y at Hamming distance exactly d from it.

    The d flipped positions are a uniform size-d subset; fully deterministic
    given the seed.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not 0 <= d <= n:
        raise ValueError(f"distance must satisfy 0 <= d <= n, got {d}")
    rng = random.Random(seed)
    x = BitString.random(n, rng)
    y = x.flip(rng.sample(range(n), d))
    return x, y
