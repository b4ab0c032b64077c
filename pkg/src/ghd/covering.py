"""Covering codes and the deterministic gap protocol built on them.

A covering code of radius r is a set of words such that every point of the
cube lies within Hamming distance r of some codeword.  The deterministic
protocol for the promise "x = y or distance >= gap" sends the index of the
codeword nearest to Alice's input (radius ``(gap - 1) // 2``); Bob answers 0
exactly when that codeword is within the same radius of his input.  The
triangle inequality makes this exact on the whole promise, at a total cost of
``index_width + 1`` bits.

Construction is greedy set cover over the full cube (n <= 22): repeatedly
pick the word whose ball covers the most still-uncovered points.  Every pick
covers at least a ``V2(n, r) / 2**n`` fraction of what remains, which yields
the size guarantee ``|C| <= (0.694 * n + 1) * 2**n / V2(n, r)``.  For larger
n, :func:`random_covering_code` samples codewords until a sampled-point audit
passes; its size is within the same envelope with statistical confidence
only.

Cost bounds reported by :func:`det_complexity_bounds`:

* lower: ``n - log2(V2(n, floor(gap/2)))`` — counting argument, no protocol
  can do better;
* upper: ``n - log2(V2(n, floor((gap-1)/2))) + log2(n) + 2`` — the greedy
  construction's cost, since ``ceil(log2 |C|) + 1 <= log2 |C| + 2`` and
  ``log2(0.694 n + 1) <= log2 n`` for n >= 4 (checked empirically below
  that).

Code file format: a header line ``n radius size`` followed by one lowercase
hex codeword per line, zero-padded to ``ceil(n / 4)`` digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, NamedTuple
import random

import numpy as np

from .bits import BitString, ball_volume, hamming_distance, log2_ball_volume
from .runtime import RECV, Protocol, ProtocolOutcome, Send, StreamReader, run_protocol

__all__ = [
    "CoveringCode",
    "DetProtocolParams",
    "CodeConstructionError",
    "greedy_covering_code",
    "random_covering_code",
    "greedy_size_bound",
    "audit_covering",
    "nearest_codeword",
    "det_protocol_params",
    "det_protocol",
    "run_det_protocol",
    "det_complexity_bounds",
    "ComplexityBounds",
    "set_diameter",
    "save_code",
    "load_code",
]

GREEDY_MAX_N = 22
_EXHAUSTIVE_AUDIT_MAX_N = 20


class CodeConstructionError(RuntimeError):
    pass


@lru_cache(maxsize=8)
def popcount_table(n: int) -> np.ndarray:
    """Popcounts of all words of width n (n <= 22)."""
    return np.bitwise_count(np.arange(1 << n, dtype=np.int64)).astype(np.uint8)


@dataclass(frozen=True)
class CoveringCode:
    """An ordered codeword set with its transmission index width."""

    n: int
    radius: int
    codewords: tuple[int, ...]

    def __post_init__(self) -> None:
        if not 0 <= self.radius <= self.n:
            raise ValueError("radius out of range")
        if not self.codewords:
            raise ValueError("a code must contain at least one codeword")
        if any(not 0 <= c < (1 << self.n) for c in self.codewords):
            raise ValueError("codeword does not fit in n bits")

    @property
    def size(self) -> int:
        return len(self.codewords)

    @property
    def index_width(self) -> int:
        return (self.size - 1).bit_length()

    def codeword(self, index: int) -> BitString:
        return BitString(self.n, self.codewords[index])

    @cached_property
    def _decode_table(self) -> np.ndarray | None:
        if self.n > 16:
            return None
        size = 1 << self.n
        if self.radius == 0 and self.size == size:
            return np.arange(size, dtype=np.int64)
        table = popcount_table(self.n)
        words = np.arange(size, dtype=np.int64)
        best_dist = np.full(size, np.iinfo(np.uint8).max, dtype=np.uint8)
        best_idx = np.zeros(size, dtype=np.int64)
        for i, c in enumerate(self.codewords):
            dist = table[words ^ c]
            better = dist < best_dist  # strict: ties stay with the lowest index
            best_dist[better] = dist[better]
            best_idx[better] = i
        return best_idx

    def nearest_index(self, word: int) -> int:
        """Index of the closest codeword, ties broken by lowest index."""
        table = self._decode_table
        if table is not None:
            return int(table[word])
        best_i = 0
        best_d = (self.codewords[0] ^ word).bit_count()
        for i in range(1, self.size):
            d = (self.codewords[i] ^ word).bit_count()
            if d < best_d:
                best_i, best_d = i, d
        return best_i


def greedy_size_bound(n: int, radius: int) -> float:
    """Greedy set-cover guarantee ``(0.694 n + 1) * 2**n / V2(n, r)``."""
    return (0.694 * n + 1.0) * float((1 << n) / ball_volume(n, radius))


def greedy_covering_code(n: int, radius: int) -> CoveringCode:
    """Greedy max-coverage covering code over the exhaustive cube (n <= 22).

    Deterministic: maximum-gain ties go to the lowest word.  The resulting
    size satisfies :func:`greedy_size_bound`.
    """
    if n > GREEDY_MAX_N:
        raise ValueError(
            f"n = {n} exceeds the exhaustive-construction limit {GREEDY_MAX_N}; "
            "use random_covering_code instead"
        )
    if not 0 <= radius <= n:
        raise ValueError("radius out of range")
    size = 1 << n
    if radius == 0:
        # each word only covers itself; greedy picks them in word order
        return CoveringCode(n, 0, tuple(range(size)))

    offsets = np.flatnonzero(popcount_table(n) <= radius).astype(np.int64)
    gain = np.full(size, len(offsets), dtype=np.int64)
    uncovered = np.ones(size, dtype=bool)
    remaining = size
    codewords: list[int] = []
    chunk_rows = max(1, 8_000_000 // len(offsets))

    while remaining:
        pick = int(np.argmax(gain))
        codewords.append(pick)
        ball = pick ^ offsets
        newly = ball[uncovered[ball]]
        uncovered[newly] = False
        remaining -= len(newly)
        if remaining == 0:
            break
        # candidates within radius of a newly covered point lose one gain each
        for start in range(0, len(newly), chunk_rows):
            chunk = newly[start : start + chunk_rows]
            indices = (chunk[:, None] ^ offsets[None, :]).ravel()
            gain -= np.bincount(indices, minlength=size)
    return CoveringCode(n, radius, tuple(codewords))


def _sample_words(n: int, count: int, rng: random.Random) -> list[int]:
    return [rng.getrandbits(n) for _ in range(count)]


def random_covering_code(
    n: int,
    radius: int,
    confidence: float = 0.99,
    seed: int = 0,
    audit_points: int = 100_000,
) -> CoveringCode:
    """Sampled covering code for n beyond the exhaustive limit.

    Draws uniform codewords in growing batches until every one of
    ``audit_points`` random probe points is covered, starting from the volume
    lower bound ``2**n / V2(n, r)`` and capped at twice the union-bound size
    ``ln(2**n / (1 - confidence)) * 2**n / V2(n, r)``.  Covering holds with
    the declared statistical confidence only.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1 for the sampled construction")
    if not 0 < confidence < 1:
        raise ValueError("confidence must be in (0, 1)")
    rng = random.Random(seed)
    if radius >= n:
        return CoveringCode(n, min(radius, n), (rng.getrandbits(n),))

    log_ratio = n - log2_ball_volume(n, radius)
    if log_ratio > 24:
        raise CodeConstructionError(
            f"2**n / V2(n, r) is about 2**{log_ratio:.1f}; sampled construction "
            "is infeasible at this radius"
        )
    ratio = 2.0**log_ratio
    delta = 1.0 - confidence
    union_bound = ratio * (n * math.log(2.0) + math.log(1.0 / delta))
    cap = math.ceil(2.0 * union_bound) + 16

    probe_rng = random.Random(seed ^ 0x5EED_AD17)
    points = [probe_rng.getrandbits(n) for _ in range(audit_points)]
    use_numpy = n <= 64
    if use_numpy:
        points_arr = np.array(points, dtype=np.uint64)
    covered = np.zeros(audit_points, dtype=bool)

    codewords: list[int] = []
    seen: set[int] = set()
    batch = max(1, math.ceil(ratio))
    while True:
        fresh = []
        for w in _sample_words(n, batch, rng):
            if w not in seen:
                seen.add(w)
                fresh.append(w)
        codewords.extend(fresh)
        open_idx = np.flatnonzero(~covered)
        if use_numpy:
            open_points = points_arr[open_idx]
            hit = np.zeros(len(open_idx), dtype=bool)
            for c in fresh:
                hit |= np.bitwise_count(open_points ^ np.uint64(c)) <= radius
        else:
            hit = np.array(
                [
                    any((points[i] ^ c).bit_count() <= radius for c in fresh)
                    for i in open_idx
                ],
                dtype=bool,
            )
        covered[open_idx[hit]] = True
        if covered.all():
            return CoveringCode(n, radius, tuple(codewords))
        if len(codewords) >= cap:
            raise CodeConstructionError(
                f"audit still failing at the size cap ({cap} codewords)"
            )
        batch = max(1, math.ceil(len(codewords) * 0.6))


def audit_covering(
    code: CoveringCode,
    sample_points: int = 100_000,
    seed: int = 0,
) -> bool:
    """True when the covering property holds on the audited point set.

    Exhaustive over the cube for n <= 20; otherwise a sampled audit of
    ``sample_points`` uniform probes.
    """
    n, r = code.n, code.radius
    if n <= _EXHAUSTIVE_AUDIT_MAX_N:
        if r == 0:
            return set(code.codewords) == set(range(1 << n))
        table = popcount_table(n)
        words = np.arange(1 << n, dtype=np.int64)
        covered = np.zeros(1 << n, dtype=bool)
        for c in code.codewords:
            covered |= table[words ^ c] <= r
            if covered.all():
                return True
        return bool(covered.all())
    rng = random.Random(seed)
    if n <= 64:
        points = np.array([rng.getrandbits(n) for _ in range(sample_points)], dtype=np.uint64)
        covered = np.zeros(sample_points, dtype=bool)
        for c in code.codewords:
            covered |= np.bitwise_count(points ^ np.uint64(c)) <= r
            if covered.all():
                return True
        return bool(covered.all())
    for _ in range(sample_points):
        p = rng.getrandbits(n)
        if all((p ^ c).bit_count() > r for c in code.codewords):
            return False
    return True


def nearest_codeword(code: CoveringCode, x: BitString) -> tuple[BitString, int]:
    """Closest codeword and its distance; ties go to the lowest index."""
    if x.length != code.n:
        raise ValueError("input length does not match the code")
    index = code.nearest_index(x.value)
    word = code.codewords[index]
    return BitString(code.n, word), (word ^ x.value).bit_count()


@dataclass(frozen=True)
class DetProtocolParams:
    """Parameters of the deterministic protocol for one (n, gap) promise."""

    n: int
    gap: int
    code: CoveringCode

    def __post_init__(self) -> None:
        if not 1 <= self.gap <= self.n:
            raise ValueError(f"gap must satisfy 1 <= gap <= n, got {self.gap}")
        if self.code.n != self.n:
            raise ValueError("code length does not match n")
        if self.code.radius != self.decision_radius:
            raise ValueError(
                f"code radius {self.code.radius} != required {self.decision_radius}"
            )

    @property
    def decision_radius(self) -> int:
        return (self.gap - 1) // 2

    @property
    def cost_bits(self) -> int:
        return self.code.index_width + 1


def det_protocol_params(n: int, gap: int, code: CoveringCode | None = None) -> DetProtocolParams:
    if code is None:
        code = greedy_covering_code(n, (gap - 1) // 2)
    return DetProtocolParams(n, gap, code)


def det_protocol(params: DetProtocolParams) -> Protocol:
    code = params.code
    width = code.index_width
    radius = params.decision_radius

    def alice(x: BitString, reader: StreamReader):
        index = code.nearest_index(x.value)
        if width > 0:
            yield Send(index, width)
        answer, _ = yield RECV
        return answer

    def bob(y: BitString, reader: StreamReader):
        index = 0
        if width > 0:
            index, _ = yield RECV
        distance = (code.codewords[index] ^ y.value).bit_count()
        decision = 0 if distance <= radius else 1
        yield Send(decision, 1)
        return decision

    return Protocol(name="deterministic-covering", alice=alice, bob=bob)


def run_det_protocol(x: BitString, y: BitString, params: DetProtocolParams) -> ProtocolOutcome:
    """One deterministic run (the shared stream is never read)."""
    protocol = det_protocol(params)
    return run_protocol(protocol.alice, protocol.bob, x, y, shared=0)


class ComplexityBounds(NamedTuple):
    lower: float
    upper: float


def det_complexity_bounds(n: int, gap: int) -> ComplexityBounds:
    """Bit bounds for the deterministic promise problem at (n, gap).

    See the module docstring for the provenance of the upper-bound constants
    (log2 n + 2 on top of the volume term).
    """
    if not 1 <= gap <= n:
        raise ValueError(f"gap must satisfy 1 <= gap <= n, got {gap}")
    lower = n - log2_ball_volume(n, gap // 2)
    upper = n - log2_ball_volume(n, (gap - 1) // 2) + math.log2(n) + 2.0
    return ComplexityBounds(lower, upper)


def set_diameter(points: Iterable[BitString]) -> int:
    """Exact maximum pairwise Hamming distance of a nonempty set."""
    items = list(points)
    if not items:
        raise ValueError("diameter of an empty set is undefined")
    best = 0
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            d = hamming_distance(items[i], items[j])
            if d > best:
                best = d
    return best


def save_code(code: CoveringCode, path: str | Path) -> None:
    digits = (code.n + 3) // 4
    lines = [f"{code.n} {code.radius} {code.size}"]
    lines.extend(f"{c:0{digits}x}" for c in code.codewords)
    Path(path).write_text("\n".join(lines) + "\n")


def load_code(path: str | Path, validate: bool = True) -> CoveringCode:
    """Load a code file, optionally re-auditing the covering property."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"empty code file: {path}")
    header = lines[0].split()
    if len(header) != 3:
        raise ValueError(f"malformed header in {path}: {lines[0]!r}")
    n, radius, size = (int(v) for v in header)
    rows = [row.strip() for row in lines[1:] if row.strip()]
    if len(rows) != size:
        raise ValueError(f"{path}: header declares {size} codewords, found {len(rows)}")
    code = CoveringCode(n, radius, tuple(int(row, 16) for row in rows))
    if validate and not audit_covering(code):
        raise CodeConstructionError(f"{path}: loaded code fails its covering audit")
    return code
