"""One-sided-error random-projection sketch protocol.

The inputs are padded with zeros, split into ``block_count`` blocks of length
``block_length``, and each block is projected onto a shared uniform unit
sphere vector.  Alice quantizes her projections to the grid
``{m / n**3 : m integer}`` and transmits the grid indices; Bob compares the
received values against his own projections and outputs 1 exactly when

    sum_i (r_i - <beta_i, U_i>)**2  >  close_bound + 5/n.

On inputs with distance <= close_bound the statistic never crosses the
threshold, so the protocol never errs on the 0 side; on inputs with distance
>= far_bound it misses with probability at most exp(-s), provided the
exponent satisfies ``s >= (close_bound + 10/n)**3 / far_bound**2``.  Below
that floor the guarantee is void and parameter derivation refuses unless
explicitly overridden.

Wire format
-----------
A sketch message is ``block_count`` fixed-width sign-magnitude integers,
most significant bit first, concatenated.  Each word is ``word_width`` bits:
one sign bit (1 = negative) followed by ``word_width - 1`` magnitude bits.
``word_width = ceil(log2(2 * floor(sqrt(block_length)) * n**3 + 1)) + 1``,
wide enough for every reachable grid index, so the serialized length is
exactly ``block_count * word_width`` bits and transcripts replay across
implementations.

When ``block_count`` would exceed n the whole exercise is pointless and the
protocol degenerates to Alice sending her input verbatim (n + 1 bits total);
such parameter sets are flagged ``trivial_mode``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bits import BitString
from .runtime import (
    RECV,
    Protocol,
    Send,
    SharedRandomness,
    StreamReader,
    _as_shared,
)

__all__ = [
    "SketchParams",
    "SketchMessage",
    "SketchStatistics",
    "GuaranteeFloorError",
    "guarantee_floor",
    "derive_sketch_params",
    "gaussian_unit_vector",
    "quantize_projection",
    "alice_sketch",
    "bob_decide",
    "sketch_statistics",
    "sketch_cost",
    "sketch_protocol",
]


class GuaranteeFloorError(ValueError):
    """The requested exponent is below the regime where the bound is proved."""


def guarantee_floor(n: int, close_bound: int, far_bound: int) -> float:
    """Smallest error exponent for which the one-sided bound is guaranteed."""
    return (close_bound + 10.0 / n) ** 3 / far_bound**2


@dataclass(frozen=True)
class SketchParams:
    """Derived sketch parameters; construct via :func:`derive_sketch_params`."""

    n: int
    close_bound: int
    far_bound: int
    error_exponent: float
    block_count: int
    block_length: int | None
    padded_length: int | None
    word_width: int | None
    trivial_mode: bool

    @property
    def threshold(self) -> float:
        return self.close_bound + 5.0 / self.n

    @property
    def grid_denominator(self) -> int:
        # quantization grid step is 1 / n**3
        return self.n**3


def derive_sketch_params(
    n: int,
    close_bound: int,
    far_bound: int,
    error_exponent: float,
    allow_void_guarantee: bool = False,
) -> SketchParams:
    """Derive block structure and word width for the sketch protocol.

    ``block_count = ceil(4 * n * (s / far_bound)**(1/3))``; when that exceeds
    n the parameters are flagged trivial.  Exponents below
    :func:`guarantee_floor` are rejected unless ``allow_void_guarantee`` is
    set (the error bound is then void, for experimentation only).
    """
    if not 0 <= close_bound < far_bound <= n:
        raise ValueError(
            f"need 0 <= close_bound < far_bound <= n, got "
            f"({close_bound}, {far_bound}, n={n})"
        )
    if error_exponent <= 0:
        raise ValueError("error_exponent must be positive")
    floor = guarantee_floor(n, close_bound, far_bound)
    if error_exponent < floor and not allow_void_guarantee:
        raise GuaranteeFloorError(
            f"error exponent {error_exponent} is below the guaranteed regime "
            f"(needs >= {floor:.6g}); pass allow_void_guarantee=True to proceed"
        )
    block_count = math.ceil(4 * n * (error_exponent / far_bound) ** (1.0 / 3.0))
    if block_count > n:
        return SketchParams(
            n,
            close_bound,
            far_bound,
            error_exponent,
            block_count,
            block_length=None,
            padded_length=None,
            word_width=None,
            trivial_mode=True,
        )
    block_length = -(-n // block_count)
    padded_length = block_length * block_count
    max_index = math.isqrt(block_length * n**6)  # floor(sqrt(a) * n**3)
    word_width = (2 * max_index).bit_length() + 1  # ceil(log2(2M+1)) + 1
    return SketchParams(
        n,
        close_bound,
        far_bound,
        error_exponent,
        block_count,
        block_length,
        padded_length,
        word_width,
        trivial_mode=False,
    )


def gaussian_unit_vector(dim: int, reader: StreamReader) -> np.ndarray:
    """One uniform unit-sphere vector read off the shared stream."""
    return reader.unit_vector(dim)


def quantize_projection(value: float, n: int) -> int:
    """Nearest grid index m with m / n**3 closest to the value, ties to even."""
    if abs(value) > math.sqrt(n) + 1e-9:
        raise ValueError(
            f"|value| = {abs(value)} exceeds sqrt(n); not a 0/1-block projection"
        )
    return round(value * n**3)


@dataclass(frozen=True)
class SketchMessage:
    """Quantized projections as transmitted: signed grid indices."""

    grid_indices: tuple[int, ...]
    word_width: int

    @property
    def bit_length(self) -> int:
        return len(self.grid_indices) * self.word_width

    def to_payload(self) -> int:
        width = self.word_width
        magnitude_bits = width - 1
        values = np.asarray(self.grid_indices, dtype=np.int64)
        encoded = np.where(values < 0, -values | (1 << magnitude_bits), values)
        shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
        bits = ((encoded[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
        packed = np.packbits(bits.ravel())
        pad = (-self.bit_length) % 8
        return int.from_bytes(packed.tobytes(), "big") >> pad

    @classmethod
    def from_payload(cls, payload: int, params: SketchParams) -> "SketchMessage":
        width = params.word_width
        count = params.block_count
        total = count * width
        if not 0 <= payload < (1 << total):
            raise ValueError("payload does not fit the declared message length")
        pad = (-total) % 8
        data = (payload << pad).to_bytes((total + pad) // 8, "big")
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:total]
        weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
        encoded = bits.reshape(count, width).astype(np.int64) @ weights
        magnitude_mask = (1 << (width - 1)) - 1
        magnitudes = encoded & magnitude_mask
        signs = encoded >> (width - 1)
        values = np.where(signs == 1, -magnitudes, magnitudes)
        return cls(tuple(int(v) for v in values), width)


@dataclass(frozen=True)
class SketchStatistics:
    """Decision statistic and (in instrumented runs) its unquantized twin.

    ``received_statistic`` is what Bob thresholds; ``exact_statistic`` is the
    same sum with Alice's exact projections in place of the transmitted grid
    values.  It requires both inputs, so it is only available from
    :func:`sketch_statistics`, never inside the protocol itself.
    """

    exact_statistic: float | None
    received_statistic: float
    decision: int


def _blocks(x: BitString, params: SketchParams) -> np.ndarray:
    padded = np.zeros(params.padded_length, dtype=np.float64)
    padded[: x.length] = x.bit_array()
    return padded.reshape(params.block_count, params.block_length)


def _shared_vectors(params: SketchParams, reader: StreamReader) -> np.ndarray:
    # Fresh projection vectors per run; both parties read the same positions.
    return reader.unit_vectors(params.block_count, params.block_length)


def alice_sketch(x: BitString, params: SketchParams, reader: StreamReader) -> SketchMessage:
    """Project, quantize, and package Alice's side of the sketch."""
    if params.trivial_mode:
        raise ValueError("trivial-mode parameters: send the input verbatim instead")
    if x.length != params.n:
        raise ValueError("input length does not match the parameters")
    vectors = _shared_vectors(params, reader)
    projections = (_blocks(x, params) * vectors).sum(axis=1)
    indices = np.rint(projections * float(params.grid_denominator)).astype(np.int64)
    return SketchMessage(tuple(int(v) for v in indices), params.word_width)


def bob_decide(
    y: BitString,
    message: SketchMessage,
    params: SketchParams,
    reader: StreamReader,
) -> tuple[int, SketchStatistics]:
    """Bob's threshold decision from the received grid indices.

    The returned statistics carry ``exact_statistic=None``: the production
    decision uses the received statistic alone.
    """
    if params.trivial_mode:
        raise ValueError("trivial-mode parameters: compare the inputs directly instead")
    if y.length != params.n:
        raise ValueError("input length does not match the parameters")
    vectors = _shared_vectors(params, reader)
    own = (_blocks(y, params) * vectors).sum(axis=1)
    received = np.asarray(message.grid_indices, dtype=np.float64) / float(
        params.grid_denominator
    )
    statistic = float(((received - own) ** 2).sum())
    decision = 1 if statistic > params.threshold else 0
    return decision, SketchStatistics(None, statistic, decision)


def sketch_statistics(
    x: BitString,
    y: BitString,
    params: SketchParams,
    shared: SharedRandomness | int,
) -> SketchStatistics:
    """Instrumented run: both statistics, bit-identical to a protocol run.

    Draws the projection vectors once and reproduces exactly the floating
    point operations both parties perform, so the decision here matches the
    protocol decision for the same seed.
    """
    if params.trivial_mode:
        raise ValueError("trivial-mode parameters have no projection statistics")
    reader = _as_shared(shared).reader()
    vectors = _shared_vectors(params, reader)
    alice_proj = (_blocks(x, params) * vectors).sum(axis=1)
    bob_proj = (_blocks(y, params) * vectors).sum(axis=1)
    indices = np.rint(alice_proj * float(params.grid_denominator)).astype(np.int64)
    received = indices.astype(np.float64) / float(params.grid_denominator)
    exact = float(((alice_proj - bob_proj) ** 2).sum())
    quantized = float(((received - bob_proj) ** 2).sum())
    decision = 1 if quantized > params.threshold else 0
    return SketchStatistics(exact, quantized, decision)


def sketch_cost(params: SketchParams) -> int:
    """Exact ledger total of one run: message bits plus the answer bit."""
    if params.trivial_mode:
        return params.n + 1
    return params.block_count * params.word_width + 1


def sketch_protocol(params: SketchParams) -> Protocol:
    if params.trivial_mode:

        def alice(x: BitString, reader: StreamReader):
            yield Send(x.value, params.n)
            answer, _ = yield RECV
            return answer

        def bob(y: BitString, reader: StreamReader):
            payload, width = yield RECV
            distance = (payload ^ y.value).bit_count()
            decision = 1 if distance > params.close_bound else 0
            yield Send(decision, 1)
            return decision

        return Protocol(name="sketch-trivial", alice=alice, bob=bob)

    def alice(x: BitString, reader: StreamReader):
        message = alice_sketch(x, params, reader)
        yield Send(message.to_payload(), message.bit_length)
        answer, _ = yield RECV
        return answer

    def bob(y: BitString, reader: StreamReader):
        payload, width = yield RECV
        if width != params.block_count * params.word_width:
            raise ValueError("unexpected sketch message length")
        message = SketchMessage.from_payload(payload, params)
        decision, _ = bob_decide(y, message, params, reader)
        yield Send(decision, 1)
        return decision

    return Protocol(name="sketch", alice=alice, bob=bob)
