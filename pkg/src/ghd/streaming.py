"""Reduction from the gap promise to deterministic distinct-count streaming.

Each party encodes its n-bit input as a token stream over the universe
{1, ..., 2n}: position i carries token ``n * bit_i + i`` (1-indexed), so the
concatenated stream has exactly ``n + H(x, y)`` distinct tokens.  A p-pass
deterministic algorithm with memory S can then decide "x = y or distance >=
gap" with at most ``2 p S`` bits of communication: the parties shuttle state
snapshots at every stream boundary (2p - 1 handoffs) and Bob thresholds the
final estimate at ``n + gap``.

Algorithm plug-in contract
--------------------------
Subclass :class:`StreamingAlgorithm` with five behaviors:

* ``start_pass(pass_index)`` — called once at the start of each pass by
  whichever party holds the state;
* ``consume(token)`` — process one token;
* ``snapshot() -> StateSnapshot`` — serialize the complete evolving state as
  a byte string with an explicit bit length; ``restore(snapshot)`` must
  reproduce subsequent behavior bit for bit;
* ``estimate() -> int`` — the output E after the final pass.

The metered memory S is the maximum snapshot bit length observed during the
run — exactly what the reduction communicates.  Algorithms must be
deterministic; the harness replays every run and raises on any divergence.

Stream fixture format: one decimal token per line.

Two algorithms ship with the module: :class:`ExactBitmapF0` (a presence
bitmap over the universe, S = 2n, exact) and :class:`TruncatedBitmapF0`
(a deliberately undersized bitmap for the falsification harness).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Sequence

from .bits import BitString, log2_ball_volume, random_pair_at_distance
from .runtime import (
    RECV,
    ChannelLedger,
    ContractViolationError,
    Protocol,
    Send,
    StreamReader,
    derive_seed,
    run_protocol,
)

__all__ = [
    "StateSnapshot",
    "StreamingAlgorithm",
    "ExactBitmapF0",
    "TruncatedBitmapF0",
    "encode_streams",
    "exact_f0",
    "ReductionRun",
    "RunMeter",
    "ghd_via_streaming",
    "streaming_protocol",
    "SpaceBound",
    "space_lower_bound",
    "CounterexampleReport",
    "search_counterexample",
    "write_stream_fixture",
    "read_stream_fixture",
]


@dataclass(frozen=True)
class StateSnapshot:
    data: bytes
    bit_length: int

    def __post_init__(self) -> None:
        if self.bit_length < 1:
            raise ValueError("snapshot bit length must be >= 1")
        if len(self.data) * 8 < self.bit_length:
            raise ValueError("snapshot data shorter than its declared bit length")


class StreamingAlgorithm:
    """Base class for deterministic p-pass streaming algorithms."""

    passes: int = 1

    def start_pass(self, pass_index: int) -> None:
        raise NotImplementedError

    def consume(self, token: int) -> None:
        raise NotImplementedError

    def snapshot(self) -> StateSnapshot:
        raise NotImplementedError

    def restore(self, snapshot: StateSnapshot) -> None:
        raise NotImplementedError

    def estimate(self) -> int:
        raise NotImplementedError


class ExactBitmapF0(StreamingAlgorithm):
    """Presence bitmap over the whole universe: exact, S = universe_size bits."""

    def __init__(self, universe_size: int, passes: int = 1) -> None:
        if universe_size < 1:
            raise ValueError("universe_size must be >= 1")
        if passes < 1:
            raise ValueError("passes must be >= 1")
        self.universe_size = universe_size
        self.passes = passes
        self._bitmap = 0

    def start_pass(self, pass_index: int) -> None:
        pass  # the bitmap accumulates across passes

    def consume(self, token: int) -> None:
        if not 1 <= token <= self.universe_size:
            raise ValueError(f"token {token} outside universe [1, {self.universe_size}]")
        self._bitmap |= 1 << (token - 1)

    def snapshot(self) -> StateSnapshot:
        nbytes = (self.universe_size + 7) // 8
        return StateSnapshot(self._bitmap.to_bytes(nbytes, "big"), self.universe_size)

    def restore(self, snapshot: StateSnapshot) -> None:
        if snapshot.bit_length != self.universe_size:
            raise ValueError("snapshot does not match this universe size")
        self._bitmap = int.from_bytes(snapshot.data, "big")

    def estimate(self) -> int:
        return self._bitmap.bit_count()


class TruncatedBitmapF0(StreamingAlgorithm):
    """Bitmap over only the first capacity_bits tokens: deliberately unsound.

    Tokens above the capacity are dropped, so the estimate undercounts;
    useful as a known-bad candidate for the falsification harness.
    """

    def __init__(self, universe_size: int, capacity_bits: int, passes: int = 1) -> None:
        if not 1 <= capacity_bits <= universe_size:
            raise ValueError("capacity must be in [1, universe_size]")
        self.universe_size = universe_size
        self.capacity_bits = capacity_bits
        self.passes = passes
        self._bitmap = 0

    def start_pass(self, pass_index: int) -> None:
        pass

    def consume(self, token: int) -> None:
        if not 1 <= token <= self.universe_size:
            raise ValueError(f"token {token} outside universe [1, {self.universe_size}]")
        if token <= self.capacity_bits:
            self._bitmap |= 1 << (token - 1)

    def snapshot(self) -> StateSnapshot:
        nbytes = (self.capacity_bits + 7) // 8
        return StateSnapshot(self._bitmap.to_bytes(nbytes, "big"), self.capacity_bits)

    def restore(self, snapshot: StateSnapshot) -> None:
        if snapshot.bit_length != self.capacity_bits:
            raise ValueError("snapshot does not match this capacity")
        self._bitmap = int.from_bytes(snapshot.data, "big")

    def estimate(self) -> int:
        return self._bitmap.bit_count()


def encode_streams(x: BitString, y: BitString, n: int) -> tuple[list[int], list[int]]:
    """Token streams ``u_i = n * x_i + i`` and ``v_i = n * y_i + i`` (i from 1)."""
    if x.length != n or y.length != n:
        raise ValueError("input lengths do not match n")
    u = [n * x.bit(i - 1) + i for i in range(1, n + 1)]
    v = [n * y.bit(i - 1) + i for i in range(1, n + 1)]
    return u, v


def exact_f0(stream: Iterable[int]) -> int:
    """Exact distinct-token count (the oracle the harness is checked against)."""
    return len(set(stream))


class ReductionRun(NamedTuple):
    n: int
    approx_factor: float
    gap: int
    distinct_count: int
    estimate: int
    state_bits: int
    passes: int
    communication_bits: int
    output: int
    ledger: ChannelLedger


def _snapshot_to_wire(snapshot: StateSnapshot) -> tuple[int, int]:
    payload = int.from_bytes(snapshot.data, "big")
    if payload >= (1 << snapshot.bit_length):
        raise ContractViolationError(
            "snapshot has set bits beyond its declared bit length"
        )
    return payload, snapshot.bit_length


def _wire_to_snapshot(payload: int, width: int) -> StateSnapshot:
    return StateSnapshot(payload.to_bytes((width + 7) // 8, "big"), width)


@dataclass
class RunMeter:
    """Side-channel record of a reduction run: handoff sizes and the estimate."""

    state_bits: list[int] = field(default_factory=list)
    estimates: list[int] = field(default_factory=list)


def streaming_protocol(
    algorithm_factory: Callable[[], StreamingAlgorithm],
    approx_factor: float,
    meter: RunMeter | None = None,
) -> Protocol:
    """The reduction as a two-party protocol with snapshot handoffs.

    ``algorithm_factory`` builds one machine per party; state travels over
    the channel as snapshots, charged at their exact bit length.  When a
    ``meter`` is given it records every handoff's bit length (for metering S)
    and Bob's final estimate.
    """
    if not 1.0 < approx_factor < 2.0:
        raise ValueError("approx_factor must lie strictly between 1 and 2")

    def alice(x: BitString, reader: StreamReader):
        machine = algorithm_factory()
        tokens = [x.length * x.bit(i - 1) + i for i in range(1, x.length + 1)]
        passes = machine.passes
        for pass_index in range(passes):
            if pass_index == 0:
                machine.start_pass(0)
            else:
                payload, width = yield RECV
                machine.restore(_wire_to_snapshot(payload, width))
                machine.start_pass(pass_index)
            for token in tokens:
                machine.consume(token)
            snap = machine.snapshot()
            if meter is not None:
                meter.state_bits.append(snap.bit_length)
            yield Send(*_snapshot_to_wire(snap))
        answer, _ = yield RECV
        return answer

    def bob(y: BitString, reader: StreamReader):
        machine = algorithm_factory()
        n = y.length
        gap = math.ceil(n * (approx_factor - 1.0))
        tokens = [n * y.bit(i - 1) + i for i in range(1, n + 1)]
        passes = machine.passes
        for pass_index in range(passes):
            payload, width = yield RECV
            machine.restore(_wire_to_snapshot(payload, width))
            for token in tokens:
                machine.consume(token)
            if pass_index < passes - 1:
                snap = machine.snapshot()
                if meter is not None:
                    meter.state_bits.append(snap.bit_length)
                yield Send(*_snapshot_to_wire(snap))
        estimate = machine.estimate()
        if meter is not None:
            meter.estimates.append(estimate)
        decision = 0 if estimate < n + gap else 1
        yield Send(decision, 1)
        return decision

    return Protocol(name="streaming-reduction", alice=alice, bob=bob)


def ghd_via_streaming(
    algorithm_factory: Callable[[], StreamingAlgorithm],
    approx_factor: float,
    x: BitString,
    y: BitString,
    check_determinism: bool = True,
) -> tuple[int, ReductionRun]:
    """Decide the promise through a plugged streaming algorithm.

    Outputs 0 exactly when the final estimate is below ``n + gap`` with
    ``gap = ceil(n * (approx_factor - 1))``.  Communication is asserted to
    stay within ``2 * passes * S`` where S is the metered snapshot maximum.
    With ``check_determinism`` the whole exchange is replayed and any
    transcript divergence raises :class:`ContractViolationError`.
    """
    if x.length != y.length:
        raise ValueError("inputs must have equal length")
    n = x.length
    gap = math.ceil(n * (approx_factor - 1.0))

    meter = RunMeter()
    protocol = streaming_protocol(algorithm_factory, approx_factor, meter)
    outcome = run_protocol(protocol.alice, protocol.bob, x, y, shared=0)
    estimate = meter.estimates[-1]
    if check_determinism:
        replay_meter = RunMeter()
        replay_protocol = streaming_protocol(algorithm_factory, approx_factor, replay_meter)
        replay = run_protocol(replay_protocol.alice, replay_protocol.bob, x, y, shared=0)
        if (
            replay.ledger.messages != outcome.ledger.messages
            or replay.output != outcome.output
            or replay_meter.estimates != meter.estimates
            or replay_meter.state_bits != meter.state_bits
        ):
            raise ContractViolationError(
                "streaming algorithm is not deterministic: replay diverged"
            )
        if _final_estimate(algorithm_factory, x, y) != estimate:
            raise ContractViolationError(
                "snapshot round-trip broke the run: the handoff execution and "
                "a single-machine execution disagree"
            )

    machine = algorithm_factory()
    passes = machine.passes
    state_max = max(meter.state_bits)
    communication = outcome.ledger.total_bits
    if communication > 2 * passes * state_max:
        raise ContractViolationError(
            f"communication {communication} exceeds 2*p*S = {2 * passes * state_max}"
        )

    u, v = encode_streams(x, y, n)
    run = ReductionRun(
        n=n,
        approx_factor=approx_factor,
        gap=gap,
        distinct_count=exact_f0(u + v),
        estimate=estimate,
        state_bits=state_max,
        passes=passes,
        communication_bits=communication,
        output=outcome.output,
        ledger=outcome.ledger,
    )
    return outcome.output, run


def _final_estimate(
    algorithm_factory: Callable[[], StreamingAlgorithm],
    x: BitString,
    y: BitString,
) -> int:
    # Reference single-machine execution over the concatenated stream.
    machine = algorithm_factory()
    u, v = encode_streams(x, y, x.length)
    for pass_index in range(machine.passes):
        machine.start_pass(pass_index)
        for token in u + v:
            machine.consume(token)
    return machine.estimate()


class SpaceBound(NamedTuple):
    gap: int
    state_bits_floor: float
    asymptotic: float


def space_lower_bound(n: int, approx_factor: float, passes: int) -> SpaceBound:
    """Memory floor implied by the reduction for a sound algorithm.

    ``state_bits_floor`` is the exact precursor
    ``(n - log2(V2(n, floor(gap/2)))) / (2 * passes)`` with
    ``gap = ceil(n * (approx_factor - 1))``; any correct deterministic
    approximation within the factor must use at least that many state bits up
    to an O(log n) term.  ``asymptotic`` is the familiar
    ``n * (2 - approx_factor)**2 / passes`` shape, for comparison.
    """
    if not 1.0 < approx_factor < 2.0:
        raise ValueError("approx_factor must lie strictly between 1 and 2")
    if passes < 1:
        raise ValueError("passes must be >= 1")
    gap = math.ceil(n * (approx_factor - 1.0))
    precursor = (n - log2_ball_volume(n, gap // 2)) / (2.0 * passes)
    asymptotic = n * (2.0 - approx_factor) ** 2 / passes
    return SpaceBound(gap, precursor, asymptotic)


class CounterexampleReport(NamedTuple):
    found: bool
    x: BitString | None
    y: BitString | None
    expected: int | None
    output: int | None
    trials: int


def search_counterexample(
    algorithm_factory: Callable[[], StreamingAlgorithm],
    approx_factor: float,
    n: int,
    trials: int,
    seed: int,
) -> CounterexampleReport:
    """Hunt for a promise pair the plugged algorithm decides incorrectly.

    Intended for candidates whose metered memory falls below the space floor:
    finding an erring pair is then expected.  Not finding one is inconclusive
    and reported as such (found=False).
    """
    gap = math.ceil(n * (approx_factor - 1.0))
    for trial in range(trials):
        trial_seed = derive_seed(seed, trial)
        if trial % 2 == 0:
            x, _ = random_pair_at_distance(n, 0, trial_seed)
            y = x
            expected = 0
        else:
            d = gap + (trial_seed % (n - gap + 1))
            x, y = random_pair_at_distance(n, d, trial_seed)
            expected = 1
        output, _ = ghd_via_streaming(
            algorithm_factory, approx_factor, x, y, check_determinism=False
        )
        if output != expected:
            return CounterexampleReport(True, x, y, expected, output, trial + 1)
    return CounterexampleReport(False, None, None, None, None, trials)


def write_stream_fixture(tokens: Sequence[int], path: str | Path) -> None:
    """One decimal token per line."""
    Path(path).write_text("\n".join(str(t) for t in tokens) + "\n")


def read_stream_fixture(path: str | Path) -> list[int]:
    return [int(line) for line in Path(path).read_text().splitlines() if line.strip()]
