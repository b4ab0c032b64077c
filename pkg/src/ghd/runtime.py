"""Two-party protocol runtime: shared randomness, instrumented channel, bit ledger.

A protocol is a pair of message-passing strategies rather than an explicit
decision tree; the worst-case total of the bit ledger plays the role of the
protocol depth, and the ledger also records the round structure.

Strategy contract
-----------------
A strategy is a callable ``strategy(own_input, reader) -> generator`` where
``own_input`` is that party's :class:`~ghd.bits.BitString` and ``reader`` is a
private cursor over the shared random stream.  The generator communicates with
the runtime by yielding commands:

* ``Send(payload, width)`` — transmit ``width`` bits (``payload`` is the bits
  as an integer, most significant bit first).  The generator is resumed with
  ``None``.
* ``Recv()`` — block until the peer's next message arrives; the generator is
  resumed with the ``(payload, width)`` pair.
* ``return bit`` — terminate with this party's output.

Both parties must terminate with the same output bit.  A strategy sees only
its own input, its reader, and the bits it receives, so input isolation holds
by construction; the runtime additionally rejects deadlocks, disagreeing
outputs, and runs that exceed the bit budget (default ``64 * n**2``).

Shared randomness is a counter-based pseudorandom stream: position ``i`` holds
a 64-bit value computed by a splitmix-style mix of ``seed`` and ``i``, so both
parties can lazily read identical positions without coordination.  Gaussian
coordinates consume exactly two stream positions each (Box-Muller, cosine
branch).

Transcript dump format (debugging): one line per message,
``direction bitcount hex-payload``, e.g. ``a->b 4 c``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Generator, Iterable, NamedTuple

import numpy as np

from .bits import BitString, GhdInstance

__all__ = [
    "MASK64",
    "mix64",
    "derive_seed",
    "SharedRandomness",
    "StreamReader",
    "Send",
    "Recv",
    "Message",
    "ChannelLedger",
    "ProtocolOutcome",
    "Protocol",
    "ProtocolError",
    "ContractViolationError",
    "BudgetExceededError",
    "run_protocol",
    "measure_worst_case_cost",
    "estimate_error_rate",
    "ErrorEstimate",
    "DEFAULT_BUDGET_FACTOR",
]

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

DEFAULT_BUDGET_FACTOR = 64


def mix64(z: int) -> int:
    """Finalizer of the splitmix64 generator (bijective 64-bit mix)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Derive a child seed from a master seed and an index path.

    Documented derivation so that parallel and serial sweeps agree:
    fold each path component into the state with the splitmix finalizer.
    """
    state = mix64(master)
    for index in path:
        state = mix64(state ^ (((index + 1) * _GOLDEN) & MASK64))
    return state


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class SharedRandomness:
    """A public random source identified by its 64-bit seed.

    Not charged to communication.  Each party obtains its own
    :class:`StreamReader`; readers of the same stream observe identical
    values at identical positions.
    """

    seed: int

    def value_at(self, position: int) -> int:
        """Random-access 64-bit value at a stream position."""
        return mix64((self.seed + (position + 1) * _GOLDEN) & MASK64)

    def reader(self) -> "StreamReader":
        return StreamReader(self.seed)


class StreamReader:
    """Sequential cursor over a shared counter-based random stream."""

    def __init__(self, seed: int, position: int = 0) -> None:
        self.seed = seed & MASK64
        self.position = position

    def _raw_block(self, count: int) -> np.ndarray:
        positions = np.arange(self.position + 1, self.position + count + 1, dtype=np.uint64)
        self.position += count
        state = np.uint64(self.seed) + positions * np.uint64(_GOLDEN)
        return _mix64_array(state)

    def next_raw(self) -> int:
        value = mix64((self.seed + (self.position + 1) * _GOLDEN) & MASK64)
        self.position += 1
        return value

    def next_unit(self) -> float:
        """Uniform float in (0, 1] from the top 53 bits of one position."""
        return ((self.next_raw() >> 11) + 1) * 2.0**-53

    def index_below(self, bound: int) -> int:
        """Near-uniform integer in [0, bound) via 64-bit multiply-shift."""
        if bound < 1:
            raise ValueError("bound must be >= 1")
        return (self.next_raw() * bound) >> 64

    def gaussians(self, count: int) -> np.ndarray:
        """Standard normal draws; exactly two stream positions per coordinate.

        Box-Muller cosine branch: coordinate k uses positions
        (cursor + 2k, cursor + 2k + 1).
        """
        if count == 0:
            return np.zeros(0)
        raw = self._raw_block(2 * count).reshape(count, 2)
        u1 = ((raw[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def unit_vector(self, dim: int) -> np.ndarray:
        """One draw from the uniform distribution on the unit sphere in R^dim."""
        return self.unit_vectors(1, dim)[0]

    def unit_vectors(self, rows: int, dim: int) -> np.ndarray:
        """``rows`` independent uniform unit vectors in R^dim (one per row).

        Normalized Gaussian vectors; an all-zero draw (probability zero in
        exact arithmetic) is redrawn from the following stream positions.
        """
        if dim < 1:
            raise ValueError("dim must be >= 1")
        g = self.gaussians(rows * dim).reshape(rows, dim)
        norms = np.sqrt((g * g).sum(axis=1))
        while (norms == 0.0).any():
            bad = norms == 0.0
            g[bad] = self.gaussians(int(bad.sum()) * dim).reshape(-1, dim)
            norms = np.sqrt((g * g).sum(axis=1))
        return g / norms[:, None]


@dataclass(frozen=True)
class Send:
    payload: int
    width: int


@dataclass(frozen=True)
class Recv:
    pass


RECV = Recv()


@dataclass(frozen=True)
class Message:
    direction: str  # "a->b" or "b->a"
    payload: int
    width: int


@dataclass
class ChannelLedger:
    """Transcript-level record of every bit sent, by direction and round."""

    messages: list[Message] = field(default_factory=list)

    @property
    def bits_alice_to_bob(self) -> int:
        return sum(m.width for m in self.messages if m.direction == "a->b")

    @property
    def bits_bob_to_alice(self) -> int:
        return sum(m.width for m in self.messages if m.direction == "b->a")

    @property
    def total_bits(self) -> int:
        return sum(m.width for m in self.messages)

    @property
    def rounds(self) -> int:
        """Direction switches + 1 (0 when nothing was sent)."""
        if not self.messages:
            return 0
        switches = sum(
            1
            for prev, cur in zip(self.messages, self.messages[1:])
            if prev.direction != cur.direction
        )
        return switches + 1

    def dump(self) -> str:
        """One line per message: ``direction bitcount hex-payload``."""
        lines = []
        for m in self.messages:
            digits = max(1, (m.width + 3) // 4)
            lines.append(f"{m.direction} {m.width} {m.payload:0{digits}x}")
        return "\n".join(lines)


@dataclass(frozen=True)
class ProtocolOutcome:
    output: int
    ledger: ChannelLedger


class ProtocolError(Exception):
    pass


class ContractViolationError(ProtocolError):
    pass


class BudgetExceededError(ProtocolError):
    pass


Strategy = Callable[[BitString, StreamReader], Generator]


@dataclass(frozen=True)
class Protocol:
    """A named pair of strategies runnable over the instrumented channel."""

    name: str
    alice: Strategy
    bob: Strategy

    def run(
        self,
        x: BitString,
        y: BitString,
        shared: "SharedRandomness | int",
        bit_budget: int | None = None,
    ) -> ProtocolOutcome:
        return run_protocol(self.alice, self.bob, x, y, shared, bit_budget=bit_budget)


def _as_shared(shared: SharedRandomness | int) -> SharedRandomness:
    if isinstance(shared, SharedRandomness):
        return shared
    return SharedRandomness(int(shared) & MASK64)


def run_protocol(
    alice_strategy: Strategy,
    bob_strategy: Strategy,
    x: BitString,
    y: BitString,
    shared: SharedRandomness | int,
    bit_budget: int | None = None,
) -> ProtocolOutcome:
    """Execute a two-party protocol and account for every bit exchanged.

    Fully deterministic given (x, y, shared seed).  Raises
    :class:`ContractViolationError` on deadlock, malformed messages, or
    disagreeing outputs, and :class:`BudgetExceededError` once more than
    ``bit_budget`` bits have been sent (default ``64 * n**2``).
    """
    shared = _as_shared(shared)
    if bit_budget is None:
        bit_budget = DEFAULT_BUDGET_FACTOR * x.length * x.length

    gens = {"a": alice_strategy(x, shared.reader()), "b": bob_strategy(y, shared.reader())}
    inbox: dict[str, deque] = {"a": deque(), "b": deque()}
    state = {"a": "ready", "b": "ready"}
    started = {"a": False, "b": False}
    outputs: dict[str, int] = {}
    peer = {"a": "b", "b": "a"}
    ledger = ChannelLedger()
    total_bits = 0
    active = "a"

    def runnable(side: str) -> bool:
        return state[side] == "ready" or (state[side] == "recv" and bool(inbox[side]))

    while not (state["a"] == "done" and state["b"] == "done"):
        if not runnable(active):
            other = peer[active]
            if runnable(other):
                active = other
            elif state[active] == "done":
                active = other
            elif state[other] == "done":
                raise ContractViolationError(
                    f"party {active!r} is waiting for a message but its peer terminated"
                )
            else:
                raise ContractViolationError("deadlock: both parties waiting to receive")
            continue

        side = active
        gen = gens[side]
        try:
            if state[side] == "recv":
                command = gen.send(inbox[side].popleft())
            elif started[side]:
                command = gen.send(None)
            else:
                started[side] = True
                command = next(gen)
            state[side] = "ready"
        except StopIteration as stop:
            output = stop.value
            if output not in (0, 1):
                raise ContractViolationError(
                    f"party {side!r} returned {output!r}, expected a bit"
                ) from None
            outputs[side] = output
            state[side] = "done"
            continue

        if isinstance(command, Send):
            if command.width < 1:
                raise ContractViolationError("message width must be >= 1")
            if not 0 <= command.payload < (1 << command.width):
                raise ContractViolationError(
                    f"payload does not fit in {command.width} bits"
                )
            total_bits += command.width
            if total_bits > bit_budget:
                raise BudgetExceededError(
                    f"bit budget exceeded: {total_bits} > {bit_budget}"
                )
            direction = "a->b" if side == "a" else "b->a"
            ledger.messages.append(Message(direction, command.payload, command.width))
            inbox[peer[side]].append((command.payload, command.width))
        elif isinstance(command, Recv):
            state[side] = "recv"
        else:
            raise ContractViolationError(f"unknown strategy command: {command!r}")

    if outputs["a"] != outputs["b"]:
        raise ContractViolationError(
            f"parties disagree at termination: alice={outputs['a']} bob={outputs['b']}"
        )
    return ProtocolOutcome(output=outputs["a"], ledger=ledger)


def measure_worst_case_cost(
    protocol: Protocol,
    instances: Iterable[GhdInstance | tuple[BitString, BitString]],
    shared: SharedRandomness | int = 0,
) -> int:
    """Max ledger total over an instance set (the measured protocol depth)."""
    worst = None
    for instance in instances:
        if isinstance(instance, GhdInstance):
            x, y = instance.x, instance.y
        else:
            x, y = instance
        outcome = run_protocol(protocol.alice, protocol.bob, x, y, shared)
        cost = outcome.ledger.total_bits
        if worst is None or cost > worst:
            worst = cost
    if worst is None:
        raise ValueError("instance set must be nonempty")
    return worst


class ErrorEstimate(NamedTuple):
    error_rate: float
    halfwidth: float


def estimate_error_rate(
    protocol: Protocol,
    instance: GhdInstance,
    trials: int,
    seed: int,
) -> ErrorEstimate:
    """Fraction of seeds on which the protocol output differs from the truth.

    The halfwidth is the 3-sigma Monte Carlo term ``3*sqrt(p*(1-p)/trials)``.
    Instances that violate the promise are rejected (no ground truth).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    truth = instance.truth_bit()
    errors = 0
    for trial in range(trials):
        outcome = protocol.run(instance.x, instance.y, derive_seed(seed, trial))
        if outcome.output != truth:
            errors += 1
    rate = errors / trials
    return ErrorEstimate(rate, 3.0 * math.sqrt(rate * (1.0 - rate) / trials))
