"""Batch experiment driver: parameter sweeps, error rates, cost-vs-bound tables.

Configs are key-value text files::

    protocol = sketch          # sampling | sketch | det | stream
    trials = 10000             # Monte Carlo seeds (or instances) per class
    seed = 7                   # master seed; per-point seeds are derived
    format = csv               # csv | json
    rate = hoeffding           # sampling only: hoeffding | linear
    linear_rate_constant = 8.0 # sampling only, used when rate = linear
    code_dir = codes/          # det only: read-through cache of code files
    point n=512 L=4 U=256 s=2  # one grid point per line
    point n=512 L=4 U=256 s=3

Point keys by protocol: sampling/sketch use n, L, U, s; det uses n, t;
stream uses n, c, p.  Points that violate a protocol precondition are
reported as skipped with the reason, never silently dropped.

Every record carries the same fixed column set (unused columns are empty):
the grid parameters, the derived quantities (m, block_count, block_length,
word_width, trivial_mode, code_size, index_width, state_bits, t for the
derived stream gap), the measured worst-case bits next to the expected
formula value, empirical error rates per class with 3-sigma halfwidths, the
theoretical bound (exact zero where the guarantee is one-sided or
deterministic), and ok-flags.  ``err_close`` is the error rate on the
output-0 class, ``err_far`` on the output-1 class.

Per-point seeds are derived from the master seed by a documented
splitmix-style derivation (:func:`ghd.runtime.derive_seed`), so parallel and
serial sweeps produce byte-identical reports.
"""

from __future__ import annotations

import json
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .bits import BitString, GhdInstance, log2_ball_volume, random_pair_at_distance
from .runtime import Protocol, derive_seed
from .sampling import derive_sampling_params, sampling_protocol
from .sketch import derive_sketch_params, sketch_cost, sketch_protocol
from .covering import (
    det_protocol,
    det_protocol_params,
    det_complexity_bounds,
    greedy_covering_code,
    load_code,
    save_code,
)
from .streaming import ExactBitmapF0, ghd_via_streaming

__all__ = [
    "ExperimentConfig",
    "Report",
    "parse_config",
    "load_config",
    "run_experiment",
    "compare_bounds",
    "COLUMNS",
    "COMPARE_COLUMNS",
]

PROTOCOLS = ("sampling", "sketch", "deterministic", "streaming")
_ALIASES = {"det": "deterministic", "stream": "streaming"}

COLUMNS = [
    "protocol",
    "status",
    "reason",
    "n",
    "L",
    "U",
    "s",
    "t",
    "c",
    "p",
    "m",
    "block_count",
    "block_length",
    "word_width",
    "trivial_mode",
    "code_size",
    "index_width",
    "state_bits",
    "expected_bits",
    "measured_bits",
    "bits_ok",
    "lower_bits",
    "upper_bits",
    "cost_in_bounds",
    "err_close",
    "err_close_hw",
    "err_far",
    "err_far_hw",
    "error_bound",
    "bound_ok",
]

COMPARE_COLUMNS = [
    "n",
    "L",
    "U",
    "s",
    "sampling_bits",
    "sketch_bits",
    "sampling_rate",
    "sketch_rate",
    "crossover_regime",
]

_INT_KEYS = {"n", "L", "U", "t", "p"}
_FLOAT_KEYS = {"s", "c"}


@dataclass(frozen=True)
class ExperimentConfig:
    protocol: str
    grid: tuple[dict, ...]
    trials: int = 1000
    seed: int = 0
    output_format: str = "csv"
    rate: str = "hoeffding"
    linear_rate_constant: float = 8.0
    code_dir: str | None = None

    def __post_init__(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.output_format not in ("csv", "json"):
            raise ValueError(f"unknown output format {self.output_format!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def normalize_protocol(name: str) -> str:
    name = _ALIASES.get(name, name)
    if name not in PROTOCOLS:
        raise ValueError(f"unknown protocol {name!r}")
    return name


def parse_config(text: str, protocol: str | None = None) -> ExperimentConfig:
    """Parse the key-value config format; see the module docstring."""
    settings: dict[str, str] = {}
    grid: list[dict] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("point"):
            point: dict = {}
            for item in line[len("point"):].split():
                if "=" not in item:
                    raise ValueError(f"line {lineno}: malformed point entry {item!r}")
                key, value = item.split("=", 1)
                if key in _INT_KEYS:
                    point[key] = int(value)
                elif key in _FLOAT_KEYS:
                    point[key] = float(value)
                else:
                    raise ValueError(f"line {lineno}: unknown point key {key!r}")
            grid.append(point)
        elif "=" in line:
            key, value = (part.strip() for part in line.split("=", 1))
            settings[key] = value
        else:
            raise ValueError(f"line {lineno}: cannot parse {line!r}")

    known = {"protocol", "trials", "seed", "format", "rate", "linear_rate_constant", "code_dir"}
    unknown = set(settings) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")

    config_protocol = settings.get("protocol")
    if protocol is not None:
        protocol = normalize_protocol(protocol)
        if config_protocol is not None and normalize_protocol(config_protocol) != protocol:
            raise ValueError(
                f"config names protocol {config_protocol!r} but {protocol!r} was requested"
            )
    elif config_protocol is not None:
        protocol = normalize_protocol(config_protocol)
    else:
        raise ValueError("no protocol given (neither in config nor by the caller)")

    return ExperimentConfig(
        protocol=protocol,
        grid=tuple(grid),
        trials=int(settings.get("trials", "1000")),
        seed=int(settings.get("seed", "0")),
        output_format=settings.get("format", "csv"),
        rate=settings.get("rate", "hoeffding"),
        linear_rate_constant=float(settings.get("linear_rate_constant", "8.0")),
        code_dir=settings.get("code_dir"),
    )


def load_config(path: str | Path, protocol: str | None = None) -> ExperimentConfig:
    return parse_config(Path(path).read_text(), protocol=protocol)


def _blank_record(protocol: str, point: dict) -> dict:
    record = {column: None for column in COLUMNS}
    record["protocol"] = protocol
    record["status"] = "ok"
    for key in ("n", "L", "U", "s", "t", "c", "p"):
        if key in point:
            record[key] = point[key]
    return record


def _three_sigma(bound: float, trials: int) -> float:
    return 3.0 * math.sqrt(bound / trials) if bound > 0 else 0.0


def _error_sweep(
    protocol: Protocol, instance: GhdInstance, trials: int, seed: int
) -> tuple[float, float, int, int]:
    """Error rate, halfwidth, and the min/max ledger totals over the trials."""
    truth = instance.truth_bit()
    errors = 0
    min_bits = max_bits = None
    for trial in range(trials):
        outcome = protocol.run(instance.x, instance.y, derive_seed(seed, trial))
        if outcome.output != truth:
            errors += 1
        bits = outcome.ledger.total_bits
        min_bits = bits if min_bits is None else min(min_bits, bits)
        max_bits = bits if max_bits is None else max(max_bits, bits)
    rate = errors / trials
    halfwidth = 3.0 * math.sqrt(rate * (1.0 - rate) / trials)
    return rate, halfwidth, min_bits, max_bits


def _run_sampling_point(config: ExperimentConfig, point: dict, point_seed: int) -> dict:
    record = _blank_record("sampling", point)
    n, lo, hi, s = point["n"], point["L"], point["U"], point["s"]
    params = derive_sampling_params(
        n, lo, hi, s, rate=config.rate, linear_rate_constant=config.linear_rate_constant
    )
    record["m"] = params.trial_count
    record["expected_bits"] = params.cost_bits
    protocol = sampling_protocol(params)
    close = GhdInstance.at_distance(n, lo, hi, lo, derive_seed(point_seed, 0))
    far = GhdInstance.at_distance(n, lo, hi, hi, derive_seed(point_seed, 1))
    err0, hw0, lo_bits0, hi_bits0 = _error_sweep(
        protocol, close, config.trials, derive_seed(point_seed, 2)
    )
    err1, hw1, lo_bits1, hi_bits1 = _error_sweep(
        protocol, far, config.trials, derive_seed(point_seed, 3)
    )
    bound = math.exp(-s)
    slack = _three_sigma(bound, config.trials)
    record.update(
        measured_bits=max(hi_bits0, hi_bits1),
        bits_ok=(
            lo_bits0 == hi_bits0 == params.cost_bits
            and lo_bits1 == hi_bits1 == params.cost_bits
        ),
        err_close=err0,
        err_close_hw=hw0,
        err_far=err1,
        err_far_hw=hw1,
        error_bound=bound,
        bound_ok=(err0 <= bound + slack and err1 <= bound + slack),
    )
    return record


def _run_sketch_point(config: ExperimentConfig, point: dict, point_seed: int) -> dict:
    record = _blank_record("sketch", point)
    n, lo, hi, s = point["n"], point["L"], point["U"], point["s"]
    params = derive_sketch_params(n, lo, hi, s)
    record.update(
        block_count=params.block_count,
        block_length=params.block_length,
        word_width=params.word_width,
        trivial_mode=params.trivial_mode,
        expected_bits=sketch_cost(params),
    )
    protocol = sketch_protocol(params)
    close = GhdInstance.at_distance(n, lo, hi, lo, derive_seed(point_seed, 0))
    far = GhdInstance.at_distance(n, lo, hi, hi, derive_seed(point_seed, 1))
    err0, hw0, lo_bits0, hi_bits0 = _error_sweep(
        protocol, close, config.trials, derive_seed(point_seed, 2)
    )
    err1, hw1, lo_bits1, hi_bits1 = _error_sweep(
        protocol, far, config.trials, derive_seed(point_seed, 3)
    )
    bound = math.exp(-s)
    slack = _three_sigma(bound, config.trials)
    record.update(
        measured_bits=max(hi_bits0, hi_bits1),
        bits_ok=(
            lo_bits0 == hi_bits0 == record["expected_bits"]
            and lo_bits1 == hi_bits1 == record["expected_bits"]
        ),
        err_close=err0,
        err_close_hw=hw0,
        err_far=err1,
        err_far_hw=hw1,
        error_bound=bound,
        # the 0 side is exact: a single close-side error is a violation
        bound_ok=(err0 == 0.0 and err1 <= bound + slack),
    )
    return record


def _code_path(directory: str, n: int, radius: int) -> Path:
    return Path(directory) / f"code-n{n}-r{radius}.txt"


def _obtain_code(config: ExperimentConfig, n: int, radius: int):
    if config.code_dir:
        path = _code_path(config.code_dir, n, radius)
        if path.exists():
            return load_code(path)
    return greedy_covering_code(n, radius)


def prepare_codes(config: ExperimentConfig) -> None:
    """Construct and save any codes missing from the configured code_dir."""
    if config.protocol != "deterministic" or not config.code_dir:
        return
    Path(config.code_dir).mkdir(parents=True, exist_ok=True)
    for point in config.grid:
        n, gap = point.get("n"), point.get("t")
        if n is None or gap is None or not 1 <= gap <= n or n > 22:
            continue
        radius = (gap - 1) // 2
        path = _code_path(config.code_dir, n, radius)
        if not path.exists():
            save_code(greedy_covering_code(n, radius), path)


def _run_det_point(config: ExperimentConfig, point: dict, point_seed: int) -> dict:
    record = _blank_record("deterministic", point)
    n, gap = point["n"], point["t"]
    params = det_protocol_params(n, gap, code=_obtain_code(config, n, (gap - 1) // 2))
    lower, upper = det_complexity_bounds(n, gap)
    record.update(
        code_size=params.code.size,
        index_width=params.code.index_width,
        expected_bits=params.cost_bits,
        lower_bits=lower,
        upper_bits=upper,
    )
    protocol = det_protocol(params)
    errors0 = errors1 = 0
    worst = None
    rng = random.Random(derive_seed(point_seed, 0))
    for trial in range(config.trials):
        x = BitString.random(n, rng)
        outcome = protocol.run(x, x, 0)
        errors0 += outcome.output != 0
        worst = outcome.ledger.total_bits if worst is None else max(worst, outcome.ledger.total_bits)
        d = rng.randint(gap, n)
        x2, y2 = random_pair_at_distance(n, d, rng.getrandbits(63))
        outcome = protocol.run(x2, y2, 0)
        errors1 += outcome.output != 1
        worst = max(worst, outcome.ledger.total_bits)
    record.update(
        measured_bits=worst,
        bits_ok=worst == params.cost_bits,
        cost_in_bounds=lower <= worst <= upper,
        err_close=errors0 / config.trials,
        err_close_hw=0.0,
        err_far=errors1 / config.trials,
        err_far_hw=0.0,
        error_bound=0.0,
        bound_ok=(errors0 == 0 and errors1 == 0),
    )
    return record


def _run_stream_point(config: ExperimentConfig, point: dict, point_seed: int) -> dict:
    record = _blank_record("streaming", point)
    n, c, p = point["n"], point["c"], point["p"]
    if not 1.0 < c < 2.0:
        raise ValueError("c must lie strictly between 1 and 2")
    if p < 1:
        raise ValueError("p must be >= 1")
    gap = math.ceil(n * (c - 1.0))
    record["t"] = gap

    def make() -> ExactBitmapF0:
        return ExactBitmapF0(2 * n, passes=p)

    errors0 = errors1 = 0
    worst_comm = 0
    state_bits = None
    rng = random.Random(derive_seed(point_seed, 0))
    for trial in range(config.trials):
        x = BitString.random(n, rng)
        output, run = ghd_via_streaming(make, c, x, x, check_determinism=False)
        errors0 += output != 0
        worst_comm = max(worst_comm, run.communication_bits)
        state_bits = run.state_bits
        d = rng.randint(gap, n)
        x2, y2 = random_pair_at_distance(n, d, rng.getrandbits(63))
        output, run = ghd_via_streaming(make, c, x2, y2, check_determinism=False)
        errors1 += output != 1
        worst_comm = max(worst_comm, run.communication_bits)
    lower = (n - log2_ball_volume(n, gap // 2)) / (2.0 * p)
    record.update(
        state_bits=state_bits,
        expected_bits=2 * p * state_bits,
        measured_bits=worst_comm,
        bits_ok=worst_comm <= 2 * p * state_bits,
        lower_bits=lower,
        err_close=errors0 / config.trials,
        err_close_hw=0.0,
        err_far=errors1 / config.trials,
        err_far_hw=0.0,
        error_bound=0.0,
        bound_ok=(errors0 == 0 and errors1 == 0),
    )
    return record


_POINT_RUNNERS = {
    "sampling": _run_sampling_point,
    "sketch": _run_sketch_point,
    "deterministic": _run_det_point,
    "streaming": _run_stream_point,
}


def _run_point(config: ExperimentConfig, index: int) -> dict:
    point = config.grid[index]
    point_seed = derive_seed(config.seed, index)
    runner = _POINT_RUNNERS[config.protocol]
    try:
        return runner(config, point, point_seed)
    except (ValueError, KeyError) as exc:
        record = _blank_record(config.protocol, point)
        record["status"] = "skipped"
        if isinstance(exc, KeyError):
            record["reason"] = f"missing point key {exc.args[0]!r}"
        else:
            record["reason"] = str(exc)
        return record


def _point_worker(payload: tuple[ExperimentConfig, int]) -> dict:
    config, index = payload
    return _run_point(config, index)


@dataclass
class Report:
    records: list[dict] = field(default_factory=list)

    @property
    def has_violation(self) -> bool:
        for record in self.records:
            if record["status"] != "ok":
                continue
            for flag in ("bits_ok", "bound_ok", "cost_in_bounds"):
                if record.get(flag) is False:
                    return True
        return False

    def to_csv(self, columns: list[str] | None = None) -> str:
        return _format_csv(self.records, columns or COLUMNS)

    def to_json(self) -> str:
        return json.dumps(self.records, sort_keys=True, indent=2) + "\n"

    def render(self, output_format: str) -> str:
        return self.to_json() if output_format == "json" else self.to_csv()


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _format_csv(records: list[dict], columns: list[str]) -> str:
    lines = [",".join(columns)]
    for record in records:
        lines.append(",".join(_format_cell(record.get(column)) for column in columns))
    return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> Report:
    """One record per grid point; deterministic given the config and seed."""
    if config.protocol == "deterministic" and config.code_dir:
        prepare_codes(config)
    tasks = [(config, index) for index in range(len(config.grid))]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_point_worker, tasks))
    else:
        records = [_point_worker(task) for task in tasks]
    return Report(records)


def compare_bounds(records: list[dict]) -> list[dict]:
    """Side-by-side sampling-vs-sketch costs on matching (n, L, U, s) points.

    Reports the two theoretical rates ``(s/U) * n`` and
    ``(s/U)**(1/3) * n * log2(n)`` next to the measured bits, and flags the
    ``s < U`` regime where the cube-root rate is the larger one.  Rejects
    reports that do not contain both protocols on identical grids.
    """
    key = lambda r: (r["n"], r["L"], r["U"], r["s"])
    sampling = {key(r): r for r in records if r["protocol"] == "sampling" and r["status"] == "ok"}
    sketch = {key(r): r for r in records if r["protocol"] == "sketch" and r["status"] == "ok"}
    if not sampling or not sketch:
        raise ValueError("comparison needs both sampling and sketch records")
    if set(sampling) != set(sketch):
        raise ValueError("mismatched grids: sampling and sketch points differ")
    rows = []
    for point in sorted(sampling):
        n, lo, hi, s = point
        rows.append(
            {
                "n": n,
                "L": lo,
                "U": hi,
                "s": s,
                "sampling_bits": sampling[point]["measured_bits"],
                "sketch_bits": sketch[point]["measured_bits"],
                "sampling_rate": (s / hi) * n,
                "sketch_rate": (s / hi) ** (1.0 / 3.0) * n * math.log2(n),
                "crossover_regime": s < hi,
            }
        )
    return rows
