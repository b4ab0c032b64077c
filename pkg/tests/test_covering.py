import math
import random

import pytest

from ghd.bits import BitString, ball_volume, random_pair_at_distance
from ghd.covering import (
    CodeConstructionError,
    CoveringCode,
    audit_covering,
    det_complexity_bounds,
    det_protocol,
    det_protocol_params,
    greedy_covering_code,
    greedy_size_bound,
    load_code,
    nearest_codeword,
    random_covering_code,
    run_det_protocol,
    save_code,
    set_diameter,
)


def oracle_covered(code: CoveringCode, word: int) -> bool:
    return any((word ^ c).bit_count() <= code.radius for c in code.codewords)


# ------------------------------------------------------------ construction


def test_radius_n_single_codeword():
    code = greedy_covering_code(6, 6)
    assert code.size == 1
    assert audit_covering(code)


def test_radius_zero_is_whole_cube():
    code = greedy_covering_code(4, 0)
    assert code.size == 16
    assert code.codewords == tuple(range(16))
    assert audit_covering(code)


def test_greedy_7_1_example():
    code = greedy_covering_code(7, 1)
    assert 16 <= code.size <= 93  # volume bound below, greedy guarantee above
    assert code.size * ball_volume(7, 1) >= 2**7
    assert all(oracle_covered(code, z) for z in range(2**7))


def test_greedy_rejects_oversized_n():
    with pytest.raises(ValueError):
        greedy_covering_code(23, 1)


def test_greedy_bounds_full_sweep_small():
    for n in range(1, 11):
        for r in range(n + 1):
            code = greedy_covering_code(n, r)
            assert audit_covering(code)
            assert code.size * ball_volume(n, r) >= 2**n
            assert code.size <= greedy_size_bound(n, r)


def test_greedy_is_deterministic():
    assert greedy_covering_code(9, 2).codewords == greedy_covering_code(9, 2).codewords


def test_random_code_small_and_mid():
    code = random_covering_code(14, 7, confidence=0.99, seed=1)
    assert audit_covering(code, sample_points=20_000)
    code = random_covering_code(30, 10, confidence=0.99, seed=2)
    assert audit_covering(code, sample_points=20_000, seed=3)


def test_random_code_radius_n_single_word():
    assert random_covering_code(12, 12, seed=4).size == 1


def test_random_code_rejects_radius_zero():
    with pytest.raises(ValueError):
        random_covering_code(10, 0)


def test_random_code_infeasible_radius_raises():
    with pytest.raises(CodeConstructionError):
        random_covering_code(120, 1, seed=5)


# ------------------------------------------------------------ decoding


def test_nearest_codeword_identity_cases():
    code = greedy_covering_code(7, 1)
    for c in code.codewords[:5]:
        word, distance = nearest_codeword(code, BitString(7, c))
        assert word.value == c and distance == 0
    zero_radius = greedy_covering_code(5, 0)
    for v in range(32):
        word, distance = nearest_codeword(zero_radius, BitString(5, v))
        assert word.value == v and distance == 0


def test_nearest_codeword_within_radius_randomized():
    code = greedy_covering_code(7, 1)
    rng = random.Random(6)
    for _ in range(500):
        x = BitString.random(7, rng)
        _, distance = nearest_codeword(code, x)
        assert distance <= 1


def test_nearest_index_tie_breaks_to_lowest():
    code = CoveringCode(3, 1, (0b000, 0b011, 0b101, 0b110))
    # 0b111 is at distance 2 from 000 and 1 from each of the others
    assert code.nearest_index(0b111) == 1


def test_decode_table_matches_linear_scan():
    code = greedy_covering_code(8, 2)
    # force the linear path via a copy too large for a table? n=8 has one;
    # compare against a straightforward scan instead
    for v in range(256):
        best = min(range(code.size), key=lambda i: ((code.codewords[i] ^ v).bit_count(), i))
        assert code.nearest_index(v) == best


# ------------------------------------------------------------ the protocol


def test_det_protocol_diagonal_and_far_examples():
    params = det_protocol_params(10, 4)
    x, _ = random_pair_at_distance(10, 0, seed=7)
    outcome = run_det_protocol(x, x, params)
    assert outcome.output == 0
    assert outcome.ledger.total_bits == params.cost_bits
    far_x, far_y = random_pair_at_distance(10, 4, seed=8)
    assert run_det_protocol(far_x, far_y, params).output == 1


def test_det_protocol_zero_error_randomized():
    params = det_protocol_params(12, 5)
    rng = random.Random(9)
    for _ in range(300):
        x = BitString.random(12, rng)
        assert run_det_protocol(x, x, params).output == 0
        d = rng.randint(5, 12)
        a, b = random_pair_at_distance(12, d, rng.getrandbits(62))
        assert run_det_protocol(a, b, params).output == 1


def test_det_protocol_zero_error_broad_sweep():
    # whole diagonal exhaustively, plus sampled pairs at every far distance
    rng = random.Random(13)
    for n in (6, 9, 12):
        for gap in (2, n // 2, n):
            params = det_protocol_params(n, gap)
            proto = det_protocol(params)
            for value in range(1 << n):
                x = BitString(n, value)
                assert proto.run(x, x, 0).output == 0
            for d in range(gap, n + 1):
                for _ in range(200):
                    a, b = random_pair_at_distance(n, d, rng.getrandbits(62))
                    assert proto.run(a, b, 0).output == 1


def test_det_params_validation():
    with pytest.raises(ValueError):
        det_protocol_params(10, 0)
    with pytest.raises(ValueError):
        det_protocol_params(10, 11)
    code = greedy_covering_code(10, 2)
    with pytest.raises(ValueError):
        det_protocol_params(10, 4, code=code)  # radius 2 != required 1


def test_gap_equals_n_costs_two_bits():
    # a radius-floor((n-1)/2) code needs two codewords on an odd cube
    params = det_protocol_params(7, 7)
    assert params.code.size == 2
    assert params.cost_bits == 2
    x, _ = random_pair_at_distance(7, 0, seed=10)
    assert run_det_protocol(x, x, params).output == 0
    a = BitString.from_text("1010101")
    assert run_det_protocol(a, a.complement(), params).output == 1


# -------------------------------------------------------------- bounds


def test_bounds_examples():
    lower, upper = det_complexity_bounds(10, 4)
    assert abs(lower - (10 - math.log2(56))) < 1e-12
    assert upper == 10 - math.log2(11) + math.log2(10) + 2
    assert det_complexity_bounds(10, 1).lower == 10.0
    with pytest.raises(ValueError):
        det_complexity_bounds(10, 0)


def test_worst_case_cost_is_index_width_plus_answer():
    from ghd.runtime import measure_worst_case_cost

    params = det_protocol_params(10, 4)
    pairs = [random_pair_at_distance(10, 0, seed=s) for s in range(10)]
    pairs += [random_pair_at_distance(10, d, seed=d) for d in range(4, 11)]
    cost = measure_worst_case_cost(det_protocol(params), pairs)
    assert cost == params.code.index_width + 1 == params.cost_bits


def test_measured_cost_within_bounds_sweep():
    for n in range(1, 13):
        for gap in range(1, n + 1):
            params = det_protocol_params(n, gap)
            lower, upper = det_complexity_bounds(n, gap)
            x, _ = random_pair_at_distance(n, 0, seed=11)
            cost = run_det_protocol(x, x, params).ledger.total_bits
            assert cost == params.cost_bits
            assert lower <= cost <= upper, (n, gap, cost, lower, upper)


# -------------------------------------------------------------- diameter


def test_diameter_examples():
    assert set_diameter([BitString.from_text("0101")]) == 0
    assert set_diameter([BitString.zeros(9), BitString.ones(9)]) == 9
    with pytest.raises(ValueError):
        set_diameter([])


def test_ball_diameter_and_anticode_saturation():
    # a radius-r ball has diameter <= 2r and exactly V2(n, r) points
    n, r = 9, 2
    ball = [BitString(n, z) for z in range(2**n) if z.bit_count() <= r]
    assert len(ball) == ball_volume(n, r)
    assert set_diameter(ball) <= 2 * r


def test_anticode_bound_falsification_harness():
    # random sets: whenever diam <= 2r and n >= 2r+1, size <= V2(n, r)
    rng = random.Random(12)
    n = 8
    checked = 0
    for _ in range(3000):
        center = rng.getrandbits(n)
        radius = rng.randint(0, 3)
        count = rng.randint(1, 40)
        points = {center}
        for _ in range(count):
            offset = 0
            for pos in rng.sample(range(n), rng.randint(0, radius)):
                offset |= 1 << pos
            points.add(center ^ offset)
        items = [BitString(n, p) for p in points]
        diameter = set_diameter(items)
        r_eff = (diameter + 1) // 2
        if n >= 2 * r_eff + 1:
            checked += 1
            assert len(items) <= ball_volume(n, r_eff)
    assert checked > 1000


# ---------------------------------------------------------- serialization


def test_code_file_round_trip(tmp_path):
    code = greedy_covering_code(10, 1)
    path = tmp_path / "code.txt"
    save_code(code, path)
    loaded = load_code(path)
    assert loaded == code
    header = path.read_text().splitlines()[0]
    assert header == f"10 1 {code.size}"


def test_load_rejects_corrupt_file(tmp_path):
    code = greedy_covering_code(6, 2)
    path = tmp_path / "code.txt"
    save_code(code, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")  # drop a codeword
    with pytest.raises(ValueError):
        load_code(path)


def test_load_audits_covering(tmp_path):
    bad = CoveringCode(6, 1, (0,))
    path = tmp_path / "bad.txt"
    save_code(bad, path)
    with pytest.raises(CodeConstructionError):
        load_code(path)
    assert load_code(path, validate=False) == bad
