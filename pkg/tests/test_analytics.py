import itertools
import math
import os
import random
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest

from sofic_lab.analytics import (
    AnalyticParams,
    DegreeChoice,
    balance_polynomial,
    bias_of_distance,
    bichromatic_pair_types,
    core_fixed_point,
    cross_entropy2,
    degrees_from_offset,
    distance_of_bias,
    distance_rate_scan,
    dominant_type,
    entropy,
    entropy2,
    entropy_gap_report,
    offset_window_top,
    optimal_pair_type,
    pair_distance_rate,
    planted_distance_rate,
    proper_rate,
    ratio_from_offset,
    type_rate,
    working_precision,
)
from sofic_lab.hypergraph import PairTypeMatrix


def test_proper_rate_known_values():
    assert abs(proper_rate(2, 2)) <= mp.mpf("1e-30")
    with working_precision():
        log2 = mp.log(2)
        hand = mp.log(2) + mp.mpf(10) / 3 * mp.log(mp.mpf(3) / 4)
    assert abs(proper_rate(0, 7) - log2) <= mp.mpf("1e-30")
    assert abs(proper_rate(10, 3) - hand) <= mp.mpf("1e-30")
    # more constraints per vertex can only hurt
    assert proper_rate(5, 4) > proper_rate(6, 4)
    with pytest.raises(ValueError):
        proper_rate(2, 1)
    with pytest.raises(ValueError):
        proper_rate(-1, 3)


def test_proper_rate_large_k_offset_window():
    # in the window parametrization the rate collapses to (1 - 2 eta) 2^-k
    # up to a 2^-2k error; check with the offset implied by the rounded d
    choice = degrees_from_offset(25, 0.12)
    assert choice.in_window
    rate = proper_rate(choice.d, 25)
    with working_precision():
        target = (1 - 2 * choice.implied_eta) * mp.mpf(2) ** -25
        tol = mp.mpf(2) ** (-2 * 25 + 6)
    assert abs(rate - target) <= tol


def test_entropy_functions():
    with working_precision():
        log2 = mp.log(2)
        log3 = mp.log(3)
        log4 = mp.log(4)
    assert abs(entropy2(0.5) - log2) <= mp.mpf("1e-30")
    assert entropy2(0) == 0
    assert entropy2(1) == 0
    assert entropy([1]) == 0
    assert abs(entropy([0.25] * 4) - log4) <= mp.mpf("1e-30")
    assert abs(entropy([Fraction(1, 3)] * 3) - log3) <= mp.mpf("1e-30")
    for x in (0.1, 0.37, 0.5, 0.93):
        assert abs(cross_entropy2(x, x) - entropy2(x)) <= mp.mpf("1e-30")
    # cross entropy dominates entropy; the excess is a divergence
    assert cross_entropy2(0.3, 0.4) > entropy2(0.3)
    assert cross_entropy2(0.3, 0) == mp.inf
    assert cross_entropy2(0, 0) == 0
    with pytest.raises(ValueError):
        entropy([0.5, -0.1])
    with pytest.raises(ValueError):
        entropy2(1.5)
    with pytest.raises(ValueError):
        cross_entropy2(0.5, -1)


def test_type_rate_matches_proper_rate_at_dominant_type():
    for k in range(3, 13):
        star = dominant_type(k)
        for d in (2, 3, 10, 40):
            gap = type_rate([star] * d, d, k) - proper_rate(d, k)
            assert abs(gap) <= mp.mpf("1e-10"), (d, k, gap)


def test_type_rate_hand_value():
    value = type_rate([(0, Fraction(1, 2), 0)], 1, 2)
    with working_precision():
        expected = mp.log(2) / 2
    assert abs(value - expected) <= mp.mpf("1e-30")


def test_type_rate_validation():
    with pytest.raises(ValueError):
        type_rate([(0, 0.5, 0.1)], 1, 2)
    # equal row sums but different implied densities of ones
    with pytest.raises(ValueError):
        type_rate(
            [
                (0, Fraction(1, 3), 0, 0),
                (0, 0, Fraction(1, 3), 0),
            ],
            2,
            3,
        )
    with pytest.raises(ValueError):
        type_rate([(0, 0.5, 0), (0, 0.5, 0)], 1, 2)
    with pytest.raises(ValueError):
        type_rate([(0, Fraction(1, 2), 0, 0)], 1, 2)


def test_type_rate_row_averaging_never_decreases():
    rng = random.Random(20260823)
    k, d = 6, 4
    star = [float(x) for x in dominant_type(k)]
    ones = [1.0] * (k - 1)
    slots = [float(j) for j in range(1, k)]

    def project_out(vec, direction):
        dot = sum(a * b for a, b in zip(vec, direction))
        norm = sum(a * a for a in direction)
        return [a - dot / norm * b for a, b in zip(vec, direction)]

    slots_perp = project_out(slots, ones)
    floor = min(star[1:k])
    for _ in range(10):
        rows = []
        for _ in range(d):
            raw = [rng.uniform(-1, 1) for _ in range(k - 1)]
            raw = project_out(raw, ones)
            raw = project_out(raw, slots_perp)
            scale = floor * 0.4 / max(abs(a) for a in raw)
            rows.append(
                [0.0]
                + [star[j] + scale * raw[j - 1] for j in range(1, k)]
                + [0.0]
            )
        mean_row = [sum(row[j] for row in rows) / d for j in range(k + 1)]
        spread = type_rate(rows, d, k)
        pooled = type_rate([mean_row] * d, d, k)
        assert pooled > spread - mp.mpf("1e-20")
    # identical rows: averaging changes nothing
    same = [star] * d
    assert abs(type_rate(same, d, k) - type_rate(same, d, k)) <= mp.mpf("1e-25")


def test_dominant_type_exact_values():
    assert dominant_type(3) == (
        Fraction(0),
        Fraction(1, 6),
        Fraction(1, 6),
        Fraction(0),
    )
    assert dominant_type(2) == (Fraction(0), Fraction(1, 2), Fraction(0))
    for k in (2, 3, 5, 8, 12):
        star = dominant_type(k)
        assert sum(star) == Fraction(1, k)
        assert sum(j * x for j, x in enumerate(star)) == Fraction(1, 2)
        assert star[0] == 0 and star[k] == 0


def test_balance_polynomial():
    for d, k in ((2, 3), (7, 4), (10, 5)):
        assert abs(balance_polynomial(0.5, d, k)) <= mp.mpf("1e-30")
    assert balance_polynomial(0.3, 10, 5) < 0
    d, k = 10, 5
    for x in (0.1, 0.25, 0.4):
        direct = balance_polynomial(x, d, k)
        factored = balance_polynomial(x, d, k, factored=True)
        assert abs(direct - factored) <= mp.mpf("1e-20")
        with working_precision():
            v = mp.mpf(x)
            mirror_factor = (v / (1 - v)) ** (mp.mpf(k * (1 - d)) / d)
        mirrored = balance_polynomial(1 - x, d, k)
        assert abs(mirrored + mirror_factor * direct) <= mp.mpf("1e-9")
    with pytest.raises(ValueError):
        balance_polynomial(0, 10, 5)
    with pytest.raises(ValueError):
        balance_polynomial(1, 10, 5)
    with pytest.raises(ValueError):
        balance_polynomial(0.5, 1, 5)


def test_bias_distance_roundtrips():
    for k in (3, 10, 25):
        for delta in (0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99):
            b = bias_of_distance(delta, k)
            assert abs(distance_of_bias(b, k) - mp.mpf(delta)) <= mp.mpf("1e-12")
        for b0 in (0.05, 0.2, 0.5, 0.8, 0.95):
            x = distance_of_bias(b0, k)
            assert abs(bias_of_distance(x, k) - mp.mpf(b0)) <= mp.mpf("1e-10")
    assert bias_of_distance(0, 6) == 0
    assert bias_of_distance(1, 6) == 1
    assert abs(bias_of_distance(0.5, 6) - mp.mpf("0.5")) <= mp.mpf("1e-30")
    assert distance_of_bias(0, 6) == 0
    assert distance_of_bias(1, 6) == 1
    with pytest.raises(ValueError):
        distance_of_bias(-0.1, 6)
    with pytest.raises(ValueError):
        bias_of_distance(1.1, 6)


def test_pair_distance_rate():
    for d, k in ((20, 6), (5, 3)):
        assert abs(pair_distance_rate(0.5, d, k) - proper_rate(d, k)) <= mp.mpf(
            "1e-30"
        )
        # exact mirror arguments, so symmetry holds to working precision
        for x in (Fraction(1, 10), Fraction(27, 100), Fraction(11, 25)):
            sym = pair_distance_rate(x, d, k) - pair_distance_rate(1 - x, d, k)
            assert abs(sym) <= mp.mpf("1e-30")
    assert pair_distance_rate(0, 20, 6) == 0
    assert pair_distance_rate(1, 20, 6) == 0
    with pytest.raises(ValueError):
        pair_distance_rate(-0.1, 20, 6)


def test_planted_distance_rate():
    for d, k in ((20, 6), (12, 4)):
        assert abs(
            planted_distance_rate(0.5, d, k) - proper_rate(d, k)
        ) <= mp.mpf("1e-12")
        for delta in (0.1, 0.2, 0.3, 0.45):
            sym = planted_distance_rate(delta, d, k) - planted_distance_rate(
                1 - delta, d, k
            )
            assert abs(sym) <= mp.mpf("1e-9")
    assert planted_distance_rate(0, 20, 6) == 0
    assert planted_distance_rate(1, 20, 6) == 0
    with pytest.raises(ValueError):
        planted_distance_rate(2, 20, 6)


def test_pair_rate_beats_proper_rate_near_zero_at_large_k():
    # tiny distances carry more pair mass than independence would allow,
    # which is the second-moment obstruction the bias analysis removes
    choice = degrees_from_offset(25, 0.12)
    with working_precision():
        x = mp.mpf(2) ** -25
    gap = pair_distance_rate(x, choice.d, 25) - proper_rate(choice.d, 25)
    assert gap > 0


def test_bichromatic_pair_types_enumeration():
    assert {m.as_tuple() for m in bichromatic_pair_types(2)} == {
        (0, 1, 1, 0),
        (1, 0, 0, 1),
    }
    assert len(bichromatic_pair_types(4)) == 19
    for k in (2, 3, 4, 6):
        expected = set()
        for e in itertools.product(range(k + 1), repeat=4):
            if sum(e) != k:
                continue
            if 0 < e[2] + e[3] < k and 0 < e[1] + e[3] < k:
                expected.add(e)
        assert {m.as_tuple() for m in bichromatic_pair_types(k)} == expected


def test_optimal_pair_type_constraints():
    for k, delta in ((3, 0.2), (4, 0.3), (7, 0.45), (5, 0.5)):
        opt = optimal_pair_type(delta, k)
        assert set(opt.weights) == set(bichromatic_pair_types(k))
        assert all(w > 0 for w in opt.weights.values())
        assert opt.normalizer > 0
        assert 0 < opt.delta0 < 1
        total = mp.fsum(opt.weights.values())
        left = mp.fsum((m.e10 + m.e11) * w for m, w in opt.weights.items())
        right = mp.fsum((m.e01 + m.e11) * w for m, w in opt.weights.items())
        moved = mp.fsum((m.e01 + m.e10) * w for m, w in opt.weights.items())
        assert abs(total - mp.mpf(1) / k) <= mp.mpf("1e-10")
        assert abs(left - mp.mpf("0.5")) <= mp.mpf("1e-10")
        assert abs(right - mp.mpf("0.5")) <= mp.mpf("1e-10")
        assert abs(moved - mp.mpf(delta)) <= mp.mpf("1e-10")
    with pytest.raises(ValueError):
        optimal_pair_type(0, 4)
    with pytest.raises(ValueError):
        optimal_pair_type(1, 4)


def test_optimal_pair_type_symmetry_at_half():
    opt = optimal_pair_type(0.5, 5)
    for m, w in opt.weights.items():
        swapped_off = PairTypeMatrix(m.e00, m.e10, m.e01, m.e11)
        swapped_diag = PairTypeMatrix(m.e11, m.e01, m.e10, m.e00)
        assert abs(w - opt.weights[swapped_off]) <= mp.mpf("1e-25")
        assert abs(w - opt.weights[swapped_diag]) <= mp.mpf("1e-25")


def test_optimal_pair_type_is_a_constrained_maximum():
    # perturb inside the constraint set and watch the objective drop
    k, delta = 4, 0.3
    opt = optimal_pair_type(delta, k)
    atoms = sorted(opt.weights, key=lambda m: m.as_tuple())
    t = np.array([float(opt.weights[m]) for m in atoms])
    log_coeff = np.array(
        [
            math.log(
                math.factorial(k)
                // (
                    math.factorial(m.e00)
                    * math.factorial(m.e01)
                    * math.factorial(m.e10)
                    * math.factorial(m.e11)
                )
            )
            for m in atoms
        ]
    )

    def objective(vec):
        return float(np.sum(-vec * np.log(vec) + vec * log_coeff))

    constraints = np.array(
        [
            [1.0] * len(atoms),
            [m.e10 + m.e11 for m in atoms],
            [m.e01 + m.e11 for m in atoms],
            [m.e01 + m.e10 for m in atoms],
        ]
    )
    _, singular, vt = np.linalg.svd(constraints, full_matrices=True)
    rank = int(np.sum(singular > 1e-9))
    null_basis = vt[rank:]
    assert null_basis.shape[0] == len(atoms) - rank
    base = objective(t)
    rng = np.random.default_rng(20260823)
    step = 1e-5
    for _ in range(100):
        coeffs = rng.normal(size=null_basis.shape[0])
        direction = coeffs @ null_basis
        direction /= np.linalg.norm(direction)
        for sign in (1.0, -1.0):
            moved = t + sign * step * direction
            assert np.all(moved > 0)
            assert objective(moved) <= base + 1e-8


def test_entropy_gap_report():
    calm = entropy_gap_report(0.5, 5)
    assert abs(calm.epsilon_hat) <= mp.mpf("1e-12")
    assert abs(calm.entropy_gap) <= mp.mpf("1e-12")
    assert abs(calm.kl_divergence) <= mp.mpf("1e-12")
    report = entropy_gap_report(0.1, 10)
    identity = report.delta0 * report.epsilon_hat * mp.log(
        (1 - report.delta0) / report.delta0
    )
    assert abs(report.entropy_gap - identity) <= mp.mpf("1e-10")
    assert report.kl_divergence >= 0
    assert report.delta0 >= report.delta
    with working_precision():
        for k in (10, 15, 20):
            shrink_cap = mp.mpf(2) ** (-k + 4)
            for delta in (0.05, 0.15, 0.3, 0.5):
                rep = entropy_gap_report(delta, k)
                assert rep.epsilon_hat <= shrink_cap, (k, delta, rep.epsilon_hat)
                assert rep.epsilon_hat >= 0
    for bad in (0, 0.6, -1):
        with pytest.raises(ValueError):
            entropy_gap_report(bad, 8)


def test_distance_rate_scan_large_k_regime():
    choice = degrees_from_offset(25, 0.12)
    scan = distance_rate_scan(choice.d, 25, grid_points=401)
    assert len(scan.rows) == 401
    assert abs(scan.argmax_delta - mp.mpf("0.5")) <= mp.mpf("1e-9")
    assert scan.margin > 0
    assert abs(scan.max_rate - planted_distance_rate(0.5, choice.d, 25)) <= mp.mpf(
        "1e-20"
    )
    base = proper_rate(choice.d, 25)
    for i, row in enumerate(scan.rows):
        assert row.planted_rate <= scan.max_rate
        assert row.proper_rate == base
        mirrored = scan.rows[len(scan.rows) - 1 - i]
        assert abs(row.planted_rate - mirrored.planted_rate) <= mp.mpf("1e-9")
    # spot check a row against direct evaluation
    probe = scan.rows[57]
    assert abs(probe.pair_rate - pair_distance_rate(probe.delta, choice.d, 25)) <= mp.mpf(
        "1e-20"
    )
    assert abs(probe.delta0 - bias_of_distance(probe.delta, 25)) <= mp.mpf("1e-20")


def test_distance_rate_scan_shape():
    scan = distance_rate_scan(20, 6, grid_points=21)
    assert len(scan.rows) == 21
    with working_precision():
        lo = mp.mpf(2) ** (-mp.mpf(6) / 2)
    assert abs(scan.rows[0].delta - lo) <= mp.mpf("1e-30")
    assert abs(scan.rows[-1].delta - (1 - lo)) <= mp.mpf("1e-30")
    assert scan.margin >= 0
    assert scan.argmax_delta in {row.delta for row in scan.rows}
    with pytest.raises(ValueError):
        distance_rate_scan(20, 6, grid_points=2)


def test_offset_maps():
    with working_precision():
        expected = mp.log(2) / 2 * 2**25 - (1 + mp.log(2)) / 2 + mp.mpf(0.12)
    assert abs(ratio_from_offset(25, 0.12) - expected) <= mp.mpf("1e-30")
    choice = degrees_from_offset(25, 0.12)
    assert isinstance(choice, DegreeChoice)
    with working_precision():
        assert choice.d == int(mp.nint(ratio_from_offset(25, 0.12) * 25))
        # the implied offset reproduces d exactly, and rounding d moved the
        # offset by at most 1/(2k)
        reproduced = ratio_from_offset(25, choice.implied_eta) * 25
        assert abs(reproduced - choice.d) <= mp.mpf("1e-20")
    assert abs(choice.implied_eta - mp.mpf(0.12)) <= 0.02
    assert choice.in_window
    small = degrees_from_offset(2, 0.12)
    assert not small.in_window
    with working_precision():
        top = (1 - mp.log(2)) / 2
    assert abs(offset_window_top() - top) <= mp.mpf("1e-30")


def test_core_fixed_point_degenerate_degrees():
    for d in (1, 2, 3):
        trace = core_fixed_point(d, 5)
        assert trace.p_inf == 0
        assert trace.p[1] == 0
        assert trace.converged
        assert trace.mu_core == 0
    with pytest.raises(ValueError):
        core_fixed_point(0, 5)
    with pytest.raises(ValueError):
        core_fixed_point(5, 1)


def test_core_fixed_point_monotone_and_bounded():
    for d, k in ((50, 6), (10, 4), (300, 8)):
        trace = core_fixed_point(d, k)
        with working_precision():
            lambda0 = 1 / (mp.mpf(2) ** (k - 1) - 1)
        assert trace.p[0] == lambda0
        for earlier, later in zip(trace.p, trace.p[1:]):
            assert later <= earlier
        assert 0 <= trace.p_inf <= lambda0
        assert 0 <= trace.mu_core <= trace.mu_core_attached <= 1
        assert trace.converged


def test_core_fixed_point_large_k_regime():
    choice = degrees_from_offset(25, 0.12)
    trace = core_fixed_point(choice.d, 25)
    with working_precision():
        lambda0 = 1 / (mp.mpf(2) ** 24 - 1)
        lam = choice.d * lambda0
        lower = lambda0 * (1 - lam**2 * mp.exp(1 - lam)) ** 24
    assert trace.converged
    assert lower <= trace.p_inf <= lambda0
    assert 0.99 < trace.mu_core <= trace.mu_core_attached < 1


def test_working_precision_controls():
    saved = os.environ.pop("SOFIC_LAB_PRECISION", None)
    try:
        with working_precision():
            assert mp.mp.prec == 128
        with working_precision(256):
            assert mp.mp.prec == 256
        os.environ["SOFIC_LAB_PRECISION"] = "80"
        with working_precision():
            assert mp.mp.prec == 80
    finally:
        if saved is None:
            os.environ.pop("SOFIC_LAB_PRECISION", None)
        else:
            os.environ["SOFIC_LAB_PRECISION"] = saved
    with pytest.raises(ValueError):
        working_precision(40)
    # per-call override is honored
    assert abs(proper_rate(2, 2, precision=96)) <= mp.mpf("1e-25")


def test_analytic_params():
    plain = AnalyticParams(d=20, k=6)
    assert plain.eta is None
    with pytest.raises(ValueError):
        AnalyticParams(d=100, k=25, eta=0.12)
    with pytest.raises(ValueError):
        AnalyticParams(d=-1, k=6)
    with pytest.raises(ValueError):
        AnalyticParams(d=20, k=6, precision=10)
    built = AnalyticParams.from_offset(25, 0.12)
    assert built.d == degrees_from_offset(25, 0.12).d
    assert built.k == 25
    assert built.eta is not None
    AnalyticParams(d=0, k=3)
