"""The package's acceptance checklist, one test per numbered criterion.

Each test prints a "[Axx] name: PASS/FAIL" line (visible with -s, and
mirrored by the -v listing) and asserts both the stated tolerance and the
stated runtime budget.  Statistical criteria use fixed seeds, so the whole
module is deterministic.
"""

import math
from fractions import Fraction
from pathlib import Path
from time import perf_counter

import mpmath as mp
import numpy as np
import pytest
from scipy import optimize

from sofic_lab.analytics import (
    balance_polynomial,
    bias_of_distance,
    core_fixed_point,
    cross_entropy2,
    degrees_from_offset,
    distance_of_bias,
    distance_rate_scan,
    dominant_type,
    entropy2,
    pair_distance_rate,
    planted_distance_rate,
    proper_rate,
    type_rate,
    working_precision,
)
from sofic_lab.exact_count import (
    count_at_distance,
    count_proper,
    exact_first_moment,
    exact_planted_distance_moment,
    proper_colorings,
)
from sofic_lab.group_model import (
    ModelParams,
    check_sofic,
    enumerate_uniform_homs,
    generator_pair_words,
    generator_words,
    uniform_hom_count,
)
from sofic_lab.harness import cli_dispatch, load_instance
from sofic_lab.hypergraph import Coloring, build_hypergraph, monochromatic_edge_count
from sofic_lab.samplers import RngState, sample_planted_hom, sample_uniform_hom
from sofic_lab.structure import (
    core_decomposition,
    density_report,
    expansivity_scan,
    rigidity_violation_search,
)
from sofic_lab.tree_markov import (
    core_density_estimate,
    count_proper_patterns,
    enumerate_proper_patterns,
    local_pattern_census,
    single_edge_domain,
)

FIXTURES = Path(__file__).parent / "fixtures"

K25 = 25
K25_ETA = Fraction("0.12")


def verdict(tag, name, ok, elapsed, budget=None):
    within = budget is None or elapsed < budget
    print("[%s] %s: %s (%.2fs)" % (tag, name, "PASS" if ok and within else "FAIL", elapsed))
    assert ok, "%s %s: value check failed" % (tag, name)
    assert within, "%s %s: took %.2fs, budget %ss" % (tag, name, elapsed, budget)


def mean_stderr(values):
    m = len(values)
    mean = math.fsum(values) / m
    var = math.fsum((x - mean) ** 2 for x in values) / (m - 1)
    return mean, math.sqrt(var / m)


@pytest.fixture(scope="module")
def k25_degree():
    return degrees_from_offset(K25, K25_ETA)


@pytest.fixture(scope="module")
def k25_scan(k25_degree):
    start = perf_counter()
    scan = distance_rate_scan(k25_degree.d, K25, grid_points=2001)
    return scan, perf_counter() - start


def test_a01_uniform_hom_counts():
    start = perf_counter()
    cases = {(2, 1, 4): 3, (2, 2, 4): 9, (3, 1, 6): 40, (3, 2, 6): 1600}
    ok = True
    for (k, d, n), expected in cases.items():
        params = ModelParams(d=d, k=k, n=n)
        closed = uniform_hom_count(params)
        listed = sum(1 for _ in enumerate_uniform_homs(params))
        ok = ok and closed == listed == expected
    verdict("A01", "uniform homomorphism counts", ok, perf_counter() - start, 1.0)


def test_a02_first_moment_exact():
    start = perf_counter()
    frozen = {(2, 1, 4): Fraction(4), (2, 2, 4): Fraction(8, 3)}
    ok = True
    for k, d, n in [(2, 1, 4), (2, 2, 4), (3, 2, 6)]:
        params = ModelParams(d=d, k=k, n=n)
        exact = exact_first_moment(params)
        total = 0
        homs = 0
        for hom in enumerate_uniform_homs(params):
            total += count_proper(build_hypergraph(hom)).value
            homs += 1
        ok = ok and exact == Fraction(total, homs)
        if (k, d, n) in frozen:
            ok = ok and exact == frozen[(k, d, n)]
    verdict("A02", "first moment equals enumeration average", ok, perf_counter() - start, 120.0)


def test_a03_equitable_optimum():
    start = perf_counter()
    ok = True
    for k in range(3, 11):
        t = dominant_type(k)
        for d in range(2, 31):
            gap = abs(type_rate([t] * d, d, k) - proper_rate(d, k))
            ok = ok and gap <= mp.mpf(10) ** -10

    # independent route: numeric maximization over the interior simplex,
    # parametrized by a softmax so iterates always satisfy the constraints
    k, d = 4, 8

    def objective(u):
        z = np.concatenate(([0.0], u))
        w = np.exp(z - z.max())
        w = w / w.sum() / k
        return -float(type_rate([[0.0, *w, 0.0]] * d, d, k))

    res = optimize.minimize(
        objective,
        np.zeros(k - 2),
        method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 20000},
    )
    z = np.concatenate(([0.0], res.x))
    w = np.exp(z - z.max())
    w = w / w.sum() / k
    recovered = (0.0, *w, 0.0)
    err = max(abs(a - float(b)) for a, b in zip(recovered, dominant_type(k)))
    ok = ok and res.success and err <= 1e-6
    verdict("A03", "type functional optimum matches the closed rate", ok, perf_counter() - start, 60.0)


def test_a04_balance_polynomial_root():
    start = perf_counter()
    ok = True
    with working_precision():
        for d, k in [(10, 5), (40, 8)]:
            ok = ok and abs(balance_polynomial(Fraction(1, 2), d, k)) <= mp.mpf(10) ** -10
            for i in range(1, 1000):
                ok = ok and balance_polynomial(Fraction(i, 2000), d, k) < 0
    verdict("A04", "balance polynomial vanishes at 1/2, negative below", ok, perf_counter() - start, 1.0)


def test_a05_planted_distance_moment_exact():
    start = perf_counter()
    cases = {
        (2, 2, 4): [Fraction(0), Fraction(1, 2), Fraction(1)],
        (3, 2, 6): [Fraction(0), Fraction(1, 3)],
    }
    ok = True
    for (k, d, n), deltas in cases.items():
        params = ModelParams(d=d, k=k, n=n)
        chi = Coloring.equitable_split(n)
        graphs = []
        for hom in enumerate_uniform_homs(params):
            graph = build_hypergraph(hom)
            if monochromatic_edge_count(graph, chi) == 0:
                graphs.append(graph)
        for delta in deltas:
            exact = exact_planted_distance_moment(params, delta)
            average = Fraction(
                sum(count_at_distance(g, chi, delta).value for g in graphs),
                len(graphs),
            )
            ok = ok and exact == average
    verdict("A05", "planted distance moment equals enumeration average", ok, perf_counter() - start, 300.0)


def test_a06_planted_rate_identities(k25_degree):
    start = perf_counter()
    d = k25_degree.d
    tol = mp.mpf(10) ** -9
    with working_precision():
        f = proper_rate(d, K25)
        ok = abs(planted_distance_rate(Fraction(1, 2), d, K25) - f) <= tol
        lo = mp.mpf(2) ** (-mp.mpf(K25) / 2)
        hi = 1 - lo
        for i in range(251):
            delta = lo + (hi - lo) * i / 500
            gap = abs(
                planted_distance_rate(delta, d, K25)
                - planted_distance_rate(1 - delta, d, K25)
            )
            ok = ok and gap <= tol
        # alternate route, rebuilt from the public entropy pieces
        for i in (31, 137, 250, 388, 469):
            delta = lo + (hi - lo) * i / 500
            b = bias_of_distance(delta, K25)
            cross = cross_entropy2(delta, b)
            alternate = (
                pair_distance_rate(b, d, K25)
                - (entropy2(b) - cross)
                + (d - 1) * (cross - entropy2(delta))
            )
            ok = ok and abs(planted_distance_rate(delta, d, K25) - alternate) <= tol
    verdict("A06", "planted rate symmetry and dual routes", ok, perf_counter() - start, 10.0)


def test_a07_scan_argmax_and_planted_excess(k25_degree, k25_scan):
    scan, scan_seconds = k25_scan
    start = perf_counter()
    d = k25_degree.d
    rates = [row.planted_rate for row in scan.rows]
    argmax_index = max(range(len(rates)), key=rates.__getitem__)
    ok = argmax_index == 1000 and scan.margin > 0
    with working_precision():
        ok = ok and abs(scan.rows[1000].delta - mp.mpf(1) / 2) < mp.mpf(10) ** -30
        delta_star = distance_of_bias(mp.mpf(2) ** -K25, K25)
        excess = planted_distance_rate(delta_star, d, K25) - proper_rate(d, K25)
        ok = ok and excess > 0
    verdict("A07", "scan argmax at 1/2 and positive planted excess", ok,
            scan_seconds + perf_counter() - start, 30.0)


def test_a08_core_density_consistency():
    start = perf_counter()
    params = ModelParams(d=20, k=6, n=120)
    chi = Coloring.equitable_split(120)
    densities = []
    for seed in range(50):
        hom = sample_planted_hom(params, chi, RngState(seed))
        densities.append(float(density_report(build_hypergraph(hom), chi, 4)))
    mean, stderr = mean_stderr(densities)
    estimate = core_density_estimate(d=20, k=6, level=4, samples=100_000, rng=RngState(777))
    tree = float(estimate.rigid_frequency())
    combined = math.sqrt(stderr**2 + estimate.rigid_stderr() ** 2)
    if combined == 0:
        ok = mean == tree
    else:
        ok = abs(mean - tree) <= 3 * combined
    verdict("A08", "finite rigid density within 3 SE of tree estimate", ok, perf_counter() - start, 600.0)


def test_a09_fixed_point_bracket(k25_degree):
    start = perf_counter()
    d = k25_degree.d
    with working_precision():
        trace = core_fixed_point(d, K25)
        lambda0 = 1 / (mp.mpf(2) ** (K25 - 1) - 1)
        lam = d * lambda0
        lower = lambda0 * (1 - lam**2 * mp.e ** (1 - lam)) ** (K25 - 1)
        ok = trace.converged and lower <= trace.p_inf <= lambda0
        target = 1 - mp.e ** (-lam)
        ok = ok and abs(trace.mu_core_attached - target) <= mp.e ** (-lam) / 10
    verdict("A09", "fixed point bracket and attachment tail", ok, perf_counter() - start, 1.0)


def test_a10_sampler_exactness():
    start = perf_counter()
    params = ModelParams(d=2, k=2, n=4)
    chi = Coloring.equitable_split(4)
    draws = 100_000

    support = list(enumerate_uniform_homs(params))
    gen = RngState(5).generator()
    counts = {}
    for _ in range(draws):
        hom = sample_uniform_hom(params, gen)
        counts[hom] = counts.get(hom, 0) + 1
    ok = set(counts) <= set(support)
    tv = sum(abs(counts.get(h, 0) / draws - 1 / len(support)) for h in support) / 2
    ok = ok and tv < 0.02

    planted_support = [
        h for h in support
        if monochromatic_edge_count(build_hypergraph(h), chi) == 0
    ]
    gen = RngState(6).generator()
    counts = {}
    for _ in range(draws):
        hom = sample_planted_hom(params, chi, gen)
        counts[hom] = counts.get(hom, 0) + 1
    ok = ok and set(counts) <= set(planted_support)
    tv = sum(
        abs(counts.get(h, 0) / draws - 1 / len(planted_support))
        for h in planted_support
    ) / 2
    ok = ok and tv < 0.02

    # the planted sampler's output is chi-proper at every scale tried
    for k, d, n in [(2, 2, 8), (3, 3, 30), (6, 20, 60)]:
        scale_params = ModelParams(d=d, k=k, n=n)
        scale_chi = Coloring.equitable_split(n)
        for seed in range(20):
            hom = sample_planted_hom(scale_params, scale_chi, RngState(seed, 3))
            ok = ok and monochromatic_edge_count(build_hypergraph(hom), scale_chi) == 0
    verdict("A10", "sampler TV distance and planted properness", ok, perf_counter() - start, 60.0)


def test_a11_local_convergence():
    start = perf_counter()
    params = ModelParams(d=2, k=3, n=300)
    chi = Coloring.equitable_split(300)
    domain = single_edge_domain(ModelParams(d=2, k=3, n=3))
    q = count_proper_patterns(domain)
    patterns = list(enumerate_proper_patterns(domain))
    totals = {p: Fraction(0) for p in patterns}
    seeds = 30
    for seed in range(seeds):
        hom = sample_planted_hom(params, chi, RngState(seed))
        census = local_pattern_census(hom, chi, domain)
        for p in patterns:
            totals[p] += census.frequency(p)
    ok = len(patterns) == q == 6
    for p in patterns:
        ok = ok and abs(totals[p] / seeds - Fraction(1, q)) < Fraction(3, 100)
    verdict("A11", "single-edge cylinder frequencies near 1/Q", ok, perf_counter() - start, 60.0)


def test_a12_sofic_probe():
    start = perf_counter()
    params = ModelParams(d=2, k=3, n=600)
    words = generator_words(params) + generator_pair_words(params)
    sofic = 0
    for seed in range(100):
        hom = sample_uniform_hom(params, RngState(seed))
        if check_sofic(hom, words, Fraction(1, 10)).is_sofic:
            sofic += 1
    verdict("A12", "uniform samples are (D, 1/10)-sofic", sofic >= 99, perf_counter() - start, 60.0)


def test_a13_expansivity_and_rigidity():
    start = perf_counter()
    params = ModelParams(d=20, k=6, n=60)
    chi = Coloring.equitable_split(60)
    ok = True
    for seed in range(20):
        hom = sample_planted_hom(params, chi, RngState(seed))
        report = expansivity_scan(build_hypergraph(hom), chi, 3)
        ok = ok and not report.violations and report.exhaustive_max_excess <= 0

    fixtures = sorted(FIXTURES.glob("rigidity_*.json"))
    ok = ok and len(fixtures) == 10
    for index, path in enumerate(fixtures):
        hom, fixture_chi = load_instance(str(path))
        graph = build_hypergraph(hom)
        region = core_decomposition(graph, fixture_chi).rigid_set(1)
        n, k = graph.n, graph.k
        rho = Fraction(1, n) if index % 2 == 0 else Fraction(1, 2)
        found = rigidity_violation_search(graph, fixture_chi, region, rho)
        # independent route: filter the full enumeration with float windows
        violating = [
            c for c in proper_colorings(graph)
            if float(rho) * n
            <= sum(1 for v in region if c[v] != fixture_chi[v])
            <= n * 2 ** (-k / 2)
        ]
        ok = ok and (found is None) == (len(violating) == 0)
        if found is not None:
            ok = ok and found in violating
    verdict("A13", "expansivity clean and rigidity search matches enumeration",
            ok, perf_counter() - start, 600.0)


def test_a14_entropy_gap_mechanism(k25_degree, k25_scan):
    # The headline entropy gap needs exponential counting along the whole
    # sequence, which is out of reach at test scale; its verifiable content
    # is the pair of exact finite moments plus the strict analytic
    # inequality between the planted excess and the first-moment rate,
    # which A02, A05, and A07 establish.  This re-asserts their core facts
    # in one place.
    scan, _ = k25_scan
    start = perf_counter()
    params = ModelParams(d=2, k=2, n=4)
    ok = exact_first_moment(params) == Fraction(8, 3)
    ok = ok and exact_planted_distance_moment(params, Fraction(1, 2)) == Fraction(1)
    ok = ok and scan.margin > 0
    d = k25_degree.d
    with working_precision():
        delta_star = distance_of_bias(mp.mpf(2) ** -K25, K25)
        ok = ok and planted_distance_rate(delta_star, d, K25) > proper_rate(d, K25)
    verdict("A14", "entropy gap via exact moments and planted excess", ok, perf_counter() - start)


def test_count_cli_on_committed_fixture(capsys):
    # the instance file is committed; the counter's answer is frozen here
    # and the command must reproduce it exactly
    path = FIXTURES / "count_instance.json"
    code = cli_dispatch(["count", "--input", str(path), "--eps", "0"])
    out = capsys.readouterr().out.splitlines()
    assert code == 0
    assert out[-1] == "340"
    hom, _ = load_instance(str(path))
    assert count_proper(build_hypergraph(hom)).value == 340
