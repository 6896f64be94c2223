"""Closed-form rates, optimizers, and fixed points for the coloring model.

Everything in this module evaluates formulas; nothing samples and nothing
touches a hypergraph.  The functions cover the exponential growth rate of
proper equitable colorings, the entropy functional over generator type
matrices and its maximizer, the bias parameter of the planted pair measure
and its inversion, the pair-distance rate curves, and the fixed-point
iteration that estimates the core density of a random instance.

Results are mpmath floats at a configurable working precision.  The default
is 128 bits because the interesting regimes (k near 25, degree counts in the
hundreds of millions) involve rates of order 2^-k and identity checks at
tolerances of order 2^-2k, which double precision cannot resolve.  Precision
can be set per call, or globally through the SOFIC_LAB_PRECISION environment
variable.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import mpmath as mp

from .hypergraph import GeneratorTypeMatrix, PairTypeMatrix

DEFAULT_PRECISION_BITS = 128
PRECISION_ENV_VAR = "SOFIC_LAB_PRECISION"

# Newton/bisection iteration cap for the bias inversion.
_MAX_SOLVER_ITERATIONS = 200
# Grid size of the one-time monotonicity check backing that inversion.
_MONOTONICITY_POINTS = 10_000


def _resolve_precision(precision: int | None) -> int:
    if precision is None:
        raw = os.environ.get(PRECISION_ENV_VAR)
        precision = int(raw) if raw else DEFAULT_PRECISION_BITS
    precision = int(precision)
    if precision < 53:
        raise ValueError(
            f"working precision must be at least 53 bits, got {precision}"
        )
    return precision


def working_precision(precision: int | None = None):
    """Context manager selecting the mpmath precision for a computation.

    ``precision`` is a bit count; when omitted, the SOFIC_LAB_PRECISION
    environment variable applies, and failing that the 128-bit default.
    """
    return mp.workprec(_resolve_precision(precision))


def _to_mpf(value) -> mp.mpf:
    # Fractions convert exactly; everything else goes through mpf directly.
    if isinstance(value, Fraction):
        return mp.mpf(value.numerator) / value.denominator
    return mp.mpf(value)


def _check_k(k: int) -> None:
    if k != int(k) or k < 2:
        raise ValueError(f"edge size k must be an integer >= 2, got {k}")


def _check_d(d: int) -> None:
    if d != int(d) or d < 0:
        raise ValueError(f"generator count d must be an integer >= 0, got {d}")


# ---------------------------------------------------------------------------
# entropies


def _eta(x: mp.mpf) -> mp.mpf:
    """-x log x with the 0 log 0 = 0 convention."""
    if x == 0:
        return mp.mpf(0)
    return -x * mp.log(x)


def entropy(probabilities: Iterable, precision: int | None = None) -> mp.mpf:
    """Shannon entropy (natural log) of a vector of nonnegative weights.

    The vector is not required to sum to one; type matrices feed their raw
    entries through this.
    """
    with working_precision(precision):
        total = mp.mpf(0)
        for p in probabilities:
            x = _to_mpf(p)
            if x < 0:
                raise ValueError(f"entropy needs nonnegative entries, got {p}")
            total += _eta(x)
        return total


def entropy2(x, precision: int | None = None) -> mp.mpf:
    """Binary entropy -x log x - (1-x) log(1-x) for x in [0, 1]."""
    with working_precision(precision):
        v = _to_mpf(x)
        if not 0 <= v <= 1:
            raise ValueError(f"binary entropy needs an argument in [0, 1], got {x}")
        return _eta(v) + _eta(1 - v)


def cross_entropy2(x, x0, precision: int | None = None) -> mp.mpf:
    """Binary cross entropy -x log x0 - (1-x) log(1-x0).

    Equals entropy2(x) when x0 == x, and exceeds it otherwise; the excess is
    the Kullback-Leibler divergence of x from x0.
    """
    with working_precision(precision):
        v = _to_mpf(x)
        v0 = _to_mpf(x0)
        if not 0 <= v <= 1 or not 0 <= v0 <= 1:
            raise ValueError(
                f"cross entropy needs arguments in [0, 1], got {x}, {x0}"
            )
        return _cross_entropy2(v, v0)


def _cross_entropy2(v: mp.mpf, v0: mp.mpf) -> mp.mpf:
    total = mp.mpf(0)
    for weight, arg in ((v, v0), (1 - v, 1 - v0)):
        if weight == 0:
            continue
        if arg == 0:
            return mp.inf
        total -= weight * mp.log(arg)
    return total


# ---------------------------------------------------------------------------
# first-moment rate and the type functional


def proper_rate(d: int, k: int, precision: int | None = None) -> mp.mpf:
    """Exponential growth rate of the expected number of proper equitable
    colorings: log 2 + (d/k) log(1 - 2^(1-k)).

    Positive rate means the expected count grows; for fixed k the rate
    decreases linearly in d and crosses zero near d/k = log(2) 2^(k-1).
    """
    _check_d(d)
    _check_k(k)
    with working_precision(precision):
        return mp.log(2) + mp.mpf(d) / k * mp.log(1 - mp.mpf(2) ** (1 - k))


def dominant_type(k: int) -> tuple[Fraction, ...]:
    """The type vector maximizing the first-moment rate functional, exactly.

    Entry j is binomial(k, j) / (k (2^k - 2)) for interior j, zero at the
    ends.  Entries sum to 1/k and the implied density of ones is 1/2.
    """
    _check_k(k)
    scale = k * (2**k - 2)
    inner = [Fraction(math.comb(k, j), scale) for j in range(1, k)]
    return (Fraction(0), *inner, Fraction(0))


def type_rate(
    rows,
    d: int,
    k: int,
    precision: int | None = None,
) -> mp.mpf:
    """Entropy functional whose maximum over generator type matrices gives
    the first-moment rate.

    ``rows`` is a generator type matrix: d rows of k+1 entries, row i giving
    the distribution of ones-counts over the edges of generator i.  Accepts a
    GeneratorTypeMatrix or any sequence of number rows.  Each row must sum to
    1/k and all rows must share the same implied density of ones, both within
    1e-9.
    """
    _check_d(d)
    _check_k(k)
    if isinstance(rows, GeneratorTypeMatrix):
        rows = rows.rows
    rows = [tuple(row) for row in rows]
    if len(rows) != d:
        raise ValueError(f"expected {d} rows, got {len(rows)}")
    with working_precision(precision):
        tol = mp.mpf(10) ** -9
        matrix = [[_to_mpf(entry) for entry in row] for row in rows]
        means = []
        for row in matrix:
            if len(row) != k + 1:
                raise ValueError(f"rows must have {k + 1} entries, got {len(row)}")
            total = mp.fsum(row)
            if abs(total - mp.mpf(1) / k) > tol:
                raise ValueError(f"row sums to {total}, expected 1/{k}")
            means.append(mp.fsum(j * row[j] for j in range(k + 1)))
        density = mp.fsum(means) / d
        for mean in means:
            if abs(mean - density) > tol:
                raise ValueError(
                    "rows imply different densities of ones; "
                    f"saw {mean} against {density}"
                )
        value = mp.fsum(_eta(entry) for row in matrix for entry in row)
        value += (1 - mp.mpf(d)) * (_eta(density) + _eta(1 - density))
        value -= mp.mpf(d) / k * mp.log(k)
        log_binom = [mp.log(mp.mpf(math.comb(k, j))) for j in range(k + 1)]
        value += mp.fsum(
            row[j] * log_binom[j] for row in matrix for j in range(k + 1)
        )
        return value


def balance_polynomial(
    x,
    d: int,
    k: int,
    precision: int | None = None,
    factored: bool = False,
) -> mp.mpf:
    """Polynomial whose interior root pins the ones-density of critical type
    vectors to 1/2.

    The direct form is sum over j in [1, k-1] of
    (k x - j) binomial(k, j) ((1-x)/x)^(j (1-d)/d); ``factored=True``
    evaluates the equivalent product form used to show the root is unique.
    The two agree to working precision and are negative on (0, 1/2).
    """
    _check_k(k)
    if d != int(d) or d < 2:
        raise ValueError(f"the balance polynomial needs d >= 2, got {d}")
    with working_precision(precision):
        v = _to_mpf(x)
        if not 0 < v < 1:
            raise ValueError(f"argument must lie strictly inside (0, 1), got {x}")
        y = ((1 - v) / v) ** (mp.mpf(1 - d) / d)
        if factored:
            return k * (
                (v * (1 + y) - y) * (1 + y) ** (k - 1) - v + (1 - v) * y**k
            )
        return mp.fsum(
            (k * v - j) * math.comb(k, j) * y**j for j in range(1, k)
        )


# ---------------------------------------------------------------------------
# the bias parameter of the planted pair measure


def _bias_to_distance(b: mp.mpf, k: int) -> mp.mpf:
    base = 1 - mp.mpf(2) ** (2 - k)
    num = b * (base + (b / 2) ** (k - 1))
    den = base + 2 * (b / 2) ** k + 2 * ((1 - b) / 2) ** k
    return num / den


def _bias_to_distance_with_derivative(b: mp.mpf, k: int) -> tuple[mp.mpf, mp.mpf]:
    base = 1 - mp.mpf(2) ** (2 - k)
    half_pow = (b / 2) ** (k - 1)
    num = b * base + 2 * (b / 2) ** k
    den = base + 2 * (b / 2) ** k + 2 * ((1 - b) / 2) ** k
    num_d = base + k * half_pow
    den_d = k * half_pow - k * ((1 - b) / 2) ** (k - 1)
    value = num / den
    derivative = (num_d * den - num * den_d) / den**2
    return value, derivative


_MONOTONE_CHECKED: set[tuple[int, int]] = set()


def _assert_bias_map_monotone(k: int) -> None:
    # Inverting the bias-to-distance map assumes it is injective; rather
    # than prove that for every k, we check strict monotonicity on [0, 1]
    # numerically, once per (k, precision).
    key = (k, mp.mp.prec)
    if key in _MONOTONE_CHECKED:
        return
    previous = mp.mpf(0)
    for i in range(1, _MONOTONICITY_POINTS + 1):
        current = _bias_to_distance(mp.mpf(i) / _MONOTONICITY_POINTS, k)
        assert current > previous, (
            f"bias-to-distance map failed strict monotonicity at k={k}, "
            f"point {i}/{_MONOTONICITY_POINTS}"
        )
        previous = current
    _MONOTONE_CHECKED.add(key)


def distance_of_bias(delta0, k: int, precision: int | None = None) -> mp.mpf:
    """Expected normalized distance of a planted pair with disagreement bias
    delta0.

    This is the forward rational map; it fixes 0, 1/2, and 1, and is
    strictly increasing in between.
    """
    _check_k(k)
    with working_precision(precision):
        b = _to_mpf(delta0)
        if not 0 <= b <= 1:
            raise ValueError(f"bias must lie in [0, 1], got {delta0}")
        return _bias_to_distance(b, k)


def bias_of_distance(delta, k: int, precision: int | None = None) -> mp.mpf:
    """Invert the bias-to-distance map: find the disagreement bias whose
    planted pair measure concentrates at normalized distance delta.

    Solved by Newton iteration inside a maintained bracket, seeded at the
    target distance itself (the two differ by O(2^-k)); the residual of the
    returned bias is at most 1e-13.  Raises RuntimeError if 200 iterations
    do not get there, which a strictly monotone map never triggers.
    """
    _check_k(k)
    with working_precision(precision):
        x = _to_mpf(delta)
        if not 0 <= x <= 1:
            raise ValueError(f"distance must lie in [0, 1], got {delta}")
        return _solve_bias(x, k)


def _solve_bias(x: mp.mpf, k: int) -> mp.mpf:
    _assert_bias_map_monotone(k)
    if x == 0 or x == 1:
        return x
    tol = mp.mpf(10) ** -13
    lo, hi = mp.mpf(0), mp.mpf(1)
    b = x
    for _ in range(_MAX_SOLVER_ITERATIONS):
        value, derivative = _bias_to_distance_with_derivative(b, k)
        residual = value - x
        if abs(residual) <= tol:
            return b
        if residual < 0:
            lo = b
        else:
            hi = b
        if derivative > 0:
            b = b - residual / derivative
        else:
            b = (lo + hi) / 2
        if not lo < b < hi:
            b = (lo + hi) / 2
    raise RuntimeError(
        f"bias inversion for distance {x} at k={k} did not converge in "
        f"{_MAX_SOLVER_ITERATIONS} iterations"
    )


# ---------------------------------------------------------------------------
# distance rate curves


def _log_edge_factor(b: mp.mpf, k: int) -> mp.mpf:
    # log of the per-edge survival probability of a pair at bias b: the
    # chance a uniformly colored edge is proper under both colorings of an
    # independently b-flipped pair, normalized by the single-coloring case.
    return mp.log(1 - (1 - b**k - (1 - b) ** k) / (mp.mpf(2) ** (k - 1) - 1))


def _pair_distance_rate(x: mp.mpf, d: int, k: int) -> mp.mpf:
    return _eta(x) + _eta(1 - x) + mp.mpf(d) / k * _log_edge_factor(x, k)


def pair_distance_rate(x, d: int, k: int, precision: int | None = None) -> mp.mpf:
    """Growth rate of the expected number of proper-coloring pairs at
    normalized distance x, per vertex: H(x) + (d/k) log of the per-edge
    survival factor.

    At x = 1/2 this equals proper_rate(d, k) plus itself, i.e. the pair rate
    splits as twice the single rate; the function is symmetric about 1/2.
    """
    _check_d(d)
    _check_k(k)
    with working_precision(precision):
        v = _to_mpf(x)
        if not 0 <= v <= 1:
            raise ValueError(f"argument must lie in [0, 1], got {x}")
        return _pair_distance_rate(v, d, k)


def _planted_distance_rate(x: mp.mpf, d: int, k: int) -> mp.mpf:
    b = _solve_bias(x, k)
    h_x = _eta(x) + _eta(1 - x)
    h_b = _eta(b) + _eta(1 - b)
    cross = _cross_entropy2(x, b)
    closed = (1 - mp.mpf(d)) * h_x + d * cross + mp.mpf(d) / k * _log_edge_factor(b, k)
    # Second route: start from the pair rate at the bias and trade entropy
    # terms.  The two expressions are algebraically equal, so any gap here
    # means a transcription error in one of them.
    alternate = (
        _pair_distance_rate(b, d, k)
        - (h_b - cross)
        + (mp.mpf(d) - 1) * (cross - h_x)
    )
    assert abs(closed - alternate) <= mp.mpf(10) ** -9, (
        f"planted rate routes disagree at distance {x}: {closed} vs {alternate}"
    )
    return closed


def planted_distance_rate(
    delta, d: int, k: int, precision: int | None = None
) -> mp.mpf:
    """Growth rate of the expected number of proper colorings at normalized
    distance delta from a planted one.

    Computed from the closed form in terms of the solved bias, with an
    independent second route through pair_distance_rate asserted to agree to
    1e-9.  The endpoint values at 0 and 1 are continuity limits.
    """
    _check_d(d)
    _check_k(k)
    with working_precision(precision):
        x = _to_mpf(delta)
        if not 0 <= x <= 1:
            raise ValueError(f"distance must lie in [0, 1], got {delta}")
        if x == 0 or x == 1:
            return mp.mpf(0)
        return _planted_distance_rate(x, d, k)


# ---------------------------------------------------------------------------
# the optimal pair type


def bichromatic_pair_types(k: int) -> tuple[PairTypeMatrix, ...]:
    """All overlap matrices of a k-edge that are bichromatic on both sides.

    These are the nonnegative integer 2x2 matrices summing to k in which
    both colorings split the edge properly; they index the support of the
    optimal pair type.
    """
    _check_k(k)
    found = []
    for e00 in range(k + 1):
        for e01 in range(k + 1 - e00):
            for e10 in range(k + 1 - e00 - e01):
                matrix = PairTypeMatrix(e00, e01, e10, k - e00 - e01 - e10)
                if matrix.is_bichromatic_pair():
                    found.append(matrix)
    return tuple(found)


@dataclass(frozen=True)
class PairTypeOptimum:
    """Maximizing distribution over bichromatic overlap matrices for pairs
    of proper colorings at a prescribed distance.

    ``weights`` maps each admissible overlap matrix to its optimal weight;
    the weights sum to 1/k, both half-sum marginals are 1/2, and the
    disagreement mass equals the prescribed distance.  ``normalizer`` is the
    common scale factor in front of the product form.
    """

    delta: mp.mpf
    delta0: mp.mpf
    normalizer: mp.mpf
    weights: dict[PairTypeMatrix, mp.mpf]


def optimal_pair_type(
    delta, k: int, precision: int | None = None
) -> PairTypeOptimum:
    """Solve for the distribution of edge overlap matrices that dominates
    the pair count at normalized distance delta.

    Each weight is proportional to ((1-b)/2)^(agreeing entries) times
    (b/2)^(disagreeing entries) times a multinomial coefficient, where b is
    the solved bias.  Construction identities are asserted to 1e-10.
    """
    _check_k(k)
    with working_precision(precision):
        x = _to_mpf(delta)
        if not 0 < x < 1:
            raise ValueError(
                f"distance must lie strictly inside (0, 1), got {delta}"
            )
        b = _solve_bias(x, k)
        agree = (1 - b) / 2
        disagree = b / 2
        normalizer = 1 / (
            k * (1 - mp.mpf(2) ** (2 - k) + 2 * disagree**k + 2 * agree**k)
        )
        weights: dict[PairTypeMatrix, mp.mpf] = {}
        for matrix in bichromatic_pair_types(k):
            coefficient = math.factorial(k) // (
                math.factorial(matrix.e00)
                * math.factorial(matrix.e01)
                * math.factorial(matrix.e10)
                * math.factorial(matrix.e11)
            )
            weights[matrix] = (
                normalizer
                * agree ** (matrix.e00 + matrix.e11)
                * disagree ** (matrix.e01 + matrix.e10)
                * coefficient
            )
        tol = mp.mpf(10) ** -10
        total = mp.fsum(weights.values())
        ones_left = mp.fsum(
            (m.e10 + m.e11) * w for m, w in weights.items()
        )
        ones_right = mp.fsum(
            (m.e01 + m.e11) * w for m, w in weights.items()
        )
        disagreement = mp.fsum(
            (m.e01 + m.e10) * w for m, w in weights.items()
        )
        assert abs(total - mp.mpf(1) / k) <= tol, f"weights sum to {total}"
        assert abs(ones_left - mp.mpf(1) / 2) <= tol, (
            f"left marginal came out as {ones_left}"
        )
        assert abs(ones_right - mp.mpf(1) / 2) <= tol, (
            f"right marginal came out as {ones_right}"
        )
        assert abs(disagreement - x) <= tol, (
            f"disagreement mass {disagreement} misses the target {x}"
        )
        return PairTypeOptimum(
            delta=x, delta0=b, normalizer=normalizer, weights=weights
        )


# ---------------------------------------------------------------------------
# entropy gaps between a distance and its bias


@dataclass(frozen=True)
class EntropyGapReport:
    """Entropy bookkeeping for a distance and its solved bias.

    ``epsilon_hat`` is the relative shrinkage 1 - delta/delta0.
    ``entropy_gap`` is binary entropy at the bias minus the cross entropy;
    it equals delta0 * epsilon_hat * log((1-delta0)/delta0) exactly.
    ``kl_divergence`` is the cross entropy minus binary entropy at the
    distance, which is the divergence of delta from delta0 and nonnegative.
    """

    delta: mp.mpf
    delta0: mp.mpf
    epsilon_hat: mp.mpf
    entropy_gap: mp.mpf
    kl_divergence: mp.mpf


def entropy_gap_report(
    delta, k: int, precision: int | None = None
) -> EntropyGapReport:
    """Quantify how far the solved bias sits from the given distance in
    entropy terms, for distances in (0, 1/2]."""
    _check_k(k)
    with working_precision(precision):
        x = _to_mpf(delta)
        if not 0 < x <= mp.mpf(1) / 2:
            raise ValueError(
                f"distance must lie in (0, 1/2] for the gap report, got {delta}"
            )
        b = _solve_bias(x, k)
        epsilon_hat = 1 - x / b
        entropy_gap = (_eta(b) + _eta(1 - b)) - _cross_entropy2(x, b)
        identity = b * epsilon_hat * mp.log((1 - b) / b)
        tol = mp.mpf(10) ** -10
        assert abs(entropy_gap - identity) <= tol, (
            f"entropy gap {entropy_gap} does not match the identity value "
            f"{identity}"
        )
        kl = _cross_entropy2(x, b) - (_eta(x) + _eta(1 - x))
        assert kl >= -(mp.mpf(10) ** -25), f"divergence came out negative: {kl}"
        return EntropyGapReport(
            delta=x,
            delta0=b,
            epsilon_hat=epsilon_hat,
            entropy_gap=entropy_gap,
            kl_divergence=kl,
        )


# ---------------------------------------------------------------------------
# scanning the planted rate curve


class DistanceScanRow(NamedTuple):
    delta: mp.mpf
    delta0: mp.mpf
    planted_rate: mp.mpf
    pair_rate: mp.mpf
    proper_rate: mp.mpf


@dataclass(frozen=True)
class DistanceRateScan:
    """Planted rate curve sampled on a grid, with its maximum located.

    ``margin`` is the drop from the best grid value to the second best;
    a healthy regime shows the maximum at 1/2 with positive margin.
    """

    rows: tuple[DistanceScanRow, ...]
    argmax_delta: mp.mpf
    max_rate: mp.mpf
    margin: mp.mpf


def distance_rate_scan(
    d: int,
    k: int,
    grid_points: int = 2001,
    precision: int | None = None,
) -> DistanceRateScan:
    """Evaluate the planted distance rate on an even grid spanning
    [2^(-k/2), 1 - 2^(-k/2)] and report the argmax and its margin.

    Each row carries the distance, the solved bias, the planted rate, the
    pair rate at the same distance, and the first-moment rate for reference.
    """
    _check_d(d)
    _check_k(k)
    if grid_points < 3:
        raise ValueError(f"need at least 3 grid points, got {grid_points}")
    with working_precision(precision):
        lo = mp.mpf(2) ** (-mp.mpf(k) / 2)
        hi = 1 - lo
        base_rate = proper_rate(d, k, precision=mp.mp.prec)
        rows = []
        for i in range(grid_points):
            x = lo + (hi - lo) * i / (grid_points - 1)
            b = _solve_bias(x, k)
            rows.append(
                DistanceScanRow(
                    delta=x,
                    delta0=b,
                    planted_rate=_planted_distance_rate(x, d, k),
                    pair_rate=_pair_distance_rate(x, d, k),
                    proper_rate=base_rate,
                )
            )
        ranked = sorted(range(grid_points), key=lambda i: rows[i].planted_rate)
        best = rows[ranked[-1]]
        runner_up = rows[ranked[-2]]
        return DistanceRateScan(
            rows=tuple(rows),
            argmax_delta=best.delta,
            max_rate=best.planted_rate,
            margin=best.planted_rate - runner_up.planted_rate,
        )


# ---------------------------------------------------------------------------
# the degree-to-edge-size ratio parametrization


def offset_window_top(precision: int | None = None) -> mp.mpf:
    """Upper end of the offset window, (1 - log 2) / 2; offsets must stay
    strictly between zero and this for the large-k regime to apply."""
    with working_precision(precision):
        return (1 - mp.log(2)) / 2


def ratio_from_offset(k: int, eta, precision: int | None = None) -> mp.mpf:
    """The degree ratio d/k pinned by an offset eta:
    (log 2 / 2) 2^k - (1 + log 2) / 2 + eta."""
    _check_k(k)
    with working_precision(precision):
        e = _to_mpf(eta)
        return mp.log(2) / 2 * mp.mpf(2) ** k - (1 + mp.log(2)) / 2 + e


@dataclass(frozen=True)
class DegreeChoice:
    """An integer generator count realizing an offset, with the offset
    re-solved after rounding.  ``in_window`` records whether the implied
    offset stays inside the open window (0, (1 - log 2)/2)."""

    d: int
    implied_eta: mp.mpf
    in_window: bool


def degrees_from_offset(k: int, eta, precision: int | None = None) -> DegreeChoice:
    """Round the offset-parametrized ratio to an integer generator count and
    report the offset that count actually realizes."""
    _check_k(k)
    with working_precision(precision):
        e = _to_mpf(eta)
        ratio = mp.log(2) / 2 * mp.mpf(2) ** k - (1 + mp.log(2)) / 2 + e
        d = int(mp.nint(ratio * k))
        implied = e + (d - ratio * k) / k
        in_window = bool(0 < implied < (1 - mp.log(2)) / 2)
        return DegreeChoice(d=d, implied_eta=implied, in_window=in_window)


# ---------------------------------------------------------------------------
# core density fixed point


@dataclass(frozen=True)
class FixedPointTrace:
    """Iterates of the core-density recursion and the quantities read off
    its limit.

    ``p`` starts at the per-direction root survival probability and
    decreases monotonically.  ``mu_core`` estimates the density of the
    maximal 3-core; ``mu_core_attached`` adds the vertices hanging off it.
    """

    p: tuple[mp.mpf, ...]
    p_inf: mp.mpf
    mu_core: mp.mpf
    mu_core_attached: mp.mpf
    converged: bool


def _binomial_tail_at_least(n: int, j_min: int, t: mp.mpf) -> mp.mpf:
    """P(Bin(n, t) >= j_min) for small j_min, via log-space terms."""
    if n < j_min:
        return mp.mpf(0)
    if t == 0:
        return mp.mpf(0)
    if t == 1:
        return mp.mpf(1)
    log_t = mp.log(t)
    log_1mt = mp.log(1 - t)
    head = mp.mpf(0)
    for j in range(j_min):
        log_term = (
            mp.loggamma(n + 1)
            - mp.loggamma(j + 1)
            - mp.loggamma(n - j + 1)
            + j * log_t
            + (n - j) * log_1mt
        )
        head += mp.exp(log_term)
    return 1 - head


def core_fixed_point(
    d: int,
    k: int,
    tol=mp.mpf("1e-12"),
    max_levels: int = 256,
    precision: int | None = None,
) -> FixedPointTrace:
    """Iterate the recursion for the probability that a direction survives
    into the depth-l core, and read core densities off the limit.

    Starting from the single-edge survival probability 1/(2^(k-1) - 1), each
    step multiplies by the chance that a binomial(d-1) count of surviving
    neighbors reaches 3, raised to the k-1 other edge slots.  The sequence
    decreases monotonically (asserted exactly each step) and the iteration
    stops once consecutive iterates differ by less than tol or after
    max_levels steps.
    """
    if d != int(d) or d < 1:
        raise ValueError(f"generator count d must be an integer >= 1, got {d}")
    _check_k(k)
    with working_precision(precision):
        tolerance = _to_mpf(tol)
        lambda0 = 1 / (mp.mpf(2) ** (k - 1) - 1)
        trace = [lambda0]
        converged = False
        while len(trace) <= max_levels:
            survival = _binomial_tail_at_least(d - 1, 3, trace[-1])
            nxt = lambda0 * survival ** (k - 1)
            assert nxt <= trace[-1], (
                f"core recursion increased from {trace[-1]} to {nxt}"
            )
            trace.append(nxt)
            if abs(trace[-1] - trace[-2]) < tolerance:
                converged = True
                break
        p_inf = trace[-1]
        mu_core = _binomial_tail_at_least(d, 3, p_inf)
        mu_core_attached = 1 - (1 - p_inf) ** d
        return FixedPointTrace(
            p=tuple(trace),
            p_inf=p_inf,
            mu_core=mu_core,
            mu_core_attached=mu_core_attached,
            converged=converged,
        )


# ---------------------------------------------------------------------------
# parameter record


@dataclass(frozen=True)
class AnalyticParams:
    """Parameters for the analytic layer: generator count, edge size, an
    optional offset that d is supposed to realize, and an optional working
    precision in bits.

    When an offset is given, construction checks that d is the rounding of
    the offset-parametrized ratio times k.
    """

    d: int
    k: int
    eta: float | None = None
    precision: int | None = None

    def __post_init__(self) -> None:
        _check_d(self.d)
        _check_k(self.k)
        if self.precision is not None:
            _resolve_precision(self.precision)
        if self.eta is not None:
            with working_precision(self.precision):
                ratio = ratio_from_offset(self.k, self.eta, precision=mp.mp.prec)
                if abs(self.d - ratio * self.k) > mp.mpf("0.5") + mp.mpf(10) ** -9:
                    raise ValueError(
                        f"d={self.d} does not realize offset {self.eta} "
                        f"at k={self.k}; expected about {mp.nstr(ratio * self.k, 12)}"
                    )

    @classmethod
    def from_offset(
        cls, k: int, eta, precision: int | None = None
    ) -> "AnalyticParams":
        choice = degrees_from_offset(k, eta, precision=precision)
        return cls(d=choice.d, k=k, eta=float(choice.implied_eta), precision=precision)
