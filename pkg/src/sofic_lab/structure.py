"""Which vertices of a properly colored instance are locked in place.

A vertex supports an edge when it is the only vertex of its color there;
recoloring it would make the edge monochromatic. Vertices supporting three
or more edges whose remaining vertices are themselves well-supported form a
core that survives iterated peeling, and vertices hanging off the core by a
single supported edge are attached to it. The rigid set (core plus attached
minus the attached vertices whose witness edges overlap) is the region on
which any alternative proper coloring must either agree almost everywhere
or differ on a macroscopic fraction.

Everything here is exact: levels are frozensets, densities are fractions,
and the rigidity window test uses integer arithmetic only.
"""

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

from ._errors import ScaleRefusal
from .exact_count import cluster_radius, proper_colorings
from .hypergraph import Coloring, critical_edges, monochromatic_edge_count
from .samplers import RngState

EXPANSIVITY_MAX_SUBSETS = 2_000_000


@dataclass(frozen=True)
class CoreLevel:
    """One peeling stage: the core, the attached set, and its overlap part."""

    core: frozenset
    attached: frozenset
    attached_overlap: frozenset

    def rigid(self):
        """Core plus attached, minus attached vertices with entangled edges."""
        return (self.core | self.attached) - self.attached_overlap


@dataclass(frozen=True)
class CoreDecomposition:
    """All computed peeling levels for one colored instance.

    ``levels[0]`` is always (V, empty, empty). ``stabilized_at`` is the first
    level from which the decomposition repeats forever, or None if the level
    budget ran out first; in the stabilized case ``level(l)`` clamps to the
    final level for any larger l.
    """

    n: int
    levels: tuple
    stabilized_at: int  # or None

    def level(self, l):
        if l < 0:
            raise ValueError("level index must be nonnegative")
        if l < len(self.levels):
            return self.levels[l]
        if self.stabilized_at is not None:
            return self.levels[-1]
        raise ValueError(
            "level %d was not computed and the decomposition never stabilized"
            % l
        )

    def rigid_set(self, l):
        return self.level(l).rigid()


def _support_tables(graph, chi):
    """Per-critical-edge lookup tables shared by the peeling and the scan.

    Supports depend only on the coloring, so they are computed once up
    front; the level iteration then only tracks which edges still have all
    their non-support vertices inside the shrinking core.
    """
    supports = critical_edges(graph, chi)
    assert len({idx for idx, _ in supports}) == len(supports)
    full = []
    rest = []
    by_support = defaultdict(list)
    member_slots = defaultdict(list)
    for ce, (idx, v) in enumerate(supports):
        verts = graph.edges[idx][1]
        full.append(frozenset(verts))
        rest.append(tuple(u for u in verts if u != v))
        by_support[v].append(ce)
        for u in rest[-1]:
            member_slots[u].append(ce)
    return supports, tuple(full), tuple(rest), dict(by_support), dict(member_slots)


def _check_proper(graph, chi):
    if len(chi) != graph.n:
        raise ValueError(
            "coloring has %d entries for %d vertices" % (len(chi), graph.n)
        )
    bad = monochromatic_edge_count(graph, chi)
    if bad:
        raise ValueError(
            "structure analysis needs a proper coloring; %d edges are monochromatic"
            % bad
        )


def core_decomposition(graph, chi, l_max=None):
    """Iterated peeling of the well-supported core, with attached fringes.

    Level l+1 keeps the vertices supporting at least three edges whose other
    vertices all sit in level l; the attached set at level l+1 collects the
    vertices outside the new core that still support one such edge, and the
    overlap part marks attached vertices whose witness edges touch another
    attached vertex's witness edge. Peeling is monotone, so the run either
    stabilizes (detected by three identical consecutive levels) or stops at
    ``l_max`` (default n + 2, enough for any instance that stabilizes).
    """
    _check_proper(graph, chi)
    supports, full, rest, by_support, member_slots = _support_tables(graph, chi)
    if l_max is None:
        l_max = graph.n + 2
    if l_max < 0:
        raise ValueError("l_max must be nonnegative")

    missing = [0] * len(supports)  # non-support members currently outside the core
    live_count = {v: len(ces) for v, ces in by_support.items()}
    everything = frozenset(range(graph.n))
    levels = [CoreLevel(everything, frozenset(), frozenset())]
    core = everything
    stabilized_at = None
    while stabilized_at is None and len(levels) <= l_max:
        new_core = frozenset(
            v for v in everything if live_count.get(v, 0) >= 3
        )
        assert new_core <= core, "peeling must be monotone"
        attached = frozenset(
            v
            for v in everything - new_core
            if live_count.get(v, 0) >= 1
        )
        # An attached vertex joins the overlap part when one of its live
        # witness edges shares a vertex with another attached vertex's live
        # witness edge. Owner sets per vertex make that symmetric by
        # construction.
        owners = defaultdict(set)
        live_edges = {}
        for v in attached:
            lives = [ce for ce in by_support[v] if missing[ce] == 0]
            live_edges[v] = lives
            for ce in lives:
                for u in full[ce]:
                    owners[u].add(v)
        attached_overlap = frozenset(
            v
            for v in attached
            if any(owners[u] - {v} for ce in live_edges[v] for u in full[ce])
        )
        levels.append(CoreLevel(new_core, attached, attached_overlap))
        if len(levels) >= 3 and levels[-1] == levels[-2] == levels[-3]:
            stabilized_at = len(levels) - 3
            break
        for w in core - new_core:
            for ce in member_slots.get(w, ()):
                missing[ce] += 1
                if missing[ce] == 1:
                    live_count[supports[ce][1]] -= 1
        core = new_core
    return CoreDecomposition(graph.n, tuple(levels), stabilized_at)


def core_decomposition_reference(n, k, edges, chi, l_max=None):
    """Slow recomputation of every level straight from the definitions.

    Works on a bare list of vertex tuples and re-derives supports and live
    edges from scratch at every level, sharing no bookkeeping with
    :func:`core_decomposition`; intended for cross-checking it. Edge labels
    are irrelevant here, so none are taken.
    """
    if k < 3:
        raise ValueError("supporting vertices are undefined for k=2; need k >= 3")
    edge_sets = []
    for edge in edges:
        es = frozenset(edge)
        if len(es) != k or not all(0 <= v < n for v in es):
            raise ValueError("edge %r is not a k-set of vertices" % (tuple(edge),))
        edge_sets.append(es)
    supported_by = defaultdict(list)
    for es in edge_sets:
        if len({chi[v] for v in es}) == 1:
            raise ValueError("reference decomposition needs a proper coloring")
        for v in es:
            if all(chi[u] != chi[v] for u in es - {v}):
                supported_by[v].append(es)

    everything = frozenset(range(n))
    levels = [CoreLevel(everything, frozenset(), frozenset())]
    if l_max is None:
        l_max = n + 2
    core = everything
    stabilized_at = None
    while stabilized_at is None and len(levels) <= l_max:
        new_core = frozenset(
            v
            for v in everything
            if sum(1 for es in supported_by.get(v, ()) if es - {v} <= core) >= 3
        )
        attached = frozenset(
            v
            for v in everything - new_core
            if any(es - {v} <= core for es in supported_by.get(v, ()))
        )
        witness = {
            v: [es for es in supported_by[v] if es - {v} <= core]
            for v in attached
        }
        entangled = set()
        for v, w in itertools.permutations(sorted(attached), 2):
            if any(ev & ew for ev in witness[v] for ew in witness[w]):
                entangled.add((v, w))
        assert all((w, v) in entangled for v, w in entangled)
        levels.append(
            CoreLevel(new_core, attached, frozenset(v for v, _ in entangled))
        )
        if len(levels) >= 3 and levels[-1] == levels[-2] == levels[-3]:
            stabilized_at = len(levels) - 3
            break
        core = new_core
    return CoreDecomposition(n, tuple(levels), stabilized_at)


def density_report(graph, chi, level):
    """Exact density of the rigid set at the given level, as a fraction."""
    decomposition = core_decomposition(graph, chi, l_max=level)
    return Fraction(len(decomposition.rigid_set(level)), graph.n)


@dataclass(frozen=True)
class ExpansivityReport:
    """Outcome of the supported-edge expansion scan.

    The excess of a vertex set T is (number of supported edges that are
    owned by some vertex of T and meet T in at least two vertices) minus
    2|T|; positive excess contradicts the expected sparsity of supported
    edges around small sets. The exhaustive phase covers every T up to
    ``exhaustive_cap``; the random phase, if any trials ran, reports the
    best excess its greedy trajectories saw up to ``size_cap``.
    """

    exhaustive_cap: int
    exhaustive_max_excess: int
    exhaustive_witness: frozenset
    violations: tuple
    size_cap: int
    random_trials: int
    random_max_excess: int  # or None when no trials ran
    random_witness: frozenset  # or None


def expansivity_scan(graph, chi, t_max, random_trials=0, rng=None):
    """Measure how many supported edges concentrate on small vertex sets.

    Exhaustively scans every set of size 1..t_max (refusing if that means
    more than EXPANSIVITY_MAX_SUBSETS subsets), then runs seeded greedy
    growth from random supported edges for sizes up to the cluster radius
    ``cluster_radius(n, k)``. The greedy phase is a documented heuristic:
    each trial starts from a supported edge's owner and one co-vertex and
    repeatedly adds the candidate vertex with the best excess gain,
    recording the best excess seen along the trajectory.
    """
    _check_proper(graph, chi)
    supports, full, _, by_support, _ = _support_tables(graph, chi)
    if not 1 <= t_max <= graph.n:
        raise ValueError("t_max must be between 1 and n")
    subset_count = sum(math.comb(graph.n, t) for t in range(1, t_max + 1))
    if subset_count > EXPANSIVITY_MAX_SUBSETS:
        raise ScaleRefusal(
            "exhaustive scan would enumerate %d subsets" % subset_count,
            count=subset_count,
        )
    covering = defaultdict(list)
    for ce, verts in enumerate(full):
        for u in verts:
            covering[u].append(ce)

    def excess(subset):
        owned = set()
        for v in subset:
            owned.update(by_support.get(v, ()))
        heavy = sum(1 for ce in owned if len(full[ce] & subset) >= 2)
        return heavy - 2 * len(subset)

    best = None
    best_witness = None
    violations = []
    for t in range(1, t_max + 1):
        for combo in itertools.combinations(range(graph.n), t):
            subset = frozenset(combo)
            val = excess(subset)
            if best is None or val > best:
                best, best_witness = val, subset
            if val > 0:
                violations.append(subset)

    size_cap = cluster_radius(graph.n, graph.k)
    random_best = None
    random_witness = None
    trials_run = 0
    if random_trials > 0 and size_cap > t_max and by_support:
        gen = (rng if rng is not None else RngState(0)).generator()
        owners = sorted(by_support)
        for _ in range(random_trials):
            trials_run += 1
            v = owners[int(gen.integers(len(owners)))]
            ce = by_support[v][int(gen.integers(len(by_support[v])))]
            partner_pool = sorted(full[ce] - {v})
            subset = {v, partner_pool[int(gen.integers(len(partner_pool)))]}
            current = excess(subset)
            if random_best is None or current > random_best:
                random_best, random_witness = current, frozenset(subset)
            while len(subset) < size_cap:
                pool = set()
                for u in subset:
                    for cd in covering.get(u, ()):
                        pool.update(full[cd])
                pool -= subset
                if not pool:
                    break
                gains = [(excess(subset | {u}), u) for u in sorted(pool)]
                gain, chosen = max(gains)
                subset.add(chosen)
                if gain > random_best:
                    random_best, random_witness = gain, frozenset(subset)
        if random_best is not None and random_best > 0:
            violations.append(random_witness)
    return ExpansivityReport(
        exhaustive_cap=t_max,
        exhaustive_max_excess=best,
        exhaustive_witness=best_witness,
        violations=tuple(violations),
        size_cap=size_cap,
        random_trials=trials_run,
        random_max_excess=random_best,
        random_witness=random_witness,
    )


def rigidity_violation_search(graph, chi, region, rho, max_n=None):
    """Look for a proper coloring that half-moves the region.

    The region is rigid at threshold rho when every proper coloring either
    disagrees with chi on fewer than rho*n region vertices or on more than
    2^(-k/2)*n of them. This enumerates all proper colorings and returns
    the first one whose disagreement count D lands in the forbidden middle
    window rho*n <= D <= 2^(-k/2)*n, or None when the region is rigid. Both
    window comparisons are exact: the upper one is D^2 * 2^k <= n^2 in
    integers, so no floating point is involved.
    """
    _check_proper(graph, chi)
    region = frozenset(region)
    if not all(0 <= v < graph.n for v in region):
        raise ValueError("region contains vertices outside 0..n-1")
    rho = Fraction(rho)
    if rho <= 0:
        raise ValueError("rho must be positive")
    n = graph.n
    for candidate in proper_colorings(graph, max_n=max_n):
        disagreements = sum(1 for v in region if chi[v] != candidate[v])
        if (
            Fraction(disagreements) >= rho * n
            and disagreements * disagreements * 2 ** graph.k <= n * n
        ):
            return candidate
    return None
