"""The exact coloring measure on windows of the Cayley hyper-tree.

Vertices of the tree are reduced words; the edge with a given generator
label through a word is that word's left coset under the generator, so
edges meet in at most one vertex and every finite connected window is a
hyper-tree. Proper 2-colorings of such a window can be counted in closed
form (each edge after the first attaches at a single already-colored
vertex and contributes a factor 2^(k-1)-1), sampled exactly, and compared
against pullbacks of colored finite instances.

The root-status sampler at the end estimates how often the tree root lands
in the core / attached / overlap sets of the peeling hierarchy without
materializing a ball: it lazily expands only the edges the status
computation actually inspects.
"""

import itertools
import warnings
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from math import sqrt

from ._errors import ScaleRefusal
from .group_model import (
    IDENTITY,
    ModelParams,
    ReducedWord,
    evaluate_word,
    word_inverse,
    word_product,
)

DEFAULT_BALL_MAX_ELEMENTS = 100_000
BRUTE_PATTERN_MAX_ELEMENTS = 20
CORE_SAMPLER_MAX_DEGREE = 10_000


def _word_key(word):
    return (word.length(), word.syllables)


class TreeDomain:
    """A finite window of the hyper-tree: either {identity} alone or a
    connected union of full edges containing the identity.

    Construction validates that every edge really is a generator coset,
    that the union is connected, and that no edge closes a cycle; the
    attach order found along the way (each edge meeting the already-covered
    part in exactly one vertex) is kept for counting and sampling.
    """

    __slots__ = ("d", "k", "elements", "edges", "attach_at", "_index")

    def __init__(self, d, k, elements, edges):
        params = ModelParams(d=d, k=k, n=k)  # word arithmetic only
        elements = tuple(sorted(set(elements), key=_word_key))
        edges = sorted(
            (
                (int(label), tuple(sorted(members, key=_word_key)))
                for label, members in edges
            ),
            key=lambda edge: (edge[0], tuple(_word_key(w) for w in edge[1])),
        )
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edges in the domain")
        if IDENTITY not in elements:
            raise ValueError("a tree domain must contain the identity")
        if not edges:
            if elements != (IDENTITY,):
                raise ValueError(
                    "a domain without edges must be the identity singleton"
                )
        else:
            covered_elements = set()
            for label, members in edges:
                if not 0 <= label < d:
                    raise ValueError("edge label %d out of range 0..%d" % (label, d - 1))
                if len(set(members)) != k:
                    raise ValueError("each edge needs k=%d distinct vertices" % k)
                coset = _coset(params, label, members[0])
                if set(members) != coset:
                    raise ValueError(
                        "edge %r is not a generator-%d coset" % (members, label)
                    )
                covered_elements.update(members)
            if covered_elements != set(elements):
                raise ValueError("elements must be exactly the union of the edges")

        attach_order = []
        attach_at = []
        remaining = list(edges)
        covered = {IDENTITY}
        while remaining:
            progress = False
            for pos, (label, members) in enumerate(remaining):
                met = [w for w in members if w in covered]
                if not met:
                    continue
                if len(met) > 1:
                    raise ValueError("edge %r closes a hyper-cycle" % (members,))
                attach_order.append((label, members))
                attach_at.append(met[0])
                covered.update(members)
                del remaining[pos]
                progress = True
                break
            if not progress:
                raise ValueError("domain is not connected to the identity")

        object.__setattr__(self, "d", d)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "edges", tuple(attach_order))
        object.__setattr__(self, "attach_at", tuple(attach_at))
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(elements)})

    def __setattr__(self, name, value):
        raise AttributeError("TreeDomain is immutable")

    def __len__(self):
        return len(self.elements)

    def __contains__(self, word):
        return word in self._index

    def index(self, word):
        return self._index[word]

    def __eq__(self, other):
        return (
            isinstance(other, TreeDomain)
            and (self.d, self.k) == (other.d, other.k)
            and self.elements == other.elements
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.d, self.k, self.elements, self.edges))

    def __repr__(self):
        return "TreeDomain(d=%d, k=%d, %d elements, %d edges)" % (
            self.d,
            self.k,
            len(self.elements),
            len(self.edges),
        )


def _coset(params, label, member):
    """All k elements of the generator coset through the given word."""
    return {
        word_product(params, member, ReducedWord(((label, e),)))
        for e in range(params.k)
    } | {member}


def ball_element_count(d, k, radius):
    """Closed-form element count of the radius-r ball (r edge-layers)."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    total = 1
    layer = d * (k - 1)
    for _ in range(radius):
        total += layer
        layer *= (d - 1) * (k - 1)
    return total


def build_ball(params, radius, max_elements=DEFAULT_BALL_MAX_ELEMENTS):
    """The ball of the given edge-layer radius around the identity."""
    count = ball_element_count(params.d, params.k, radius)
    if count > max_elements:
        raise ScaleRefusal(
            "radius-%d ball has %d elements (budget %d)"
            % (radius, count, max_elements),
            count=count,
        )
    elements = {IDENTITY}
    edges = []
    frontier = [IDENTITY]
    for _ in range(radius):
        next_frontier = []
        for g in frontier:
            trailing = g.syllables[-1][0] if g.syllables else None
            for label in range(params.d):
                if label == trailing:
                    continue  # that coset is the edge g arrived through
                members = sorted(_coset(params, label, g), key=_word_key)
                edges.append((label, members))
                for w in members:
                    if w not in elements:
                        elements.add(w)
                        next_frontier.append(w)
        frontier = next_frontier
    domain = TreeDomain(params.d, params.k, elements, edges)
    assert len(domain) == count
    return domain


def domain_from_edges(params, labeled_members):
    """Domain spanned by the cosets through the given (label, word) pairs."""
    edges = {}
    elements = {IDENTITY}
    for label, member in labeled_members:
        coset = _coset(params, label, member)
        edges[(label, tuple(sorted(coset, key=_word_key)))] = None
        elements.update(coset)
    return TreeDomain(params.d, params.k, elements, list(edges))


def single_edge_domain(params, label=0):
    return domain_from_edges(params, [(label, IDENTITY)])


class Pattern:
    """A 0/1 assignment on a set of tree elements, immutable and hashable.

    Properness is not enforced at construction: pullbacks of finite-model
    colorings may be improper and are still representable.
    """

    __slots__ = ("assignment", "_key")

    def __init__(self, assignment):
        cleaned = {}
        for word, bit in assignment.items():
            bit = int(bit)
            if bit not in (0, 1):
                raise ValueError("pattern values must be 0 or 1")
            cleaned[word] = bit
        object.__setattr__(self, "assignment", cleaned)
        object.__setattr__(
            self,
            "_key",
            tuple(sorted((w.syllables, b) for w, b in cleaned.items())),
        )

    def __setattr__(self, name, value):
        raise AttributeError("Pattern is immutable")

    def __getitem__(self, word):
        return self.assignment[word]

    def __len__(self):
        return len(self.assignment)

    def __contains__(self, word):
        return word in self.assignment

    def items(self):
        return self.assignment.items()

    def __eq__(self, other):
        return isinstance(other, Pattern) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        bits = ", ".join(
            "%r: %d" % (w, b)
            for w, b in sorted(self.assignment.items(), key=lambda p: _word_key(p[0]))
        )
        return "Pattern({%s})" % bits

    def restricted_to(self, words):
        return Pattern({w: self.assignment[w] for w in words})

    def is_proper_on(self, domain):
        for word in domain.elements:
            if word not in self.assignment:
                raise ValueError("pattern does not cover the domain")
        for _, members in domain.edges:
            colors = {self.assignment[w] for w in members}
            if len(colors) == 1:
                return False
        return True


def count_proper_patterns(domain):
    """Number of proper patterns, via the attach-order recursion.

    A lone vertex has 2 patterns; a first edge has 2^k - 2 proper colorings;
    every further edge is glued at one already-colored vertex and multiplies
    the count by 2^(k-1) - 1 (all completions except the monochromatic one).
    """
    if not domain.edges:
        return 2
    k = domain.k
    count = 2 ** k - 2
    for _ in domain.edges[1:]:
        count *= 2 ** (k - 1) - 1
    return count


def enumerate_proper_patterns(domain, max_elements=BRUTE_PATTERN_MAX_ELEMENTS):
    """Yield every proper pattern by brute force; oracle-scale domains only."""
    if len(domain) > max_elements:
        raise ScaleRefusal(
            "brute-force enumeration over %d elements refused" % len(domain),
            count=len(domain),
        )
    member_indices = [
        [domain.index(w) for w in members] for _, members in domain.edges
    ]
    for bits in itertools.product((0, 1), repeat=len(domain)):
        if all(len({bits[i] for i in idxs}) > 1 for idxs in member_indices):
            yield Pattern(dict(zip(domain.elements, bits)))


def count_proper_patterns_brute(domain, max_elements=BRUTE_PATTERN_MAX_ELEMENTS):
    return sum(1 for _ in enumerate_proper_patterns(domain, max_elements))


def cylinder_probability(domain, pattern):
    """Measure of the set of tree colorings extending the pattern.

    Every proper pattern has the same cylinder mass 1/Q, Q the proper
    pattern count; an improper pattern's cylinder contains no proper
    coloring at all, so its probability is 0 (warned, since it usually
    means a pullback went through a short cycle).
    """
    if not pattern.is_proper_on(domain):
        warnings.warn("improper pattern has an empty cylinder", stacklevel=2)
        return Fraction(0)
    return Fraction(1, count_proper_patterns(domain))


def sample_proper_pattern(domain, rng):
    """One exact draw from the uniform distribution on proper patterns.

    The identity gets a fair bit; each edge in attach order is completed
    uniformly among the 2^(k-1) - 1 assignments of its k-1 new vertices
    that avoid going monochromatic. Multiplying the choice counts gives
    exactly the proper-pattern total, so the draw is uniform.
    """
    gen = rng.generator() if hasattr(rng, "generator") else rng
    k = domain.k
    assignment = {IDENTITY: int(gen.integers(2))}
    if domain.edges:
        draws = gen.integers(2 ** (k - 1) - 1, size=len(domain.edges))
    else:
        draws = ()
    for ((label, members), attach), draw in zip(
        zip(domain.edges, domain.attach_at), draws
    ):
        base = assignment[attach]
        completion = int(draw)
        if base == 0:
            completion += 1  # skip the all-zero completion
        j = 0
        for w in members:
            if w == attach:
                continue
            assignment[w] = (completion >> j) & 1
            j += 1
    return Pattern(assignment)


def pullback_vertex_map(hom, v, domain):
    """Which finite-model vertex sits under each tree element at v.

    Element g maps to the image of v under g^{-1}; the identity maps to v
    itself. The map need not be injective when the finite model has short
    cycles through v.
    """
    params = hom.params
    return {
        g: evaluate_word(hom, word_inverse(params, g), v)
        for g in domain.elements
    }


def pullback_is_injective(hom, v, domain):
    window = pullback_vertex_map(hom, v, domain)
    return len(set(window.values())) == len(window)


def pullback_pattern(hom, coloring, v, domain):
    """Read a finite coloring through the tree window at v."""
    window = pullback_vertex_map(hom, v, domain)
    return Pattern({g: coloring[u] for g, u in window.items()})


@dataclass(frozen=True)
class PatternCensus:
    """Pullback statistics of one colored instance over a tree window."""

    n: int
    counts: dict  # proper Pattern -> number of base vertices
    improper_count: int
    noninjective_count: int

    def frequency(self, pattern):
        return Fraction(self.counts.get(pattern, 0), self.n)

    def improper_fraction(self):
        return Fraction(self.improper_count, self.n)


def local_pattern_census(hom, coloring, domain):
    """Pull the window back at every vertex and tally the proper patterns.

    Improper pullbacks are counted in one bucket (their patterns are not
    kept); non-injective windows are tallied separately and can be proper.
    """
    counts = Counter()
    improper = 0
    noninjective = 0
    for v in range(hom.params.n):
        window = pullback_vertex_map(hom, v, domain)
        if len(set(window.values())) < len(window):
            noninjective += 1
        pattern = Pattern({g: coloring[u] for g, u in window.items()})
        if pattern.is_proper_on(domain):
            counts[pattern] += 1
        else:
            improper += 1
    return PatternCensus(
        n=hom.params.n,
        counts=dict(counts),
        improper_count=improper,
        noninjective_count=noninjective,
    )


def local_convergence_stat(hom, coloring, domain, pattern):
    """Fraction of base vertices whose window reads off the given pattern.

    For a local-convergence check this is compared against the cylinder
    probability 1/Q of the pattern under the tree measure.
    """
    params = hom.params
    for g in domain.elements:
        if g not in pattern:
            raise ValueError("pattern does not cover the domain")
    inverse = {
        g: word_inverse(params, g) for g in domain.elements
    }
    hits = 0
    for v in range(params.n):
        for g, g_inv in inverse.items():
            if coloring[evaluate_word(hom, g_inv, v)] != pattern[g]:
                break
        else:
            hits += 1
    return Fraction(hits, params.n)


class _Node:
    __slots__ = ("incoming", "slot", "color", "fresh", "core_memo")

    def __init__(self, incoming, slot, color):
        self.incoming = incoming
        self.slot = slot
        self.color = color
        self.fresh = None
        self.core_memo = {}


class _Edge:
    __slots__ = ("members", "support")


class _RootStatusSampler:
    """Lazily sampled support field around the tree root.

    Two interchangeable routes draw each edge:

    * positions: under the tree measure the support position of every edge
      is independent and uniform over the k positions with probability
      1/(2^(k-1)-1) each (unsupported otherwise), so one categorical draw
      per edge suffices;
    * colors: sample the proper completion given the already-colored
      vertex, then read the support off the colors.

    The routes agree in distribution; the second exists to validate the
    first and is the slower one.
    """

    def __init__(self, d, k, gen, use_colors):
        self.d = d
        self.k = k
        self.modulus = 2 ** (k - 1) - 1
        self.gen = gen
        self.use_colors = use_colors

    def _new_edge(self, owner, draw):
        edge = _Edge()
        k = self.k
        if self.use_colors:
            completion = draw
            if owner.color == 0:
                completion += 1
            bits = [(completion >> j) & 1 for j in range(k - 1)]
            colors = [owner.color] + bits
            ones = sum(colors)
            if ones == 1:
                edge.support = colors.index(1)
            elif ones == k - 1:
                edge.support = colors.index(0)
            else:
                edge.support = None
            edge.members = (owner,) + tuple(
                _Node(edge, j + 1, bits[j]) for j in range(k - 1)
            )
        else:
            edge.support = draw if draw < k else None
            edge.members = (owner,) + tuple(
                _Node(edge, j + 1, None) for j in range(k - 1)
            )
        return edge

    def _edges_of(self, node):
        if node.fresh is None:
            count = self.d if node.incoming is None else self.d - 1
            draws = self.gen.integers(self.modulus, size=count) if count else ()
            node.fresh = tuple(
                self._new_edge(node, int(r)) for r in draws
            )
        pairs = [(edge, 0) for edge in node.fresh]
        if node.incoming is not None:
            pairs.append((node.incoming, node.slot))
        return pairs

    def _in_core(self, node, level):
        if level == 0:
            return True
        hit = node.core_memo.get(level)
        if hit is not None:
            return hit
        count = 0
        for edge, pos in self._edges_of(node):
            if edge.support == pos and self._is_witness(edge, pos, level):
                count += 1
                if count == 3:
                    break
        node.core_memo[level] = count >= 3
        return count >= 3

    def _is_witness(self, edge, pos, level):
        return all(
            self._in_core(member, level - 1)
            for j, member in enumerate(edge.members)
            if j != pos
        )

    def root_status(self, level):
        if level == 0:
            return "core"
        root_color = int(self.gen.integers(2)) if self.use_colors else None
        root = _Node(None, None, root_color)
        root_edges = [edge for edge, _ in self._edges_of(root)]
        witnesses = [
            edge
            for edge in root_edges
            if edge.support == 0 and self._is_witness(edge, 0, level)
        ]
        if len(witnesses) >= 3:
            return "core"
        if not witnesses:
            return "outside"
        # The root is attached; it lands in the overlap part when some other
        # attached vertex has a witness edge meeting one of the root's.
        # Candidate edges all pass through a member of a root witness edge.
        for edge in root_edges:
            s = edge.support
            if s and self._is_witness(edge, s, level) and not self._in_core(
                edge.members[s], level
            ):
                return "attached_overlap"
        for e in witnesses:
            for u in e.members[1:]:
                for f, _ in self._edges_of(u):
                    if f is e or f.support is None:
                        continue
                    s = f.support
                    partner = f.members[s]
                    if self._is_witness(f, s, level) and not self._in_core(
                        partner, level
                    ):
                        return "attached_overlap"
        return "attached"


@dataclass(frozen=True)
class CoreDensityEstimate:
    """Monte Carlo tally of the root's peeling status at one level."""

    d: int
    k: int
    level: int
    samples: int
    core_count: int
    attached_count: int  # includes the overlap part
    overlap_count: int

    def core_frequency(self):
        return Fraction(self.core_count, self.samples)

    def union_frequency(self):
        """Frequency of core-or-attached."""
        return Fraction(self.core_count + self.attached_count, self.samples)

    def rigid_frequency(self):
        return Fraction(
            self.core_count + self.attached_count - self.overlap_count,
            self.samples,
        )

    def rigid_stderr(self):
        p = float(self.rigid_frequency())
        return sqrt(p * (1.0 - p) / self.samples)


def sample_root_core_status(d, k, level, rng, use_colors=False):
    """One draw of the root's status: core / attached / attached_overlap /
    outside. Expands only what the status computation inspects, so it works
    at depths whose full balls would be astronomically large."""
    _check_core_sampler_args(d, k, level)
    gen = rng.generator() if hasattr(rng, "generator") else rng
    return _RootStatusSampler(d, k, gen, use_colors).root_status(level)


def core_density_estimate(d, k, level, samples, rng, use_colors=False):
    _check_core_sampler_args(d, k, level)
    if samples < 1:
        raise ValueError("need at least one sample")
    gen = rng.generator()
    sampler = _RootStatusSampler(d, k, gen, use_colors)
    core = attached = overlap = 0
    for _ in range(samples):
        status = sampler.root_status(level)
        if status == "core":
            core += 1
        elif status == "attached":
            attached += 1
        elif status == "attached_overlap":
            attached += 1
            overlap += 1
    return CoreDensityEstimate(
        d=d,
        k=k,
        level=level,
        samples=samples,
        core_count=core,
        attached_count=attached,
        overlap_count=overlap,
    )


def _check_core_sampler_args(d, k, level):
    if k < 3:
        raise ValueError("supporting vertices are undefined for k=2; need k >= 3")
    if d < 0:
        raise ValueError("d must be nonnegative")
    if d > CORE_SAMPLER_MAX_DEGREE:
        raise ScaleRefusal(
            "core sampling at degree %d refused" % d, count=d
        )
    if level < 0:
        raise ValueError("level must be nonnegative")
