"""Free products of cyclic groups acting on finite sets.

The group here is the free product of d copies of the cyclic group of order k,
with generators s_1, ..., s_d (indexed 0..d-1 in code). Uniform homomorphisms
send every generator to a permutation that is a disjoint union of k-cycles.
This module owns word reduction, word evaluation, enumeration of all uniform
homomorphisms at small scale, and the sofic-approximation checker.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

from ._errors import ScaleRefusal

DEFAULT_ENUMERATION_BOUND = 10**7


@dataclass(frozen=True)
class ModelParams:
    """The triple (d, k, n): generator count, generator order, vertex count.

    k >= 2 always. d = 0 is allowed as the degenerate free product of no
    factors, so counting operations can express the unconstrained case. n
    must be a positive multiple of k whenever a uniform homomorphism is to
    exist, and additionally even whenever an equitable coloring is required;
    the relevant constructors enforce the divisibility they need rather than
    this class enforcing both up front.
    """

    d: int
    k: int
    n: int

    def __post_init__(self):
        if self.d < 0:
            raise ValueError("generator count d must be >= 0, got %r" % (self.d,))
        if self.k < 2:
            raise ValueError("generator order k must be >= 2, got %r" % (self.k,))
        if self.n < 1:
            raise ValueError("vertex count n must be positive, got %r" % (self.n,))

    @property
    def ratio(self):
        """d/k as an exact fraction."""
        return Fraction(self.d, self.k)

    @property
    def lambda0(self):
        """Per-edge support probability 1/(2^(k-1) - 1)."""
        return Fraction(1, 2 ** (self.k - 1) - 1)

    @property
    def lam(self):
        """Expected number of supported edges per vertex, d * lambda0."""
        return self.d * self.lambda0

    def require_uniform(self):
        if self.n % self.k != 0:
            raise ValueError(
                "uniform homomorphisms need k | n; got n=%d, k=%d" % (self.n, self.k)
            )

    def require_equitable(self):
        if self.n % 2 != 0:
            raise ValueError("equitable colorings need even n; got n=%d" % self.n)


class ReducedWord:
    """A reduced word: syllables (generator, exponent) with exponent in 1..k-1
    and no two adjacent syllables sharing a generator. The empty word is the
    identity. Instances are immutable and hashable; construction does not
    re-reduce, use reduce_word for that."""

    __slots__ = ("syllables",)

    def __init__(self, syllables=()):
        object.__setattr__(self, "syllables", tuple(syllables))

    def __setattr__(self, name, value):
        raise AttributeError("ReducedWord is immutable")

    def is_identity(self):
        return not self.syllables

    def length(self):
        """Word length: the sum of the syllable exponents."""
        return sum(e for _, e in self.syllables)

    def __eq__(self, other):
        return isinstance(other, ReducedWord) and self.syllables == other.syllables

    def __hash__(self):
        return hash(self.syllables)

    def __repr__(self):
        if not self.syllables:
            return "ReducedWord(identity)"
        parts = []
        for g, e in self.syllables:
            parts.append("s%d" % (g + 1) if e == 1 else "s%d^%d" % (g + 1, e))
        return "ReducedWord(%s)" % " ".join(parts)


IDENTITY = ReducedWord()


def reduce_word(params, letters):
    """Normalize a sequence of (generator, exponent) letters to reduced form.

    Exponents may be any integers; they are taken mod k, adjacent syllables on
    the same generator are merged, and vanishing syllables are dropped (which
    can cascade). Generator indices must lie in 0..d-1.
    """
    k = params.k
    stack = []
    for g, e in letters:
        if not 0 <= g < params.d:
            raise ValueError("generator index %r out of range 0..%d" % (g, params.d - 1))
        e %= k
        if e == 0:
            continue
        if stack and stack[-1][0] == g:
            merged = (stack[-1][1] + e) % k
            stack.pop()
            if merged:
                stack.append((g, merged))
        else:
            stack.append((g, e))
    return ReducedWord(stack)


def word_inverse(params, word):
    k = params.k
    return ReducedWord(tuple((g, k - e) for g, e in reversed(word.syllables)))


def word_product(params, *words):
    """Product of reduced words, re-reduced (left to right)."""
    letters = []
    for w in words:
        letters.extend(w.syllables)
    return reduce_word(params, letters)


def generator_word(i):
    return ReducedWord(((i, 1),))


def generator_words(params):
    """The d words s_1, ..., s_d."""
    return [generator_word(i) for i in range(params.d)]


def generator_pair_words(params):
    """All length-two products s_i s_j with i != j."""
    return [
        ReducedWord(((i, 1), (j, 1)))
        for i in range(params.d)
        for j in range(params.d)
        if i != j
    ]


class UniformHom:
    """A homomorphism sending each generator to a disjoint union of k-cycles.

    images[i][v] is the image of vertex v under generator i. Validity (each
    image a permutation with all orbits of size exactly k) is checked once at
    construction; operations after that assume it.
    """

    __slots__ = ("params", "images")

    def __init__(self, params, images, _trusted=False):
        params.require_uniform()
        images = tuple(tuple(img) for img in images)
        if len(images) != params.d:
            raise ValueError(
                "expected %d generator images, got %d" % (params.d, len(images))
            )
        if not _trusted:
            for i, img in enumerate(images):
                _check_uniform_permutation(img, params.n, params.k, i)
        self.params = params
        self.images = images

    def apply(self, gen, v, power=1):
        """sigma(s_gen)^power applied to v; power may be any integer."""
        img = self.images[gen]
        power %= self.params.k
        for _ in range(power):
            v = img[v]
        return v

    def __eq__(self, other):
        return (
            isinstance(other, UniformHom)
            and self.params == other.params
            and self.images == other.images
        )

    def __hash__(self):
        return hash((self.params, self.images))

    def __repr__(self):
        return "UniformHom(d=%d, k=%d, n=%d)" % (
            self.params.d,
            self.params.k,
            self.params.n,
        )

    def to_json_dict(self):
        """Canonical on-disk form: {"n":..., "k":..., "d":..., "images":[[...]]}."""
        return {
            "n": self.params.n,
            "k": self.params.k,
            "d": self.params.d,
            "images": [list(img) for img in self.images],
        }

    @classmethod
    def from_json_dict(cls, data):
        params = ModelParams(d=int(data["d"]), k=int(data["k"]), n=int(data["n"]))
        return cls(params, data["images"])


def _check_uniform_permutation(img, n, k, gen_index):
    if len(img) != n or sorted(img) != list(range(n)):
        raise ValueError("image of generator %d is not a permutation of 0..%d" % (gen_index, n - 1))
    seen = [False] * n
    for start in range(n):
        if seen[start]:
            continue
        size = 0
        v = start
        while not seen[v]:
            seen[v] = True
            v = img[v]
            size += 1
        if size != k:
            raise ValueError(
                "generator %d has an orbit of size %d, want exactly %d"
                % (gen_index, size, k)
            )


def evaluate_word(hom, word, v):
    """Apply sigma(word) to vertex v, rightmost syllable first."""
    if not 0 <= v < hom.params.n:
        raise ValueError("vertex %r out of range 0..%d" % (v, hom.params.n - 1))
    for g, e in reversed(word.syllables):
        v = hom.apply(g, v, e)
    return v


def word_image(hom, word):
    """The full permutation array of sigma(word), as a list."""
    return [evaluate_word(hom, word, v) for v in range(hom.params.n)]


@dataclass(frozen=True)
class SoficReport:
    n: int
    delta: Fraction
    mult_fraction: Fraction
    trace_fraction: Fraction
    is_multiplicative: bool
    is_trace_preserving: bool
    is_sofic: bool


def check_sofic(hom, words, delta):
    """Check the two sofic-approximation statistics over a finite word set.

    mult_fraction is the fraction of vertices v with
    sigma(gh)v = sigma(g)(sigma(h)v) for every pair g, h in the set, computed
    generically from the images even though a genuine homomorphism always
    scores 1. trace_fraction is the fraction of v moved by every non-identity
    word in the set. Each statistic passes when strictly greater than
    1 - delta, and the report flags both plus their conjunction.
    """
    params = hom.params
    n = params.n
    delta = Fraction(delta)
    words = list(words)

    images = {w: word_image(hom, w) for w in words}
    products = {}
    for g in words:
        for h in words:
            gh = word_product(params, g, h)
            if gh not in products:
                products[gh] = word_image(hom, gh)

    mult_ok = 0
    for v in range(n):
        ok = True
        for g in words:
            img_g = images[g]
            for h in words:
                gh = word_product(params, g, h)
                if products[gh][v] != img_g[images[h][v]]:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            mult_ok += 1

    nontrivial = [images[w] for w in words if not w.is_identity()]
    trace_ok = 0
    for v in range(n):
        if all(img[v] != v for img in nontrivial):
            trace_ok += 1

    mult_fraction = Fraction(mult_ok, n)
    trace_fraction = Fraction(trace_ok, n)
    is_mult = mult_fraction > 1 - delta
    is_trace = trace_fraction > 1 - delta
    return SoficReport(
        n=n,
        delta=delta,
        mult_fraction=mult_fraction,
        trace_fraction=trace_fraction,
        is_multiplicative=is_mult,
        is_trace_preserving=is_trace,
        is_sofic=is_mult and is_trace,
    )


def uniform_permutation_count(n, k):
    """Number of permutations of [n] that split into n/k disjoint k-cycles."""
    if n % k != 0:
        return 0
    b = n // k
    num = math.factorial(n) * math.factorial(k - 1) ** b
    den = math.factorial(k) ** b * math.factorial(b)
    assert num % den == 0
    return num // den


def uniform_hom_count(params):
    """Closed-form size of the set of uniform homomorphisms."""
    params.require_uniform()
    return uniform_permutation_count(params.n, params.k) ** params.d


def _k_cycles_on(block):
    """All k-cycles on a sorted vertex block, as {v: next} dicts."""
    lead, rest = block[0], block[1:]
    for order in itertools.permutations(rest):
        cycle = (lead,) + order
        yield {cycle[i]: cycle[(i + 1) % len(cycle)] for i in range(len(cycle))}


def _uniform_permutations(n, k):
    """Yield every disjoint-k-cycle permutation of [n], each exactly once.

    Blocks are built with the least unused vertex as leader, so each unordered
    partition into k-sets appears once, then every cycle on every block.
    """

    def build(remaining, mapping):
        if not remaining:
            yield tuple(mapping[v] for v in range(n))
            return
        lead = remaining[0]
        rest = remaining[1:]
        for companions in itertools.combinations(rest, k - 1):
            block = (lead,) + companions
            leftover = tuple(v for v in rest if v not in companions)
            for cyc in _k_cycles_on(block):
                mapping.update(cyc)
                yield from build(leftover, mapping)

    yield from build(tuple(range(n)), {})


def enumerate_uniform_homs(params, max_count=DEFAULT_ENUMERATION_BOUND):
    """Yield every uniform homomorphism exactly once.

    Refuses when the closed-form total exceeds max_count, since the stream
    is materialized per generator.
    """
    params.require_uniform()
    total = uniform_hom_count(params)
    if total > max_count:
        raise ScaleRefusal(
            "enumeration of %d uniform homomorphisms exceeds bound %d"
            % (total, max_count),
            count=total,
        )
    per_generator = list(_uniform_permutations(params.n, params.k))
    for combo in itertools.product(per_generator, repeat=params.d):
        yield UniformHom(params, combo, _trusted=True)
