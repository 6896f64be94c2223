"""Shared test utilities: small hand-built homomorphisms and random instances."""

import itertools

from sofic_lab.group_model import UniformHom


def hom_from_cycles(params, cycles_per_gen):
    """Build a uniform homomorphism from explicit cycle lists per generator."""
    images = []
    for cycles in cycles_per_gen:
        img = list(range(params.n))
        for cyc in cycles:
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                img[a] = b
        images.append(img)
    return UniformHom(params, images)


def all_k_partitions(elements, k):
    """Yield every partition of the elements into blocks of size k.

    The smallest remaining element anchors each block, so each partition
    appears exactly once.
    """
    elements = sorted(elements)
    if not elements:
        yield []
        return
    first, rest = elements[0], elements[1:]
    for others in itertools.combinations(rest, k - 1):
        chosen = set(others)
        remaining = [x for x in rest if x not in chosen]
        for tail in all_k_partitions(remaining, k):
            yield [(first,) + others] + tail


def partition_type_counts(parts, chi, k):
    """Block counts (c_1..c_{k-1}) by ones per block, or None if any block
    is monochromatic."""
    counts = [0] * (k + 1)
    for p in parts:
        counts[sum(chi[v] for v in p)] += 1
    if counts[0] or counts[k]:
        return None
    return tuple(counts[1:k])


def random_uniform_images(params, rng):
    """One independent shuffle-and-cut draw per generator, via random.Random.

    Deliberately separate from the package sampler so tests built on this do
    not inherit its bugs.
    """
    images = []
    for _ in range(params.d):
        verts = list(range(params.n))
        rng.shuffle(verts)
        img = list(range(params.n))
        for start in range(0, params.n, params.k):
            block = verts[start : start + params.k]
            rest = block[1:]
            rng.shuffle(rest)
            cyc = [block[0]] + rest
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                img[a] = b
        images.append(img)
    return UniformHom(params, images)
