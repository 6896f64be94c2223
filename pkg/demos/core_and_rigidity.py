"""
Core structure, rigidity, and the tree comparison
=================================================

Peels the attached-core hierarchy of a planted instance, reports rigid
densities, runs the expansivity scan, and compares the finite picture
with the infinite-tree fixed point and its Monte Carlo estimate.
"""

import mpmath as mp

from sofic_lab import (
    Coloring,
    ModelParams,
    RngState,
    build_hypergraph,
    core_decomposition,
    core_density_estimate,
    core_fixed_point,
    density_report,
    expansivity_scan,
    sample_planted_hom,
    working_precision,
)

params = ModelParams(d=20, k=6, n=120)
chi = Coloring.equitable_split(params.n)
hom = sample_planted_hom(params, chi, RngState(11))
graph = build_hypergraph(hom)

decomp = core_decomposition(graph, chi)
print("levels peeled:", len(decomp.levels))
for level in range(min(4, len(decomp.levels))):
    print("  rigid density at level %d:" % level, density_report(graph, chi, level))

report = expansivity_scan(graph, chi, 3)
print("expansivity violations up to size 3:", len(report.violations))
print("worst excess over the exhaustive window:", report.exhaustive_max_excess)

# the infinite-tree analogue: a fixed point for the attachment probability
with working_precision():
    trace = core_fixed_point(params.d, params.k)
    print("tree fixed point p_inf:", mp.nstr(trace.p_inf, 6))
    print("attached-core mass:", mp.nstr(trace.mu_core_attached, 6))

estimate = core_density_estimate(params.d, params.k, level=4, samples=20_000, rng=RngState(3))
print("tree Monte Carlo rigid frequency:", estimate.rigid_frequency())
print("tree Monte Carlo core frequency:", estimate.core_frequency())
