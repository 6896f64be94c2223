"""
Exponential growth rates and the planted distance curve
=======================================================

Evaluates the first-moment rate, the type functional at its claimed
optimum, and the planted pair-distance rate on a grid, locating the
argmax and the margin that separates it from the runner-up.
"""

import mpmath as mp

from sofic_lab import (
    degrees_from_offset,
    distance_rate_scan,
    dominant_type,
    planted_distance_rate,
    proper_rate,
    type_rate,
    working_precision,
)

d, k = 8, 4

with working_precision():
    f = proper_rate(d, k)
    print("first-moment rate at d=%d, k=%d:" % (d, k), mp.nstr(f, 12))

    # the balanced interior type should reproduce the same rate
    t = dominant_type(k)
    print("dominant type:", [str(x) for x in t])
    print("type functional there:", mp.nstr(type_rate([t] * d, d, k), 12))

    # large k: pick the degree from an offset inside the admissible window
    choice = degrees_from_offset(25, mp.mpf("0.12"))
    print("k=25, offset 0.12 resolves to d =", choice.d)

    scan = distance_rate_scan(choice.d, 25, grid_points=201)
    print("scan argmax delta:", mp.nstr(scan.argmax_delta, 12))
    print("scan margin over runner-up:", mp.nstr(scan.margin, 6))

    # a few sample points along the curve
    print("delta -> planted rate:")
    for i in (20, 60, 100, 140, 180):
        row = scan.rows[i]
        print("  %s -> %s" % (mp.nstr(row.delta, 8), mp.nstr(row.planted_rate, 12)))

    # the curve is symmetric about 1/2
    gap = abs(
        planted_distance_rate(mp.mpf("0.3"), choice.d, 25)
        - planted_distance_rate(mp.mpf("0.7"), choice.d, 25)
    )
    print("symmetry gap at 0.3 vs 0.7:", mp.nstr(gap, 3))
