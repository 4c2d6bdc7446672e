"""LoS SNR of the four schemes as the total element count grows.

Doubling N adds about 12 dB with two rotatable surfaces and about 6 dB
with one, so the double-reflection link eventually overtakes the single
one despite its extra path loss.

Run with ``python demos/los_scaling.py``.
"""
import numpy as np

from rotirs import (DOUBLE_FIXED, DOUBLE_ROTATABLE, SINGLE_FIXED, SINGLE_ROTATABLE, LinkBudget,
                    default_geometry, linear_to_db, solve_los)

budget = LinkBudget.from_dbm(30, -80)
schemes = (DOUBLE_ROTATABLE, SINGLE_ROTATABLE, DOUBLE_FIXED, SINGLE_FIXED)
sizes = 2 ** np.arange(6, 18)

print(f"{'N':>7} " + " ".join(f"{s.name:>17}" for s in schemes))
prev = None
for n in sizes:
    geom = default_geometry(n1=int(n) // 2, n2=int(n) // 2)
    row = [linear_to_db(solve_los(geom, budget, s, with_solution=False).snr) for s in schemes]
    print(f"{n:>7d} " + " ".join(f"{v:17.2f}" for v in row))
    if prev is not None and prev[0] < prev[1] and row[0] >= row[1]:
        print(f"        double-rotatable overtakes single-rotatable at N = {n}")
    prev = row
