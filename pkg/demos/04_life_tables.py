"""Life-table functionals of an age-at-death distribution.

Builds the classic columns (survivorship l_x, death probability q_x,
central rate m_x, person-years L_x, remaining expectancy e_x) from a
single discretized mixture, checks the bookkeeping identities, then
shows posterior uncertainty in the columns using the draw store from
02_fit_synthetic.py when it exists.  Runs in a few seconds.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from mortmix import (AgeGrid, ModelVariant, discretize, functional_bands,
                     life_table, life_table_batch, load_draws)

grid = AgeGrid()

# ---------------------------------------------------------------------------
# one distribution, full table
# ---------------------------------------------------------------------------

natural = {"pi0": 0.015, "pi1": 0.22, "pi2": 0.765,
           "mu": 43.0, "sigma": 11.0, "xi": 82.0, "omega": 9.0,
           "alpha": -2.5}
d = discretize(natural, ModelVariant(), grid)
lt = life_table(d)

print("age   d_x       l_x      q_x       m_x       e_x")
for x in (0, 1, 20, 43, 65, 82, 95, 105):
    print(f"{x:3d}  {lt.d[x]:.6f}  {lt.l[x]:.5f}  {lt.q[x]:.6f}  "
          f"{lt.m[x]:.6f}  {lt.e[x]:6.2f}")

# the mean age at death equals e_0 under the midpoint convention a = 1/2
mean_age = float(d @ (grid.ages + 0.5))
print(f"\ne_0 = {lt.e[0]:.6f}, mean age at death = {mean_age:.6f} "
      f"(difference {abs(lt.e[0] - mean_age):.2e})")
print(f"survivorship is monotone: {bool(np.all(np.diff(lt.l) <= 0))}")

# batch form, same numbers
batch = life_table_batch(d[None, :])
print(f"batch e_0 matches: {abs(batch['e'][0, 0] - lt.e[0]):.2e}")

# ---------------------------------------------------------------------------
# posterior bands of q_x and e_x from a saved fit, if available
# ---------------------------------------------------------------------------

store = Path(__file__).parent / "output" / "synthetic_fit"
if store.exists():
    draws = load_draws(store)
    qx = functional_bands(draws, "qx")
    ex = functional_bands(draws, "ex")
    j, t = 0, -1
    print(f"\nposterior 90% bands, country {draws.countries[j]}, "
          f"year {qx.years[t]}:")
    for age in (0, 45, 65, 80, 90):
        lo, med, hi = qx.values[0, j, t, age], qx.values[1, j, t, age], \
            qx.values[2, j, t, age]
        print(f"  q_{age:<3d} {med:.5f} [{lo:.5f}, {hi:.5f}]")
    lo, med, hi = ex.values[:, j, t, 0]
    print(f"  e_0   {med:.3f} [{lo:.3f}, {hi:.3f}]")
else:
    print("\n(run demos/02_fit_synthetic.py to see posterior bands here)")
