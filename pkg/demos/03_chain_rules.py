"""
Chain rules under maps and products
===================================

Pushing a density on the unit square forward by (x, y) -> x + y gives a
triangular law on [0, 2]. The entropy of the square splits into the base
entropy of that law plus an average fiber entropy, once the fibers carry the
right reference measure.
"""

# %%
import numpy as np

from stratent import charts
from stratent.densities import Uniform
from stratent.disintegration import coarea_chain_rule_terms, disintegrate_product
from stratent.measures import RectifiableComponent

square = charts.box([0.0, 0.0], [1.0, 1.0])
comp = RectifiableComponent(square, Uniform(square.domain))
r = coarea_chain_rule_terms(comp, [[1.0, 1.0]])
print("base entropy (triangular law)", round(r.base_entropy, 8))
print("conditional (scaled fibers)  ", round(r.conditional_entropy, 8))
print("conditional (plain length)   ", round(r.fiber_description["conditional_entropy_hausdorff"], 8))
print("residual                     ", r.residual)

# %% [markdown]
# The two conditional numbers differ by ln sqrt(2): each fiber is a diagonal
# segment and the coarea factor of the map is sqrt(2).

# %%
print(np.log(np.sqrt(2)))

# %% [markdown]
# Products disintegrate along either factor; the entropy adds.

# %%
seg = charts.segment(0.0, 2.0)
circ = charts.circle(1.0)
prod = disintegrate_product(RectifiableComponent(seg, Uniform(seg.domain)),
                            RectifiableComponent(circ, Uniform(circ.domain)))
print(prod.base_entropy, "+", prod.conditional_entropy, "=", prod.total_entropy)
