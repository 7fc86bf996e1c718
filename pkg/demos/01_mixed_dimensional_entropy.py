"""
Entropy of a measure that mixes dimensions
==========================================

An atom and a uniform segment cannot share a density against one Lebesgue
measure. Against the sum of counting measure and length they can, and the
entropy splits into a label part and a per-stratum part.
"""

# %%
import numpy as np

from stratent import charts
from stratent.densities import TruncatedExponential, Uniform
from stratent.measures import (
    RectifiableComponent,
    StratifiedMeasure,
    expected_dimension,
    mc_entropy,
    stratified_entropy,
)

atom = charts.point([0.0])
seg = charts.segment(0.0, 2.0)
mix = StratifiedMeasure(
    [RectifiableComponent(atom, Uniform(atom.domain)), RectifiableComponent(seg, Uniform(seg.domain))],
    [0.5, 0.5],
)

# %% [markdown]
# Half the mass sits at the origin, half is spread over [0, 2]. The label
# entropy is ln 2 and the segment contributes ln 2 with weight one half.

# %%
terms = stratified_entropy(mix)
print(f"total       {terms.total:.6f}   (1.5 ln 2 = {1.5 * np.log(2):.6f})")
print(f"labels      {terms.mixture_term:.6f}")
print(f"per stratum {terms.conditional_term:.6f}")
print(f"E[D]        {expected_dimension(mix):.3f}")

# %% [markdown]
# The same number from samples: average -ln of the density at random draws.

# %%
for n in (100, 1_000, 10_000, 100_000):
    est = mc_entropy(mix, n, seed=1)
    print(f"n = {n:>6d}: {est.estimate:.4f} +/- {est.stderr:.4f}")

# %% [markdown]
# Curved carriers work the same way; the area factor of the chart converts
# the parameter density into a density against arc length.

# %%
helix = charts.helix(c=0.5)
tilted = RectifiableComponent(helix, TruncatedExponential(helix.domain, 0.3))
m = StratifiedMeasure([tilted], [1.0])
print("helix length      ", helix.reference_measure)
print("uniform entropy   ", np.log(helix.reference_measure))
print("tilted entropy    ", stratified_entropy(m).total)
