"""Regions cut out by symplectic functionals, and the same law from field pairings.

Run with ``python demos/04_phase_space_regions.py``.
"""

# %%
import numpy as np

from qcond.prior_engine import PairingMatrix, finite_dim_prior, finite_dim_prior_oracle, kg_prior_probability
from qcond.propagators import SpacetimeWindow, galilei_Q
from qcond.regions import GeneratedRegion
from qcond.symplectic_core import SymplecticSpace, random_symplectic

plane = SymplecticSpace.canonical(1)
B = [GeneratedRegion.from_functionals(plane, [f], [(0, 1)]) for f in ([1, 0], [0, 1], [1, 1])]
print(f"x, p, x+p in [0,1): probability {finite_dim_prior(B, rtol=1e-8):.6f}, oracle {finite_dim_prior_oracle(B):.6f}")

# %%
# Moving all three regions by one symplectic map and translation changes nothing.
rng = np.random.default_rng(3)
M, shift = random_symplectic(plane, rng), rng.normal(size=2)
moved = [b.transformed(M, shift) for b in B]
print("after a random Sp(2) map:", finite_dim_prior(moved, rtol=1e-8))

# %%
# A two-mode example factorizes into one-mode pieces when the generators are aligned.
sp2 = SymplecticSpace.canonical(2)
box = [(0, 1), (0, 1)]
R = [GeneratedRegion.from_functionals(sp2, f, box) for f in (
    [[1, 0, 0, 0], [0, 1, 0, 0]], [[0, 0, 1, 0], [0, 0, 0, 1]], [[1, 0, 1, 0], [0, 1, 0, 1]])]
print("two modes:", finite_dim_prior(R, rtol=1e-8), "= square of one mode:", finite_dim_prior(B, rtol=1e-8) ** 2)

# %%
# Only commutator pairings enter the field version. The massless (0+1)-d
# field at times 0, 1, 2 is the free particle.
e = PairingMatrix.from_model("massless", (0, 1, 2))
ws = [SpacetimeWindow(s, (0, 1)) for s in (0, 1, 2)]
print(f"pairings {e}: {kg_prior_probability(e, (0, 1), (0, 1), (0, 1)):.6f}, "
      f"free particle {galilei_Q(ws) / galilei_Q(ws[:2]):.6f}")
c = np.array([2.0, 0.5, 3.0])
Sc = [(0, ci) for ci in c]
print("rescaled test functions and sets:", kg_prior_probability(e.scaled(c), *Sc))
print("cos integrand:", kg_prior_probability(e, (0, 1), (0, 1), (0, 1), variant="cos"))
