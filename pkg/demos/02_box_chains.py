"""Alternating position and momentum boxes: closed-form integrals vs the grid.

Run with ``python demos/02_box_chains.py``.
"""

# %%
import math
import time

from qcond.prior_engine import ChainSpec, chain_action, prior_probability_box, q_box
from qcond.weyl_oracle import GridSpec, ProjectionChainSpec, prior_conditional_probability_oracle

print("S(1, 1, 1, 1) =", chain_action([1, 1, 1, 1]))

# %%
# Two rounds of unit boxes, conditioned on the first round.
chain = ChainSpec([(0, 1), (0, 1), (0, 1), (0, 1)], split=1)
q = q_box(chain, full=True, rtol=1e-8)
print(f"Q(all boxes) = {q.value:.12f} via {q.method} ({q.evaluations} evaluations)")
p = prior_probability_box(chain, rtol=1e-8)
oracle = prior_conditional_probability_oracle(ProjectionChainSpec(chain.events(), 2), GridSpec(2048, 40.0))
print(f"prior probability {p:.6f}, grid oracle {oracle:.6f}")

# %%
# Widening the second round absorbs it into the identity.
for R in (1, 4, 16):
    c = ChainSpec([(0, 1), (0, 1), (-R, R), (-R, R)], 1)
    print(f"R={R:3d}  2 pi Q = {2 * math.pi * q_box(c, method='kernel-chain', rtol=1e-5):.5f}")

# %%
# Three rounds need the kernel-chain contraction: one 1D coupling matrix per
# adjacent pair of variables instead of a 10-dimensional tensor rule.
chain3 = ChainSpec([(0, 1)] * 6, split=2)
t0 = time.perf_counter()
p3 = prior_probability_box(chain3, rtol=1e-4)
print(f"n=3 probability {p3:.7f} in {time.perf_counter() - t0:.2f}s")
