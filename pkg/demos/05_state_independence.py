"""Conditioning on a narrow first window makes the initial state irrelevant.

Run with ``python demos/05_state_independence.py``.
"""

# %%
from qcond.weyl_oracle import (
    GridSpec,
    ProjectionChainSpec,
    coherent_state,
    conditional_probability,
    ground_state,
    prior_conditional_probability_oracle,
    thermal_state,
)

grid = GridSpec(1024, 40.0)
states = {"ground": ground_state(grid), "thermal": thermal_state(grid, 0.5), "coherent": coherent_state(grid, 1.0, 0.5)}

# %%
# Position in a window of width w around 0, then momentum in [0,1), then
# position in [0.5, 2]. As w shrinks the three state-dependent conditional
# probabilities close in on the state-free value.
for w in (2, 1, 0.5, 0.25):
    chain = ProjectionChainSpec((("position", (-w / 2, w / 2)), ("momentum", (0, 1)), ("position", (0.5, 2))), 2)
    ps = {k: conditional_probability(r, chain, grid) for k, r in states.items()}
    prior = prior_conditional_probability_oracle(chain, grid)
    spread = max(ps.values()) - min(ps.values())
    print(f"w={w:5.2f}  " + "  ".join(f"{k}={v:.5f}" for k, v in ps.items()) + f"  prior={prior:.5f}  spread={spread:.2e}")
