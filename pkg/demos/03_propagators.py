"""Propagator kernels, triangle phases and Galilei invariance.

Run with ``python demos/03_propagators.py``.
"""

# %%
import math

import numpy as np

from qcond.propagators import (
    UNIT_OSC,
    SpacetimeWindow,
    free_K3,
    free_K4,
    free_propagator,
    galilei_Q,
    galilei_transform,
    osc_K3_K4,
    osc_propagator,
    prior_probability_windows,
)
from qcond.weyl_oracle import GridSpec, ProjectionChainSpec, Rotated, prior_conditional_probability_oracle

print("free K(0.3, 0.3; 1) =", free_propagator(0.3, 0.3, 1.0))
print("osc  K(0, 0; pi/2)  =", osc_propagator(0.0, 0.0, math.pi / 2))

# %%
# K4 is K3 times the conjugate of K3 with the middle point moved. The phase
# of K3 is the signed triangle area, which a boost leaves alone.
x1, x2, x3, x2p = 0.2, -0.4, 1.1, 0.5
t = (0.0, 1.0, 2.5)
k4 = free_K4(x1, x2, x3, x2p, *t)
fact = 2 * math.pi * 2.5 * free_K3(x1, x2, x3, *t) * np.conj(free_K3(x1, x2p, x3, *t))
print(f"K4 = {k4:.6f}, factorized = {fact:.6f}")
k = osc_K3_K4(x1, x2, x3, x2p, 0.0, math.pi / 3, 2 * math.pi / 3)
print(f"oscillator |K4| = {abs(k.K4):.6f}, R4 = {k.R4:.6f} = 1/(3 pi^2) = {1 / (3 * math.pi**2):.6f}")

# %%
# Three position windows for a free particle, before and after boosts.
ws = [SpacetimeWindow(s, (0, 1)) for s in (0, 1, 2)]
print(f"Q3 = {galilei_Q(ws, rtol=1e-8):.12f}")
rng = np.random.default_rng(1)
for _ in range(3):
    v, x0, t0 = rng.uniform(-2, 2, 3)
    print(f"  boost v={v:+.2f}, shift x0={x0:+.2f}, t0={t0:+.2f}: Q3 = {galilei_Q(galilei_transform(ws, v, x0, t0), rtol=1e-8):.12f}")

# %%
# The oscillator probability against rotated quadratures on a grid.
times = (0.0, math.pi / 3, 2 * math.pi / 3)
p = prior_probability_windows([SpacetimeWindow(s, (0, 1)) for s in times], UNIT_OSC)
spec = ProjectionChainSpec(tuple((Rotated(s), (0, 1)) for s in times), 2)
print(f"oscillator: formula {p:.6f}, oracle {prior_conditional_probability_oracle(spec, GridSpec.balanced(2048)):.6f}")
