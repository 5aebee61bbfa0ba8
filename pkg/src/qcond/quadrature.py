"""Composite Gauss-Legendre rules with dyadic panel refinement."""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import QuadratureNotConverged

NODES_PER_PANEL = 16
DEFAULT_RTOL = 1e-3
DEFAULT_BUDGET = 10**8


@lru_cache(maxsize=None)
def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_rule(intervals, panel_width, nodes=NODES_PER_PANEL):
    """Composite rule over a bounded interval union.

    Parameters
    ----------
    intervals : IntervalUnion
        Must be bounded.
    panel_width : float
        Upper bound on the width of each panel.

    Returns
    -------
    x, w : ndarray
        Nodes and weights.
    """
    t, wt = _gl(nodes)
    xs, ws = [], []
    for a, b in intervals.intervals:
        m = max(1, math.ceil((b - a) / panel_width - 1e-12))
        edges = np.linspace(a, b, m + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        xs.append((mid[:, None] + half[:, None] * t[None, :]).ravel())
        ws.append((half[:, None] * wt[None, :]).ravel())
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ws)


def oscillation_width(conjugate_extent, scale=1.0):
    """Panel width resolving a phase ``exp(i z y / scale)`` with ``|y| <= conjugate_extent``."""
    if conjugate_extent <= 0:
        return math.inf
    return 2 * math.pi * scale / conjugate_extent


@dataclass
class QuadResult:
    value: complex
    error: float
    evaluations: int
    trace: list = field(default_factory=list)


def refine(evaluate, rtol=DEFAULT_RTOL, budget=DEFAULT_BUDGET, start=0, max_level=12, floor=0.0):
    """Run ``evaluate(level)`` at increasing levels until two estimates agree.

    ``evaluate`` returns ``(value, n_evaluations)``; each level is expected to
    halve the panel widths. Convergence means
    ``|v_l - v_{l-1}| <= rtol * max(|v_l|, floor)``.

    Raises
    ------
    QuadratureNotConverged
        When the evaluation budget or ``max_level`` is exhausted first.
    """
    used = 0
    prev = None
    trace = []
    for level in range(start, start + max_level + 1):
        value, n = evaluate(level)
        used += n
        trace.append((level, n, value))
        if prev is not None:
            err = abs(value - prev)
            if err <= rtol * max(abs(value), floor):
                return QuadResult(value, err, used, trace)
        prev = value
        if used > budget:
            break
    raise QuadratureNotConverged(
        f"no convergence to rtol={rtol} after {used} evaluations "
        f"(last estimates: {[t[2] for t in trace[-3:]]})"
    )
