"""Free-particle and harmonic-oscillator propagators and their trace integrals.

``Q2 = Tr E_1 E_2`` and ``Q3 = Tr E_1 E_2 E_3 E_2`` for Heisenberg-picture
position projections ``E_k = E_{X(t_k)}(S_k)``. The prior probability of the
third measurement given the first two is ``Q3 / Q2``.

Kernel products are evaluated as products of single propagators, which pins
the square-root branches; the signed-area closed forms are provided next to
them as an independent evaluation.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CausticTime,
    CoincidentTimes,
    QuadratureNotConverged,
    UnboundedConditionSet,
    ZeroTimeSeparation,
)
from .quadrature import DEFAULT_BUDGET, DEFAULT_RTOL, panel_rule, refine
from .regions import GeneratedRegion, IntervalUnion, lagrangian_overlap_trace
from .symplectic_core import SymplecticSpace, line_intersection_2d, oscillator_line, signed_polygon_area

CAUSTIC_GUARD = 1e-9


@dataclass(frozen=True)
class OscParams:
    """Mass, angular frequency and Planck constant. ``omega = 0`` is the free particle."""

    mass: float = 1.0
    omega: float = 0.0
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.mass > 0 and self.hbar > 0 and self.omega >= 0):
            raise ValueError("need mass > 0, hbar > 0 and omega >= 0")


@dataclass(frozen=True)
class SpacetimeWindow:
    """Position set ``S`` measured at time ``t``."""

    time: float
    set: IntervalUnion

    def __post_init__(self):
        object.__setattr__(self, "set", IntervalUnion.coerce(self.set))
        object.__setattr__(self, "time", float(self.time))


FREE = OscParams()
UNIT_OSC = OscParams(1.0, 1.0, 1.0)


# free particle ------------------------------------------------------------


def free_propagator(x2, x1, T, params=FREE):
    """``sqrt(m / 2 pi i hbar T) exp(i m (x2 - x1)^2 / 2 hbar T)`` (principal root)."""
    T = np.asarray(T, dtype=float)
    if np.any(T == 0):
        raise ZeroTimeSeparation("free propagator needs T != 0")
    m, h = params.mass, params.hbar
    x2 = np.asarray(x2, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    pref = np.sqrt(m / (2j * math.pi * h * T))
    return pref * np.exp(1j * m * (x2 - x1) ** 2 / (2 * h * T))


def _distinct(t1, t2, t3):
    if t1 == t2 or t2 == t3 or t1 == t3:
        raise CoincidentTimes(f"times must be pairwise distinct, got {(t1, t2, t3)}")


def free_triangle_action(x1, x2, x3, t1, t2, t3):
    """``x1 T32 + x2 T13 + x3 T21``, twice the signed area of the spacetime triangle."""
    return x1 * (t3 - t2) + x2 * (t1 - t3) + x3 * (t2 - t1)


def free_K3(x1, x2, x3, t1, t2, t3, params=FREE):
    """Product ``K(x1, x2; T21) K(x2, x3; T32) K(x3, x1; T13)``."""
    _distinct(t1, t2, t3)
    return (
        free_propagator(x1, x2, t2 - t1, params)
        * free_propagator(x2, x3, t3 - t2, params)
        * free_propagator(x3, x1, t1 - t3, params)
    )


def free_K3_closed(x1, x2, x3, t1, t2, t3, params=FREE):
    """Closed form ``(m^3 / (2 pi i hbar)^3 T21 T32 T13)^(1/2) exp(-i m S^2 / 2 hbar T21 T32 T13)``."""
    _distinct(t1, t2, t3)
    m, h = params.mass, params.hbar
    prod = (t2 - t1) * (t3 - t2) * (t1 - t3)
    S = free_triangle_action(np.asarray(x1, float), np.asarray(x2, float), np.asarray(x3, float), t1, t2, t3)
    pref = np.sqrt(m**3 / ((2j * math.pi * h) ** 3 * prod))
    return pref * np.exp(-1j * m * S**2 / (2 * h * prod))


def free_K4(x1, x2, x3, x2p, t1, t2, t3, params=FREE):
    """``K(x2', x1; T12) K(x1, x2; T21) K(x2, x3; T32) K(x3, x2'; T23)``."""
    _distinct(t1, t2, t3)
    return (
        free_propagator(x2p, x1, t1 - t2, params)
        * free_propagator(x1, x2, t2 - t1, params)
        * free_propagator(x2, x3, t3 - t2, params)
        * free_propagator(x3, x2p, t2 - t3, params)
    )


def free_K4_factorized(x1, x2, x3, x2p, t1, t2, t3, params=FREE):
    """``(2 pi hbar |T13| / m) K3 conj(K3')`` with ``K3'`` at ``x2'``."""
    c = 2 * math.pi * params.hbar * abs(t1 - t3) / params.mass
    k3 = free_K3_closed(x1, x2, x3, t1, t2, t3, params)
    k3p = free_K3_closed(x1, x2p, x3, t1, t2, t3, params)
    return c * k3 * np.conj(k3p)


# harmonic oscillator ------------------------------------------------------


def _caustic_check(wT):
    wT = np.asarray(wT, dtype=float)
    r = np.abs(np.remainder(wT + 0.5 * math.pi, math.pi) - 0.5 * math.pi)
    if np.any(r <= CAUSTIC_GUARD):
        raise CausticTime("omega T is a multiple of pi")


def osc_propagator(x2, x1, T, params=UNIT_OSC):
    """Harmonic oscillator propagator.

    The prefactor ``sqrt(m omega / 2 pi i hbar sin(omega T))`` is continued
    from ``T -> 0+``: principal branch for ``0 < omega T < pi`` and an extra
    ``exp(-i pi / 2)`` for every caustic crossed.
    """
    if params.omega == 0:
        return free_propagator(x2, x1, T, params)
    m, w, h = params.mass, params.omega, params.hbar
    T = np.asarray(T, dtype=float)
    if np.any(T == 0):
        raise ZeroTimeSeparation("propagator needs T != 0")
    wT = w * T
    _caustic_check(wT)
    s, c = np.sin(wT), np.cos(wT)
    x2 = np.asarray(x2, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    sgn = np.sign(T)
    crossings = np.floor(np.abs(wT) / math.pi)
    pref = np.sqrt(m * w / (2 * math.pi * h * np.abs(s))) * np.exp(-1j * sgn * (0.25 + 0.5 * crossings) * math.pi)
    phase = m * w / (2 * h) * ((x1**2 + x2**2) * c / s - 2 * x1 * x2 / s)
    return pref * np.exp(1j * phase)


def _osc_times(t1, t2, t3):
    _distinct(t1, t2, t3)
    _caustic_check([t1 - t2, t2 - t3, t3 - t1])


def osc_triangle_area(x1, x2, x3, t1, t2, t3):
    """Signed area of the triangle cut out by the lines ``x cos t_k + p sin t_k = x_k``."""
    _osc_times(t1, t2, t3)
    s23, s31, s12 = math.sin(t2 - t3), math.sin(t3 - t1), math.sin(t1 - t2)
    num = (np.asarray(x1) * s23 + np.asarray(x2) * s31 + np.asarray(x3) * s12) ** 2
    return -0.5 * num / (s23 * s31 * s12)


def osc_triangle_area_geometric(x1, x2, x3, t1, t2, t3):
    """Same area from explicit line intersections and the shoelace sum."""
    _osc_times(t1, t2, t3)
    l1, l2, l3 = oscillator_line(x1, t1), oscillator_line(x2, t2), oscillator_line(x3, t3)
    pts = np.stack(
        [line_intersection_2d(l1, l2), line_intersection_2d(l2, l3), line_intersection_2d(l3, l1)],
        axis=-2,
    )
    return signed_polygon_area(SymplecticSpace.canonical(1), pts)


@dataclass(frozen=True)
class OscKernels:
    K3: complex
    K4: complex
    R3_modulus: float
    R4: float
    S: float
    S_prime: float


def osc_K3_K4(x1, x2, x3, x2p, t1, t2, t3):
    """K3 and K4 for unit oscillator parameters with their modulus prefactors.

    ``K3 = R3 exp(-i S)`` and ``K4 = R4 exp(-i (S - S'))`` where ``S`` is the
    triangle area for ``(x1, x2, x3)`` and ``S'`` the one for ``(x1, x2', x3)``.
    Only ``|R3|`` is returned; the phase of ``R3`` depends on a branch choice.
    """
    _osc_times(t1, t2, t3)
    K = osc_propagator
    k3 = K(x1, x2, t2 - t1) * K(x2, x3, t3 - t2) * K(x3, x1, t1 - t3)
    k4 = K(x2p, x1, t1 - t2) * K(x1, x2, t2 - t1) * K(x2, x3, t3 - t2) * K(x3, x2p, t2 - t3)
    s12, s23, s31 = math.sin(t1 - t2), math.sin(t2 - t3), math.sin(t3 - t1)
    r3 = 1.0 / (2 * math.sqrt(2) * math.pi**1.5 * math.sqrt(abs(s12 * s23 * s31)))
    r4 = 1.0 / (4 * math.pi**2 * abs(s12 * s23))
    S = osc_triangle_area(x1, x2, x3, t1, t2, t3)
    Sp = osc_triangle_area(x1, x2p, x3, t1, t2, t3)
    return OscKernels(k3, k4, r3, r4, S, Sp)


# trace integrals ----------------------------------------------------------


def _windows(windows):
    ws = [w if isinstance(w, SpacetimeWindow) else SpacetimeWindow(*w) for w in windows]
    if len(ws) not in (2, 3):
        raise ValueError("need two or three windows")
    for w in ws[:2]:
        if not w.set.is_bounded:
            raise UnboundedConditionSet("the first two windows must have bounded sets")
    return ws


def _quadrature_line(params, t):
    """Coordinate functional of ``X(t)`` on phase space ``(x, p)``."""
    if params.omega == 0:
        return np.array([1.0, t / params.mass])
    wt = params.omega * t
    return np.array([math.cos(wt), math.sin(wt) / (params.mass * params.omega)])


def window_region(window, params):
    """Phase-space strip of the window, in the plane with form ``dx dp / hbar``."""
    space = SymplecticSpace.canonical(1, params.hbar)
    return GeneratedRegion.from_functionals(space, [_quadrature_line(params, window.time)], [window.set])


def _q2(ws, params):
    if ws[0].time == ws[1].time:
        raise CoincidentTimes("Q2 needs distinct times")
    if params.omega:
        _caustic_check(params.omega * (ws[1].time - ws[0].time))
        return lagrangian_overlap_trace(window_region(ws[0], params), window_region(ws[1], params))
    T = abs(ws[1].time - ws[0].time)
    return params.mass * ws[0].set.measure * ws[1].set.measure / (2 * math.pi * params.hbar * T)


def _max_abs(iu):
    lo, hi = iu.hull
    return max(abs(lo), abs(hi))


def _coupling_freq(params, T, a, b):
    """Bound on ``|d phase / d x_a|`` for the kernel ``K(x_a, x_b; T)``."""
    m, h = params.mass, params.hbar
    if params.omega == 0:
        return m * (a + b) / (h * abs(T))
    w = params.omega
    s, c = math.sin(w * T), math.cos(w * T)
    return m * w * (a * abs(c / s) + b / abs(s)) / h


def _q3_tensor(ws, params, rtol, budget):
    """4D tensor Gauss-Legendre quadrature of the four-kernel product.

    The sum over the 4D tensor grid is reorganized as
    ``sum_{x2, x2'} G[x2', x2] H[x2, x2']`` with ``G`` and ``H`` the partial
    sums over ``x1`` and ``x3``; this is the same finite sum, only cheaper.
    """
    t1, t2, t3 = (w.time for w in ws)
    S1, S2, S3 = (w.set for w in ws)
    K = osc_propagator if params.omega else free_propagator
    m1, m2, m3 = _max_abs(S1), _max_abs(S2), _max_abs(S3)
    f1 = 2 * _coupling_freq(params, t2 - t1, m1, m2)
    f2 = 2 * max(_coupling_freq(params, t2 - t1, m2, m1), _coupling_freq(params, t3 - t2, m2, m3))
    f3 = 2 * _coupling_freq(params, t3 - t2, m3, m2)

    def width(iu, f):
        lo, hi = iu.hull
        return min(hi - lo, 2 * math.pi / f if f > 0 else math.inf)

    w0 = [width(S1, f1), width(S2, f2), width(S3, f3)]

    def evaluate(level):
        x1, a1 = panel_rule(S1, w0[0] / 2**level)
        x2, a2 = panel_rule(S2, w0[1] / 2**level)
        x3, a3 = panel_rule(S3, w0[2] / 2**level)
        n = 2 * x2.size * (x1.size + x3.size) + x2.size**2
        if n > budget:
            raise QuadratureNotConverged(f"Q3 quadrature would need {n} kernel evaluations")
        A = K(x2[:, None], x1[None, :], t1 - t2, params)
        B = K(x1[:, None], x2[None, :], t2 - t1, params)
        G = (A * a1) @ B
        C = K(x2[:, None], x3[None, :], t3 - t2, params)
        D = K(x3[:, None], x2[None, :], t2 - t3, params)
        H = (C * a3) @ D
        val = np.sum(a2[:, None] * a2[None, :] * G.T * H)
        return complex(val), n

    return refine(evaluate, rtol=rtol, budget=budget)


def _reduce_params(ws, params):
    """Rescale to dimensionless oscillator units ``m = omega = hbar = 1``."""
    L = math.sqrt(params.hbar / (params.mass * params.omega))
    return [SpacetimeWindow(params.omega * w.time, w.set.scale(1.0 / L)) for w in ws]


def _q3_covariant(ws, params, rtol, budget):
    """``(2 pi)^-2 int int exp(-i (S - S')) dA12 dA23'`` over the phase-space overlaps.

    ``A12`` ranges over the overlap of the first two strips and ``A23'`` over
    that of the last two; they fix the four lines whose triangle areas give
    the phase. Both overlaps are parametrized by the line labels, and the
    ``x2`` and ``x2'`` integrals factor as a squared modulus.
    """
    ws = _reduce_params(ws, params)
    t1, t2, t3 = (w.time for w in ws)
    _osc_times(t1, t2, t3)
    S1, S2, S3 = (w.set for w in ws)
    jac = 1.0 / (abs(math.sin(t2 - t1)) * abs(math.sin(t3 - t2)))
    plane = SymplecticSpace.canonical(1)
    m1, m2, m3 = _max_abs(S1), _max_abs(S2), _max_abs(S3)
    sines = min(abs(math.sin(t2 - t3)), abs(math.sin(t3 - t1)), abs(math.sin(t1 - t2)))
    freq = 2 * (m1 + m2 + m3) / sines

    def width(iu):
        lo, hi = iu.hull
        return min(hi - lo, 2 * math.pi / freq)

    w0 = [width(S1), width(S2), width(S3)]

    def evaluate(level):
        x1, a1 = panel_rule(S1, w0[0] / 2**level)
        x2, a2 = panel_rule(S2, w0[1] / 2**level)
        x3, a3 = panel_rule(S3, w0[2] / 2**level)
        n = x1.size * x2.size * x3.size
        if n > budget:
            raise QuadratureNotConverged(f"covariant Q3 would need {n} area evaluations")
        total = 0.0
        for i in range(x1.size):
            l1 = oscillator_line(np.full((x2.size, x3.size), x1[i]), t1)
            l2 = oscillator_line(np.broadcast_to(x2[:, None], (x2.size, x3.size)), t2)
            l3 = oscillator_line(np.broadcast_to(x3[None, :], (x2.size, x3.size)), t3)
            pts = np.stack(
                [line_intersection_2d(l1, l2), line_intersection_2d(l2, l3), line_intersection_2d(l3, l1)],
                axis=-2,
            )
            area = signed_polygon_area(plane, pts)
            g = np.sum(a2[:, None] * np.exp(-1j * area), axis=0)
            total += a1[i] * np.sum(a3 * np.abs(g) ** 2)
        return total * jac / (2 * math.pi) ** 2, n

    return refine(evaluate, rtol=rtol, budget=budget)


@dataclass
class QResult:
    """Trace integral with its quadrature diagnostics."""

    value: float
    imag: float = 0.0
    error: float = 0.0
    evaluations: int = 0
    trace: list = None
    method: str = "closed-form"


def _q(windows, params, method, rtol, budget):
    ws = _windows(windows)
    if len(ws) == 2:
        return QResult(_q2(ws, params))
    if params.omega:
        _osc_times(*(w.time for w in ws))
    else:
        _distinct(*(w.time for w in ws))
    if ws[2].set.is_full:
        return QResult(_q2(ws[:2], params), method="closed-form (identity outcome)")
    if ws[2].set.is_empty:
        return QResult(0.0, method="closed-form (empty outcome)")
    if not ws[2].set.is_bounded:
        raise QuadratureNotConverged("outcome sets must be bounded or the whole line")
    if method == "covariant":
        r = _q3_covariant(ws, params, rtol, budget)
        return QResult(float(np.real(r.value)), 0.0, r.error, r.evaluations, r.trace, "covariant")
    r = _q3_tensor(ws, params, rtol, budget)
    return QResult(float(r.value.real), float(r.value.imag), r.error, r.evaluations, r.trace, "propagator")


def galilei_Q(windows, params=FREE, rtol=DEFAULT_RTOL, budget=DEFAULT_BUDGET, full=False):
    """Free-particle ``Q2`` (closed form) or ``Q3`` (adaptive quadrature)."""
    if params.omega:
        raise ValueError("galilei_Q is the free particle; use osc_Q")
    res = _q(windows, params, "propagator", rtol, budget)
    return res if full else res.value


def osc_Q(windows, params=UNIT_OSC, method="propagator", rtol=DEFAULT_RTOL, budget=DEFAULT_BUDGET, full=False):
    """Oscillator ``Q2`` from the strip overlap area or ``Q3`` by quadrature.

    ``method`` selects the four-propagator integral (``"propagator"``) or the
    phase-space form over the strip overlaps (``"covariant"``).
    """
    if not params.omega:
        raise ValueError("osc_Q needs omega > 0")
    res = _q(windows, params, method, rtol, budget)
    return res if full else res.value


def prior_probability_windows(windows, params, method="propagator", rtol=DEFAULT_RTOL, budget=DEFAULT_BUDGET):
    """``Q3 / Q2`` for three windows."""
    ws = _windows(windows)
    q2 = _q(ws[:2], params, method, rtol, budget).value
    q3 = _q(ws, params, method, rtol, budget).value
    return q3 / q2


def galilei_transform(windows, v=0.0, x0=0.0, t0=0.0):
    """Boost by ``v`` then translate by ``(x0, t0)``: ``x -> x + v t + x0``, ``t -> t + t0``."""
    out = []
    for w in windows:
        w = w if isinstance(w, SpacetimeWindow) else SpacetimeWindow(*w)
        out.append(SpacetimeWindow(w.time + t0, w.set.shift(v * w.time + x0)))
    return out
