"""Closed-form prior conditional probabilities.

Four routes to ``Prob(B | A) = Tr (AB)^dagger AB / Tr A^dagger A``:

* alternating position/momentum boxes through the chain action ``S(Z)``
  (:func:`q_box`), and the same integral in polygon-area form
  (:func:`q_cov`);
* three Lagrangian observable regions of a finite-dimensional phase space
  (:func:`finite_dim_Q3`);
* three field operators reduced to their commutator pairings ``e_ij``
  (:func:`kg_prior_probability`).
"""

import math
import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import (
    DegenerateDirections,
    DegeneratePairing,
    HypothesisViolation,
    InvalidDimension,
    QuadratureNotConverged,
    UnboundedConditionSet,
    UnsupportedChainLength,
    ZeroDenominator,
)
from .quadrature import DEFAULT_BUDGET, DEFAULT_RTOL, panel_rule, refine
from .regions import (
    IntervalUnion,
    _active,
    lagrangian_overlap_trace,
)
from .symplectic_core import (
    RANK_TOL,
    Subspace,
    _rref,
    form_eval,
    is_lagrangian,
    signed_polygon_area,
    triple_lagrangian_normal_form,
)

KERNEL_CHAIN_NODES = 512
ZERO_DEN_REL = 1e-10
NODE_SCHEDULE = (6, 10, 16)


@dataclass
class QValue:
    """A trace integral with quadrature diagnostics."""

    value: float
    imag: float = 0.0
    error: float = 0.0
    evaluations: int = 0
    method: str = ""
    trace: list = field(default_factory=list)


# chain action -------------------------------------------------------------


def chain_action(Z, hbar=None):
    """``S(Z) = sum_k (-1)^(k+1) z_k z_(k+1)`` for ``Z = (x1, p1, ..., xn, pn)``.

    With ``hbar`` given the phase ``S(Z) / hbar`` is returned instead.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.shape[-1] % 2:
        raise InvalidDimension("Z must have even length")
    signs = np.where(np.arange(Z.shape[-1] - 1) % 2 == 0, 1.0, -1.0)
    s = np.sum(signs * Z[..., :-1] * Z[..., 1:], axis=-1)
    return s if hbar is None else s / hbar


@dataclass(frozen=True)
class ChainSpec:
    """Boxes ``S_1, T_1, ..., S_n, T_n`` with the first ``split`` rounds as condition."""

    sets: tuple
    split: int
    hbar: float = 1.0

    def __post_init__(self):
        sets = tuple(IntervalUnion.coerce(s) for s in self.sets)
        object.__setattr__(self, "sets", sets)
        if len(sets) < 2 or len(sets) % 2:
            raise InvalidDimension("need sets S_1, T_1, ..., S_n, T_n")
        if not 1 <= self.split <= self.n:
            raise ValueError(f"split must be in 1..{self.n}")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")
        for s in sets[:2]:
            if not s.is_bounded:
                raise UnboundedConditionSet("S_1 and T_1 must be bounded")

    @classmethod
    def from_rounds(cls, rounds, split, hbar=1.0):
        return cls(tuple(s for pair in rounds for s in pair), split, hbar)

    @property
    def n(self):
        return len(self.sets) // 2

    def condition(self):
        return ChainSpec(self.sets[: 2 * self.split], self.split, self.hbar)

    def events(self):
        """``(observable, set)`` pairs in measurement order for the grid oracle."""
        return tuple(("position" if i % 2 == 0 else "momentum", s) for i, s in enumerate(self.sets))


def _reduce_chain(sets):
    """Drop whole-line sets and intersect neighbours of equal type.

    Returns a list of ``(type, IntervalUnion)`` with ``type`` 0 for position
    and 1 for momentum, alternating, or ``None`` when the product vanishes.
    """
    out = []
    for i, s in enumerate(sets):
        if s.is_full:
            continue
        kind = i % 2
        if out and out[-1][0] == kind:
            out[-1] = (kind, out[-1][1].intersect(s))
        else:
            out.append((kind, s))
    if any(s.is_empty for _, s in out):
        return None
    return out


def _axis_widths(reduced, hbar, min_nodes=0):
    """Starting panel widths resolving ``exp(i z_k z_(k+1) / hbar)``."""
    ext = [max(abs(a) for a in s.hull) for _, s in reduced]
    widths = []
    for k, (_, s) in enumerate(reduced):
        nb = (ext[k - 1] if k > 0 else 0.0) + (ext[k + 1] if k + 1 < len(reduced) else 0.0)
        lo, hi = s.hull
        w = hi - lo
        if nb > 0:
            w = min(w, 2 * math.pi * hbar / nb)
        if min_nodes:
            w = min(w, (hi - lo) * 16 / min_nodes)
        widths.append(w)
    return widths


def _amplitude_kernel_chain(reduced, rules, hbar):
    """Amplitude matrix ``a(z_1, z_m)`` as a product of coupling matrices."""
    norm = 1.0 / math.sqrt(2 * math.pi * hbar)
    amp = None
    for k in range(len(reduced) - 1):
        sign = 1.0 if reduced[k][0] == 0 else -1.0
        zk, _ = rules[k]
        zn, _ = rules[k + 1]
        M = norm * np.exp(1j * sign * np.outer(zk, zn) / hbar)
        amp = M if amp is None else (amp * rules[k][1]) @ M
    return amp


def _amplitude_direct(reduced, rules, hbar, block=32):
    """Amplitude from the full tensor grid of interior variables."""
    m = len(reduced)
    norm = (2 * math.pi * hbar) ** (-(m - 1) / 2)
    z = [r[0] for r in rules]
    inner = list(range(1, m - 1))
    w_in = np.ones(())
    for k in inner:
        w_in = np.multiply.outer(w_in, rules[k][1])
    amp = np.zeros((z[0].size, z[-1].size), dtype=complex)
    for start in range(0, z[0].size, block):
        z0 = z[0][start:start + block]
        shape = [z0.size] + [z[k].size for k in range(1, m)]
        phase = np.zeros(shape)
        for k in range(m - 1):
            sign = 1.0 if reduced[k][0] == 0 else -1.0
            a = z0 if k == 0 else z[k]
            ia = [1] * m
            ia[k] = a.size
            ib = [1] * m
            ib[k + 1] = z[k + 1].size
            phase = phase + sign * a.reshape(ia) * z[k + 1].reshape(ib)
        vals = np.exp(1j * phase / hbar) * w_in.reshape([1] + list(w_in.shape) + [1])
        amp[start:start + z0.size] = vals.reshape(z0.size, -1, z[-1].size).sum(axis=1)
    return norm * amp


def q_box(chain, range="full", method="auto", rtol=DEFAULT_RTOL, budget=DEFAULT_BUDGET, full=False):
    """Chain-action integral ``Q`` over a product of boxes.

    ``Q = int int exp(i (S(Z) - S(Z')) / hbar)`` with ``x_1' = x_1`` and
    ``p_n' = p_n`` identified, which equals ``int dx_1 dp_n |a(x_1, p_n)|^2``
    for the amplitude ``a`` of the interior variables.

    Parameters
    ----------
    chain : ChainSpec
    range : {"full", "condition"}
        Integrate over every box or only the condition boxes.
    method : {"auto", "direct", "kernel-chain"}
        ``auto`` uses the direct tensor rule for at most six independent
        variables (``n <= 2``) and kernel-chain contraction beyond.
    """
    if range not in ("full", "condition"):
        raise ValueError("range must be 'full' or 'condition'")
    sets = chain.sets if range == "full" else chain.sets[: 2 * chain.split]
    n = len(sets) // 2
    if method == "auto":
        method = "direct" if 4 * n - 2 <= 6 else "kernel-chain"
    hbar = chain.hbar
    reduced = _reduce_chain(sets)
    if reduced is None:
        res = QValue(0.0, method="empty product")
        return res if full else res.value
    for i, (_, s) in enumerate(reduced):
        if not s.is_bounded:
            raise QuadratureNotConverged("sets must be bounded or the whole line")
    if len(reduced) == 2:
        # n = 1 after reduction: the integrand is constant
        val = reduced[0][1].measure * reduced[1][1].measure / (2 * math.pi * hbar)
        res = QValue(val, method="closed-form")
        return res if full else res.value
    widths = _axis_widths(reduced, hbar, KERNEL_CHAIN_NODES if method == "kernel-chain" else 0)

    def evaluate(level):
        rules = [panel_rule(s, w / 2**level) for (_, s), w in zip(reduced, widths)]
        sizes = [r[0].size for r in rules]
        if method == "direct":
            n_eval = int(np.prod(sizes, dtype=float))
            if n_eval > budget:
                raise QuadratureNotConverged(f"direct rule would need {n_eval} evaluations")
            amp = _amplitude_direct(reduced, rules, hbar)
        else:
            n_eval = int(sum(a * b for a, b in zip(sizes[:-1], sizes[1:])))
            if n_eval > budget:
                raise QuadratureNotConverged(f"kernel chain would need {n_eval} evaluations")
            amp = _amplitude_kernel_chain(reduced, rules, hbar)
        val = np.sum(rules[0][1][:, None] * rules[-1][1][None, :] * np.abs(amp) ** 2)
        return float(val), n_eval

    r = refine(evaluate, rtol=rtol, budget=budget)
    res = QValue(r.value, 0.0, r.error, r.evaluations, method, r.trace)
    return res if full else res.value


def _zero_cutoff(sets, k, hbar):
    vol = 1.0
    for s in sets[: 2 * k]:
        if s.is_bounded:
            vol *= s.measure
    return ZERO_DEN_REL * vol / (2 * math.pi * hbar) ** k


def prior_probability_box(chain, method="auto", rtol=DEFAULT_RTOL, budget=DEFAULT_BUDGET, full=False):
    """``Q(X x Y) / Q(X)`` for the box chain."""
    den = q_box(chain, "condition", method, rtol, budget, full=True)
    if abs(den.value) <= _zero_cutoff(chain.sets, chain.split, chain.hbar):
        raise ZeroDenominator(f"condition weight {den.value:.3e} is numerically zero")
    if chain.split == chain.n:
        num = den
    else:
        num = q_box(chain, "full", method, rtol, budget, full=True)
    prob = num.value / den.value
    if full:
        return {"probability": prob, "numerator": num, "denominator": den}
    return prob


# polygon form -------------------------------------------------------------


def q_cov(regions, rtol=DEFAULT_RTOL, budget=DEFAULT_BUDGET, full=False):
    """Chain integral written with polygon areas in a 2D phase space.

    ``regions`` alternate between strips invariant along one direction
    (the position-like sets ``S_j``) and along another (``T_j``). With
    ``xi_0`` in the overlap of ``S_1`` and ``T_n`` and ``eta_k`` in the
    overlap of ``S_(k+1)`` and ``T_k``, the closed polygon
    ``xi_1 eta_1 xi_2 ... xi_n eta_n`` has vertices ``xi_k`` where the line
    through ``eta_(k-1)`` along the S-direction meets the line through
    ``eta_k`` along the T-direction (``eta_0 = eta_n = xi_0``). Then

    ``Q = int dxi_0 |int d eta exp(i area)|^2``

    with the normalized measure ``sigma / 2 pi`` on every point.
    """
    regions = list(regions)
    if len(regions) < 2 or len(regions) % 2:
        raise InvalidDimension("need an even number of alternating strips")
    space = regions[0].space
    if space.dim != 2:
        raise InvalidDimension("q_cov works in a 2-dimensional phase space")
    for B in regions:
        if B.k != 1:
            raise InvalidDimension("each strip needs exactly one generator")
    gS = regions[0].generators[0]
    gT = regions[1].generators[0]
    pair = float(form_eval(space, gS, gT))
    if abs(pair) <= RANK_TOL * np.linalg.norm(gS) * np.linalg.norm(gT) * space.pfaffian_abs:
        raise DegenerateDirections("the two strip directions are parallel")
    n = len(regions) // 2
    S, T = [], []
    for j, B in enumerate(regions):
        base = gS if j % 2 == 0 else gT
        g = B.generators[0]
        if _rref(np.vstack([base, g])).shape[0] != 1:
            raise DegenerateDirections("strips must alternate between two directions")
        c = float(g @ base / (base @ base))
        (S if j % 2 == 0 else T).append(B.sets[0].scale(1.0 / c))
    outer = (S[0], T[n - 1])
    inner = [(S[k + 1], T[k]) for k in range(n - 1)]
    for s in outer:
        if not s.is_bounded:
            raise UnboundedConditionSet("the strips S_1 and T_n must be bounded")
    if any(s.is_empty for s in S + T):
        res = QValue(0.0, method="empty")
        return res if full else res.value
    dA = 1.0 / (2 * math.pi * abs(pair))
    if n == 1:
        res = QValue(outer[0].measure * outer[1].measure * dA, method="closed-form")
        return res if full else res.value
    for a, b in inner:
        if not (a.is_bounded and b.is_bounded):
            raise QuadratureNotConverged("inner strips must be bounded")
    J = np.vstack([gS @ space.form, gT @ space.form])
    Jinv = np.linalg.inv(J)
    ext = max(max(abs(v) for v in s.hull) for s in S + T)
    w_osc = 2 * math.pi * abs(pair) / (4 * ext)

    def width(s):
        lo, hi = s.hull
        return min(hi - lo, w_osc)

    def evaluate(level):
        ra = [panel_rule(a, width(a) / 2**level) for a, _ in inner]
        rb = [panel_rule(b, width(b) / 2**level) for _, b in inner]
        oa = panel_rule(outer[0], width(outer[0]) / 2**level)
        ob = panel_rule(outer[1], width(outer[1]) / 2**level)
        axes = [r for pair_ in zip(ra, rb) for r in pair_]
        shape = [r[0].size for r in axes]
        n_eval = oa[0].size * ob[0].size * int(np.prod(shape, dtype=float))
        if n_eval > budget:
            raise QuadratureNotConverged(f"q_cov would need {n_eval} evaluations")
        grids = np.meshgrid(*[r[0] for r in axes], indexing="ij")
        wts = np.ones(shape)
        for i, r in enumerate(axes):
            sh = [1] * len(axes)
            sh[i] = r[0].size
            wts = wts * r[1].reshape(sh)
        a_eta = [grids[2 * k] for k in range(n - 1)]
        b_eta = [grids[2 * k + 1] for k in range(n - 1)]
        total = 0.0
        for a0, wa in zip(*oa):
            for b0, wb in zip(*ob):
                a_all = [np.full(shape, a0)] + a_eta + [np.full(shape, a0)]
                b_all = [np.full(shape, b0)] + b_eta + [np.full(shape, b0)]
                verts = []
                for k in range(1, n + 1):
                    verts.append((a_all[k - 1], b_all[k]))  # xi_k
                    verts.append((a_all[k], b_all[k]))  # eta_k
                ab = np.stack([np.stack(v, axis=-1) for v in verts], axis=-2)
                pts = ab @ Jinv.T
                area = signed_polygon_area(space, pts)
                amp = np.sum(wts * np.exp(1j * area)) * dA ** (n - 1)
                total += wa * wb * dA * abs(amp) ** 2
        return float(total), n_eval

    r = refine(evaluate, rtol=rtol, budget=budget)
    res = QValue(r.value, 0.0, r.error, r.evaluations, "polygon", r.trace)
    return res if full else res.value


# triangle core shared by the finite-dimensional and field-theory paths -----


def _triangle_hessian(space, G1, G2, G3):
    """Hessian of the triangle area ``Phi(r1, r2, r3)`` of three affine planes.

    ``X_i(r_i) = {xi : sigma(G_i, xi) = r_i}`` are parallel translates of
    Lagrangian planes. ``A_ij = X_i & X_j`` depends linearly on
    ``(r_i, r_j)`` and the area ``(sigma(A12, A23) + sigma(A23, A31) +
    sigma(A31, A12)) / 2`` is a quadratic form in ``r``.
    """
    n = space.n

    def solver(Gi, Gj):
        J = np.vstack([Gi @ space.form, Gj @ space.form])
        if abs(np.linalg.det(J)) <= RANK_TOL * np.max(np.abs(J)) ** (2 * n):
            raise HypothesisViolation("invariant subspaces intersect", which="(1)")
        return np.linalg.inv(J)

    L12, L23, L31 = solver(G1, G2), solver(G2, G3), solver(G3, G1)
    dim = 3 * n
    sl = [slice(0, n), slice(n, 2 * n), slice(2 * n, 3 * n)]

    def embed(L, i, j):
        M = np.zeros((2 * n, dim))
        M[:, sl[i]] = L[:, :n]
        M[:, sl[j]] = L[:, n:]
        return M

    A12, A23, A31 = embed(L12, 0, 1), embed(L23, 1, 2), embed(L31, 2, 0)
    W = space.form
    B = 0.5 * (A12.T @ W @ A23 + A23.T @ W @ A31 + A31.T @ W @ A12)
    return B + B.T  # Phi(r) = r^T B r = r^T H r / 2


def _box_rule(sets, widths, level):
    """Tensor rule over a product of interval unions, flattened.

    The first levels raise the node count per panel (6, 10, 16) before the
    panels are halved, which keeps coarse tensor grids affordable in 3n
    dimensions.
    """
    nodes = NODE_SCHEDULE[min(level, len(NODE_SCHEDULE) - 1)]
    halvings = max(0, level - len(NODE_SCHEDULE) + 1)
    rules = [panel_rule(s, w / 2**halvings, nodes) for s, w in zip(sets, widths)]
    pts = np.array(list(product(*[r[0] for r in rules]))) if rules else np.zeros((1, 0))
    wts = np.array([np.prod(c) for c in product(*[r[1] for r in rules])]) if rules else np.ones(1)
    return pts, wts


def _start_widths(sets, freqs):
    out = []
    for s, f in zip(sets, freqs):
        lo, hi = s.hull
        out.append(min(hi - lo, 2 * math.pi / f) if f > 0 else hi - lo)
    return out


def _triple_integral(H, n, S1, S2, S3, rtol, budget, block=4096):
    """``int dr1 dr3 |int dr2 exp(-i Phi)|^2`` with ``Phi = r^T H r / 2``.

    ``S1``, ``S2``, ``S3`` are lists of ``n`` interval unions. Terms of
    ``Phi`` without ``r2`` drop out of the squared modulus.
    """
    H22 = H[n:2 * n, n:2 * n]
    H21 = H[n:2 * n, :n]
    H23 = H[n:2 * n, 2 * n:]
    ext = [max(abs(v) for v in s.hull) for s in S1 + S2 + S3]
    grad = np.abs(H) @ np.array(ext)
    # the r2-gradient sets the oscillation of the inner sum; its spread over
    # the r2 box sets the oscillation of |g|^2 in r1 and r3
    spread2 = np.array([s.hull[1] - s.hull[0] for s in S2])
    f2 = grad[n:2 * n]
    f1 = np.abs(H21.T) @ spread2
    f3 = np.abs(H23.T) @ spread2
    w1 = _start_widths(S1, f1)
    w2 = _start_widths(S2, f2)
    w3 = _start_widths(S3, f3)

    def evaluate(level):
        r1, a1 = _box_rule(S1, w1, level)
        r2, a2 = _box_rule(S2, w2, level)
        r3, a3 = _box_rule(S3, w3, level)
        n_eval = r1.shape[0] * r3.shape[0] * r2.shape[0]
        if n_eval > budget:
            raise QuadratureNotConverged(f"triple integral would need {n_eval} evaluations")
        c2 = a2 * np.exp(-0.5j * np.einsum("ki,ij,kj->k", r2, H22, r2))
        u1 = r1 @ H21.T
        u3 = r3 @ H23.T
        total = 0.0
        for i in range(r1.shape[0]):
            u = u1[i][None, :] + u3
            for start in range(0, u.shape[0], block):
                g = np.exp(-1j * (u[start:start + block] @ r2.T)) @ c2
                total += a1[i] * np.sum(a3[start:start + block] * np.abs(g) ** 2)
        return float(total), n_eval

    return refine(evaluate, rtol=rtol, budget=budget)


# finite-dimensional phase space ------------------------------------------


def _lagrangian_data(B, name):
    g, sets = _active(B)
    if g.shape[0] != B.space.n or not is_lagrangian(B.space, Subspace(B.space, g)):
        raise HypothesisViolation(f"{name} is not a Lagrangian observable region", which="lagrangian")
    return g, sets


def _mode_alignment(space, G1, G2, G3):
    """Match generators to normal-form modes, or return ``None``."""
    nf = triple_lagrangian_normal_form(Subspace(space, G1), Subspace(space, G2), Subspace(space, G3))
    e, f = nf.diagonal_frame
    d = np.diag(nf.D)
    modes = [np.vstack([e[k], f[k], e[k] + d[k] * f[k]]) for k in range(space.n)]
    assign = []
    for i, G in enumerate((G1, G2, G3)):
        col = []
        for g in G:
            hits = [k for k in range(space.n) if _rref(np.vstack([modes[k][i], g])).shape[0] == 1]
            if len(hits) != 1:
                return None
            col.append(hits[0])
        if sorted(col) != list(range(space.n)):
            return None
        assign.append(col)
    return assign


def finite_dim_Q2(B1, B2):
    return lagrangian_overlap_trace(B1, B2)


def finite_dim_Q3(B1, B2, B3, method="auto", rtol=DEFAULT_RTOL, budget=DEFAULT_BUDGET, full=False):
    """``Tr E(B1) E(B2) E(B3) E(B2)`` for Lagrangian observable regions.

    The trace is ``int int exp(-i Phi) dA12 dA23'`` where ``A12`` runs over
    the overlap of ``B1`` and ``B2``, ``A23'`` over that of ``B2`` and
    ``B3``, and ``Phi`` is the difference of the triangle areas cut out by
    the translated invariant planes.

    ``method="modes"`` uses the normal form of the three invariant planes and
    multiplies one-mode factors; it needs the generators to be aligned with
    the normal-form modes. ``"direct"`` integrates over all ``3n``
    coordinates. ``"auto"`` prefers modes when aligned.
    """
    space = B1.space
    if any(B.is_empty for B in (B1, B2, B3)):
        res = QValue(0.0, method="empty")
        return res if full else res.value
    G1, S1 = _lagrangian_data(B1, "B1")
    G2, S2 = _lagrangian_data(B2, "B2")
    g3, s3 = _active(B3)
    if g3.shape[0] == 0:
        res = QValue(finite_dim_Q2(B1, B2), method="closed-form (identity outcome)")
        return res if full else res.value
    G3, S3 = _lagrangian_data(B3, "B3")
    W = [Subspace(space, G) for G in (G1, G2, G3)]
    for (i, j) in ((0, 1), (1, 2), (2, 0)):
        if _rref(np.vstack([W[i].basis, W[j].basis])).shape[0] < space.dim:
            raise HypothesisViolation(f"invariant planes {i + 1} and {j + 1} intersect", which="(1)")
    if not all(s.is_bounded for s in S1 + S2):
        raise HypothesisViolation("B1 and B2 must have bounded boxes", which="(2)")
    if not all(s.is_bounded for s in S3):
        raise QuadratureNotConverged("B3 sets must be bounded or whole lines")
    assign = _mode_alignment(space, G1, G2, G3) if method in ("auto", "modes") else None
    if method == "modes" and assign is None:
        raise HypothesisViolation("generators are not aligned with the normal-form modes", which="(3)")
    if assign is not None:
        value, evals = 1.0, 0
        for k in range(space.n):
            i1, i2, i3 = (assign[0].index(k), assign[1].index(k), assign[2].index(k))
            g = [G1[i1], G2[i2], G3[i3]]
            e12 = float(form_eval(space, g[0], g[1]))
            e23 = float(form_eval(space, g[1], g[2]))
            e31 = float(form_eval(space, g[2], g[0]))
            r = _kg_q3(e12, e23, e31, S1[i1], S2[i2], S3[i3], rtol, budget / space.n)
            value *= r.value
            evals += r.evaluations
        res = QValue(value, 0.0, 0.0, evals, "modes")
        return res if full else res.value
    H = _triangle_hessian(space, G1, G2, G3)
    r = _triple_integral(H, space.n, S1, S2, S3, rtol, budget)
    jac = 1.0
    for Gi, Gj in ((G1, G2), (G2, G3)):
        jac /= (2 * math.pi) ** space.n * abs(np.linalg.det(np.vstack([Gi, Gj]))) * space.pfaffian_abs
    res = QValue(r.value * jac, 0.0, r.error * jac, r.evaluations, "direct", r.trace)
    return res if full else res.value


def oracle_events(regions):
    """Grid-oracle events ``(Quadrature(alpha, beta), S)`` for one-mode regions.

    The plane must carry the form ``c J`` with ``c > 0``; the oracle then uses
    ``hbar = 1 / c`` and the coordinate functional ``alpha x + beta p`` of
    each generator.
    """
    from .weyl_oracle import Quadrature

    space = regions[0].space
    c = float(space.form[0, 1])
    if space.dim != 2 or c <= 0 or abs(space.form[1, 0] + c) > 1e-12:
        raise InvalidDimension("oracle route needs a one-mode plane with form c J, c > 0")
    events = []
    for B in regions:
        g, sets = _active(B)
        if g.shape[0] == 0:
            events.append(("position", IntervalUnion.full()))
            continue
        fun = g[0] @ space.form
        events.append((Quadrature(float(fun[0]), float(fun[1])), sets[0]))
    return events, 1.0 / c


def finite_dim_prior(regions, k=2, rtol=DEFAULT_RTOL, budget=DEFAULT_BUDGET, grid=None, full=False):
    """``Q(B1, B2, B3) / Q(B1, B2)``; other chain lengths go to the grid oracle."""
    regions = list(regions)
    if len(regions) != 3 or k != 2:
        warnings.warn(
            f"closed form covers three regions with k=2; routing {len(regions)} regions to the grid oracle",
            UnsupportedChainLength,
            stacklevel=2,
        )
        return finite_dim_prior_oracle(regions, k, grid)
    den = finite_dim_Q2(regions[0], regions[1])
    cut = ZERO_DEN_REL * math.prod(s.measure for B in regions[:2] for s in _active(B)[1]) / (2 * math.pi) ** regions[0].space.n
    if not den > cut:
        raise ZeroDenominator(f"Q(B1, B2) = {den:.3e} is numerically zero")
    num = finite_dim_Q3(*regions, rtol=rtol, budget=budget, full=True)
    prob = num.value / den
    return {"probability": prob, "numerator": num, "denominator": den} if full else prob


def finite_dim_prior_oracle(regions, k=2, grid=None, weighting="cell"):
    from .weyl_oracle import GridSpec, ProjectionChainSpec, prior_conditional_probability_oracle

    events, hbar = oracle_events(regions)
    grid = grid or GridSpec.balanced(1024, hbar)
    return prior_conditional_probability_oracle(ProjectionChainSpec(events, k), grid, weighting)


# field operators reduced to commutator pairings ---------------------------


def kg_commutator(model, t1, t2, mass=1.0, omega=1.0, hbar=1.0):
    """Pairing ``e_12`` with ``[phi(t1), phi(t2)] = i e_12`` for (0+1)-d fields.

    ``"massless"`` is the free particle position ``X(t)``; ``"oscillator"``
    the harmonic oscillator position.
    """
    if model == "massless":
        return -hbar * (t1 - t2) / mass
    if model == "oscillator":
        return hbar / (mass * omega) * math.sin(omega * (t2 - t1))
    raise ValueError(f"unknown model {model!r}")


class PairingMatrix:
    """Antisymmetric pairings stored by their strict upper triangle."""

    def __init__(self, e12, e13, e23):
        self.upper = (float(e12), float(e13), float(e23))

    @classmethod
    def from_model(cls, model, times, **params):
        t1, t2, t3 = times
        c = kg_commutator
        return cls(c(model, t1, t2, **params), c(model, t1, t3, **params), c(model, t2, t3, **params))

    @classmethod
    def from_vectors(cls, space, f1, f2, f3):
        return cls(form_eval(space, f1, f2), form_eval(space, f1, f3), form_eval(space, f2, f3))

    @property
    def e12(self):
        return self.upper[0]

    @property
    def e13(self):
        return self.upper[1]

    @property
    def e23(self):
        return self.upper[2]

    @property
    def e31(self):
        return -self.upper[1]

    @property
    def matrix(self):
        e12, e13, e23 = self.upper
        return np.array([[0.0, e12, e13], [-e12, 0.0, e23], [-e13, -e23, 0.0]])

    def scaled(self, factors):
        c1, c2, c3 = factors
        return PairingMatrix(c1 * c2 * self.e12, c1 * c3 * self.e13, c2 * c3 * self.e23)

    def __repr__(self):
        return f"PairingMatrix(e12={self.e12}, e13={self.e13}, e23={self.e23})"


def _nonzero(e, names):
    scale = max(abs(v) for v in e.upper) or 1.0
    for name in names:
        if abs(getattr(e, name)) <= 1e-12 * scale:
            raise DegeneratePairing(f"pairing {name} vanishes")


def kg_project_f3(e):
    """Coefficients ``(a1, a2)`` of the class of ``f3`` in ``span{f1, f2}``."""
    _nonzero(e, ["e12"])
    return -e.e23 / e.e12, e.e13 / e.e12


def kg_action(e, r1, r2, r3, r2p):
    """Phase difference ``S(r)`` of the two triangles for the pairings ``e``."""
    _nonzero(e, ["e12", "e23", "e13"])
    e12, e23, e31 = e.e12, e.e23, e.e31
    a = e23 * np.asarray(r1) + e31 * np.asarray(r2) + e12 * np.asarray(r3)
    b = e23 * np.asarray(r1) + e31 * np.asarray(r2p) + e12 * np.asarray(r3)
    return (a**2 - b**2) / (2 * e12 * e23 * e31)


def kg_action_geometric(e, r1, r2, r3, r2p):
    """Same phase from explicit line intersections in the plane ``span{f1, f2}``.

    ``f1 = (1, 0)`` and ``f2 = (0, e12)`` in the canonical plane, ``f3`` is
    the projected combination, and ``X_i = {xi : sigma(f_i, xi) = r_i}``.
    """
    from .symplectic_core import SymplecticSpace, line_intersection_2d

    a1, a2 = kg_project_f3(e)
    _nonzero(e, ["e23", "e13"])
    plane = SymplecticSpace.canonical(1)
    f = [np.array([1.0, 0.0]), np.array([0.0, e.e12])]
    f.append(a1 * f[0] + a2 * f[1])

    def line(i, r):
        g = f[i]
        # sigma(g, h) = 1 for h = (-g_p, g_x) / |g|^2
        h = np.array([-g[1], g[0]]) / (g @ g)
        r = np.asarray(r, dtype=float)
        return r[..., None] * h, np.broadcast_to(g, r.shape + (2,))

    def area(ra, rb, rc):
        l1, l2, l3 = line(0, ra), line(1, rb), line(2, rc)
        pts = np.stack(
            [line_intersection_2d(l1, l2), line_intersection_2d(l2, l3), line_intersection_2d(l3, l1)],
            axis=-2,
        )
        return signed_polygon_area(plane, pts)

    return area(r1, r2, r3) - area(r1, r2p, r3)


def _kg_q3(e12, e23, e31, S1, S2, S3, rtol, budget):
    """``int dA12 int dA23' exp(-i S)`` for one mode, by the factorized rule."""
    if S3.is_full:
        return QValue(S1.measure * S2.measure / (2 * math.pi * abs(e12)), method="closed-form")
    P = e12 * e23 * e31
    H = np.array(
        [[e23 * e23, e23 * e31, e23 * e12], [e31 * e23, e31 * e31, e31 * e12], [e12 * e23, e12 * e31, e12 * e12]]
    ) / P
    r = _triple_integral(H, 1, [S1], [S2], [S3], rtol, budget)
    jac = 1.0 / ((2 * math.pi) ** 2 * abs(e12) * abs(e23))
    return QValue(r.value * jac, 0.0, r.error * jac, r.evaluations, "factorized", r.trace)


def _kg_q3_brute(e, S1, S2, S3, variant, nodes, block=64):
    """Plain 4D tensor rule with ``exp(-i S)``, ``exp(+i S)`` or ``cos S``."""
    rules = [panel_rule(s, w) for s, w in zip((S1, S2, S3), nodes)]
    (x1, a1), (x2, a2), (x3, a3) = rules
    total = 0.0 + 0.0j
    for i in range(0, x1.size, block):
        r1 = x1[i:i + block, None, None, None]
        s = kg_action(e, r1, x2[None, :, None, None], x3[None, None, None, :], x2[None, None, :, None])
        if variant == "exp":
            f = np.exp(-1j * s)
        elif variant == "exp+":
            f = np.exp(1j * s)
        elif variant == "cos":
            f = np.cos(s)
        else:
            raise ValueError(f"unknown integrand variant {variant!r}")
        w = a1[i:i + block, None, None, None] * a2[None, :, None, None] * a2[None, None, :, None] * a3[None, None, None, :]
        total += np.sum(w * f)
    jac = 1.0 / ((2 * math.pi) ** 2 * abs(e.e12) * abs(e.e23))
    return total * jac


def kg_prior_probability(
    e, S1, S2, S3, hbar=1.0, variant="exp", rtol=DEFAULT_RTOL, budget=DEFAULT_BUDGET, full=False
):
    """Prior probability of ``phi(f3) in S3`` after ``phi(f1) in S1``, ``phi(f2) in S2``.

    Parameters
    ----------
    e : PairingMatrix
        Commutator pairings in units of ``hbar``: ``[phi_i, phi_j] = i hbar e_ij``.
        Pairings from :func:`kg_commutator` already carry ``hbar``; pass them
        with the default ``hbar=1``.
    variant : {"exp", "cos"}
        ``"exp"`` evaluates the factorized rule; ``"cos"`` runs a plain 4D
        tensor rule on ``cos S`` as an independent check.
    """
    if hbar != 1.0:
        e = PairingMatrix(*(hbar * v for v in e.upper))
    S1, S2, S3 = (IntervalUnion.coerce(s) for s in (S1, S2, S3))
    _nonzero(e, ["e12", "e23", "e13"])
    for s in (S1, S2):
        if not s.is_bounded:
            raise UnboundedConditionSet("S1 and S2 must be bounded")
    if S1.is_empty or S2.is_empty:
        raise ZeroDenominator("condition sets are null")
    if not (S3.is_bounded or S3.is_full):
        raise QuadratureNotConverged("S3 must be bounded or the whole line")
    q2 = S1.measure * S2.measure / (2 * math.pi * abs(e.e12))
    if S3.is_empty:
        q3 = QValue(0.0, method="empty")
    elif variant == "exp":
        q3 = _kg_q3(e.e12, e.e23, e.e31, S1, S2, S3, rtol, budget)
    else:
        ref = _kg_q3(e.e12, e.e23, e.e31, S1, S2, S3, rtol, budget)
        if S3.is_full:
            q3 = ref
        else:
            level = ref.trace[-1][0]
            val = None
            for lv in (level, level + 1):
                widths = []
                for s, f in zip((S1, S2, S3), _kg_freqs(e, S1, S2, S3)):
                    lo, hi = s.hull
                    widths.append(min(hi - lo, 2 * math.pi / f if f > 0 else math.inf) / 2**lv)
                prev, val = val, _kg_q3_brute(e, S1, S2, S3, variant, widths)
            q3 = QValue(float(val.real), float(val.imag), abs(val - prev), 0, f"tensor-{variant}")
    prob = q3.value / q2
    return {"probability": prob, "numerator": q3, "denominator": q2} if full else prob


def _kg_freqs(e, S1, S2, S3):
    P = abs(e.e12 * e.e23 * e.e31)
    ext = [max(abs(v) for v in s.hull) for s in (S1, S2, S3)]
    c = abs(e.e23) * ext[0] + abs(e.e31) * ext[1] + abs(e.e12) * ext[2]
    return [abs(e.e23) * c / P, abs(e.e31) * c / P, abs(e.e12) * c / P]
