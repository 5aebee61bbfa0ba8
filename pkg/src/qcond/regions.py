"""Observable phase-space regions and their Lebesgue measures.

A :class:`GeneratedRegion` is the set ``{xi : (sigma(f_1, xi), ..., sigma(f_k, xi)) in S}``
for pairwise sigma-orthogonal generators ``f_i`` and a product ``S`` of
interval unions. Its spectral projection is the joint spectral projection of
the commuting field operators ``phi(f_i)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimension, MissingSupportTags, NotLagrangian
from .symplectic_core import (
    RANK_TOL,
    Subspace,
    SubspaceKind,
    _rref,
    classify_subspace,
    complement,
    form_eval,
    functional_generator,
    is_lagrangian,
)

INF = math.inf


def _endpoint(v):
    if isinstance(v, str):
        key = v.strip().lower()
        if key in ("inf", "+inf", "infinity", "+infinity"):
            return INF
        if key in ("-inf", "-infinity"):
            return -INF
    return float(v)


@dataclass(frozen=True)
class IntervalUnion:
    """Finite union of half-open intervals ``[a, b)``.

    Intervals are sorted, disjoint and merged when they touch, so two unions
    that agree up to a null set of endpoints compare equal.
    """

    intervals: tuple = ()

    def __post_init__(self):
        raw = []
        for a, b in self.intervals:
            a, b = _endpoint(a), _endpoint(b)
            if math.isnan(a) or math.isnan(b):
                raise ValueError("interval endpoints must not be NaN")
            if a < b:
                raw.append((a, b))
        raw.sort()
        merged = []
        for a, b in raw:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        object.__setattr__(self, "intervals", tuple(merged))

    @classmethod
    def interval(cls, a, b):
        return cls(((a, b),))

    @classmethod
    def full(cls):
        return cls(((-INF, INF),))

    @classmethod
    def empty(cls):
        return cls(())

    @classmethod
    def symmetric(cls, center, half_width):
        return cls(((center - half_width, center + half_width),))

    @classmethod
    def coerce(cls, obj):
        """Build from an IntervalUnion, a pair ``(a, b)``, a list of pairs or ``"R"``."""
        if isinstance(obj, IntervalUnion):
            return obj
        if isinstance(obj, str):
            if obj.strip().lower() in ("r", "full", "real", "reals"):
                return cls.full()
            if obj.strip().lower() in ("empty", "none"):
                return cls.empty()
            raise ValueError(f"cannot read interval union from {obj!r}")
        items = list(obj)
        if len(items) == 2 and not isinstance(items[0], (list, tuple)):
            return cls.interval(*items)
        return cls(tuple(tuple(p) for p in items))

    def to_json(self):
        def enc(v):
            return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")

        return [[enc(a), enc(b)] for a, b in self.intervals]

    @property
    def measure(self):
        return sum(b - a for a, b in self.intervals)

    @property
    def is_empty(self):
        return not self.intervals

    @property
    def is_full(self):
        return self.intervals == ((-INF, INF),)

    @property
    def is_bounded(self):
        return all(math.isfinite(a) and math.isfinite(b) for a, b in self.intervals)

    @property
    def hull(self):
        if not self.intervals:
            return (0.0, 0.0)
        return (self.intervals[0][0], self.intervals[-1][1])

    def intersect(self, other):
        other = IntervalUnion.coerce(other)
        out = []
        for a, b in self.intervals:
            for c, d in other.intervals:
                lo, hi = max(a, c), min(b, d)
                if lo < hi:
                    out.append((lo, hi))
        return IntervalUnion(tuple(out))

    def union(self, other):
        other = IntervalUnion.coerce(other)
        return IntervalUnion(self.intervals + other.intervals)

    def shift(self, c):
        return IntervalUnion(tuple((a + c, b + c) for a, b in self.intervals))

    def scale(self, c):
        """Image under ``t -> c t``. Negative factors reverse the intervals."""
        if c == 0:
            raise ValueError("cannot scale an interval union by zero")
        if c > 0:
            return IntervalUnion(tuple((a * c, b * c) for a, b in self.intervals))
        return IntervalUnion(tuple((b * c, a * c) for a, b in self.intervals))

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (x >= a) & (x < b)
        return out

    def overlap(self, lo, hi):
        """Length of ``[lo, hi) & self``, vectorized over arrays of cells."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        out = np.zeros(np.broadcast(lo, hi).shape)
        for a, b in self.intervals:
            out += np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
        return out

    def __repr__(self):
        return f"IntervalUnion({list(self.intervals)})"


class GeneratedRegion:
    """Region cut out by sigma-orthogonal generators and a box of sets.

    Parameters
    ----------
    space : SymplecticSpace
    generators : array_like, shape (k, 2n)
    sets : sequence of IntervalUnion-like, length k
        ``sets[i]`` constrains the coordinate ``sigma(generators[i], xi)``.
    support_tags : sequence of str, optional
        Opaque labels naming where each generator is supported.
    """

    def __init__(self, space, generators, sets, support_tags=None):
        g = np.atleast_2d(np.asarray(generators, dtype=float))
        if g.shape[1] != space.dim:
            raise InvalidDimension(f"generators must have length {space.dim}")
        sets = tuple(IntervalUnion.coerce(s) for s in sets)
        if len(sets) != g.shape[0]:
            raise InvalidDimension("need exactly one set per generator")
        if _rref(g).shape[0] != g.shape[0]:
            raise InvalidDimension("generators are linearly dependent")
        norms = np.linalg.norm(g, axis=1)
        pair = g @ space.form @ g.T
        scale = np.outer(norms, norms) * max(1.0, float(np.max(np.abs(space.form))))
        if np.any(np.abs(pair) > RANK_TOL * scale):
            raise InvalidDimension("generators are not pairwise sigma-orthogonal")
        if support_tags is not None:
            support_tags = tuple(support_tags)
            if len(support_tags) != g.shape[0]:
                raise InvalidDimension("need one support tag per generator")
        g.setflags(write=False)
        self.space = space
        self.generators = g
        self.sets = sets
        self.support_tags = support_tags

    @classmethod
    def from_functionals(cls, space, functionals, sets, support_tags=None):
        """Region ``{xi : functionals[i] @ xi in sets[i]}``."""
        fun = np.atleast_2d(np.asarray(functionals, dtype=float))
        gens = np.array([functional_generator(space, f) for f in fun])
        return cls(space, gens, sets, support_tags)

    @property
    def k(self):
        return self.generators.shape[0]

    def coordinates(self, xi):
        """Generator coordinates ``sigma(f_i, xi)`` of the points ``xi``."""
        return np.asarray(xi, dtype=float) @ (self.generators @ self.space.form).T

    def contains(self, xi):
        r = self.coordinates(xi)
        ok = np.ones(r.shape[:-1], dtype=bool)
        for i, s in enumerate(self.sets):
            ok &= s.contains(r[..., i])
        return ok

    @property
    def is_empty(self):
        return any(s.is_empty for s in self.sets)

    def transformed(self, M=None, shift=None):
        """Image of the region under ``xi -> M xi + shift`` with ``M`` symplectic."""
        g = self.generators if M is None else self.generators @ np.asarray(M, float).T
        sets = list(self.sets)
        if shift is not None:
            off = form_eval(self.space, g, np.asarray(shift, float))
            sets = [s.shift(float(c)) for s, c in zip(sets, off)]
        return GeneratedRegion(self.space, g, sets, self.support_tags)

    def rescaled(self, factors):
        """Same set, generators ``c_i f_i`` and sets ``c_i S_i``."""
        factors = np.asarray(factors, dtype=float)
        g = self.generators * factors[:, None]
        sets = [s.scale(float(c)) for s, c in zip(self.sets, factors)]
        return GeneratedRegion(self.space, g, sets, self.support_tags)

    def __repr__(self):
        return f"GeneratedRegion(k={self.k}, sets={list(self.sets)})"


def _active(B):
    """Generators and sets of the coordinates that are not all of the reals."""
    idx = [i for i, s in enumerate(B.sets) if not s.is_full]
    return B.generators[idx], [B.sets[i] for i in idx]


def invariant_subspace(B):
    """Subspace of translations leaving ``B`` invariant."""
    g, _ = _active(B)
    return complement(B.space, Subspace(B.space, g))


def is_observable(B):
    kind = classify_subspace(B.space, invariant_subspace(B))
    return kind in (SubspaceKind.COISOTROPIC, SubspaceKind.LAGRANGIAN)


def _grouped_constraints(regions):
    """Merge parallel generator constraints of several regions.

    Returns a list of ``(generator, IntervalUnion)`` with pairwise
    non-parallel generators; parallel constraints are intersected after
    rescaling to a common generator.
    """
    groups = []
    for B in regions:
        g, sets = _active(B)
        for gi, si in zip(g, sets):
            for j, (h, sh) in enumerate(groups):
                if _rref(np.vstack([h, gi])).shape[0] == 1:
                    c = float(gi @ h / (h @ h))
                    groups[j] = (h, sh.intersect(si.scale(1.0 / c)))
                    break
            else:
                groups.append((gi, si))
    return groups


def lebesgue_measure(*regions):
    """Normalized Lebesgue measure of the intersection of regions.

    The measure is ``(2 pi)^-n sigma^n / n!``. The intersection has to be a
    box in generator coordinates: after merging parallel constraints there
    must be at most ``2n`` independent generators. Fewer than ``2n`` means an
    unbounded region, reported as ``inf`` unless the region is empty.
    """
    if not regions:
        raise InvalidDimension("need at least one region")
    space = regions[0].space
    groups = _grouped_constraints(regions)
    if any(s.is_empty for _, s in groups):
        return 0.0
    if len(groups) < space.dim:
        return INF
    G = np.array([g for g, _ in groups])
    if len(groups) > space.dim or _rref(G).shape[0] < space.dim:
        raise InvalidDimension("intersection is not a box in generator coordinates")
    vol = 1.0
    for _, s in groups:
        vol *= s.measure
    if not math.isfinite(vol):
        return INF
    return vol / ((2 * math.pi) ** space.n * abs(np.linalg.det(G)) * space.pfaffian_abs)


def lagrangian_overlap_trace(B1, B2):
    """``Tr E(B1) E(B2)`` for Lagrangian observable regions.

    In the symplectic frame adapted to the two invariant subspaces
    the intersection is a product of the two boxes. Returns ``inf``
    when the invariant subspaces meet or a box is unbounded.
    """
    space = B1.space
    if B1.is_empty or B2.is_empty:
        return 0.0
    L = []
    for name, B in (("B1", B1), ("B2", B2)):
        W = invariant_subspace(B)
        if not is_lagrangian(space, W):
            raise NotLagrangian(f"{name} is not a Lagrangian observable region")
        L.append(W)
    if _rref(np.vstack([L[0].basis, L[1].basis])).shape[0] < space.dim:
        return INF
    if not all(s.is_bounded for s in B1.sets + B2.sets):
        return INF
    g1, s1 = _active(B1)
    g2, s2 = _active(B2)
    # In the adapted frame g1 = C e and g2 = D f, so the two boxes constrain
    # C p and -D x and the overlap is a product. The Jacobian |det C det D|
    # equals |det(g1 sigma g2^T)|; both orders are multiplied so the result is
    # exactly symmetric in B1, B2.
    jac = math.sqrt(abs(np.linalg.det(g1 @ space.form @ g2.T) * np.linalg.det(g2 @ space.form @ g1.T)))
    vol = math.prod(sorted((math.prod(s.measure for s in s1), math.prod(s.measure for s in s2))))
    return vol / ((2 * math.pi) ** space.n * jac)


def domain_of(B):
    """Union of support tags of the generators that actually constrain ``B``.

    Coordinates whose set is all of the reals do not constrain the region and
    are left out.
    """
    tags = B.support_tags
    if tags is None or any(t is None for t in tags):
        raise MissingSupportTags("every generator needs a support tag")
    return {t for t, s in zip(tags, B.sets) if not s.is_full}


def strip(space, k, which, S):
    """Canonical strip ``{x_k in S}`` or ``{p_k in S}`` (``which`` is 'x' or 'p')."""
    fun = np.zeros(space.dim)
    fun[k if which == "x" else space.n + k] = 1.0
    return GeneratedRegion.from_functionals(space, [fun], [S])
