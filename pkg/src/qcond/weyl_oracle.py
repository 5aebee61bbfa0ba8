"""Brute-force oracle: a discretized Weyl pair and matrix traces.

Position and momentum live on an ``N`` point periodic grid linked by the
unitary DFT. Spectral projections of rotated or free-evolved quadratures are
obtained by conjugating with the corresponding grid unitaries.

Two discretizations of a spectral projection are offered:

``"sharp"``
    point sampling of the indicator, a true orthogonal projection;
``"cell"``
    each grid point carries the fraction of its cell covered by the set.
    The result is an effect ``0 <= E <= 1`` rather than a projection, but
    ``Tr E_Q(S) E_P(T)`` is exactly ``|S| |T| / 2 pi hbar`` on any grid whose
    range covers ``S`` and ``T``. The sharp version has an O(1) error in the
    momentum count whenever ``|T|`` is comparable to the momentum spacing.

Rotated, free-evolved and sheared quadratures spread a grid point over
``|t| p_max`` in position. Without wrap-around this needs equal position and
momentum ranges, i.e. :meth:`GridSpec.balanced`; the sheared branches keep
the effective shear at most one so balanced grids always suffice.

Chain traces reduce words with ``E E = E`` before substituting the
discretization, so the same algebraic expression is evaluated for both.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InvalidGrid, UnboundedFirstSet, UnknownDescriptor, ZeroDenominator
from .regions import IntervalUnion

DENOMINATOR_CUTOFF = 1e-12
WEIGHTINGS = ("cell", "sharp")


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid ``x_j = (j - N/2) L / N`` with momenta ``2 pi hbar k / L``."""

    n_points: int
    extent: float
    hbar: float = 1.0

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or n < 64 or n & (n - 1):
            raise InvalidGrid(f"n_points must be a power of two >= 64, got {n}")
        if not self.extent > 0 or not math.isfinite(self.extent):
            raise InvalidGrid(f"extent must be positive, got {self.extent}")
        if not self.hbar > 0:
            raise InvalidGrid(f"hbar must be positive, got {self.hbar}")

    @classmethod
    def balanced(cls, n_points, hbar=1.0):
        """Grid with equal position and momentum spacing ``sqrt(2 pi hbar / N)``."""
        return cls(n_points, math.sqrt(2 * math.pi * hbar * n_points), hbar)

    @property
    def dx(self):
        return self.extent / self.n_points

    @property
    def dp(self):
        return 2 * math.pi * self.hbar / self.extent

    @property
    def x(self):
        return (np.arange(self.n_points) - self.n_points // 2) * self.dx

    @property
    def p(self):
        """Momenta in FFT order (signed)."""
        return self.dp * np.fft.fftfreq(self.n_points, 1.0 / self.n_points)


# descriptors --------------------------------------------------------------


@dataclass(frozen=True)
class Position:
    pass


@dataclass(frozen=True)
class Momentum:
    pass


@dataclass(frozen=True)
class Rotated:
    """Heisenberg position ``X cos(theta) + P sin(theta) / (m omega)`` at ``theta = omega t``."""

    theta: float
    mass: float = 1.0
    omega: float = 1.0


@dataclass(frozen=True)
class FreeEvolved:
    """Free-particle Heisenberg position ``X + P t / m``."""

    time: float
    mass: float = 1.0


@dataclass(frozen=True)
class Quadrature:
    """Linear combination ``alpha Q + beta P``."""

    alpha: float
    beta: float


def parse_descriptor(obj):
    """Accept a descriptor instance, a name, or a mapping with a ``kind`` key."""
    if isinstance(obj, (Position, Momentum, Rotated, FreeEvolved, Quadrature)):
        return obj
    if isinstance(obj, str):
        key = obj.strip().lower()
        if key in ("position", "q", "x"):
            return Position()
        if key in ("momentum", "p"):
            return Momentum()
        raise UnknownDescriptor(f"unknown observable {obj!r}")
    if isinstance(obj, dict):
        kind = str(obj.get("kind", "")).lower()
        try:
            if kind in ("position", "momentum", "q", "p", "x"):
                return parse_descriptor(kind)
            if kind == "rotated":
                return Rotated(float(obj["theta"]), float(obj.get("mass", 1.0)), float(obj.get("omega", 1.0)))
            if kind in ("free-evolved", "free_evolved"):
                return FreeEvolved(float(obj["time"]), float(obj.get("mass", 1.0)))
            if kind == "quadrature":
                return Quadrature(float(obj["alpha"]), float(obj["beta"]))
        except KeyError as exc:
            raise UnknownDescriptor(f"descriptor {obj!r} lacks field {exc}") from None
        raise UnknownDescriptor(f"unknown observable kind {kind!r}")
    raise UnknownDescriptor(f"cannot interpret {obj!r} as an observable")


@dataclass
class GridOperator:
    """Dense ``N x N`` operator in the position-grid basis."""

    matrix: np.ndarray
    basis: str = "position"

    def trace(self):
        return complex(np.trace(self.matrix))

    def __matmul__(self, other):
        return GridOperator(self.matrix @ other.matrix, self.basis)

    @property
    def H(self):
        return GridOperator(self.matrix.conj().T, self.basis)

    def state_factors(self):
        """Cached ``(weights, vectors)`` with ``matrix = sum_i w_i v_i v_i^dagger``."""
        cached = self.__dict__.get("_factors")
        if cached is None:
            m = np.asarray(self.matrix)
            lam, vec = np.linalg.eigh(0.5 * (m + m.conj().T))
            keep = lam > 1e-14 * max(lam.max(), 1e-300)
            cached = (lam[keep], vec[:, keep])
            self.__dict__["_factors"] = cached
        return cached


# grid unitaries -----------------------------------------------------------


def _fft(v):
    return np.fft.fft(v, axis=0, norm="ortho")


def _ifft(v):
    return np.fft.ifft(v, axis=0, norm="ortho")


@lru_cache(maxsize=4)
def _oscillator_eigensystem(n_points, extent, hbar, mass, omega):
    """Eigenpairs of the grid Hamiltonian ``P^2 / 2m + m omega^2 Q^2 / 2``."""
    grid = GridSpec(n_points, extent, hbar)
    kin = _ifft((grid.p**2 / (2 * mass))[:, None] * _fft(np.eye(n_points)))
    h = kin.real + np.diag(0.5 * mass * omega**2 * grid.x**2)
    h = 0.5 * (h + h.T)
    evals, vecs = np.linalg.eigh(h)
    evals.setflags(write=False)
    vecs.setflags(write=False)
    return evals, vecs


def oscillator_propagator_matrix(grid, t, mass=1.0, omega=1.0):
    """Grid matrix of ``exp(-i t H / hbar)`` for the harmonic oscillator."""
    evals, vecs = _oscillator_eigensystem(grid.n_points, grid.extent, grid.hbar, mass, omega)
    return (vecs * np.exp(-1j * evals * t / grid.hbar)) @ vecs.T


class _Effect:
    """``E = U^dagger diag(w) U`` applied matrix-free."""

    def __init__(self, grid, descriptor, S, weighting):
        if weighting not in WEIGHTINGS:
            raise ValueError(f"weighting must be one of {WEIGHTINGS}")
        self.key = (descriptor, S, weighting)
        d = descriptor
        S = IntervalUnion.coerce(S)
        eig_grid, delta = grid.x, grid.dx
        self.to_eig = self.from_eig = None
        if isinstance(d, Rotated) and d.theta == 0.0:
            d = Position()
        if isinstance(d, Position):
            pass
        elif isinstance(d, Momentum):
            self.to_eig, self.from_eig = _fft, _ifft
            eig_grid, delta = grid.p, grid.dp
        elif isinstance(d, FreeEvolved) or (isinstance(d, Quadrature) and abs(d.alpha) >= abs(d.beta)):
            if isinstance(d, Quadrature):
                # alpha Q + beta P = alpha (Q + s P), a free evolution with m = 1
                S = S.scale(1.0 / d.alpha)
                tm = d.beta / d.alpha
            else:
                tm = d.time / d.mass
            phase = np.exp(-0.5j * tm * grid.p**2 / grid.hbar)[:, None]
            self.to_eig = lambda v: _ifft(phase * _fft(v))
            self.from_eig = lambda v: _ifft(phase.conj() * _fft(v))
        elif isinstance(d, Quadrature):
            # beta (P + c Q) with P + c Q = V^dagger P V, V = exp(i c Q^2 / 2 hbar)
            S = S.scale(1.0 / d.beta)
            c = d.alpha / d.beta
            chirp = np.exp(0.5j * c * grid.x**2 / grid.hbar)[:, None]
            self.to_eig = lambda v: _fft(chirp * v)
            self.from_eig = lambda v: chirp.conj() * _ifft(v)
            eig_grid, delta = grid.p, grid.dp
        elif isinstance(d, Rotated):
            if not d.omega > 0:
                raise UnknownDescriptor("rotated quadrature needs omega > 0")
            evals, vecs = _oscillator_eigensystem(grid.n_points, grid.extent, grid.hbar, d.mass, d.omega)
            ph = np.exp(-1j * evals * (d.theta / d.omega) / grid.hbar)[:, None]
            self.to_eig = lambda v: vecs @ (ph * (vecs.T @ v))
            self.from_eig = lambda v: vecs @ (ph.conj() * (vecs.T @ v))
        else:
            raise UnknownDescriptor(f"unsupported observable {d!r}")
        if weighting == "sharp":
            w = S.contains(eig_grid).astype(float)
        else:
            w = S.overlap(eig_grid - 0.5 * delta, eig_grid + 0.5 * delta) / delta
            # cells fully inside S must weigh exactly 1 despite rounding
            w[np.abs(w - 1.0) < 1e-12] = 1.0
        self.weights = w
        self.is_identity = bool(np.all(w == 1.0))

    def forward(self, v):
        return v if self.to_eig is None else self.to_eig(v)

    def backward(self, v):
        return v if self.from_eig is None else self.from_eig(v)

    def apply(self, v):
        return self.backward(self.weights[:, None] * self.forward(v))


def build_weyl_pair(grid):
    """Dense position and momentum operators on ``grid``."""
    if not isinstance(grid, GridSpec):
        raise InvalidGrid("expected a GridSpec")
    Q = np.diag(grid.x).astype(complex)
    P = _ifft(grid.p[:, None] * _fft(np.eye(grid.n_points)))
    return GridOperator(Q), GridOperator(P)


def spectral_projection(descriptor, S, grid, weighting="sharp"):
    """Dense spectral projection (or cell effect) of an observable.

    Parameters
    ----------
    descriptor : Position, Momentum, Rotated, FreeEvolved, Quadrature or name
    S : IntervalUnion-like
    grid : GridSpec
    weighting : {"sharp", "cell"}
    """
    eff = _Effect(grid, parse_descriptor(descriptor), IntervalUnion.coerce(S), weighting)
    return GridOperator(eff.apply(np.eye(grid.n_points, dtype=complex)))


@dataclass(frozen=True)
class ProjectionChainSpec:
    """Ordered measurement events; the first ``split`` form the condition."""

    events: tuple
    split: int

    def __post_init__(self):
        ev = tuple((parse_descriptor(d), IntervalUnion.coerce(s)) for d, s in self.events)
        object.__setattr__(self, "events", ev)
        if not 1 <= self.split < len(ev):
            raise ValueError(f"split must satisfy 1 <= k < {len(ev)}, got {self.split}")
        if not ev[0][1].is_bounded:
            raise UnboundedFirstSet("the first measured set must be bounded")


def _reduce(word, cyclic):
    out = []
    for eff in word:
        if eff.is_identity:
            continue
        if out and out[-1].key == eff.key:
            continue
        out.append(eff)
    while cyclic and len(out) > 1 and out[0].key == out[-1].key:
        out.pop()
    return out


def _apply_word(word, v):
    for eff in reversed(word):
        v = eff.apply(v)
    return v


def _cyclic_trace(grid, word, block=256):
    """``Tr(E_1 E_2 ... E_m)`` using only the support of ``E_1``."""
    if not word:
        raise UnboundedFirstSet("trace of the identity is infinite")
    first, rest = word[0], word[1:]
    idx = np.flatnonzero(first.weights)
    if idx.size == grid.n_points and not rest:
        raise UnboundedFirstSet("trace of a full-range effect is infinite")
    total = 0.0 + 0.0j
    for start in range(0, idx.size, block):
        cols = idx[start:start + block]
        e = np.zeros((grid.n_points, cols.size), dtype=complex)
        e[cols, np.arange(cols.size)] = 1.0
        v = _apply_word(rest, first.backward(e))
        diag = first.forward(v)[cols, np.arange(cols.size)]
        total += np.sum(first.weights[cols] * diag)
    return total


def _state_trace(rho, word):
    if not isinstance(rho, GridOperator):
        rho = GridOperator(np.asarray(rho))
    lam, vec = rho.state_factors()
    w = _apply_word(word, vec)
    return complex(np.sum(lam * np.einsum("ij,ij->j", vec.conj(), w)))


def _effects(grid, events, weighting):
    return [_Effect(grid, parse_descriptor(d), IntervalUnion.coerce(s), weighting) for d, s in events]


def chain_trace(grid, events, weighting="cell"):
    """``Tr A^dagger A`` for ``A = E_1 ... E_m`` (the unnormalized prior weight)."""
    eff = _effects(grid, events, weighting)
    word = _reduce(eff + eff[::-1], cyclic=True)
    return _cyclic_trace(grid, word).real


def prior_conditional_probability_oracle(chain, grid, weighting="cell", return_parts=False):
    """``Tr (AB)^dagger AB / Tr A^dagger A`` on the grid."""
    k = chain.split
    num = chain_trace(grid, chain.events, weighting)
    den = chain_trace(grid, chain.events[:k], weighting)
    if not den > DENOMINATOR_CUTOFF:
        raise ZeroDenominator(f"condition weight {den:.3e} below cutoff")
    prob = num / den
    return (prob, num, den) if return_parts else prob


def conditional_probability(rho, chain, grid, weighting="cell", return_parts=False):
    """``Tr (AB)^dagger rho AB / Tr A^dagger rho A`` for a density operator ``rho``."""
    k = chain.split
    eff = _effects(grid, chain.events, weighting)
    num = _state_trace(rho, _reduce(eff + eff[::-1], cyclic=False)).real
    cond = eff[:k]
    den = _state_trace(rho, _reduce(cond + cond[::-1], cyclic=False)).real
    if not den > DENOMINATOR_CUTOFF:
        raise ZeroDenominator(f"condition probability {den:.3e} below cutoff")
    prob = num / den
    return (prob, num, den) if return_parts else prob


# states -------------------------------------------------------------------


def pure_state(psi):
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return GridOperator(np.outer(psi, psi.conj()))


def gaussian_vector(grid, x0=0.0, p0=0.0, width=None, mass=1.0, omega=1.0):
    """Normalized Gaussian wavepacket; ``width`` defaults to the oscillator length."""
    if width is None:
        width = math.sqrt(grid.hbar / (mass * omega))
    x = grid.x
    psi = np.exp(-0.5 * ((x - x0) / width) ** 2 + 1j * p0 * x / grid.hbar)
    return psi / np.linalg.norm(psi)


def ground_state(grid, mass=1.0, omega=1.0):
    return pure_state(gaussian_vector(grid, mass=mass, omega=omega))


def coherent_state(grid, x0, p0, mass=1.0, omega=1.0):
    return pure_state(gaussian_vector(grid, x0, p0, mass=mass, omega=omega))


def thermal_state(grid, beta, mass=1.0, omega=1.0):
    """Gibbs state of the grid oscillator at inverse temperature ``beta``."""
    evals, vecs = _oscillator_eigensystem(grid.n_points, grid.extent, grid.hbar, mass, omega)
    w = np.exp(-beta * (evals - evals[0]))
    w /= w.sum()
    return GridOperator(((vecs * w) @ vecs.T).astype(complex))
