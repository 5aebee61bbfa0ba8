"""Finite-dimensional symplectic linear algebra.

Vectors are plain numpy arrays of length ``2n``. Subspaces are stored in a
canonical reduced row echelon form so that equality, containment and rank
decisions all go through the same tolerance.
"""

from collections import namedtuple
from enum import Enum

import numpy as np
from scipy.linalg import expm, null_space

from .errors import (
    FewerThanThreePoints,
    InvalidDimension,
    NotLagrangian,
    NotTransverse,
    ParallelLines,
    SingularGraph,
)

ANTISYM_TOL = 1e-12
RANK_TOL = 1e-10
FRAME_TOL = 1e-10


class SymplecticSpace:
    """Real vector space of dimension ``2n`` with a symplectic form.

    Parameters
    ----------
    form : array_like, shape (2n, 2n)
        Antisymmetric nondegenerate matrix ``sigma`` with
        ``sigma(u, v) = u @ form @ v``.
    frame_labels : sequence of str, optional
        Names for the basis vectors.

    Raises
    ------
    InvalidDimension
        If the form is not square, not of even size, not antisymmetric or
        degenerate.
    """

    def __init__(self, form, frame_labels=None):
        form = np.array(form, dtype=float)
        if form.ndim != 2 or form.shape[0] != form.shape[1]:
            raise InvalidDimension(f"form must be square, got shape {form.shape}")
        dim = form.shape[0]
        if dim == 0 or dim % 2:
            raise InvalidDimension(f"symplectic dimension must be even and positive, got {dim}")
        if np.max(np.abs(form + form.T)) > ANTISYM_TOL:
            raise InvalidDimension("form is not antisymmetric")
        scaled = form / np.max(np.abs(form), axis=1, keepdims=True).clip(min=1e-300)
        if abs(np.linalg.det(scaled)) <= RANK_TOL:
            raise InvalidDimension("form is degenerate")
        if frame_labels is not None:
            frame_labels = tuple(frame_labels)
            if len(frame_labels) != dim:
                raise InvalidDimension("frame_labels length does not match dimension")
        form.setflags(write=False)
        self.form = form
        self.frame_labels = frame_labels

    @classmethod
    def canonical(cls, n, hbar=1.0):
        """Canonical space with basis ``(e_1..e_n, f_1..f_n)``.

        The form is ``J / hbar``, so ``sigma(e_k, f_l) = delta_kl / hbar`` and
        the normalized volume ``(2 pi)^-n sigma^n / n!`` becomes
        ``dx dp / (2 pi hbar)^n`` in the canonical coordinates. The generator
        whose coordinate functional is ``x_k`` is then ``-hbar f_k`` and the
        one for ``p_k`` is ``hbar e_k``; their pairing is ``hbar``.
        """
        eye = np.eye(n)
        zero = np.zeros((n, n))
        form = np.block([[zero, eye], [-eye, zero]]) / hbar
        labels = [f"e{k + 1}" for k in range(n)] + [f"f{k + 1}" for k in range(n)]
        return cls(form, labels)

    @property
    def dim(self):
        return self.form.shape[0]

    @property
    def n(self):
        return self.dim // 2

    @property
    def pfaffian_abs(self):
        """|Pf(sigma)|, the density of ``sigma^n / n!`` in the given basis."""
        return float(np.sqrt(abs(np.linalg.det(self.form))))

    def __repr__(self):
        return f"SymplecticSpace(dim={self.dim})"


def _check_vec(space, u):
    u = np.asarray(u, dtype=float)
    if u.shape[-1:] != (space.dim,):
        raise InvalidDimension(f"expected vectors of length {space.dim}, got shape {u.shape}")
    return u


def form_eval(space, u, v):
    """Evaluate ``sigma(u, v) = u^T form v``.

    Broadcasts over leading axes, so ``u`` and ``v`` may be stacks of vectors.
    """
    u = _check_vec(space, u)
    v = _check_vec(space, v)
    return np.einsum("...i,ij,...j->...", u, space.form, v)


def _rref(rows, tol=RANK_TOL):
    """Reduced row echelon form with partial pivoting.

    Rows are first scaled to unit max-norm so the absolute tolerance means the
    same thing for every generator.
    """
    a = np.array(rows, dtype=float, copy=True)
    if a.size == 0:
        return a.reshape(0, a.shape[-1] if a.ndim == 2 else 0)
    norms = np.max(np.abs(a), axis=1, keepdims=True)
    keep = norms[:, 0] > tol
    a = a[keep] / norms[keep]
    m, ncol = a.shape
    r = 0
    for c in range(ncol):
        if r == m:
            break
        piv = r + int(np.argmax(np.abs(a[r:, c])))
        if abs(a[piv, c]) <= tol:
            a[r:, c] = 0.0
            continue
        a[[r, piv]] = a[[piv, r]]
        a[r] /= a[r, c]
        others = np.arange(m) != r
        a[others] -= np.outer(a[others, c], a[r])
        r += 1
    out = a[:r]
    out[np.abs(out) < 1e-15] = 0.0
    return out


class Subspace:
    """Linear subspace of a :class:`SymplecticSpace` given by generators.

    Dependent generators are allowed on input; ``basis`` holds the canonical
    independent rows and ``generators`` the rows as supplied (deduplicated to
    an independent subset when possible).
    """

    def __init__(self, ambient, generators):
        self.ambient = ambient
        g = np.asarray(generators, dtype=float).reshape(-1, ambient.dim)
        self.generators = g
        self.basis = _rref(g)

    @property
    def dim(self):
        return self.basis.shape[0]

    def contains(self, v, tol=RANK_TOL):
        v = _check_vec(self.ambient, v)
        if self.dim == 0:
            return bool(np.max(np.abs(v)) <= tol)
        return _rref(np.vstack([self.basis, v])).shape[0] == self.dim

    def __eq__(self, other):
        if not isinstance(other, Subspace) or other.ambient.dim != self.ambient.dim:
            return NotImplemented
        if other.dim != self.dim:
            return False
        return bool(np.allclose(self.basis, other.basis, atol=1e-8))

    def __repr__(self):
        return f"Subspace(dim={self.dim} in {self.ambient.dim})"


class SubspaceKind(str, Enum):
    ISOTROPIC = "isotropic"
    COISOTROPIC = "coisotropic"
    LAGRANGIAN = "lagrangian"
    SYMPLECTIC = "symplectic"
    NONE = "none"


def span(space, *vectors):
    return Subspace(space, np.atleast_2d(np.array(vectors, dtype=float)))


def complement(space, W):
    """Symplectic complement ``W^perp = {f : sigma(f, g) = 0 for g in W}``."""
    if W.ambient.dim != space.dim:
        raise InvalidDimension("subspace lives in a different space")
    if W.dim == 0:
        return Subspace(space, np.eye(space.dim))
    ns = null_space(W.basis @ space.form.T, rcond=RANK_TOL)
    return Subspace(space, ns.T)


def _isotropic(space, basis):
    if basis.shape[0] == 0:
        return True
    return float(np.max(np.abs(basis @ space.form @ basis.T))) <= RANK_TOL * max(
        1.0, float(np.max(np.abs(space.form)))
    )


def subspace_flags(space, W):
    """Return a dict of the four boolean properties of ``W``."""
    comp = complement(space, W)
    iso = _isotropic(space, W.basis)
    coiso = _isotropic(space, comp.basis)
    if W.dim == 0:
        sym = True
    else:
        gram = W.basis @ space.form @ W.basis.T
        sym = np.linalg.matrix_rank(gram, tol=RANK_TOL) == W.dim
    return {
        "isotropic": iso,
        "coisotropic": coiso,
        "lagrangian": iso and coiso,
        "symplectic": bool(sym),
    }


def classify_subspace(space, W):
    """Single label for ``W``.

    Precedence is lagrangian, isotropic, coisotropic, symplectic. The zero
    subspace is therefore reported as isotropic and the whole space as
    coisotropic; use :func:`subspace_flags` to see every property.
    """
    flags = subspace_flags(space, W)
    for kind in ("lagrangian", "isotropic", "coisotropic", "symplectic"):
        if flags[kind]:
            return SubspaceKind(kind)
    return SubspaceKind.NONE


def is_lagrangian(space, W):
    return W.dim == space.n and _isotropic(space, W.basis)


SymplecticFrame = namedtuple("SymplecticFrame", ["e", "f"])
NormalForm = namedtuple("NormalForm", ["frame", "A", "D", "R", "diagonal_frame"])


def transverse_symplectic_frame(L1, L2):
    """Symplectic frame adapted to two transverse Lagrangian subspaces.

    The ``e`` vectors are the canonical basis of ``L1``; the ``f`` vectors are
    the unique basis of ``L2`` with ``sigma(e_k, f_l) = delta_kl``.

    Returns
    -------
    SymplecticFrame
        ``e`` and ``f`` as ``(n, 2n)`` arrays of row vectors.
    """
    space = L1.ambient
    if L2.ambient.dim != space.dim:
        raise InvalidDimension("subspaces live in different spaces")
    for name, L in (("L1", L1), ("L2", L2)):
        if not is_lagrangian(space, L):
            raise NotLagrangian(f"{name} is not Lagrangian")
    e = L1.basis
    pairing = e @ space.form @ L2.basis.T
    if abs(np.linalg.det(pairing)) <= RANK_TOL or np.linalg.cond(pairing) > 1e12:
        raise NotTransverse("L1 and L2 intersect nontrivially")
    f = np.linalg.solve(pairing.T, L2.basis)
    return SymplecticFrame(e, f)


def frame_coordinates(space, frame, xi):
    """Coordinates ``(x, p)`` of ``xi = sum x_k e_k + p_k f_k``."""
    xi = np.asarray(xi, dtype=float)
    x = xi @ space.form @ frame.f.T
    p = -(xi @ space.form @ frame.e.T)
    return x, p


def triple_lagrangian_normal_form(W1, W2, W3):
    """Normal form for three pairwise transverse Lagrangian subspaces.

    In the returned frame ``W1 = {(x, 0)}``, ``W2 = {(0, p)}`` and
    ``W3 = {(x, A x)}`` with ``A`` symmetric and invertible. The orthogonal
    ``R`` diagonalizes ``A`` as ``D = R A R^T``; ``diagonal_frame`` is the
    symplectic frame ``(R e, R f)`` in which ``W3`` is the graph of ``D``.
    """
    space = W1.ambient
    if not is_lagrangian(space, W3):
        raise NotLagrangian("W3 is not Lagrangian")
    frame = transverse_symplectic_frame(W1, W2)
    x3, p3 = frame_coordinates(space, frame, W3.basis)
    if abs(np.linalg.det(x3)) <= RANK_TOL or np.linalg.cond(x3) > 1e12:
        raise NotTransverse("W3 intersects W2 nontrivially")
    A = np.linalg.solve(x3, p3).T
    if np.max(np.abs(A - A.T)) > 1e-8 * max(1.0, np.max(np.abs(A))):
        raise NotLagrangian("W3 graph matrix is not symmetric")
    A = 0.5 * (A + A.T)
    if np.min(np.abs(np.linalg.eigvalsh(A))) <= RANK_TOL * max(1.0, np.max(np.abs(A))):
        raise SingularGraph("W3 intersects W1 nontrivially (graph matrix singular)")
    evals, vecs = np.linalg.eigh(A)
    R = vecs.T
    D = np.diag(evals)
    diag_frame = SymplecticFrame(R @ frame.e, R @ frame.f)
    return NormalForm(frame, A, D, R, diag_frame)


def signed_polygon_area(space, points):
    """Signed area of a closed polygon with ``sigma`` as the area form.

    Uses ``1/2 sum sigma(P_i, P_{i+1})``, which is the integral of the
    primitive ``theta(xi) = sigma(xi, d xi) / 2`` around the polygon. In more
    than two dimensions this is the symplectic area of the polygon.

    Parameters
    ----------
    points : array_like, shape (..., m, 2n)
        Vertices in order; leading axes are broadcast.
    """
    pts = _check_vec(space, points)
    if pts.ndim < 2 or pts.shape[-2] < 3:
        raise FewerThanThreePoints("a polygon needs at least three vertices")
    nxt = np.roll(pts, -1, axis=-2)
    return 0.5 * np.sum(form_eval(space, pts, nxt), axis=-1)


def _plane():
    return SymplecticSpace.canonical(1)


def line_intersection_2d(l1, l2, space=None):
    """Intersection point of two lines given as ``(point, direction)``."""
    space = space or _plane()
    a, v = (np.asarray(t, dtype=float) for t in l1)
    b, u = (np.asarray(t, dtype=float) for t in l2)
    if space.dim != 2:
        raise InvalidDimension("line intersection needs a 2-dimensional space")
    det = form_eval(space, v, u)
    scale = np.linalg.norm(v, axis=-1) * np.linalg.norm(u, axis=-1) * space.pfaffian_abs
    if np.any(np.abs(det) <= 1e-12 * scale):
        raise ParallelLines("lines are parallel")
    s = form_eval(space, b - a, u) / det
    return a + np.asarray(s)[..., None] * v


def oscillator_line(x0, t):
    """Line ``{(x, p) : x cos t + p sin t = x0}`` as ``(point, direction)``."""
    x0 = np.asarray(x0, dtype=float)
    t = np.asarray(t, dtype=float)
    c, s = np.cos(t), np.sin(t)
    point = np.stack([x0 * c, x0 * s], axis=-1)
    direction = np.stack([-s, c], axis=-1) * np.ones_like(x0)[..., None]
    return point, direction


def functional_generator(space, functional):
    """Vector ``g`` with ``sigma(g, xi) = functional @ xi`` for all ``xi``."""
    functional = _check_vec(space, functional)
    return np.linalg.solve(space.form.T, functional)


def random_symplectic(space, rng, scale=0.5):
    """Random ``M`` with ``M^T sigma M = sigma``, built as ``expm(sigma^-1 S)``."""
    s = rng.normal(size=(space.dim, space.dim)) * scale
    s = 0.5 * (s + s.T)
    return expm(np.linalg.solve(space.form, s))
