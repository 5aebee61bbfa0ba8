import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcond.errors import (
    FewerThanThreePoints,
    InvalidDimension,
    NotLagrangian,
    NotTransverse,
    ParallelLines,
    SingularGraph,
)
from qcond.symplectic_core import (
    Subspace,
    SubspaceKind,
    SymplecticSpace,
    classify_subspace,
    complement,
    form_eval,
    frame_coordinates,
    functional_generator,
    is_lagrangian,
    line_intersection_2d,
    oscillator_line,
    random_symplectic,
    signed_polygon_area,
    span,
    transverse_symplectic_frame,
    triple_lagrangian_normal_form,
)

# canonical 4D basis order is (e1, e2, f1, f2)
E1, E2, F1, F2 = np.eye(4)


def random_lagrangian(space, rng):
    """Image of the x-plane under a random symplectic map."""
    M = random_symplectic(space, rng, 0.7)
    return Subspace(space, (M @ np.eye(space.dim)[:, : space.n]).T), M


class TestSpace:
    def test_rejects_bad_forms(self):
        with pytest.raises(InvalidDimension):
            SymplecticSpace(np.eye(2))
        with pytest.raises(InvalidDimension):
            SymplecticSpace(np.zeros((2, 2)))
        with pytest.raises(InvalidDimension):
            SymplecticSpace(np.zeros((3, 3)))

    def test_canonical_hbar_scaling(self):
        s = SymplecticSpace.canonical(1, hbar=2.0)
        assert form_eval(s, [1, 0], [0, 1]) == pytest.approx(0.5)
        assert s.pfaffian_abs == pytest.approx(0.5)


class TestFormEval:
    def test_canonical_pair(self, plane):
        assert form_eval(plane, [1, 0], [0, 1]) == 1.0

    def test_orthogonal_canonical_pair(self):
        assert form_eval(SymplecticSpace.canonical(2), E1, F2) == 0.0

    @given(st.lists(st.floats(-10, 10), min_size=4, max_size=4))
    def test_self_pairing_vanishes(self, u):
        assert form_eval(SymplecticSpace.canonical(2), u, u) == pytest.approx(0.0, abs=1e-12)

    def test_dimension_mismatch(self, plane):
        with pytest.raises(InvalidDimension):
            form_eval(plane, [1, 0, 0], [0, 1])


class TestComplement:
    def test_line_in_plane(self, plane):
        assert complement(plane, span(plane, [1, 0])) == span(plane, [1, 0])

    def test_whole_space(self, plane):
        assert complement(plane, span(plane, [1, 0], [0, 1])).dim == 0

    def test_4d_line(self):
        s = SymplecticSpace.canonical(2)
        assert complement(s, span(s, E1)) == span(s, E1, E2, F2)

    def test_double_complement(self, rng):
        s = SymplecticSpace.canonical(3)
        for _ in range(20):
            k = rng.integers(1, 6)
            W = Subspace(s, rng.normal(size=(k, 6)))
            assert complement(s, complement(s, W)) == W
            assert W.dim + complement(s, W).dim == 6


class TestClassify:
    def test_examples(self, plane):
        s = SymplecticSpace.canonical(2)
        assert classify_subspace(plane, span(plane, [1, 0])) == SubspaceKind.LAGRANGIAN
        assert classify_subspace(s, span(s, E1, F1)) == SubspaceKind.SYMPLECTIC
        assert classify_subspace(s, span(s, E1, E2, F1)) == SubspaceKind.COISOTROPIC
        assert classify_subspace(s, span(s, E1)) == SubspaceKind.ISOTROPIC

    def test_lagrangian_iff_dim_n(self, rng):
        s = SymplecticSpace.canonical(2)
        for _ in range(20):
            L, _ = random_lagrangian(s, rng)
            assert is_lagrangian(s, L) and L.dim == 2
        assert not is_lagrangian(s, span(s, E1, F1))


class TestFrames:
    def test_axes(self, plane):
        fr = transverse_symplectic_frame(span(plane, [1, 0]), span(plane, [0, 1]))
        np.testing.assert_allclose(fr.e, [[1, 0]])
        np.testing.assert_allclose(fr.f, [[0, 1]])

    def test_sheared(self, plane):
        fr = transverse_symplectic_frame(span(plane, [1, 0]), span(plane, [1, 1]))
        np.testing.assert_allclose(fr.e, [[1, 0]])
        np.testing.assert_allclose(fr.f, [[1, 1]])

    def test_not_transverse(self, plane):
        L = span(plane, [1, 0])
        with pytest.raises(NotTransverse):
            transverse_symplectic_frame(L, L)

    def test_not_lagrangian(self):
        s = SymplecticSpace.canonical(2)
        with pytest.raises(NotLagrangian):
            transverse_symplectic_frame(span(s, E1), span(s, F1, F2))

    def test_random_pairs(self, rng):
        for n in (1, 2, 3):
            s = SymplecticSpace.canonical(n)
            for _ in range(35):
                L1, _ = random_lagrangian(s, rng)
                L2, _ = random_lagrangian(s, rng)
                fr = transverse_symplectic_frame(L1, L2)
                W = s.form
                np.testing.assert_allclose(fr.e @ W @ fr.f.T, np.eye(n), atol=1e-10)
                np.testing.assert_allclose(fr.e @ W @ fr.e.T, 0, atol=1e-10)
                np.testing.assert_allclose(fr.f @ W @ fr.f.T, 0, atol=1e-10)
                x, p = frame_coordinates(s, fr, fr.e[0] + 2 * fr.f[-1])
                assert x[0] == pytest.approx(1.0) and p[-1] == pytest.approx(2.0)


class TestNormalForm:
    @pytest.mark.parametrize("vec, slope", [([1, 1], 1.0), ([1, -2], -2.0)])
    def test_slopes(self, plane, vec, slope):
        nf = triple_lagrangian_normal_form(span(plane, [1, 0]), span(plane, [0, 1]), span(plane, vec))
        assert nf.A[0, 0] == pytest.approx(slope)

    def test_singular_graph(self, plane):
        with pytest.raises(SingularGraph):
            triple_lagrangian_normal_form(span(plane, [1, 0]), span(plane, [0, 1]), span(plane, [1, 0]))

    def test_random_4d(self, rng):
        s = SymplecticSpace.canonical(2)
        for _ in range(20):
            M = random_symplectic(s, rng, 0.5)
            A0 = rng.normal(size=(2, 2))
            A0 = A0 + A0.T + 3 * np.eye(2)
            W1 = Subspace(s, (M @ np.vstack([np.eye(2), np.zeros((2, 2))])).T)
            W2 = Subspace(s, (M @ np.vstack([np.zeros((2, 2)), np.eye(2)])).T)
            W3 = Subspace(s, (M @ np.vstack([np.eye(2), A0])).T)
            nf = triple_lagrangian_normal_form(W1, W2, W3)
            e, f = nf.diagonal_frame
            np.testing.assert_allclose(e @ s.form @ f.T, np.eye(2), atol=1e-10)
            np.testing.assert_allclose(nf.A, nf.A.T, atol=1e-10)
            np.testing.assert_allclose(nf.R @ nf.A @ nf.R.T, nf.D, atol=1e-9)
            # W3 is the graph of D in the diagonal frame
            for k in range(2):
                v = e[k] + nf.D[k, k] * f[k]
                assert W3.contains(v)


class TestPolygon:
    def test_half_square(self, plane):
        assert signed_polygon_area(plane, [[0, 0], [1, 0], [1, 1]]) == pytest.approx(0.5)
        assert signed_polygon_area(plane, [[1, 1], [1, 0], [0, 0]]) == pytest.approx(-0.5)

    def test_collinear(self, plane):
        assert signed_polygon_area(plane, [[0, 0], [1, 1], [3, 3]]) == pytest.approx(0.0)

    def test_too_few(self, plane):
        with pytest.raises(FewerThanThreePoints):
            signed_polygon_area(plane, [[0, 0], [1, 1]])

    def test_symplectic_and_translation_invariance(self, plane, rng):
        for _ in range(20):
            pts = rng.normal(size=(5, 2))
            a = signed_polygon_area(plane, pts)
            M = random_symplectic(plane, rng, 0.8)
            c = rng.normal(size=2)
            assert signed_polygon_area(plane, pts @ M.T + c) == pytest.approx(a, abs=1e-10)


class TestLines:
    def test_axes(self):
        pt = line_intersection_2d(([0, 0], [0, 1]), ([0, 0], [1, 0]))
        np.testing.assert_allclose(pt, [0, 0])

    def test_oscillator_lines(self):
        pt = line_intersection_2d(oscillator_line(1.0, 0.0), oscillator_line(1.0, math.pi / 2))
        np.testing.assert_allclose(pt, [1, 1], atol=1e-12)

    def test_parallel(self):
        with pytest.raises(ParallelLines):
            line_intersection_2d(([0, 0], [1, 1]), ([1, 0], [2, 2]))

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 3.0), st.floats(-3, 3))
    def test_point_on_both(self, x1, x2, dt, t1):
        l1, l2 = oscillator_line(x1, t1), oscillator_line(x2, t1 + dt)
        if abs(math.sin(dt)) < 1e-3:
            return
        pt = line_intersection_2d(l1, l2)
        for x0, t in ((x1, t1), (x2, t1 + dt)):
            assert pt[0] * math.cos(t) + pt[1] * math.sin(t) == pytest.approx(x0, abs=1e-9)


def test_functional_generator(plane):
    g = functional_generator(plane, [1.0, 0.0])
    assert form_eval(plane, g, [3.0, 5.0]) == pytest.approx(3.0)
