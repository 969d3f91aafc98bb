import itertools
from math import comb, pi

import numpy as np
import pytest

from isoflow.bodies import BodySpec, make_body, make_random
from isoflow.calculus import assemble
from isoflow.grid import ScalarField, build_grid
from isoflow.integrals import (
    body_volume,
    calibrate_constants,
    centroid_point,
    centroid_vector,
    mixed_discriminant,
    mixed_volume,
    mixed_volume_padded,
)

from conftest import direction, mild_ellipsoid


def test_mixed_discriminant_examples():
    assert mixed_discriminant(np.eye(2), np.eye(2)) == pytest.approx(1.0, abs=1e-15)
    assert mixed_discriminant(np.array([[3.5]])) == 3.5
    rng = np.random.default_rng(0)
    for _ in range(20):
        A = rng.standard_normal((2, 2))
        A = A + A.T
        B = rng.standard_normal((2, 2))
        B = B + B.T
        # closed-form oracle for the permutation formula
        closed = 0.5 * (np.trace(A) * np.trace(B) - np.trace(A @ B))
        assert mixed_discriminant(A, B) == pytest.approx(closed, rel=1e-13, abs=1e-13)
        assert mixed_discriminant(A, A) == pytest.approx(
            np.linalg.det(A), rel=1e-12, abs=1e-12
        )
        assert mixed_discriminant(A, B) == pytest.approx(
            mixed_discriminant(B, A), rel=1e-13, abs=1e-14
        )


def test_mixed_discriminant_dimension_mismatch():
    with pytest.raises(ValueError):
        mixed_discriminant(np.eye(2), np.eye(3))
    with pytest.raises(ValueError):
        mixed_discriminant(np.eye(2))


def test_mixed_volume_unit_ball(grid):
    ones = ScalarField(grid, np.ones(grid.shape))
    v = mixed_volume(*([ones] * (grid.n + 1))).value
    assert v == pytest.approx(grid.area / (grid.n + 1), rel=1e-13)
    r = 1.7
    ball = ScalarField(grid, np.full(grid.shape, r))
    v_r = mixed_volume(*([ball] * (grid.n + 1))).value
    assert v_r == pytest.approx(r ** (grid.n + 1) * grid.area / (grid.n + 1), rel=1e-13)


def test_mixed_volume_ellipsoid_volume(sphere):
    M = np.diag([4.0, 1.0, 1.0])
    h = make_body(BodySpec(n=2, kind="ellipsoid", M=tuple(map(tuple, M))), sphere)
    v = mixed_volume(h, h, h).value
    assert v == pytest.approx((4 * pi / 3) * 2, rel=1e-6)
    assert body_volume(assemble(h)) == pytest.approx((4 * pi / 3) * np.sqrt(np.linalg.det(M)), rel=1e-6)


def test_mixed_volume_grid_mismatch(sphere):
    other = build_grid(2, (32, 64))
    with pytest.raises(ValueError, match="grid"):
        mixed_volume(
            ScalarField(sphere, np.ones(sphere.shape)),
            ScalarField(other, np.ones(other.shape)),
            ScalarField(sphere, np.ones(sphere.shape)),
        )
    with pytest.raises(ValueError, match="argument"):
        mixed_volume(ScalarField(sphere, np.ones(sphere.shape)))


def test_permutation_invariance(grid):
    h = make_random(7, grid.n, grid, eps=0.25, l_max=4)
    x = grid.nodes
    f2 = ScalarField(grid, 1.0 + 0.3 * x[0] * x[grid.n])
    f3 = ScalarField(grid, 1.0 + 0.2 * x[grid.n - 1])
    args = [h, f2, f3][: grid.n + 1]
    v0 = mixed_volume(*args).value
    worst = 0.0
    for p in itertools.permutations(range(grid.n + 1)):
        vp = mixed_volume(*[args[i] for i in p]).value
        worst = max(worst, abs(vp - v0) / abs(v0))
    if grid.n == 1:
        # self-adjoint discrete Hessian: exact on the circle
        assert worst < 1e-13
    else:
        assert worst < 1e-8


def test_permutation_defect_refines_on_sphere():
    defects = []
    for res in [(32, 64), (64, 128)]:
        g = build_grid(2, res)
        h = make_random(7, 2, g, eps=0.25, l_max=4)
        f2 = ScalarField(g, 1.0 + 0.3 * g.nodes[0] * g.nodes[2])
        v_a = mixed_volume(h, f2, h).value
        v_b = mixed_volume(f2, h, h).value
        defects.append(abs(v_a - v_b) / abs(v_a))
    assert defects[1] < defects[0] / 8


def test_multilinearity(grid):
    h = make_random(7, grid.n, grid, eps=0.25, l_max=4)
    x = grid.nodes
    f2 = ScalarField(grid, 1.0 + 0.3 * x[0] * x[grid.n])
    rest = [h] * grid.n
    a, b = 0.7, -0.4
    lin = ScalarField(grid, a * h.values + b * f2.values)
    v_lin = mixed_volume(lin, *rest).value
    v_sep = a * mixed_volume(h, *rest).value + b * mixed_volume(f2, *rest).value
    assert v_lin == pytest.approx(v_sep, rel=1e-13, abs=1e-13)


def test_body_volume_examples(grid):
    n = grid.n
    ball = assemble(make_body(BodySpec(n=n, kind="ball", r=1.0), grid))
    assert body_volume(ball) == pytest.approx(grid.area / (n + 1), rel=1e-13)
    v = 0.2 * direction(n)
    sb = assemble(make_body(BodySpec(n=n, kind="shifted_ball", r=1.0, v=tuple(v)), grid))
    assert body_volume(sb) == pytest.approx(grid.area / (n + 1), rel=1e-9)


def test_minkowski_vanishing(grid):
    geom = assemble(make_random(7, grid.n, grid, eps=0.25, l_max=4))
    for k in range(1, grid.n + 1):
        vec = np.array(
            [grid.integrate(grid.nodes[c] * geom.sigma[k]) for c in range(grid.n + 1)]
        )
        assert np.linalg.norm(vec) < 1e-8 * grid.integrate(geom.sigma[k])


def test_centroid_centred_ellipsoid(grid):
    geom = assemble(mild_ellipsoid(grid, a=1.3))
    for k in range(1, grid.n + 1):
        assert np.linalg.norm(centroid_vector(geom, k)) < 1e-10


def test_centroid_shifted_ball(sphere):
    v = np.array([0.2, 0.0, 0.0])
    geom = assemble(
        make_body(BodySpec(n=2, kind="shifted_ball", r=1.0, v=tuple(v)), sphere)
    )
    cv = centroid_vector(geom, 2)
    expect = 16 * pi / 3 * 0.2  # analytic integral of (x+v)(1+<x,v>) over S^2
    assert cv[0] == pytest.approx(expect, rel=1e-9)
    assert abs(cv[1]) < 1e-12 and abs(cv[2]) < 1e-12
    # divergence-theorem cross-check: int X dV = (n+2) vol(K) * centroid(K)
    assert (geom.n + 2) * body_volume(geom) * 0.2 == pytest.approx(cv[0], rel=1e-9)
    assert np.allclose(centroid_point(geom), v, atol=1e-9)


def test_centroid_translation_covariance(sphere):
    body = make_random(5, 2, sphere, eps=0.2, l_max=3)
    t = np.array([0.05, -0.03, 0.08])
    shifted = ScalarField(
        sphere, body.values + np.einsum("c...,c->...", sphere.nodes, t)
    )
    c0 = centroid_point(assemble(body))
    c1 = centroid_point(assemble(shifted))
    assert np.abs(c1 - (c0 + t)).max() < 1e-7


def test_calibrated_constants(grid):
    t = calibrate_constants(grid)
    n = grid.n
    for k in range(1, n + 1):
        assert t.c_prime[k] == pytest.approx((n + 1) * comb(n, k), rel=1e-11)
        assert t.c[k] == pytest.approx(k * (n + 1) * comb(n, k), rel=1e-11)
    if n == 1:
        # analytic S^1 ratio: c'_1 = c_1 = 2
        assert t.c_prime[1] == pytest.approx(2.0, rel=1e-12)
        assert t.c[1] == pytest.approx(2.0, rel=1e-12)


def test_calibration_validates_on_second_body(grid):
    # runs the ellipsoid cross-check; inconsistency raises CalibrationError
    table = calibrate_constants(grid, validate=True)
    assert all(v > 0 for v in table.c.values())
    assert all(v > 0 for v in table.c_prime.values())


def test_padded_mixed_volume_display(sphere):
    # c'_k V_{k+1}(f h, h, ..., h) = int f h sigma_k dmu holds pointwise
    geom = assemble(make_random(3, 2, sphere, eps=0.2, l_max=3))
    t = calibrate_constants(sphere)
    f = 1.0 + 0.4 * sphere.nodes[1]
    for k in (1, 2):
        fh = ScalarField(sphere, f * geom.h.values)
        v = mixed_volume_padded([fh] + [geom.h] * k, k, sphere)
        rhs = sphere.integrate(f * geom.h.values * geom.sigma[k])
        assert t.c_prime[k] * v == pytest.approx(rhs, rel=1e-12)
