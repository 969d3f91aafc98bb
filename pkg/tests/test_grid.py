import numpy as np
import pytest
import sympy as sp

from isoflow.grid import ScalarField, build_grid, fd_weights

from conftest import direction


def test_fd_weights_uniform_five_point():
    x = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    w1 = fd_weights(x, 0.0, 1)
    assert np.allclose(w1, [1 / 12, -8 / 12, 0.0, 8 / 12, -1 / 12], atol=1e-14)
    w2 = fd_weights(x, 0.0, 2)
    assert np.allclose(w2, [-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12], atol=1e-13)


def test_build_grid_contracts():
    with pytest.raises(ValueError, match="unsupported dimension"):
        build_grid(3, (16, 32))
    with pytest.raises(ValueError, match="below minimum"):
        build_grid(1, 8)
    with pytest.raises(ValueError, match="below minimum"):
        build_grid(2, (8, 64))
    g = build_grid(1, 128)
    assert g.shape == (128,)
    assert abs(g.weights.sum() - 2 * np.pi) < 1e-12
    g2 = build_grid(2, (64, 128))
    assert g2.nodes.shape == (3, 64, 128)
    assert abs(g2.weights.sum() - 4 * np.pi) < 1e-12 * 4 * np.pi


def test_grid_invariants(grid):
    norms = np.linalg.norm(grid.nodes, axis=0)
    assert np.abs(norms - 1).max() < 1e-14
    assert abs(grid.weights.sum() - grid.area) < 1e-12 * grid.area
    const = np.ones(grid.shape)
    assert np.abs(grid.grad(const)).max() < 1e-12
    assert np.abs(grid.hess(const)).max() < 1e-12
    if grid.n == 2:
        assert grid.theta.min() > 0 and grid.theta.max() < np.pi


def test_integrate_examples(grid):
    area = grid.area
    assert grid.integrate(np.ones(grid.shape)) == pytest.approx(area, rel=1e-14)
    assert grid.integrate(grid.nodes[0] ** 2) == pytest.approx(
        area / (grid.n + 1), rel=1e-13
    )
    assert abs(grid.integrate(grid.nodes[0])) < 1e-13


def test_grad_linear_function(grid):
    v = direction(grid.n)
    f = np.einsum("c...,c->...", grid.nodes, v)
    gr = grid.grad(f)
    # tangential projection: |grad f|^2 = |v|^2 - f^2
    assert np.abs((gr**2).sum(axis=0) - (1.0 - f**2)).max() < 1e-9
    # A[f] = hess + g f = 0 for linear functions
    A = grid.hess(f) + np.einsum("ij,...->ij...", np.eye(grid.n), f)
    assert np.abs(A).max() < 1e-7
    assert np.abs(grid.laplacian(f) + grid.n * f).max() < 1e-8


def test_grad_x3_squared(sphere):
    x3 = sphere.nodes[2]
    gr = sphere.grad(x3**2)
    exact = 4 * x3**2 * (1 - x3**2)
    assert np.abs((gr**2).sum(axis=0) - exact).max() < 1e-7


def _chart_oracle(expr, what):
    """Symbolic frame gradient/Hessian of expr(th, ph) on S^2."""
    th, ph = sp.symbols("th ph", real=True)
    x = [sp.sin(th) * sp.cos(ph), sp.sin(th) * sp.sin(ph), sp.cos(th)]
    F = expr(*x)
    if what == "grad":
        mats = [sp.diff(F, th), sp.diff(F, ph) / sp.sin(th)]
    else:
        ftt = sp.diff(F, th, 2)
        ftp = (sp.diff(F, th, ph) - sp.cos(th) / sp.sin(th) * sp.diff(F, ph)) / sp.sin(th)
        fpp = sp.diff(F, ph, 2) / sp.sin(th) ** 2 + sp.cos(th) / sp.sin(th) * sp.diff(F, th)
        mats = [ftt, ftp, fpp]
    return [sp.lambdify((th, ph), m, "numpy") for m in mats]


def test_hessian_symbolic_oracle(sphere):
    f = sphere.nodes[0] * sphere.nodes[1]
    H = sphere.hess(f)
    th = sphere.theta[:, None] * np.ones(sphere.shape)
    ph = sphere.phi[None, :] * np.ones(sphere.shape)
    htt, htp, hpp = _chart_oracle(lambda x, y, z: x * y, "hess")
    assert np.abs(H[0, 0] - htt(th, ph)).max() < 1e-8
    assert np.abs(H[0, 1] - htp(th, ph)).max() < 1e-8
    assert np.abs(H[1, 1] - hpp(th, ph)).max() < 1e-8
    assert np.abs(H[0, 1] - H[1, 0]).max() == 0.0


def test_linear_hessian_eigenfunction(grid):
    # hess<x,v> + g <x,v> = 0: linear functions span the first eigenspace;
    # the residual decays under refinement on rungs above the roundoff floor
    v = direction(grid.n)

    def resid(g):
        f = np.einsum("c...,c->...", g.nodes, v)
        return np.abs(g.laplacian(f) + g.n * f).max()

    assert resid(grid) < 1e-8
    coarse = build_grid(grid.n, 32 if grid.n == 1 else (16, 32))
    mid = build_grid(grid.n, 64 if grid.n == 1 else (32, 64))
    assert resid(mid) < resid(coarse) / 8


def test_integration_by_parts(grid):
    x = grid.nodes
    f = 1.0 + 0.3 * x[0] + 0.2 * x[1] * x[grid.n]
    g = 0.5 * x[grid.n] + 0.4 * x[0] * x[0]
    r = grid.integrate(f * grid.laplacian(g)) + grid.integrate(
        (grid.grad(f) * grid.grad(g)).sum(axis=0)
    )
    if grid.n == 1:
        # composed first-derivative stencils make this exact on S^1
        assert abs(r) < 1e-13
    else:
        assert abs(r) < 1e-7
        fine = build_grid(2, (128, 256))
        xf = fine.nodes
        ff = 1.0 + 0.3 * xf[0] + 0.2 * xf[1] * xf[2]
        gf = 0.5 * xf[2] + 0.4 * xf[0] * xf[0]
        rf = fine.integrate(ff * fine.laplacian(gf)) + fine.integrate(
            (fine.grad(ff) * fine.grad(gf)).sum(axis=0)
        )
        assert abs(rf) < abs(r) / 8


def test_rotation_equivariance_grid_aligned(sphere):
    # rotation about the z-axis by a whole number of longitude steps is an
    # index shift, so differentiation commutes with it exactly
    shift = 7
    f = np.exp(sphere.nodes[2]) * (1 + 0.5 * sphere.nodes[0])
    rolled = np.roll(f, shift, axis=1)
    g1 = sphere.grad(rolled)
    g2 = np.roll(sphere.grad(f), shift, axis=2)
    assert np.abs(g1 - g2).max() < 1e-13


def test_rotation_equivariance_analytic(sphere):
    # |grad f|^2 is a scalar invariant: evaluate f on rotated nodes and
    # compare against the rotated invariant field
    ang = 0.37
    R = np.array(
        [[np.cos(ang), 0, np.sin(ang)], [0, 1, 0], [-np.sin(ang), 0, np.cos(ang)]]
    )
    x = sphere.nodes
    xr = np.einsum("cd,d...->c...", R, x)

    def field(y):
        return y[2] ** 2 + 0.3 * y[0] * y[1]

    def grad_sq_exact(y):
        # ambient gradient of the quadratic, projected tangentially
        gx = 0.3 * y[1]
        gy = 0.3 * y[0]
        gz = 2 * y[2]
        dot = gx * y[0] + gy * y[1] + gz * y[2]
        return gx**2 + gy**2 + gz**2 - dot**2

    gr = sphere.grad(field(xr))
    assert np.abs((gr**2).sum(axis=0) - grad_sq_exact(xr)).max() < 1e-7


def test_scalar_field_validation(sphere):
    with pytest.raises(ValueError, match="shape"):
        ScalarField(sphere, np.ones(7))
    bad = np.ones(sphere.shape)
    bad[0, 0] = np.nan
    with pytest.raises(ValueError, match="finite"):
        ScalarField(sphere, bad)
    f = ScalarField(sphere, np.ones(sphere.shape))
    assert (2.0 * f).values.max() == 2.0
    assert (f - 1.0).values.min() == 0.0
