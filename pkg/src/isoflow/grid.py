"""Quadrature grids and covariant differential operators on S^1 and S^2.

The S^2 grid is a tensor product of Gauss-Legendre colatitude nodes (in
cos(theta), so no node sits on a pole) and uniformly spaced longitudes with
periodic wrap.  Longitude derivatives are spectral (FFT); colatitude
derivatives use per-node Lagrange weights over 7-point windows of the
nonuniform nodes, with cross-pole continuation
f(-theta, phi) = f(theta, phi + pi).  The mixed Hessian entry is computed
in the pole-regular form d/dtheta(f_phi / sin theta) so that no 1/sin(theta)
factor amplifies a finite-difference error near the poles.

Frame convention: on S^1 the single frame vector is d/dphi; on S^2 the
orthonormal frame is e_1 = d/dtheta, e_2 = (1/sin theta) d/dphi.  Gradients
and Hessians are returned in frame components with leading component axes:
grad has shape (n, *grid.shape), hess has shape (n, n, *grid.shape).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Grid",
    "ScalarField",
    "build_grid",
    "integrate",
    "grad",
    "hess",
    "laplacian",
    "fd_weights",
]

MIN_RESOLUTION = 16


def fd_weights(x: np.ndarray, x0: float, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at x0 on nodes x.

    Fornberg's recursion; exact for polynomials of degree < len(x).
    """
    x = np.asarray(x, dtype=float)
    npts = len(x)
    if m >= npts:
        raise ValueError("need more nodes than derivative order")
    c = np.zeros((npts, m + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, npts):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


class Grid:
    """Discretization of S^n (n = 1 or 2) with quadrature and derivatives.

    Attributes
    ----------
    n : hypersurface dimension (1 or 2)
    shape : (N,) for S^1, (Ntheta, Nphi) for S^2
    nodes : unit vectors in R^{n+1}, shape (n+1, *shape)
    weights : quadrature weights, shape *shape, summing to |S^n|
    """

    def __init__(self, n: int, resolution):
        if n not in (1, 2):
            raise ValueError(f"unsupported dimension n={n} (must be 1 or 2)")
        self.n = n
        if n == 1:
            if np.ndim(resolution) != 0:
                (resolution,) = resolution
            N = int(resolution)
            if N < MIN_RESOLUTION:
                raise ValueError(f"resolution {N} below minimum {MIN_RESOLUTION}")
            self.shape = (N,)
            self.phi = 2.0 * np.pi * np.arange(N) / N
            self.dphi = 2.0 * np.pi / N
            self.nodes = np.stack([np.cos(self.phi), np.sin(self.phi)])
            self.weights = np.full(N, self.dphi)
        else:
            try:
                ntheta, nphi = resolution
            except TypeError:
                raise ValueError("S^2 resolution must be a (Ntheta, Nphi) pair")
            ntheta, nphi = int(ntheta), int(nphi)
            if ntheta < MIN_RESOLUTION or nphi < MIN_RESOLUTION:
                raise ValueError(
                    f"resolution {ntheta}x{nphi} below minimum {MIN_RESOLUTION}"
                )
            if nphi % 2:
                raise ValueError("Nphi must be even (cross-pole continuation)")
            self.shape = (ntheta, nphi)
            xg, wg = np.polynomial.legendre.leggauss(ntheta)
            # leggauss returns cos(theta) ascending: reverse so theta ascends
            self.theta = np.arccos(xg[::-1])
            self.wtheta = wg[::-1].copy()
            self.phi = 2.0 * np.pi * np.arange(nphi) / nphi
            self.dphi = 2.0 * np.pi / nphi
            st = np.sin(self.theta)[:, None]
            ct = np.cos(self.theta)[:, None]
            cp = np.cos(self.phi)[None, :]
            sp = np.sin(self.phi)[None, :]
            self.nodes = np.stack([st * cp, st * sp, ct * np.ones_like(cp)])
            self.weights = self.wtheta[:, None] * np.full(nphi, self.dphi)[None, :]
            self.sin_theta = st
            self.cos_theta = ct
            self.cot_theta = ct / st
            self._build_theta_stencils()

    # -- colatitude stencils --------------------------------------------

    _HALO = 3  # ghost rows per pole; window width is 2*_HALO + 1

    def _build_theta_stencils(self):
        ntheta = self.shape[0]
        halo = self._HALO
        width = 2 * halo + 1
        th = self.theta
        # ghost coordinates across both poles: theta -> -theta on the north
        # side, theta -> 2 pi - theta on the south side
        self._th_ext = np.concatenate(
            [-th[halo - 1 :: -1], th, 2 * np.pi - th[: -halo - 1 : -1]]
        )
        w1 = np.empty((ntheta, width))
        w2 = np.empty((ntheta, width))
        for i in range(ntheta):
            window = self._th_ext[i : i + width]
            w1[i] = fd_weights(window, th[i], 1)
            w2[i] = fd_weights(window, th[i], 2)
        # force exact annihilation of constants
        w1[:, halo] -= w1.sum(axis=1)
        w2[:, halo] -= w2.sum(axis=1)
        self._w1_theta = w1
        self._w2_theta = w2

    def _extend_poles(self, f: np.ndarray, parity: int = 1) -> np.ndarray:
        """Cross-pole continuation; parity -1 for phi-frame vector components."""
        halo = self._HALO
        half = self.shape[1] // 2
        top = parity * np.roll(f[halo - 1 :: -1], half, axis=1)
        bot = parity * np.roll(f[: -halo - 1 : -1], half, axis=1)
        return np.concatenate([top, f, bot], axis=0)

    def _dtheta(self, f: np.ndarray, order: int, parity: int = 1) -> np.ndarray:
        ext = self._extend_poles(f, parity)
        width = 2 * self._HALO + 1
        windows = sliding_window_view(ext, width, axis=0)  # (Ntheta, Nphi, width)
        w = self._w1_theta if order == 1 else self._w2_theta
        return np.einsum("ik,ijk->ij", w, windows)

    # -- longitude derivatives -------------------------------------------

    def _dphi_scaled(self, f: np.ndarray, order: int, row_factor=None) -> np.ndarray:
        """Spectral d^order/dphi^order times an optional per-row factor.

        When a 1/sin(theta) factor is requested the coefficients beyond the
        row's representable order are zeroed first (smooth spherical fields
        have |f_m(theta)| ~ sin(theta)^m, so only roundoff noise lives
        there); otherwise the m^2/sin^2 weight would amplify that noise at
        pole-adjacent rows.
        """
        nphi = self.shape[1]
        fk = np.fft.rfft(f, axis=1)
        m = np.arange(fk.shape[1])
        sym = (1j * m) if order == 1 else -(m**2)
        fk = fk * sym
        if order == 1:
            fk[:, -1] = 0.0  # Nyquist has no odd-derivative representation
        if row_factor is not None:
            fk *= np.asarray(row_factor).reshape(-1, 1)
            fk *= self._pole_taper(fk.shape[1])
        return np.fft.irfft(fk, n=nphi, axis=1)

    def _pole_taper(self, nmodes: int) -> np.ndarray:
        if getattr(self, "_taper", None) is None or self._taper.shape[1] != nmodes:
            m = np.arange(nmodes)[None, :]
            cut = np.maximum(8.0, 1.2 * self.sin_theta * (self.shape[1] // 2) + 4.0)
            self._taper = (m <= cut).astype(float)
        return self._taper

    def _dphi1(self, f: np.ndarray) -> np.ndarray:
        if self.n == 1:
            # 6th-order centered stencil on the uniform periodic grid
            def sh(k):
                return np.roll(f, -k, axis=0)

            return (
                -sh(-3) + 9 * sh(-2) - 45 * sh(-1) + 45 * sh(1) - 9 * sh(2) + sh(3)
            ) / (60 * self.dphi)
        return self._dphi_scaled(f, 1)

    def _dphi2(self, f: np.ndarray) -> np.ndarray:
        if self.n == 1:
            def sh(k):
                return np.roll(f, -k, axis=0)

            return (-sh(-2) + 16 * sh(-1) - 30 * f + 16 * sh(1) - sh(2)) / (
                12 * self.dphi**2
            )
        return self._dphi_scaled(f, 2)

    # -- public operators ------------------------------------------------

    def integrate(self, f) -> float:
        return float(np.sum(as_values(f, self) * self.weights))

    def average(self, f) -> float:
        return self.integrate(f) / self.area

    @property
    def area(self) -> float:
        return 2.0 * np.pi if self.n == 1 else 4.0 * np.pi

    def grad(self, f) -> np.ndarray:
        """Covariant gradient in frame components, shape (n, *shape)."""
        v = as_values(f, self)
        if self.n == 1:
            return self._dphi1(v)[None]
        return np.stack(
            [self._dtheta(v, 1), self._dphi_scaled(v, 1, 1.0 / self.sin_theta)]
        )

    def hess(self, f) -> np.ndarray:
        """Covariant Hessian in frame components, shape (n, n, *shape)."""
        v = as_values(f, self)
        if self.n == 1:
            # compose the first-derivative stencil so that the discrete
            # Hessian is exactly self-adjoint wrt the uniform weights
            h = self._dphi1(self._dphi1(v))
            return h[None, None]
        ft = self._dtheta(v, 1)
        q = self._dphi_scaled(v, 1, 1.0 / self.sin_theta)  # phi-frame gradient
        h00 = self._dtheta(v, 2)
        # (f_tp - cot f_p)/sin = d/dtheta (f_p / sin); q flips sign across poles
        h01 = self._dtheta(q, 1, parity=-1)
        h11 = self._dphi_scaled(v, 2, 1.0 / self.sin_theta**2) + self.cot_theta * ft
        return np.stack(
            [np.stack([h00, h01]), np.stack([h01, h11])]
        )

    def laplacian(self, f) -> np.ndarray:
        h = self.hess(f)
        if self.n == 1:
            return h[0, 0]
        return h[0, 0] + h[1, 1]

    # -- frames and ambient conversions ----------------------------------

    def frame_vectors(self) -> np.ndarray:
        """Ambient components of the orthonormal frame, shape (n, n+1, *shape)."""
        if self.n == 1:
            return np.stack([-np.sin(self.phi), np.cos(self.phi)])[None]
        st, ct = self.sin_theta, self.cos_theta
        cp = np.cos(self.phi)[None, :]
        sp = np.sin(self.phi)[None, :]
        one = np.ones(self.shape)
        e_theta = np.stack([ct * cp, ct * sp, -st * one])
        e_phi = np.stack([-sp * one, cp * one, np.zeros(self.shape)])
        return np.stack([e_theta, e_phi])

    def to_ambient(self, vec: np.ndarray) -> np.ndarray:
        """Map frame components (n, *shape) to ambient vectors (n+1, *shape)."""
        frames = self.frame_vectors()
        return np.einsum("ic...,i...->c...", frames, vec)

    def tangential(self, ambient: np.ndarray) -> np.ndarray:
        """Frame components of the tangential part of ambient vectors."""
        frames = self.frame_vectors()
        return np.einsum("ic...,c...->i...", frames, ambient)

    def describe(self) -> str:
        return "x".join(str(s) for s in self.shape)

    def __repr__(self):
        return f"Grid(n={self.n}, {self.describe()})"


@dataclass(frozen=True)
class ScalarField:
    """One real value per grid node."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    def __add__(self, other):
        return ScalarField(self.grid, self.values + as_values(other, self.grid))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - as_values(other, self.grid))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * as_values(other, self.grid))

    __rmul__ = __mul__


def as_values(f, grid: Grid | None = None) -> np.ndarray:
    """Accept a ScalarField, ndarray, or scalar; return the node values."""
    if isinstance(f, ScalarField):
        if grid is not None and f.grid is not grid and f.grid.shape != grid.shape:
            raise ValueError("field lives on an incompatible grid")
        return f.values
    v = np.asarray(f, dtype=float)
    if v.ndim == 0 and grid is not None:
        return np.full(grid.shape, float(v))
    return v


def build_grid(n: int, resolution) -> Grid:
    """Build the S^n grid; resolution is N for n=1, (Ntheta, Nphi) for n=2."""
    return Grid(n, resolution)


def integrate(f: ScalarField) -> float:
    return f.grid.integrate(f.values)


def grad(f: ScalarField) -> np.ndarray:
    return f.grid.grad(f.values)


def hess(f: ScalarField) -> np.ndarray:
    return f.grid.hess(f.values)


def laplacian(f: ScalarField) -> np.ndarray:
    return f.grid.laplacian(f.values)
