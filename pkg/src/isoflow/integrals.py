"""Mixed discriminants, mixed volumes, cone-volume mass, centroids.

The mixed volume of support-type functions f_1, ..., f_{n+1} is
V = 1/(n+1) * integral of f_1 Q(A[f_2], ..., A[f_{n+1}]) over the sphere,
with Q the mixed discriminant.  The first argument keeps the distinguished
integrand slot, which makes the two normalization displays

    c'_k V_{k+1}(f h, h, ..., h)      = int f h sigma_k dmu
    c_k  V_{k+1}(f h, f h, h, ..., h) = int f h sigma_k^{ij} (A[f h])_{ij} dmu

hold pointwise-exactly in the discretization; the constants c_k, c'_k are
calibrated numerically on probe bodies rather than hard-coded.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import calculus
from .calculus import BodyGeometry, tau_field
from .grid import Grid, ScalarField, as_values

__all__ = [
    "MixedVolumeResult",
    "ConstantsTable",
    "CalibrationError",
    "mixed_discriminant",
    "mixed_discriminant_field",
    "mixed_volume",
    "mixed_volume_padded",
    "body_volume",
    "centroid_vector",
    "centroid_point",
    "calibrate_constants",
]


def _permutation_signs(n: int):
    perms = list(itertools.permutations(range(n)))
    signs = []
    for p in perms:
        sign = 1
        for a in range(n):
            for b in range(a + 1, n):
                if p[a] > p[b]:
                    sign = -sign
        signs.append(sign)
    return perms, signs


def mixed_discriminant(*matrices) -> float:
    """Mixed discriminant of n symmetric n x n matrices (n = 1 or 2).

    Evaluated by the permutation formula
    1/n! sum_{a,b} eps(a) eps(b) prod_k (M_k)_{a(k) b(k)};
    Q(M, ..., M) = det M.
    """
    mats = [np.asarray(m, dtype=float) for m in matrices]
    n = len(mats)
    for m in mats:
        if m.shape != (n, n):
            raise ValueError(f"expected {n} matrices of shape ({n},{n})")
    perms, signs = _permutation_signs(n)
    total = 0.0
    for a, sa in zip(perms, signs):
        for b, sb in zip(perms, signs):
            prod = 1.0
            for k in range(n):
                prod *= mats[k][a[k], b[k]]
            total += sa * sb * prod
    return total / float(np.prod(range(1, n + 1)))


def mixed_discriminant_field(mats) -> np.ndarray:
    """Pointwise mixed discriminant of n matrix fields (n, n, *shape)."""
    n = mats[0].shape[0]
    if n == 1:
        return mats[0][0, 0].copy()
    a, b = mats
    return 0.5 * (a[0, 0] * b[1, 1] + a[1, 1] * b[0, 0] - a[0, 1] * b[1, 0] - a[1, 0] * b[0, 1])


@dataclass(frozen=True)
class MixedVolumeResult:
    value: float
    arguments: tuple


def _common_grid(fields) -> Grid:
    grids = [f.grid for f in fields if isinstance(f, ScalarField)]
    if not grids:
        raise ValueError("need at least one ScalarField argument")
    g0 = grids[0]
    for g in grids[1:]:
        if g is not g0 and g.shape != g0.shape:
            raise ValueError("mixed-volume arguments live on different grids")
    return g0


def mixed_volume(*fields) -> MixedVolumeResult:
    """V(f_1, ..., f_{n+1}); the first argument is the integrand slot."""
    grid = _common_grid(fields)
    n = grid.n
    if len(fields) != n + 1:
        raise ValueError(f"mixed volume on S^{n} needs {n + 1} arguments")
    vals = [as_values(f, grid) for f in fields]
    taus = [tau_field(v, grid) for v in vals[1:]]
    q = mixed_discriminant_field(taus)
    value = grid.integrate(vals[0] * q) / (n + 1)
    names = tuple(getattr(f, "name", f"f{i}") for i, f in enumerate(fields))
    return MixedVolumeResult(value=value, arguments=names)


def mixed_volume_padded(fields, k: int, grid: Grid | None = None) -> float:
    """V_{k+1}(f_1, ..., f_{k+1}) = V(f_1, ..., f_{k+1}, 1, ..., 1).

    Pads with (n - k) constant-one fields.
    """
    fields = list(fields)
    if grid is None:
        grid = _common_grid(fields)
    n = grid.n
    if len(fields) != k + 1:
        raise ValueError(f"V_{{k+1}} with k={k} takes {k + 1} arguments")
    ones = ScalarField(grid, np.ones(grid.shape))
    return mixed_volume(*fields, *([ones] * (n - k))).value


def body_volume(geom: BodyGeometry) -> float:
    """Mass of the cone-volume measure, 1/(n+1) int h sigma_n dmu."""
    return geom.volume()


def centroid_vector(geom: BodyGeometry, k: int) -> np.ndarray:
    """int X dV_k with dV_k = h sigma_k dmu, a vector in R^{n+1}."""
    if not 1 <= k <= geom.n:
        raise ValueError(f"k must be in 1..{geom.n}")
    w = geom.h.values * geom.sigma[k]
    return np.array([geom.grid.integrate(geom.X[c] * w) for c in range(geom.n + 1)])


def centroid_point(geom: BodyGeometry) -> np.ndarray:
    """Centroid of the enclosed body: int X dV / ((n+2) vol)."""
    return centroid_vector(geom, geom.n) / ((geom.n + 2) * geom.volume())


@dataclass(frozen=True)
class ConstantsTable:
    """Normalization constants linking V_{k+1} to the sigma_k displays."""

    n: int
    c: dict        # k -> c_k
    c_prime: dict  # k -> c'_k


class CalibrationError(RuntimeError):
    pass


_CONSTANTS_CACHE: dict = {}


def _display_ratios(geom: BodyGeometry, f: np.ndarray, k: int):
    grid = geom.grid
    h = geom.h.values
    fh = ScalarField(grid, f * h)
    hf_field = geom.h
    v1 = mixed_volume_padded([fh] + [hf_field] * k, k, grid)
    rhs1 = grid.integrate(f * h * geom.sigma[k])
    v2 = mixed_volume_padded([fh, fh] + [hf_field] * (k - 1), k, grid)
    a_fh = tau_field(fh.values, grid)
    rhs2 = grid.integrate(f * h * np.einsum("ij...,ij...->...", geom.sigma_grad[k], a_fh))
    return rhs1 / v1, rhs2 / v2


def calibrate_constants(grid: Grid, validate: bool = True) -> ConstantsTable:
    """Measure c_k and c'_k on the unit ball; cross-check on an ellipsoid.

    Raises CalibrationError if the two probe bodies disagree beyond 1e-9
    relative, which would signal an implementation bug.
    """
    key = (grid.n, grid.shape)
    if key in _CONSTANTS_CACHE:
        return _CONSTANTS_CACHE[key]
    n = grid.n
    ball = calculus.assemble(ScalarField(grid, np.ones(grid.shape)))
    v = np.zeros(n + 1)
    v[0] = 1.0
    f_probe = 1.0 + 0.5 * np.einsum("c...,c->...", grid.nodes, v)
    c_prime, c = {}, {}
    for k in range(1, n + 1):
        ones = np.ones(grid.shape)
        cp_k, _ = _display_ratios(ball, ones, k)
        _, c_k = _display_ratios(ball, f_probe, k)
        c_prime[k] = cp_k
        c[k] = c_k
    if validate:
        axes = np.linspace(1.2, 0.8, n + 1)
        M = np.diag(axes**2)
        h_e = np.sqrt(np.einsum("c...,cd,d...->...", grid.nodes, M, grid.nodes))
        probe = calculus.assemble(ScalarField(grid, h_e))
        for k in range(1, n + 1):
            cp2, _ = _display_ratios(probe, np.ones(grid.shape), k)
            _, c2 = _display_ratios(probe, f_probe, k)
            if abs(cp2 - c_prime[k]) > 1e-9 * abs(c_prime[k]):
                raise CalibrationError(
                    f"c'_{k} inconsistent across probe bodies: {c_prime[k]} vs {cp2}"
                )
            if abs(c2 - c[k]) > 1e-9 * abs(c[k]):
                raise CalibrationError(
                    f"c_{k} inconsistent across probe bodies: {c[k]} vs {c2}"
                )
    table = ConstantsTable(n=n, c=c, c_prime=c_prime)
    _CONSTANTS_CACHE[key] = table
    return table
