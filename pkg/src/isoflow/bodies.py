"""Constructors for support functions with known geometry.

The zoo covers balls, shifted balls, ellipsoids h(x) = sqrt(x^T M x),
harmonic perturbations of the ball, and seeded random bodies built from
low-degree real spherical harmonics (Fourier modes on S^1).  Every
constructor validates strict convexity of the result on the grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.special import lpmv

from . import calculus
from .grid import Grid, ScalarField

__all__ = [
    "BodySpec",
    "make_body",
    "make_random",
    "convexity_margin",
    "real_harmonic",
    "spec_from_json",
    "spec_to_json",
]

RANDOM_MARGIN = 0.1  # minimum eigenvalue of A[h] kept by make_random


@dataclass(frozen=True)
class BodySpec:
    """Parametric description of a convex body via its support function."""

    n: int
    kind: str  # ball | shifted_ball | ellipsoid | harmonic
    r: float = 1.0
    v: tuple = ()
    M: tuple = ()
    base: float = 1.0
    coeffs: tuple = dc_field(default_factory=tuple)  # ((l, m, c), ...)

    def __post_init__(self):
        if self.kind not in ("ball", "shifted_ball", "ellipsoid", "harmonic"):
            raise ValueError(f"unknown body kind {self.kind!r}")
        if self.kind in ("ball", "shifted_ball") and self.r <= 0:
            raise ValueError("radius must be positive")
        if self.kind == "shifted_ball":
            if len(self.v) != self.n + 1:
                raise ValueError("shift vector must live in R^{n+1}")
            if np.linalg.norm(self.v) >= self.r:
                raise ValueError("shift must satisfy |v| < r")
        if self.kind == "ellipsoid":
            M = np.asarray(self.M, dtype=float)
            if M.shape != (self.n + 1, self.n + 1):
                raise ValueError("M must be (n+1) x (n+1)")
            if not np.allclose(M, M.T, atol=1e-12):
                raise ValueError("M must be symmetric")
            if np.linalg.eigvalsh(M).min() <= 0:
                raise ValueError("M must be positive-definite")


def spec_to_json(spec: BodySpec) -> str:
    d = {"n": spec.n, "kind": spec.kind}
    if spec.kind in ("ball", "shifted_ball"):
        d["r"] = spec.r
    if spec.kind == "shifted_ball":
        d["v"] = list(spec.v)
    if spec.kind == "ellipsoid":
        d["M"] = [list(row) for row in spec.M]
    if spec.kind == "harmonic":
        d["base"] = spec.base
        d["coeffs"] = [{"l": l, "m": m, "c": c} for (l, m, c) in spec.coeffs]
    return json.dumps(d, sort_keys=True)


def spec_from_json(text_or_dict, n: int | None = None) -> BodySpec:
    d = text_or_dict if isinstance(text_or_dict, dict) else json.loads(text_or_dict)
    if n is None:
        n = d.get("n")
    if n is None:
        # infer from the parameters
        if "M" in d:
            n = len(d["M"]) - 1
        elif "v" in d:
            n = len(d["v"]) - 1
        else:
            raise ValueError("dimension n missing and not inferable")
    kind = d["kind"]
    return BodySpec(
        n=int(n),
        kind=kind,
        r=float(d.get("r", 1.0)),
        v=tuple(d.get("v", ())),
        M=tuple(tuple(row) for row in d.get("M", ())),
        base=float(d.get("base", 1.0)),
        coeffs=tuple((int(c["l"]), int(c["m"]), float(c["c"])) for c in d.get("coeffs", ())),
    )


# -- spherical harmonics -------------------------------------------------

def _sph_norm(l: int, m: int) -> float:
    return math.sqrt((2 * l + 1) / (4 * math.pi) * math.factorial(l - m) / math.factorial(l + m))


def real_harmonic(grid: Grid, l: int, m: int) -> np.ndarray:
    """Real orthonormal harmonic on the grid.

    S^2: degree l and order m in [-l, l]; m > 0 pairs with cos(m phi),
    m < 0 with sin(|m| phi).  S^1: frequency l with m = 0 for cos(l phi)
    and m = 1 for sin(l phi); both normalized to unit L^2(mu) norm.
    """
    if grid.n == 1:
        if l == 0:
            return np.full(grid.shape, 1.0 / math.sqrt(2 * math.pi))
        base = np.cos(l * grid.phi) if m == 0 else np.sin(l * grid.phi)
        return base / math.sqrt(math.pi)
    if abs(m) > l:
        raise ValueError("order |m| must not exceed degree l")
    ct = grid.cos_theta * np.ones(grid.shape)
    p = lpmv(abs(m), l, ct)
    if m == 0:
        return _sph_norm(l, 0) * p
    trig = np.cos(m * grid.phi) if m > 0 else np.sin(-m * grid.phi)
    return math.sqrt(2.0) * _sph_norm(l, abs(m)) * p * trig[None, :]


def _harmonic_orders(l: int, n: int):
    if n == 1:
        return (0,) if l == 0 else (0, 1)
    return range(-l, l + 1)


# -- constructors ---------------------------------------------------------

def _sample(spec: BodySpec, grid: Grid) -> np.ndarray:
    x = grid.nodes
    if spec.kind == "ball":
        return np.full(grid.shape, float(spec.r))
    if spec.kind == "shifted_ball":
        v = np.asarray(spec.v, dtype=float)
        return spec.r + np.einsum("c...,c->...", x, v)
    if spec.kind == "ellipsoid":
        M = np.asarray(spec.M, dtype=float)
        return np.sqrt(np.einsum("c...,cd,d...->...", x, M, x))
    vals = np.full(grid.shape, float(spec.base))
    for l, m, c in spec.coeffs:
        vals = vals + c * real_harmonic(grid, l, m)
    return vals


def make_body(spec: BodySpec, grid: Grid) -> ScalarField:
    """Sample the support function and validate h > 0, A[h] > 0 on the grid."""
    if spec.n != grid.n:
        raise ValueError(f"spec dimension {spec.n} != grid dimension {grid.n}")
    values = _sample(spec, grid)
    if values.min() <= 0:
        raise ValueError(f"support function not positive (min {values.min():.3e})")
    margin = calculus.convexity_margin(values, grid)
    if margin <= 0:
        raise ValueError(
            f"body spec is not strictly convex on the grid (margin {margin:.3e})"
        )
    return ScalarField(grid, values)


def make_random(
    seed: int,
    n: int,
    grid: Grid,
    eps: float = 0.2,
    l_max: int = 4,
    origin_symmetric: bool = False,
) -> ScalarField:
    """Seeded random perturbation of the unit ball, convex by construction.

    h = 1 + eps * (random harmonic combination up to degree l_max, scaled to
    unit sup norm); eps is halved until the convexity margin reaches
    RANDOM_MARGIN.  Deterministic per (seed, grid).  With origin_symmetric
    only even degrees are used, so h(-x) = h(x) exactly.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if grid.n != n:
        raise ValueError(f"grid dimension {grid.n} != n={n}")
    rng = np.random.default_rng(seed)
    start = 2 if origin_symmetric else 1
    step = 2 if origin_symmetric else 1
    combo = np.zeros(grid.shape)
    for l in range(start, l_max + 1, step):
        for m in _harmonic_orders(l, n):
            combo += rng.standard_normal() * real_harmonic(grid, l, m)
    sup = np.abs(combo).max()
    if sup > 0:
        combo /= sup
    amp = float(eps)
    while True:
        values = 1.0 + amp * combo
        if values.min() > 0 and calculus.convexity_margin(values, grid) >= RANDOM_MARGIN:
            return ScalarField(grid, values)
        if amp < 1e-14:
            return ScalarField(grid, np.ones(grid.shape))
        amp *= 0.5


def convexity_margin(h: ScalarField) -> float:
    """Minimum over nodes of the smallest eigenvalue of A[h]."""
    return calculus.convexity_margin(h)
