"""Grid-refinement studies: residual ladders and observed convergence orders.

A study re-samples one body on each rung of a resolution ladder, evaluates a
named check, and reports (resolution, residual, observed order).  Checks
whose residuals sit at the roundoff floor on the finest rungs are flagged
exact instead of being given a meaningless order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import inequalities
from .calculus import assemble, embedding_check, pointwise_identity_report
from .grid import Grid, ScalarField, build_grid
from .inequalities import (
    af_local,
    affine_identity,
    main_lemma,
    p_chain,
    poincare,
    spectral_gap,
    witness_function,
    xi_identity,
)

__all__ = ["STUDY_CHECKS", "StudyRow", "run_study", "observed_orders"]

EXACT_FLOOR = 1e-12


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _direction(n: int) -> np.ndarray:
    return _unit([0.3, -0.5, 0.81][: n + 1])


def _check_ibp(geom, rng):
    grid = geom.grid
    f = inequalities.random_test_function(grid, rng).values
    g = inequalities.random_test_function(grid, rng).values
    lhs = grid.integrate(f * grid.laplacian(g))
    cross = grid.integrate((grid.grad(f) * grid.grad(g)).sum(axis=0))
    return abs(lhs + cross) / max(abs(lhs), abs(cross), 1.0)


def _check_minkowski(geom, rng):
    grid = geom.grid
    worst = 0.0
    for k in range(1, geom.n + 1):
        vec = np.array(
            [grid.integrate(grid.nodes[c] * geom.sigma[k]) for c in range(geom.n + 1)]
        )
        worst = max(worst, float(np.linalg.norm(vec)) / grid.integrate(geom.sigma[k]))
    return worst


def _check_xi(geom, rng):
    M = rng.standard_normal((geom.n + 2, geom.n + 2))[: geom.n + 1, : geom.n + 1]
    return xi_identity(geom, M).residual


def _check_integ_estim(geom, rng):
    return max(p_chain(geom, p).residual for p in (0.0, 2.0))


def _check_affine(geom, rng):
    return affine_identity(geom).residual


def _check_laplace_eig(geom, rng):
    grid = geom.grid
    f = np.einsum("c...,c->...", grid.nodes, _direction(geom.n))
    return float(np.abs(grid.laplacian(f) + geom.n * f).max())


def _check_grad_absx(geom, rng):
    return pointwise_identity_report(geom)["grad_absX"]


def _check_euler(geom, rng):
    return pointwise_identity_report(geom)["euler"]


def _check_embedding(geom, rng):
    return embedding_check(geom, _direction(geom.n))["max_residual"]


def _check_vk_identity(geom, rng):
    f = inequalities.random_test_function(geom.grid, rng)
    return max(spectral_gap(geom, f, k).residual for k in range(1, geom.n + 1))


def _check_main_lemma_eq(geom, rng):
    # meaningful as an equality study on centred ellipsoids
    return max(abs(main_lemma(geom, k).slack_rel) for k in range(1, geom.n + 1))


def _check_spectral_witness(geom, rng):
    f = witness_function(geom, _direction(geom.n))
    return max(abs(spectral_gap(geom, f, k).slack_rel) for k in range(1, geom.n + 1))


def _check_af_witness(geom, rng):
    f = witness_function(geom, _direction(geom.n), c=0.25)
    return max(abs(af_local(geom, f, k).slack_rel) for k in range(1, geom.n + 1))


def _check_poincare_witness(geom, rng):
    grid = geom.grid
    f = ScalarField(
        grid, 1.0 + 0.2 * np.einsum("c...,c->...", grid.nodes, _direction(geom.n))
    )
    return abs(poincare(f).slack_rel)


STUDY_CHECKS = {
    "ibp": _check_ibp,
    "minkowski": _check_minkowski,
    "xi_identity": _check_xi,
    "integ_estim": _check_integ_estim,
    "affine_identity": _check_affine,
    "laplace_eig": _check_laplace_eig,
    "grad_absX": _check_grad_absx,
    "euler": _check_euler,
    "embedding": _check_embedding,
    "vk_identity": _check_vk_identity,
    "main_lemma_equality": _check_main_lemma_eq,
    "spectral_gap_witness": _check_spectral_witness,
    "af_witness": _check_af_witness,
    "poincare_witness": _check_poincare_witness,
}


@dataclass(frozen=True)
class StudyRow:
    resolution: str
    residual: float
    order: float | None  # vs the previous rung; None on the first
    exact: bool


def run_study(check: str, sample_body, resolutions, seed: int = 0) -> list[StudyRow]:
    """Evaluate one check across a resolution ladder.

    sample_body(grid) must return the support function on that grid; the
    random generator is re-seeded per rung so rungs differ only by grid.
    """
    if check not in STUDY_CHECKS:
        raise ValueError(f"unknown study check {check!r} (have {sorted(STUDY_CHECKS)})")
    fn = STUDY_CHECKS[check]
    rows: list[StudyRow] = []
    prev = None
    for res in resolutions:
        grid = res if isinstance(res, Grid) else build_grid(_res_dim(res), res)
        geom = assemble(sample_body(grid))
        rng = np.random.default_rng(seed)
        val = float(fn(geom, rng))
        exact = val <= EXACT_FLOOR
        order = None
        if prev is not None and not exact and prev > 0:
            order = float(np.log2(prev / val))
        rows.append(
            StudyRow(resolution=grid.describe(), residual=val, order=order, exact=exact)
        )
        prev = val
    return rows


def _res_dim(res) -> int:
    return 1 if np.ndim(res) == 0 else 2


def observed_orders(rows: list[StudyRow]) -> list[float]:
    return [r.order for r in rows if r.order is not None]
