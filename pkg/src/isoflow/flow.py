"""Normalized geometric flow solving the isotropic curvature problems.

Problem families (residual R vanishes exactly at solutions):

  gauss_power:alpha=A   K^A = h          R = -A log sigma_n - log h
  lp:p=P                K = h^{1-P}      R = (P-1) log h - log sigma_n
  sigma_k:k=K,phi=...   h sigma_k = phi(h, |X|)
                                         R = log phi - log sigma_k - log h

The raw relaxation dh/dt = h R is linearly unstable around solutions in
either sign (the linearization is indefinite: low modes and high modes
carry opposite signs), so the step integrates the mode-deflected field
S = 2 P R - R, where P projects onto constants (plus the linear harmonics
when no recentring runs).  The deflected flow has the same stationary set
(S = 0 iff R = 0) and is linearly stable at solutions.  High-frequency
stiffness is removed by a backward-Euler preconditioner in the sphere
Laplacian; on constant fields the update reduces exactly to the explicit
Euler step h <- h (1 + dt R) of the scalar radius dynamics.

Limits are certified against the uniqueness statements: sphere distance
(max h - min h)/(max h + min h), ellipsoid distance via a least-squares fit
of h^2 on the quadratic monomials, and the inequality chains from
`inequalities` dispatched per family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import inequalities
from .calculus import BodyGeometry, assemble
from .grid import Grid, ScalarField
from .integrals import centroid_point
from .nonlinearity import PhiSpec, gaussian_phi, power_phi

__all__ = [
    "ProblemSpec",
    "FlowState",
    "FlowTrace",
    "FlowResult",
    "StepCollapseError",
    "NoConvergenceError",
    "residual_field",
    "step",
    "run",
    "certify",
    "sphere_distance",
    "ellipsoid_distance",
]

TRACE_COLUMNS = (
    "step",
    "t",
    "residual_inf",
    "margin",
    "volume",
    "centroid_norm",
    "sphere_dist",
    "ellipsoid_dist",
)

MAX_HALVINGS = 30
DT_GROW = 1.2
DT_GROW_AFTER = 10


@dataclass(frozen=True)
class ProblemSpec:
    """One isotropic curvature problem plus flow options."""

    family: str                      # gauss_power | lp | sigma_k
    alpha: float = 1.0               # gauss_power exponent
    p: float = 0.0                   # lp exponent
    k: int = 1                       # sigma_k order
    phi: PhiSpec | None = None       # sigma_k nonlinearity
    centering: str | None = None     # None -> family default

    def __post_init__(self):
        if self.family not in ("gauss_power", "lp", "sigma_k"):
            raise ValueError(f"unknown problem family {self.family!r}")
        if self.family == "sigma_k" and self.phi is None:
            raise ValueError("sigma_k problems need a phi nonlinearity")
        if self.centering not in (None, "none", "recenter-each-step"):
            raise ValueError(f"unknown centering mode {self.centering!r}")

    @staticmethod
    def parse(text: str) -> "ProblemSpec":
        """Parse the problem grammar, e.g. "gauss_power:alpha=0.5",
        "lp:p=-3", "sigma_k:k=1,phi=power,a=1,b=0",
        "sigma_k:k=2,phi=gaussian,c=0.5"."""
        family, _, rest = text.partition(":")
        family = family.strip()
        opts: dict[str, str] = {}
        if rest:
            for item in rest.split(","):
                key, _, val = item.partition("=")
                opts[key.strip()] = val.strip()
        centering = opts.pop("centering", None)
        if centering == "recenter":
            centering = "recenter-each-step"
        if family == "gauss_power":
            spec = ProblemSpec(
                family, alpha=float(opts.pop("alpha", 1.0)), centering=centering
            )
        elif family == "lp":
            spec = ProblemSpec(family, p=float(opts.pop("p")), centering=centering)
        elif family == "sigma_k":
            k = int(opts.pop("k"))
            kind = opts.pop("phi", "power")
            if kind == "power":
                phi = power_phi(float(opts.pop("a", 1.0)), float(opts.pop("b", 0.0)))
            elif kind == "gaussian":
                phi = gaussian_phi(float(opts.pop("c", 0.5)))
            else:
                raise ValueError(f"unknown phi preset {kind!r}")
            spec = ProblemSpec(family, k=k, phi=phi, centering=centering)
        else:
            raise ValueError(f"unknown problem family {family!r}")
        if opts:
            raise ValueError(f"unrecognized problem options {sorted(opts)}")
        return spec

    def describe(self) -> str:
        if self.family == "gauss_power":
            return f"gauss_power:alpha={self.alpha:g}"
        if self.family == "lp":
            return f"lp:p={self.p:g}"
        return f"sigma_k:k={self.k},phi={self.phi.describe()}"

    def recenter(self, n: int) -> bool:
        if self.centering is not None:
            return self.centering == "recenter-each-step"
        if self.family == "gauss_power":
            return False
        if self.family == "lp":
            # uniqueness for -(n+1) < p <= -1 holds without centring; the
            # affine-critical exponent keeps its centred normalization
            return self.p > -1.0 or math.isclose(self.p, -(n + 1.0))
        return True

    def order(self, n: int) -> int:
        return n if self.family in ("gauss_power", "lp") else self.k

    def hypothesis_warnings(self, n: int) -> list[str]:
        """Flags runs whose parameters leave the proven uniqueness ranges."""
        warns = []
        if self.family == "gauss_power":
            lo, hi = 1.0 / (n + 2), 0.5
            if not (lo - 1e-12 <= self.alpha <= hi + 1e-12 or self.alpha == 1.0):
                warns.append(
                    f"alpha={self.alpha:g} outside [{lo:g}, {hi:g}] and != 1"
                )
        elif self.family == "lp":
            if self.p < -(n + 1) - 1e-12:
                warns.append(f"p={self.p:g} below -(n+1)")
            if not self.recenter(n) and self.p > -1.0:
                warns.append("p > -1 without recentring")
        else:
            if self.k >= n + 1:
                warns.append(f"k={self.k} exceeds n={n}")
            phi = self.phi
            # x d/dx log phi = a, d/dy phi >= 0 iff b, s >= 0 for this family
            if self.k - 1 + phi.a < -1e-12:
                warns.append(f"k-1+a = {self.k - 1 + phi.a:g} negative")
            if phi.b < 0 or phi.s < 0:
                warns.append("phi decreasing in |X|")
        return warns


def residual_field(geom: BodyGeometry, prob: ProblemSpec) -> ScalarField:
    """Log-residual of the stationary equation; identically 0 at solutions."""
    grid = geom.grid
    n = grid.n
    log_h = np.log(geom.h.values)
    if prob.family == "gauss_power":
        vals = -prob.alpha * np.log(geom.sigma[n]) - log_h
    elif prob.family == "lp":
        vals = (prob.p - 1.0) * log_h - np.log(geom.sigma[n])
    else:
        k = prob.k
        vals = (
            prob.phi.log_value(geom.h.values, geom.absX)
            - np.log(geom.sigma[k])
            - log_h
        )
    return ScalarField(grid, vals)


@dataclass
class FlowState:
    geometry: BodyGeometry
    t: float = 0.0
    steps: int = 0

    @property
    def h(self) -> ScalarField:
        return self.geometry.h


@dataclass
class FlowTrace:
    rows: list = dc_field(default_factory=list)

    def append(self, **kw):
        self.rows.append(tuple(kw[c] for c in TRACE_COLUMNS))

    def to_csv(self) -> str:
        lines = [",".join(TRACE_COLUMNS)]
        for row in self.rows:
            lines.append(
                ",".join(
                    str(int(v)) if c == "step" else repr(float(v))
                    for c, v in zip(TRACE_COLUMNS, row)
                )
            )
        return "\n".join(lines) + "\n"

    def last(self, column: str):
        return self.rows[-1][TRACE_COLUMNS.index(column)]


class StepCollapseError(RuntimeError):
    def __init__(self, state: FlowState, trace: FlowTrace | None = None):
        self.state = state
        self.trace = trace
        super().__init__(
            f"time step collapsed after {MAX_HALVINGS} halvings at t={state.t:.4g}"
        )


class NoConvergenceError(RuntimeError):
    def __init__(self, state: FlowState, trace: FlowTrace, residual: float):
        self.state = state
        self.trace = trace
        self.residual = residual
        super().__init__(
            f"no convergence after {state.steps} steps (residual {residual:.3e})"
        )


# -- deflation and preconditioning ----------------------------------------

def _deflect(grid: Grid, r_vals: np.ndarray, deflate_linear: bool) -> np.ndarray:
    """S = 2 P R - R with P the projection onto constants (+ linears)."""
    area = grid.area
    proj = np.full(grid.shape, grid.integrate(r_vals) / area)
    if deflate_linear:
        for c in range(grid.n + 1):
            coef = grid.integrate(r_vals * grid.nodes[c]) * (grid.n + 1) / area
            proj += coef * grid.nodes[c]
    return 2.0 * proj - r_vals


class _ImplicitSolver:
    """Backward-Euler solve of (I + dt c (-Laplacian)) u = rhs per grid."""

    def __init__(self, grid: Grid):
        self.grid = grid
        if grid.n == 1:
            m = np.fft.rfftfreq(grid.shape[0], d=1.0 / grid.shape[0])
            self.symbol = m**2
        else:
            ntheta = grid.shape[0]
            halo = grid._HALO
            d1 = {}
            d2 = {}
            for parity in (1, -1):
                m1 = np.zeros((ntheta, ntheta))
                m2 = np.zeros((ntheta, ntheta))
                for i in range(ntheta):
                    for kk in range(2 * halo + 1):
                        j = i + kk  # extended index
                        if j < halo:
                            src, fac = halo - 1 - j, parity
                        elif j < halo + ntheta:
                            src, fac = j - halo, 1.0
                        else:
                            src, fac = 2 * ntheta + halo - 1 - j, parity
                        m1[i, src] += fac * grid._w1_theta[i, kk]
                        m2[i, src] += fac * grid._w2_theta[i, kk]
                d1[parity] = m1
                d2[parity] = m2
            cot = grid.cot_theta[:, 0]
            self.neg_lap_theta = {
                par: -(d2[par] + cot[:, None] * d1[par]) for par in (1, -1)
            }
            self.inv_sin_sq = 1.0 / grid.sin_theta[:, 0] ** 2

    def solve(self, rhs: np.ndarray, dt_c: float) -> np.ndarray:
        grid = self.grid
        if dt_c == 0.0:
            return rhs.copy()
        if grid.n == 1:
            fk = np.fft.rfft(rhs)
            return np.fft.irfft(fk / (1.0 + dt_c * self.symbol), n=grid.shape[0])
        ntheta, nphi = grid.shape
        fk = np.fft.rfft(rhs, axis=1)  # (ntheta, nphi//2+1)
        nmodes = fk.shape[1]
        eye = np.eye(ntheta)
        mats = np.empty((nmodes, ntheta, ntheta))
        ms = np.arange(nmodes)
        for par in (1, -1):
            sel = ms % 2 == (0 if par == 1 else 1)
            base = self.neg_lap_theta[par]
            mats[sel] = eye + dt_c * (
                base[None, :, :]
                + (ms[sel] ** 2)[:, None, None]
                * np.diag(self.inv_sin_sq)[None, :, :]
            )
        sol = np.linalg.solve(mats, fk.T[:, :, None])[:, :, 0].T
        return np.fft.irfft(sol, n=nphi, axis=1)


_SOLVERS: dict = {}


def _solver(grid: Grid) -> _ImplicitSolver:
    key = id(grid)
    if key not in _SOLVERS:
        _SOLVERS[key] = _ImplicitSolver(grid)
    return _SOLVERS[key]


def _stiffness_coeff(geom: BodyGeometry, prob: ProblemSpec) -> float:
    """Curvature coefficient of the Laplacian in the linearized residual."""
    lam_min = float(geom.lambdas[0].min())
    if prob.family == "gauss_power":
        coef = prob.alpha
    elif prob.family == "lp":
        coef = 1.0
    else:
        coef = float(prob.k)
    return 1.5 * coef / lam_min


def _scale_rate(geom: BodyGeometry, prob: ProblemSpec) -> float:
    """Decay rate of the radius mode; the explicit step must resolve it."""
    n = geom.n
    if prob.family == "gauss_power":
        return prob.alpha * n + 1.0
    if prob.family == "lp":
        return n + 1.0 - prob.p
    phi = prob.phi
    y_sq_max = float((geom.absX**2).max())
    return abs(phi.a + phi.b + phi.s * y_sq_max - (prob.k + 1.0)) + 0.5


def _recenter(geom: BodyGeometry, max_iter: int = 3) -> BodyGeometry:
    """Translate so the computed centroid vanishes (fixed point of the map)."""
    for _ in range(max_iter):
        c = centroid_point(geom)
        if np.linalg.norm(c) <= 1e-13 * (1.0 + float(geom.absX.max())):
            break
        grid = geom.grid
        shift = np.einsum("c...,c->...", grid.nodes, c)
        geom = assemble(ScalarField(grid, geom.h.values - shift))
    return geom


def step(state: FlowState, prob: ProblemSpec, dt: float) -> tuple[FlowState, float]:
    """One accepted flow step; halves dt until the update keeps h > 0 and
    A[h] > 0.  Returns the new state and the dt actually used."""
    geom = state.geometry
    grid = geom.grid
    r = residual_field(geom, prob).values
    s = _deflect(grid, r, deflate_linear=not prob.recenter(grid.n))
    solver = _solver(grid)
    c_imp = _stiffness_coeff(geom, prob)
    for _ in range(MAX_HALVINGS):
        delta = solver.solve(dt * s, dt * c_imp)
        new_vals = geom.h.values * (1.0 + delta)
        if new_vals.min() > 0:
            try:
                new_geom = assemble(ScalarField(grid, new_vals))
            except ValueError:
                new_geom = None
            if new_geom is not None:
                if prob.recenter(grid.n):
                    new_geom = _recenter(new_geom)
                return (
                    FlowState(geometry=new_geom, t=state.t + dt, steps=state.steps + 1),
                    dt,
                )
        dt *= 0.5
    raise StepCollapseError(state)


# -- limit certification ----------------------------------------------------

def sphere_distance(h: ScalarField) -> float:
    """min over r of max|h - r| / r, attained at r = (max h + min h)/2."""
    hi, lo = float(h.values.max()), float(h.values.min())
    return (hi - lo) / (hi + lo)


_QUAD_BASIS_CACHE: dict = {}


def _quad_basis(grid: Grid):
    key = id(grid)
    if key not in _QUAD_BASIS_CACHE:
        x = grid.nodes
        basis = []
        for c in range(grid.n + 1):
            for d in range(c, grid.n + 1):
                fac = 1.0 if c == d else 2.0
                basis.append(fac * x[c] * x[d])
        flat = np.stack([b.ravel() for b in basis])
        gram = (flat * grid.weights.ravel()) @ flat.T
        _QUAD_BASIS_CACHE[key] = (flat, gram)
    return _QUAD_BASIS_CACHE[key]


def ellipsoid_distance(h: ScalarField) -> float:
    """Sup-norm misfit of h^2 against its best quadratic-form fit."""
    grid = h.grid
    flat, gram = _quad_basis(grid)
    target = h.values.ravel() ** 2
    rhs = flat @ (target * grid.weights.ravel())
    coef = np.linalg.solve(gram, rhs)
    fit = coef @ flat
    return float(np.abs(target - fit).max() / target.max())


@dataclass
class FlowResult:
    converged: bool
    state: FlowState
    trace: FlowTrace
    problem: ProblemSpec
    residual_inf: float
    sphere_dist: float
    ellipsoid_dist: float
    warnings: list


def run(
    body: ScalarField,
    prob: ProblemSpec,
    tol: float = 1e-8,
    max_steps: int = 4000,
    dt0: float | None = None,
    dt_max: float = 0.5,
) -> FlowResult:
    """Iterate the flow until the soliton residual drops below tol.

    Raises NoConvergenceError (with the trace attached) at max_steps and
    propagates StepCollapseError if the step size underflows.
    """
    geom = assemble(body)
    if prob.recenter(geom.grid.n):
        geom = _recenter(geom)
    state = FlowState(geometry=geom)
    trace = FlowTrace()
    r = residual_field(geom, prob).values
    res_inf = float(np.abs(r).max())
    if dt0 is None:
        dt0 = 0.1 / (1.0 + res_inf)
    dt = min(dt0, dt_max)
    streak = 0

    def record(st: FlowState, res: float):
        g = st.geometry
        trace.append(
            step=st.steps,
            t=st.t,
            residual_inf=res,
            margin=g.margin,
            volume=g.volume(),
            centroid_norm=float(np.linalg.norm(centroid_point(g))),
            sphere_dist=sphere_distance(g.h),
            ellipsoid_dist=ellipsoid_distance(g.h),
        )

    record(state, res_inf)
    while res_inf >= tol:
        if state.steps >= max_steps:
            raise NoConvergenceError(state, trace, res_inf)
        cap = min(dt_max, 1.5 / _scale_rate(state.geometry, prob))
        dt = min(dt, cap)
        try:
            state, used = step(state, prob, dt)
        except StepCollapseError as err:
            err.trace = trace
            raise
        if used < dt:
            dt = used
            streak = 0
        else:
            streak += 1
            if streak >= DT_GROW_AFTER:
                dt = min(dt * DT_GROW, cap)
                streak = 0
        res_inf = float(np.abs(residual_field(state.geometry, prob).values).max())
        record(state, res_inf)
    return FlowResult(
        converged=True,
        state=state,
        trace=trace,
        problem=prob,
        residual_inf=res_inf,
        sphere_dist=sphere_distance(state.h),
        ellipsoid_dist=ellipsoid_distance(state.h),
        warnings=prob.hypothesis_warnings(body.grid.n),
    )


def certify(geom: BodyGeometry, prob: ProblemSpec) -> list:
    """Inequality-chain certificates appropriate to the converged family."""
    n = geom.n
    reports = []
    if prob.family == "gauss_power":
        p_equiv = 1.0 - 1.0 / prob.alpha
        if prob.alpha == 1.0:
            reports.append(inequalities.theorem11_chain(geom))
        reports.append(inequalities.p_chain(geom, p_equiv))
        if math.isclose(p_equiv, -(n + 1.0)):
            reports.append(inequalities.main_lemma(geom, n))
    elif prob.family == "lp":
        reports.append(inequalities.p_chain(geom, prob.p))
        if math.isclose(prob.p, -(n + 1.0)):
            reports.append(inequalities.main_lemma(geom, n))
    else:
        # restate h sigma_n = phi as phi_K K = h^{n+2} with phi_K = x^{n+1} phi
        if prob.k == n:
            reports.append(inequalities.saroglou_sign(geom, prob.phi.times_x_power(n + 1)))
        else:
            reports.append(inequalities.saroglou_sign(geom, prob.phi))
        reports.append(inequalities.main_lemma(geom, prob.k))
    return reports
