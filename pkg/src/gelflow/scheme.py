"""Decoupled time stepping: a generalized Stokes solve for ``(u, ptilde)``
followed by a diffusion solve for ``q``, in either order.

Algebraic form of one step (P1 mass ``M``, P1 stiffness ``S``, vector-P2
Laplacian ``A``, divergence ``B``, boundary load ``F``)::

    [ beta A   -B^T ] [u     ]   [ F + G_u ]
    [ -B        0   ] [ptilde] = [ -M q    ]     + two translation pins

    (M / dt + kappa alpha S) q_new = M q / dt - kappa S ptilde + G_q

Rigid translations are the only kernel of the Stokes block under pure
traction loading; they are fixed by holding ``int u_x`` and ``int u_y`` at
the values of the initial data. The multipliers of those rows vanish when
the load is balanced.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from . import fem
from .errors import IncompatibilityError, InvalidParameterError, StepError, GelflowError
from .linsolve import AugmentedSolver, Factorization
from .mesh import Mesh, mesh_size
from .model import (BoundaryLoad, ConservedSet, InitialData, MaterialParams, compute_conserved,
                    derive_params, check_compatibility)

log = logging.getLogger(__name__)

ALGORITHMS = ("alg1", "alg2")


class MeshConstraintWarning(UserWarning):
    """``theta = kappa beta dt / h^2`` exceeds the configured threshold."""


@dataclass
class SourceHooks:
    """Manufactured-solution data. All callables take ``t`` as last argument.

    ``g_u(x, t)`` and ``g_q(x, t)`` are volume sources; ``traction(x, n, t)``
    replaces the boundary load; ``flux_q(x, n, t)`` is a boundary flux added
    to the diffusion equation.
    """

    g_u: Optional[Callable] = None
    g_q: Optional[Callable] = None
    traction: Optional[Callable] = None
    flux_q: Optional[Callable] = None

    @property
    def active(self) -> bool:
        return any(h is not None for h in (self.g_u, self.g_q, self.traction, self.flux_q))


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    T: float
    steps: tuple  # per-step sizes
    shortened: bool = False

    @classmethod
    def make(cls, dt: float, T: float) -> "TimeGrid":
        if not (dt > 0 and T > 0):
            raise InvalidParameterError(f"dt and T must be positive, got {dt}, {T}")
        ratio = T / dt
        n = int(round(ratio))
        if n >= 1 and abs(n * dt - T) <= 1e-12 * T:
            return cls(dt, T, (dt,) * n, False)
        n = math.ceil(ratio)
        last = T - (n - 1) * dt
        return cls(dt, T, (dt,) * (n - 1) + (last,), True)

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    @property
    def times(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.steps)])


def theta_ratio(kappa, beta, dt, h) -> float:
    return kappa * beta * dt / h ** 2


@dataclass
class State:
    n: int
    t: float
    u: np.ndarray
    q: np.ndarray
    ptilde: Optional[np.ndarray] = None
    p: Optional[np.ndarray] = None


@dataclass
class StokesResult:
    u: np.ndarray
    ptilde: np.ndarray
    multipliers: np.ndarray


class Discretization:
    """Taylor-Hood (vector P2 / P1) plus P1 spaces and every assembled operator on one mesh."""

    def __init__(self, mesh: Mesh, material: MaterialParams):
        self.mesh = mesh
        self.material = material
        self.params = derive_params(material)
        self.h = mesh_size(mesh)
        self.V = fem.DofMap.vector_p2(mesh)
        self.W = fem.DofMap.p1(mesh)
        self.A = fem.assemble_vector_laplacian(mesh, self.V, 1.0)
        self.B = fem.assemble_divergence(mesh, self.V, self.W)
        self.M = fem.assemble_mass_p1(mesh)
        self.S = fem.assemble_stiffness_p1(mesh)
        self.rows = fem.assemble_moment_rows(mesh, self.V, self.W)
        self._stokes = None
        self._ritz = None
        self._mass = None
        self._diffusion = {}

    @property
    def nu(self) -> int:
        return self.V.n_dofs

    @property
    def np(self) -> int:
        return self.W.n_dofs

    # -- operators ------------------------------------------------------------
    def stokes_matrix(self) -> sp.csr_matrix:
        beta = self.params.beta
        return sp.bmat([[beta * self.A, -self.B.T], [-self.B, None]], format="csr")

    def pin_rows(self) -> np.ndarray:
        z = np.zeros(self.np)
        return np.vstack([np.concatenate([self.rows.mean_u_x, z]),
                          np.concatenate([self.rows.mean_u_y, z])])

    @property
    def stokes_solver(self) -> AugmentedSolver:
        if self._stokes is None:
            self._stokes = AugmentedSolver(self.stokes_matrix(), self.pin_rows())
        return self._stokes

    def diffusion_matrix(self, dt: float) -> sp.csr_matrix:
        p = self.params
        return (self.M / dt + p.kappa * p.alpha * self.S).tocsr()

    def diffusion_solver(self, dt: float) -> Factorization:
        key = float(dt)
        if key not in self._diffusion:
            self._diffusion[key] = Factorization(self.diffusion_matrix(dt))
        return self._diffusion[key]

    # -- loads ------------------------------------------------------------------
    def load_vector(self, f: Optional[BoundaryLoad], hooks: Optional[SourceHooks] = None, t=0.0):
        if hooks is not None and hooks.traction is not None:
            F = fem.assemble_boundary_load(self.mesh, self.V, lambda x, n, tag: hooks.traction(x, n, t))
        elif f is not None:
            F = fem.assemble_boundary_load(self.mesh, self.V, f)
        else:
            F = np.zeros(self.nu)
        if hooks is not None and hooks.g_u is not None:
            F = F + fem.assemble_volume_load(self.V, lambda x: hooks.g_u(x, t))
        return F

    def translation_means(self, u0: InitialData):
        """``(int u0_x, int u0_y)``, the values the translation pins hold."""
        mx = fem.integrate_domain(self.mesh, lambda x, e: u0.displacement(x)[:, 0])
        my = fem.integrate_domain(self.mesh, lambda x, e: u0.displacement(x)[:, 1])
        return np.array([mx, my])

    # -- initial projections ---------------------------------------------------------
    def project_initial_q(self, u0: InitialData) -> np.ndarray:
        """L2 projection of ``div u0`` onto P1."""
        from .model import divergence_function

        div = divergence_function(u0, self.mesh)
        pts, _ = fem.quadrature_points(self.mesh)
        elem = np.repeat(np.arange(self.mesh.n_triangles), pts.shape[1])
        b = fem.assemble_quadrature_values(self.W, div(pts.reshape(-1, 2), elem))
        if self._mass is None:
            self._mass = Factorization(self.M)
        return self._mass.solve(b)

    def project_initial_u(self, u0: InitialData) -> np.ndarray:
        """Ritz projection of ``u0`` with ``int u``, ``oint u . n`` matched to ``u0``."""
        if self._ritz is None:
            C = np.vstack([self.rows.mean_u_x, self.rows.mean_u_y, self.rows.flux_u])
            self._ritz = AugmentedSolver(self.A, C)
        b = fem.assemble_gradient_load(self.V, u0.gradient)
        flux = fem.integrate_boundary(self.mesh, lambda x, n, tag: np.sum(u0.displacement(x) * n, axis=1))
        c = np.concatenate([self.translation_means(u0), [flux]])
        u, _ = self._ritz.solve(b, c)
        return u

    # -- steps -----------------------------------------------------------------------
    def stokes_step(self, q_prev, f: Optional[BoundaryLoad], pins, hooks: Optional[SourceHooks] = None,
                    t: float = 0.0, conserved: Optional[ConservedSet] = None, F=None,
                    rtol: float = 1e-8) -> StokesResult:
        """Generalized Stokes solve with prescribed divergence ``q_prev``.

        When ``conserved`` is given, ``int q_prev`` must match ``C_q`` to
        ``rtol``; otherwise :class:`IncompatibilityError` is raised.
        """
        Mq = self.M @ q_prev
        if conserved is not None:
            total = float(Mq.sum())
            scale = max(abs(conserved.C_q), float(np.abs(Mq).sum()), 1e-300)
            if abs(total - conserved.C_q) > rtol * scale:
                raise IncompatibilityError(
                    f"int q = {total:.12e} does not match C_q = {conserved.C_q:.12e}")
        if F is None:
            F = self.load_vector(f, hooks, t)
        rhs = np.concatenate([F, -Mq])
        x, lam = self.stokes_solver.solve(rhs, pins)
        return StokesResult(x[: self.nu], x[self.nu:], lam)

    def diffusion_step(self, q_prev, ptilde_new, dt: float, hooks: Optional[SourceHooks] = None,
                       t: float = 0.0) -> np.ndarray:
        """Implicit Euler step of ``q_t = kappa div grad(alpha q + ptilde)``; the
        Neumann coupling ``alpha dq/dn = -dptilde/dn`` is natural in this form."""
        p = self.params
        rhs = self.M @ q_prev / dt - p.kappa * (self.S @ ptilde_new)
        if hooks is not None and hooks.g_q is not None:
            rhs = rhs + fem.assemble_volume_load(self.W, lambda x: hooks.g_q(x, t))
        if hooks is not None and hooks.flux_q is not None:
            rhs = rhs + fem.assemble_boundary_scalar_load(self.mesh, self.W, lambda x, n, tag: hooks.flux_q(x, n, t))
        return self.diffusion_solver(dt).solve(rhs)

    # -- functionals ---------------------------------------------------------------------
    def energy(self, u, q, F) -> float:
        """``1/2 [beta |grad u|^2 + alpha |q|^2 - 2 <f, u>]``."""
        p = self.params
        return 0.5 * (p.beta * u @ (self.A @ u) + p.alpha * q @ (self.M @ q) - 2.0 * F @ u)

    def measure(self, u=None, q=None, ptilde=None, p=None) -> dict:
        out = {}
        if q is not None:
            out["C_q"] = float(self.rows.mean_ptilde @ q)
        if u is not None:
            out["C_u"] = float(self.rows.flux_u @ u)
        if ptilde is not None:
            out["C_ptilde"] = float(self.rows.mean_ptilde @ ptilde)
        if p is not None:
            out["C_p"] = float(self.rows.mean_ptilde @ p)
        return out


def reconstruct_pressure(ptilde, q, alpha: float) -> np.ndarray:
    """``p = ptilde + alpha q``. Pass ``q^{n-1}`` for Algorithm 1 and ``q^n`` for Algorithm 2."""
    ptilde = np.asarray(ptilde)
    q = np.asarray(q)
    if ptilde.shape != q.shape:
        raise ValueError(f"dimension mismatch: {ptilde.shape} vs {q.shape}")
    return ptilde + alpha * q


@dataclass
class Diagnostics:
    """One row per state at which every diagnostic is defined.

    For Algorithm 1 the rows are steps ``n = 1..N`` and ``J_h`` in row ``n``
    pairs ``u^n`` with ``q^{n-1}``; for Algorithm 2 they are ``n = 0..N`` with
    ``u^n`` paired with ``q^n``.
    """

    step: list = field(default_factory=list)
    t: list = field(default_factory=list)
    J_h: list = field(default_factory=list)
    C_q: list = field(default_factory=list)
    C_u: list = field(default_factory=list)
    C_ptilde: list = field(default_factory=list)
    C_p: list = field(default_factory=list)
    theta: list = field(default_factory=list)
    mult_x: list = field(default_factory=list)
    mult_y: list = field(default_factory=list)
    compatibility_residual: float = 0.0
    shortened_last_step: bool = False

    COLUMNS = ("step", "t", "J_h", "C_q", "C_u", "C_ptilde", "C_p", "theta", "mult_x", "mult_y")

    def append(self, **row):
        for k in self.COLUMNS:
            getattr(self, k).append(row[k])

    def __len__(self):
        return len(self.step)

    def column(self, name) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def max_relative_drift(self, name) -> float:
        v = self.column(name)
        if len(v) == 0:
            return 0.0
        ref = abs(v[0]) if v[0] != 0 else max(np.abs(v).max(), 1e-300)
        return float(np.abs(v - v[0]).max() / ref) if np.any(v != v[0]) else 0.0

    def to_csv(self) -> str:
        lines = [",".join(self.COLUMNS)]
        for i in range(len(self)):
            row = [str(self.step[i])] + [repr(float(getattr(self, k)[i])) for k in self.COLUMNS[1:]]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def energy_monotonicity_report(diag: Diagnostics, rtol: float = 1e-10) -> list:
    """Rows ``i`` where ``J_h[i+1] > J_h[i] + rtol |J_h[0]|``."""
    J = diag.column("J_h")
    if len(J) < 2:
        return []
    tol = rtol * abs(J[0])
    return [int(diag.step[i]) for i in range(len(J) - 1) if J[i + 1] > J[i] + tol]


@dataclass
class SimulationSetup:
    mesh: Mesh
    material: MaterialParams
    u0: InitialData
    load: BoundaryLoad
    dt: float
    T: float
    algorithm: str = "alg1"
    theta_threshold: float = 0.1
    hooks: Optional[SourceHooks] = None
    compatibility_tol: float = 1e-10


@dataclass
class RunResult:
    states: list
    diagnostics: Diagnostics
    conserved: ConservedSet
    disc: Discretization
    grid: TimeGrid
    setup: SimulationSetup

    @property
    def final(self) -> State:
        return self.states[-1]


def run(setup: SimulationSetup, disc: Optional[Discretization] = None,
        observer: Optional[Callable[[State], None]] = None, keep_states: bool = True) -> RunResult:
    """Integrate from ``t = 0`` to ``T`` with Algorithm 1 or 2.

    ``observer`` is called with every state as it is produced; with
    ``keep_states=False`` only the initial and final states are retained.
    """
    if setup.algorithm not in ALGORITHMS:
        raise InvalidParameterError(f"algorithm must be one of {ALGORITHMS}, got {setup.algorithm!r}")
    disc = disc or Discretization(setup.mesh, setup.material)
    dp = disc.params
    grid = TimeGrid.make(setup.dt, setup.T)
    hooks = setup.hooks if setup.hooks is not None and setup.hooks.active else None
    f = setup.load

    conserved = compute_conserved(setup.u0, f, setup.mesh, dp)
    diag = Diagnostics(shortened_last_step=grid.shortened)
    if hooks is None:
        diag.compatibility_residual = check_compatibility(f, setup.mesh)
        scale = float(np.sum(disc.mesh.boundary_lengths)) * _load_scale(f, disc.mesh)
        if diag.compatibility_residual > setup.compatibility_tol * scale:
            raise IncompatibilityError(
                f"net boundary force {diag.compatibility_residual:.3e} violates the compatibility condition")
    theta = theta_ratio(dp.kappa, dp.beta, grid.dt, disc.h)
    if theta > setup.theta_threshold:
        warnings.warn(f"theta = kappa*beta*dt/h^2 = {theta:.3g} exceeds {setup.theta_threshold}; "
                      "the discrete energy law is only guaranteed for dt = O(h^2)", MeshConstraintWarning,
                      stacklevel=2)

    pins = disc.translation_means(setup.u0)
    F_fixed = disc.load_vector(f) if hooks is None else None
    check = conserved if hooks is None else None

    def load_at(t):
        return F_fixed if hooks is None else disc.load_vector(f, hooks, t)

    states = []

    def emit(state):
        if keep_states or not states:
            states.append(state)
        else:
            states[1:] = [state]
        if observer is not None:
            observer(state)

    def record(n, t, u, q, qpair, ptilde, p, lam, F, dt):
        m = disc.measure(u=u, q=q, ptilde=ptilde, p=p)
        diag.append(step=n, t=t, J_h=disc.energy(u, qpair, F), C_q=m["C_q"], C_u=m["C_u"],
                    C_ptilde=m["C_ptilde"], C_p=m["C_p"], theta=theta_ratio(dp.kappa, dp.beta, dt, disc.h),
                    mult_x=float(lam[0]), mult_y=float(lam[1]))

    times = grid.times
    q = disc.project_initial_q(setup.u0)
    if setup.algorithm == "alg1":
        u = disc.project_initial_u(setup.u0)
        emit(State(0, 0.0, u, q))
        for n, dt in enumerate(grid.steps):
            t1 = times[n + 1]
            try:
                F = load_at(t1)
                st = disc.stokes_step(q, f, pins, hooks, t1, check, F=F)
                q_new = disc.diffusion_step(q, st.ptilde, dt, hooks, t1)
            except GelflowError as exc:
                raise StepError(n + 1, exc) from exc
            p = reconstruct_pressure(st.ptilde, q, dp.alpha)
            record(n + 1, t1, st.u, q_new, q, st.ptilde, p, st.multipliers, F, dt)
            q = q_new
            emit(State(n + 1, t1, st.u, q, st.ptilde, p))
    else:
        F = load_at(0.0)
        try:
            st = disc.stokes_step(q, f, pins, hooks, 0.0, check, F=F)
        except GelflowError as exc:
            raise StepError(0, exc) from exc
        ptilde = st.ptilde
        p = reconstruct_pressure(ptilde, q, dp.alpha)
        record(0, 0.0, st.u, q, q, ptilde, p, st.multipliers, F, grid.dt)
        emit(State(0, 0.0, st.u, q, ptilde, p))
        for n, dt in enumerate(grid.steps):
            t1 = times[n + 1]
            try:
                q = disc.diffusion_step(q, ptilde, dt, hooks, t1)
                F = load_at(t1)
                st = disc.stokes_step(q, f, pins, hooks, t1, check, F=F)
            except GelflowError as exc:
                raise StepError(n + 1, exc) from exc
            ptilde = st.ptilde
            p = reconstruct_pressure(ptilde, q, dp.alpha)
            record(n + 1, t1, st.u, q, q, ptilde, p, st.multipliers, F, dt)
            emit(State(n + 1, t1, st.u, q, ptilde, p))
    return RunResult(states, diag, conserved, disc, grid, setup)


def _load_scale(f: BoundaryLoad, mesh: Mesh) -> float:
    pts = mesh.vertices[mesh.boundary_edges[:, 0]]
    vals = f(pts, mesh.boundary_normals, mesh.boundary_tags)
    return float(np.abs(vals).max()) if len(vals) else 0.0


def energy_identity(result: RunResult) -> dict:
    """Per-step terms of the discrete energy identity of Algorithm 1.

    For ``n >= 1``, with ``du = u^{n+1} - u^n``, ``dq = q^n - q^{n-1}``,
    ``dpt = ptilde^{n+1} - ptilde^n`` and ``p^{n+1} = ptilde^{n+1} + alpha q^n``::

        J^n - J^{n-1} + beta/2 |grad du|^2 + alpha/2 |dq|^2 + dt kappa |grad p^{n+1}|^2
            = dt kappa (grad dpt, grad p^{n+1})

    where ``J^n = 1/2 [beta |grad u^{n+1}|^2 + alpha |q^n|^2 - 2 <f, u^{n+1}>]``.
    Returns the arrays of energy jumps, dissipation and coupling terms plus the
    telescoped residual and its scale. Requires a stored source-free Algorithm 1 trajectory.
    """
    if result.setup.algorithm != "alg1":
        raise InvalidParameterError("the identity is stated for Algorithm 1")
    if result.setup.hooks is not None and result.setup.hooks.active:
        raise InvalidParameterError("the identity assumes source-free, time-independent data")
    disc, dp = result.disc, result.disc.params
    st = {s.n: s for s in result.states}
    N = result.grid.n_steps
    if len(st) != N + 1:
        raise InvalidParameterError("energy identity needs the full trajectory (keep_states=True)")
    F = disc.load_vector(result.setup.load)
    A, M, S = disc.A, disc.M, disc.S
    jumps, dissip, coupling = [], [], []
    for n in range(1, N):
        dt = result.grid.steps[n - 1]  # the step that produced q^n
        J_prev = disc.energy(st[n].u, st[n - 1].q, F)
        J_cur = disc.energy(st[n + 1].u, st[n].q, F)
        du = st[n + 1].u - st[n].u
        dq = st[n].q - st[n - 1].q
        dpt = st[n + 1].ptilde - st[n].ptilde
        p_next = st[n + 1].p
        jumps.append(J_cur - J_prev)
        dissip.append(0.5 * dp.beta * du @ (A @ du) + 0.5 * dp.alpha * dq @ (M @ dq)
                      + dt * dp.kappa * p_next @ (S @ p_next))
        coupling.append(dt * dp.kappa * dpt @ (S @ p_next))
    jumps, dissip, coupling = map(np.asarray, (jumps, dissip, coupling))
    residual = float(np.sum(jumps) + np.sum(dissip) - np.sum(coupling))
    scale = float(abs(disc.energy(st[1].u, st[0].q, F)) + np.sum(np.abs(jumps))
                  + np.sum(np.abs(dissip)) + np.sum(np.abs(coupling)))
    return {"jumps": jumps, "dissipation": dissip, "coupling": coupling,
            "residual": residual, "scale": scale, "relative": abs(residual) / max(scale, 1e-300)}
