"""Manufactured solutions, error norms and convergence-rate studies."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import sympy as sym

from . import fem
from .errors import InvalidParameterError
from .mesh import Mesh, gen_rect_mesh, mesh_size, refine_uniform
from .model import BoundaryLoad, InitialData, MaterialParams, derive_params
from .scheme import SimulationSetup, SourceHooks, State, Discretization, run

log = logging.getLogger(__name__)

X1, X2, T = sym.symbols("x1 x2 t", real=True)


def _lam(expr):
    f = sym.lambdify((X1, X2, T), expr, "numpy")

    def call(x, t):
        x = np.atleast_2d(x)
        return np.broadcast_to(np.asarray(f(x[:, 0], x[:, 1], t), dtype=float), (len(x),)).copy()

    return call


@dataclass
class ExactSolution:
    """Analytic ``u``, ``ptilde`` and everything induced by them.

    Callables are vectorized over points ``x`` (n, 2) and take time ``t``.
    ``grad_u(x, t)[:, c, a] = du_c/dx_a``.
    """

    u: Callable
    grad_u: Callable
    q: Callable
    grad_q: Callable
    ptilde: Callable
    grad_ptilde: Callable
    p: Callable
    grad_p: Callable
    traction: Callable
    g_u: Callable
    g_q: Callable
    flux_q: Callable
    expressions: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_expressions(cls, u_expr, ptilde_expr, material: MaterialParams) -> "ExactSolution":
        """Derive ``q = div u``, ``p = ptilde + alpha q``, traction
        ``beta du/dn - ptilde n``, sources ``g_u = -beta lap u + grad ptilde``,
        ``g_q = q_t - kappa lap p`` and boundary flux ``kappa dp/dn``."""
        dp = derive_params(material)
        alpha, beta, kappa = (sym.Float(v, 17) for v in (dp.alpha, dp.beta, dp.kappa))
        ux, uy = (sym.sympify(e) for e in u_expr)
        pt = sym.sympify(ptilde_expr)
        xs = (X1, X2)
        q = sym.diff(ux, X1) + sym.diff(uy, X2)
        p = pt + alpha * q
        lap = lambda e: sym.diff(e, X1, 2) + sym.diff(e, X2, 2)  # noqa: E731
        gux = -beta * lap(ux) + sym.diff(pt, X1)
        guy = -beta * lap(uy) + sym.diff(pt, X2)
        gq = sym.diff(q, T) - kappa * lap(p)

        u_f = [_lam(ux), _lam(uy)]
        du = [[_lam(sym.diff(c, a)) for a in xs] for c in (ux, uy)]
        dq = [_lam(sym.diff(q, a)) for a in xs]
        dpt = [_lam(sym.diff(pt, a)) for a in xs]
        dpp = [_lam(sym.diff(p, a)) for a in xs]
        q_f, pt_f, p_f = _lam(q), _lam(pt), _lam(p)
        gu_f = [_lam(gux), _lam(guy)]
        gq_f = _lam(gq)

        def vec(fs):
            return lambda x, t: np.column_stack([f(x, t) for f in fs])

        def grad_u(x, t):
            return np.stack([np.column_stack([du[c][a](x, t) for a in range(2)]) for c in range(2)], axis=1)

        def traction(x, n, t):
            G = grad_u(x, t)
            return float(beta) * np.einsum("nca,na->nc", G, n) - pt_f(x, t)[:, None] * n

        def flux_q(x, n, t):
            return float(kappa) * np.sum(vec(dpp)(x, t) * n, axis=1)

        return cls(
            u=vec(u_f), grad_u=grad_u, q=q_f, grad_q=vec(dq), ptilde=pt_f, grad_ptilde=vec(dpt),
            p=p_f, grad_p=vec(dpp), traction=traction, g_u=vec(gu_f), g_q=gq_f, flux_q=flux_q,
            expressions={"u": (ux, uy), "q": q, "ptilde": pt, "p": p, "g_u": (gux, guy), "g_q": gq},
        )

    def initial_data(self) -> InitialData:
        return InitialData(lambda x: self.u(x, 0.0), lambda x: self.q(x, 0.0), lambda x: self.grad_u(x, 0.0))

    def hooks(self) -> SourceHooks:
        return SourceHooks(g_u=self.g_u, g_q=self.g_q, traction=self.traction, flux_q=self.flux_q)


MMS_MATERIAL = MaterialParams(K=1.0, G=1.0, phi=0.0, xi=1.0)


def mms_default(material: MaterialParams = MMS_MATERIAL, wavenumber=1, decay=1) -> ExactSolution:
    """``u = 1e-2 e^-(lt) sin(k x1) sin(k x2) (1, 1)``, ``ptilde = e^-(lt) cos(k x1) cos(k x2)``
    with ``k = wavenumber * pi`` and ``l = decay``; the defaults give ``k = pi``, ``l = 1``."""
    k = sym.nsimplify(wavenumber) * sym.pi
    e = sym.exp(-sym.nsimplify(decay) * T)
    s = sym.Rational(1, 100) * e * sym.sin(k * X1) * sym.sin(k * X2)
    pt = e * sym.cos(k * X1) * sym.cos(k * X2)
    return ExactSolution.from_expressions((s, s), pt, material)


def mms_temporal(material: MaterialParams = MMS_MATERIAL) -> ExactSolution:
    """Smoother in space and faster in time than :func:`mms_default`, so that on a
    32x32 mesh the time-discretization error dominates the total error."""
    return mms_default(material, wavenumber=sym.Rational(1, 2), decay=2)


def fitted_rate(scale, err) -> float:
    """Least-squares slope of ``log err`` against ``log scale``."""
    return float(np.polyfit(np.log(np.asarray(scale, float)), np.log(np.asarray(err, float)), 1)[0])


# -- norms ---------------------------------------------------------------------------


def h1_seminorm_error(disc: Discretization, u_coef, grad_exact) -> float:
    _, G = fem.vector_at_quadrature(disc.V, u_coef)
    pts, w = fem.quadrature_points(disc.mesh)
    Ge = np.asarray(grad_exact(pts.reshape(-1, 2)), dtype=float).reshape(G.shape)
    return float(np.sqrt(np.sum(w * np.sum((G - Ge) ** 2, axis=(2, 3)))))


def l2_error(disc: Discretization, coef, exact) -> float:
    v, _ = fem.scalar_at_quadrature(disc.W, coef)
    pts, w = fem.quadrature_points(disc.mesh)
    ve = np.asarray(exact(pts.reshape(-1, 2)), dtype=float).reshape(v.shape)
    return float(np.sqrt(np.sum(w * (v - ve) ** 2)))


def grad_l2_error(disc: Discretization, coef, grad_exact) -> float:
    _, g = fem.scalar_at_quadrature(disc.W, coef)
    pts, w = fem.quadrature_points(disc.mesh)
    ge = np.asarray(grad_exact(pts.reshape(-1, 2)), dtype=float).reshape(g.shape)
    return float(np.sqrt(np.sum(w * np.sum((g - ge) ** 2, axis=2))))


def error_norms(disc: Discretization, state: State, exact: ExactSolution) -> dict:
    """``H1_u = |grad(u - u_h)|``, ``L2_q = |q - q_h|`` and ``gradP = |grad(p - p_h)|`` at ``state.t``.

    ``gradP`` is NaN when the state carries no pressure (step 0 of Algorithm 1).
    """
    t = state.t
    out = {
        "H1_u": h1_seminorm_error(disc, state.u, lambda x: exact.grad_u(x, t)),
        "L2_q": l2_error(disc, state.q, lambda x: exact.q(x, t)),
    }
    out["gradP"] = (grad_l2_error(disc, state.p, lambda x: exact.grad_p(x, t))
                    if state.p is not None else float("nan"))
    return out


# -- studies ---------------------------------------------------------------------


@dataclass
class RateTable:
    h: list = field(default_factory=list)
    dt: list = field(default_factory=list)
    H1_u: list = field(default_factory=list)
    L2_q: list = field(default_factory=list)
    gradP: list = field(default_factory=list)

    COLUMNS = ("level", "h", "dt", "H1_u", "rate_u", "L2_q", "rate_q", "gradP", "rate_p")

    @staticmethod
    def _rates(err, scale):
        err, scale = np.asarray(err, float), np.asarray(scale, float)
        r = np.full(len(err), np.nan)
        r[1:] = np.log(err[:-1] / err[1:]) / np.log(scale[:-1] / scale[1:])
        return r

    def rates(self, by: str = "h") -> dict:
        """Observed orders between consecutive levels, w.r.t. ``h`` or ``dt``."""
        s = self.h if by == "h" else self.dt
        return {k: self._rates(getattr(self, k), s) for k in ("H1_u", "L2_q", "gradP")}

    def final_rates(self, by: str = "h") -> dict:
        """Rates over the two finest levels only."""
        return {k: float(v[-1]) for k, v in self.rates(by).items()}

    def to_csv(self, by: str = "h") -> str:
        r = self.rates(by)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for i in range(len(self.h)):
            w.writerow([i, repr(self.h[i]), repr(self.dt[i]), repr(self.H1_u[i]), _fmt(r["H1_u"][i]),
                        repr(self.L2_q[i]), _fmt(r["L2_q"][i]), repr(self.gradP[i]), _fmt(r["gradP"][i])])
        return buf.getvalue()


def _fmt(v):
    return "" if np.isnan(v) else repr(float(v))


def temporal_study(mesh: Optional[Mesh] = None, dts=(1 / 20, 1 / 40, 1 / 80), T: float = 1.0,
                   exact: Optional[ExactSolution] = None, material: MaterialParams = MMS_MATERIAL,
                   algorithm: str = "alg1") -> dict:
    """Total error ``|grad(u - u_h)| + |q - q_h|`` at ``T`` on a fixed mesh for each ``dt``,
    with the least-squares rate in ``dt``."""
    mesh = mesh if mesh is not None else gen_rect_mesh(32, 32)
    exact = exact or mms_temporal(material)
    total = []
    for dt in dts:
        e, _ = run_mms(mesh, dt, T, exact, material, algorithm)
        total.append(e["H1_u"] + e["L2_q"])
    return {"dt": list(dts), "error": total, "rate": fitted_rate(dts, total)}


def run_mms(mesh: Mesh, dt: float, T: float, exact: Optional[ExactSolution] = None,
            material: MaterialParams = MMS_MATERIAL, algorithm: str = "alg1"):
    """One manufactured-solution run. Returns ``(errors at T, RunResult)`` where
    ``errors["gradP"]`` is the accumulated ``(sum dt |grad(p - p_h)|^2)^(1/2)``."""
    exact = exact or mms_default(material)
    setup = SimulationSetup(mesh=mesh, material=material, u0=exact.initial_data(), load=BoundaryLoad.zero(),
                            dt=dt, T=T, algorithm=algorithm, theta_threshold=np.inf, hooks=exact.hooks())
    disc = Discretization(mesh, material)
    acc = {"sum": 0.0, "t_prev": 0.0}

    def observe(state):
        if state.p is not None and state.n > 0:
            g = grad_l2_error(disc, state.p, lambda x: exact.grad_p(x, state.t))
            acc["sum"] += (state.t - acc["t_prev"]) * g ** 2
        acc["t_prev"] = state.t

    result = run(setup, disc=disc, observer=observe, keep_states=False)
    errs = error_norms(disc, result.final, exact)
    errs["gradP"] = float(np.sqrt(acc["sum"]))
    return errs, result


COUPLINGS = ("dt_h2", "dt_h", "fixed_mesh")


def convergence_study(levels: int = 4, coupling: str = "dt_h2", base_mesh: Optional[Mesh] = None,
                      dt0: float = 0.025, T: float = 0.1, material: MaterialParams = MMS_MATERIAL,
                      algorithm: str = "alg1", exact: Optional[ExactSolution] = None) -> RateTable:
    """Manufactured-solution errors over ``levels`` refinements.

    ``dt_h2`` and ``dt_h`` refine the mesh uniformly and scale ``dt0`` by 4 or
    2 per level; ``fixed_mesh`` keeps ``base_mesh`` and halves ``dt``.
    """
    if levels < 3:
        raise InvalidParameterError("a rate study needs at least 3 levels")
    if coupling not in COUPLINGS:
        raise InvalidParameterError(f"coupling must be one of {COUPLINGS}")
    exact = exact or mms_default(material)
    mesh = base_mesh if base_mesh is not None else gen_rect_mesh(8, 8)
    table = RateTable()
    if coupling == "fixed_mesh":
        log.info("fixed mesh: rates are reported with respect to dt")
    dt = dt0
    for level in range(levels):
        if level > 0:
            if coupling == "fixed_mesh":
                dt /= 2
            else:
                mesh = refine_uniform(mesh)
                dt /= 4 if coupling == "dt_h2" else 2
        errs, _ = run_mms(mesh, dt, T, exact, material, algorithm)
        table.h.append(mesh_size(mesh))
        table.dt.append(dt)
        for k in ("H1_u", "L2_q", "gradP"):
            getattr(table, k).append(errs[k])
    return table


def volume_balance(result, exact: ExactSolution) -> np.ndarray:
    """Per-step residual of ``d/dt int q = int g_q + oint flux_q`` for a stored MMS run.

    The P1 stiffness has zero row sums, so the diffusion step changes ``int q``
    only through the sources; residuals are relative to ``sum |M q^{n+1}| / dt``
    (``int q`` itself may vanish).
    """
    disc = result.disc
    ones = np.ones(disc.np)
    st = sorted(result.states, key=lambda s: s.n)
    out = []
    for a, b in zip(st[:-1], st[1:]):
        dt = b.t - a.t
        change = ones @ (disc.M @ (b.q - a.q)) / dt
        src = (fem.integrate_domain(disc.mesh, lambda x, e: exact.g_q(x, b.t))
               + fem.integrate_boundary(disc.mesh, lambda x, n, tag: exact.flux_q(x, n, b.t)))
        scale = max(np.abs(disc.M @ b.q).sum() / dt, abs(src), 1e-300)
        out.append(abs(change - src) / scale)
    return np.asarray(out)


def algorithm_gap(mesh: Mesh, material: MaterialParams, u0: InitialData, load: BoundaryLoad,
                  dt: float, T: float, hooks: Optional[SourceHooks] = None,
                  disc: Optional[Discretization] = None) -> dict:
    """Largest distance between Algorithm 1 and Algorithm 2 trajectories at equal times.

    Returns ``q`` (L2 of the volume-change gap over ``n >= 0``), ``u`` (H1
    seminorm of the displacement gap over ``n >= 1``; at ``n = 0`` Algorithm 1
    holds the projected initial data) and ``p`` (L2 of the pressure gap, ``n >= 1``).
    """
    disc = disc or Discretization(mesh, material)
    res = {}
    for alg in ("alg1", "alg2"):
        setup = SimulationSetup(mesh, material, u0, load, dt, T, algorithm=alg, theta_threshold=np.inf,
                                hooks=hooks)
        res[alg] = {s.n: s for s in run(setup, disc=disc).states}
    gq = gu = gp = 0.0
    for n, s1 in res["alg1"].items():
        s2 = res["alg2"][n]
        dq = s1.q - s2.q
        gq = max(gq, float(np.sqrt(dq @ (disc.M @ dq))))
        if n == 0:
            continue
        du = s1.u - s2.u
        gu = max(gu, float(np.sqrt(du @ (disc.A @ du))))
        if s1.p is not None:
            dp_ = s1.p - s2.p
            gp = max(gp, float(np.sqrt(dp_ @ (disc.M @ dp_))))
    return {"q": gq, "u": gu, "p": gp}
