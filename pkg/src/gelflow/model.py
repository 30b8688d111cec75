"""Material constants, derived coefficients and conserved quantities of the gel model."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParameterError


@dataclass(frozen=True)
class MaterialParams:
    """Gel constants: bulk modulus ``K``, shear modulus ``G``, polymer
    volume fraction ``phi`` and friction constant ``xi``."""

    K: float
    G: float
    phi: float
    xi: float

    def validate(self):
        if not self.K > 0:
            raise InvalidParameterError(f"K must be positive, got {self.K}")
        if not self.G > 0:
            raise InvalidParameterError(f"G must be positive, got {self.G}")
        if not 0.0 <= self.phi < 1.0:
            raise InvalidParameterError(f"phi must lie in [0, 1), got {self.phi}")
        if not self.xi > 0:
            raise InvalidParameterError(f"xi must be positive, got {self.xi}")
        return self

    @classmethod
    def pnipa(cls) -> "MaterialParams":
        """PNIPA hydrogel: E = 6e3, Poisson ratio 0.43, phi = 0.15, xi = 100."""
        return cls(K=14285.7, G=2097.9, phi=0.15, xi=100.0)


@dataclass(frozen=True)
class DerivedParams:
    alpha: float
    beta: float
    kappa: float
    D: float
    c_d: float
    dim: int = 2


def derive_params(mp: MaterialParams, d: int = 2) -> DerivedParams:
    """Coefficients of the reformulated (Stokes + diffusion) system.

    ``alpha = K + G/3``, ``beta = G``, ``kappa = (1 - phi)^2 / xi``,
    ``D = kappa (K + 4G/3)`` and ``c_d = alpha + beta/d``.
    """
    mp.validate()
    if d != 2:
        raise InvalidParameterError(f"only d = 2 is supported, got {d}")
    alpha = mp.K + mp.G / 3.0
    beta = mp.G
    kappa = (1.0 - mp.phi) ** 2 / mp.xi
    return DerivedParams(
        alpha=alpha,
        beta=beta,
        kappa=kappa,
        D=kappa * (mp.K + 4.0 * mp.G / 3.0),
        c_d=alpha + beta / d,
        dim=d,
    )


# Vectorized callables. Points are (n, 2) arrays.
VectorField = Callable[[np.ndarray], np.ndarray]
ScalarField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BoundaryLoad:
    """Traction ``f`` on the boundary, force per unit length.

    ``evaluator(x, normal, tag)`` takes arrays of shape (n, 2), (n, 2), (n,)
    and returns an (n, 2) array. Loads are time independent.
    """

    evaluator: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    name: str = "custom"
    time_independent: bool = True

    def __call__(self, x, normal, tag):
        return np.asarray(self.evaluator(x, normal, tag), dtype=float).reshape(-1, 2)

    @classmethod
    def zero(cls) -> "BoundaryLoad":
        return cls(lambda x, n, tag: np.zeros((len(x), 2)), name="zero")

    @classmethod
    def constant(cls, value) -> "BoundaryLoad":
        v = np.asarray(value, dtype=float)
        return cls(lambda x, n, tag: np.tile(v, (len(x), 1)), name="constant")

    @classmethod
    def tangential(cls, magnitude: float) -> "BoundaryLoad":
        """``magnitude`` times the clockwise unit tangent of the boundary."""

        def f(x, n, tag):
            n = np.asarray(n, dtype=float)
            return magnitude * np.column_stack([n[:, 1], -n[:, 0]])

        return cls(f, name="tangential")

    @classmethod
    def per_tag(cls, values: dict) -> "BoundaryLoad":
        """Piecewise-constant load, one vector per boundary tag (missing tags get zero)."""
        table = {int(k): np.asarray(v, dtype=float) for k, v in values.items()}

        def f(x, n, tag):
            out = np.zeros((len(x), 2))
            for t, v in table.items():
                out[np.asarray(tag) == t] = v
            return out

        return cls(f, name="per_tag")

    @classmethod
    def strip(cls, half_width: float = 0.2, magnitude: float = 0.5) -> "BoundaryLoad":
        """Horizontal pinch near ``x1 = 0``: ``f1 = +magnitude`` on ``-half_width < x1 < 0``,
        ``-magnitude`` on ``0 < x1 < half_width``, zero elsewhere; ``f2 = 0``."""

        def f(x, n, tag):
            x1 = np.asarray(x, dtype=float)[:, 0]
            out = np.zeros((len(x1), 2))
            out[(x1 > -half_width) & (x1 < 0)] = (magnitude, 0.0)
            out[(x1 > 0) & (x1 < half_width)] = (-magnitude, 0.0)
            return out

        return cls(f, name="strip")


@dataclass(frozen=True)
class InitialData:
    """Initial displacement ``u0``, optionally with its analytic divergence and
    gradient (``grad_u0(x)[:, c, a] = d u0_c / d x_a``)."""

    u0: VectorField
    div_u0: Optional[ScalarField] = None
    grad_u0: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def displacement(self, x):
        return np.asarray(self.u0(np.atleast_2d(x)), dtype=float).reshape(-1, 2)

    def gradient(self, x, step=1e-4):
        """Analytic gradient when given, else a fourth-order centered difference."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.grad_u0 is not None:
            return np.asarray(self.grad_u0(x), dtype=float).reshape(-1, 2, 2)
        g = np.empty((len(x), 2, 2))
        for a in range(2):
            e = np.zeros(2)
            e[a] = step
            g[:, :, a] = (-self.displacement(x + 2 * e) + 8 * self.displacement(x + e)
                          - 8 * self.displacement(x - e) + self.displacement(x - 2 * e)) / (12 * step)
        return g

    def check_divergence(self, points, step=1e-5, tol=1e-6) -> float:
        """Max mismatch between ``div_u0`` and a centered difference of ``u0``."""
        if self.div_u0 is None:
            raise InvalidParameterError("no analytic divergence supplied")
        x = np.atleast_2d(np.asarray(points, dtype=float))
        ex, ey = np.array([step, 0.0]), np.array([0.0, step])
        fd = (self.displacement(x + ex)[:, 0] - self.displacement(x - ex)[:, 0]
              + self.displacement(x + ey)[:, 1] - self.displacement(x - ey)[:, 1]) / (2 * step)
        err = float(np.max(np.abs(fd - np.asarray(self.div_u0(x), dtype=float))))
        if err > tol:
            raise InvalidParameterError(f"div_u0 disagrees with u0 by {err:.3e}")
        return err

    @classmethod
    def zero(cls) -> "InitialData":
        return cls(lambda x: np.zeros((len(x), 2)), lambda x: np.zeros(len(x)),
                   lambda x: np.zeros((len(x), 2, 2)))

    @classmethod
    def sine(cls, amplitude: float = 1e-4) -> "InitialData":
        """``u0 = amplitude * sin(x1 + x2) (1, 1)``."""

        def u0(x):
            s = amplitude * np.sin(x[:, 0] + x[:, 1])
            return np.column_stack([s, s])

        def grad(x):
            c = amplitude * np.cos(x[:, 0] + x[:, 1])
            return np.broadcast_to(c[:, None, None], (len(x), 2, 2)).copy()

        return cls(u0, lambda x: 2.0 * amplitude * np.cos(x[:, 0] + x[:, 1]), grad)


@dataclass(frozen=True)
class ConservedSet:
    C_q: float
    C_u: float
    C_ptilde: float
    C_p: float


def compute_conserved(u0: InitialData, f: BoundaryLoad, mesh, dp: DerivedParams) -> ConservedSet:
    """Evaluate the four conserved quantities from the data by quadrature.

    ``C_q = int div u0``, ``C_u = oint u0.n``, ``C_p = c_d C_q - (1/d) oint f.x``
    and ``C_ptilde = C_p - alpha C_q``. Without an analytic ``div_u0`` the
    divergence of the P2 interpolant of ``u0`` is used.
    """
    from . import fem

    C_q = fem.integrate_domain(mesh, divergence_function(u0, mesh))
    C_u = fem.integrate_boundary(mesh, lambda x, n, tag: np.sum(u0.displacement(x) * n, axis=1))
    moment = fem.integrate_boundary(mesh, lambda x, n, tag: np.sum(f(x, n, tag) * x, axis=1))
    C_p = dp.c_d * C_q - moment / dp.dim
    return ConservedSet(C_q=C_q, C_u=C_u, C_ptilde=C_p - dp.alpha * C_q, C_p=C_p)


def divergence_function(u0: InitialData, mesh):
    """Callable ``(x, element) -> div u0`` used by the quadrature helpers."""
    if u0.div_u0 is not None:
        return lambda x, elem=None: np.asarray(u0.div_u0(x), dtype=float)
    from . import fem

    space = fem.DofMap.vector_p2(mesh)
    coef = fem.interpolate_vector(space, u0.displacement)
    return lambda x, elem: fem.eval_divergence(space, coef, x, elem)


def check_compatibility(f: BoundaryLoad, mesh) -> float:
    """Euclidean norm of the net boundary force ``oint f dS``; callers compare it to their tolerance."""
    from . import fem

    fx = fem.integrate_boundary(mesh, lambda x, n, tag: f(x, n, tag)[:, 0])
    fy = fem.integrate_boundary(mesh, lambda x, n, tag: f(x, n, tag)[:, 1])
    return float(np.hypot(fx, fy))
