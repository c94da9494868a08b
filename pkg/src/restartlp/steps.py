"""One-iteration updates for the primal-dual methods.

Each step takes the current iterate and returns both the next iterate
z^{t+1} and the target point zhat^{t+1} whose running average carries the
ergodic guarantee.  For PDHG and PPM the two coincide; EGM's target is the
intermediate (extrapolated) point and ADMM's target differs from the iterate
in the multiplier block only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse.linalg as spla

from .lp_core import SaddlePoint, gradient_field

__all__ = [
    "Method",
    "StepConfig",
    "StepOutput",
    "AdmmPoint",
    "AdmmState",
    "AffineProjector",
    "AffineProjectionError",
    "affine_project",
    "pdhg_step",
    "egm_step",
    "admm_step",
    "ppm_bilinear_step",
    "initial_admm_state",
]

PDHG = "pdhg"
EGM = "egm"
ADMM = "admm"
PPM_BILINEAR = "ppm"

Method = str  # one of the four constants above

# (C, q) pairs entering the restart-length bound t* = ceil(2C(q+2)/(alpha beta)):
# the sufficient-decay constant C and the target-proximity constant q of each
# method, in its own norm.
_CONSTANTS = {
    PDHG: (lambda eta: 1.0 / eta, 0.0),
    EGM: (lambda eta: 1.0 / eta, 3.0),
    ADMM: (lambda eta: 1.0, 2.0),
    PPM_BILINEAR: (lambda eta: 1.0 / eta, 0.0),
}


@dataclass(frozen=True)
class StepConfig:
    """Method selector plus step size and primal weight.

    ``eta`` must satisfy eta <= 1/sigma_max(A) for PDHG and eta <= 1/L for
    EGM (L = Lipschitz constant of F; equals sigma_max(A) for the bilinear
    LP Lagrangian).  ``omega`` rescales the primal/dual steps of PDHG and
    EGM to eta/omega and eta*omega; ADMM's eta plays that role itself.
    """

    method: Method
    eta: float
    omega: float = 1.0
    lipschitz: float | None = None

    def __post_init__(self):
        if self.method not in _CONSTANTS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.lipschitz is not None and not self.lipschitz > 0:
            raise ValueError("lipschitz must be positive")
        if self.method == EGM and self.lipschitz is not None and self.eta > 1.0 / self.lipschitz * (1 + 1e-12):
            raise ValueError("EGM requires eta <= 1/L")

    @property
    def sufficient_decay_c(self):
        return _CONSTANTS[self.method][0](self.eta)

    @property
    def target_proximity_q(self):
        return _CONSTANTS[self.method][1]


@dataclass
class StepOutput:
    next: object      # SaddlePoint, or AdmmPoint for ADMM
    target: object


def _project_x(problem, x):
    return np.maximum(x, 0.0) if problem.nonneg else x


def pdhg_step(problem, z, config):
    """One PDHG iteration on the LP Lagrangian.

    x^{t+1} = (x^t - (eta/w)(c - A'y^t))^+
    y^{t+1} = y^t + (eta w)(b - A(2 x^{t+1} - x^t))
    """
    eta, w = config.eta, config.omega
    x1 = _project_x(problem, z.x - (eta / w) * (problem.c - problem.A.rmatvec(z.y)))
    y1 = z.y + (eta * w) * (problem.b - problem.A.matvec(2.0 * x1 - z.x))
    nxt = SaddlePoint(x1, y1)
    return StepOutput(next=nxt, target=nxt)


def egm_step(problem, z, config):
    """One extragradient iteration: predictor zhat, corrector from F(zhat)."""
    eta, w = config.eta, config.omega
    fx = problem.c - problem.A.rmatvec(z.y)
    fy = problem.A.matvec(z.x) - problem.b
    xh = _project_x(problem, z.x - (eta / w) * fx)
    yh = z.y - (eta * w) * fy
    fxh = problem.c - problem.A.rmatvec(yh)
    fyh = problem.A.matvec(xh) - problem.b
    x1 = _project_x(problem, z.x - (eta / w) * fxh)
    y1 = z.y - (eta * w) * fyh
    return StepOutput(next=SaddlePoint(x1, y1), target=SaddlePoint(xh, yh))


def ppm_bilinear_step(problem, z, eta, tol=1e-12):
    """One exact proximal-point iteration on an unconstrained bilinear problem.

    Solves (I + eta F)(z^{t+1}) = z^t, i.e. the linear system

        x - eta A'y = x^t - eta c
        y + eta A x = y^t + eta b

    by eliminating x and running CG on (I + eta^2 A A') y = rhs.
    """
    if problem.nonneg:
        raise ValueError("PPM steps are implemented for unconstrained bilinear "
                         "problems only")
    A = problem.A
    xr = z.x - eta * problem.c
    rhs = z.y + eta * problem.b - eta * A.matvec(xr)
    op = spla.LinearOperator(
        (problem.m, problem.m),
        matvec=lambda v: v + eta * eta * A.matvec(A.rmatvec(v)),
        dtype=np.float64,
    )
    atol = tol * (1.0 + float(np.linalg.norm(rhs)))
    y1, info = spla.cg(op, rhs, x0=z.y, rtol=0.0, atol=atol,
                       maxiter=10 * problem.m + 50)
    if info != 0:
        raise AffineProjectionError(f"PPM inner solve did not converge (info={info})")
    x1 = xr + eta * A.rmatvec(y1)
    nxt = SaddlePoint(x1, y1)
    return StepOutput(next=nxt, target=nxt)


# ---------------------------------------------------------------------------
# ADMM
# ---------------------------------------------------------------------------


class AffineProjectionError(RuntimeError):
    pass


class AffineProjector:
    """Euclidean projection onto {x : Ax = b}, matrix-free.

    project(p) = p - A'w where A A' w = A p - b; the normal equations are
    solved by conjugate gradients warm-started from the previous multiplier.
    The returned point satisfies |A p' - b| <= tol (1 + |b|).
    """

    def __init__(self, A, b, tol=1e-10, max_iters=None):
        self.A = A
        self.b = np.asarray(b, dtype=np.float64)
        self.tol = tol
        self.max_iters = max_iters if max_iters is not None else 20 * A.n_rows + 100
        self._warm = np.zeros(A.n_rows)
        self._op = spla.LinearOperator(
            (A.n_rows, A.n_rows),
            matvec=lambda v: A.matvec(A.rmatvec(v)),
            dtype=np.float64,
        )

    def project(self, point):
        r = self.A.matvec(point) - self.b
        atol = self.tol * (1.0 + float(np.linalg.norm(self.b)))
        if np.linalg.norm(r) <= atol:
            return np.asarray(point, dtype=np.float64).copy()
        w, info = spla.cg(self._op, r, x0=self._warm, rtol=0.0, atol=atol,
                          maxiter=self.max_iters)
        if info != 0:
            raise AffineProjectionError(
                f"normal-equation CG failed to reach {atol:.2e} (info={info})")
        self._warm = w
        return point - self.A.rmatvec(w)

    def solve_normal(self, rhs, warm=None):
        """Solve A A' w = rhs (shared by the dual extraction for ADMM)."""
        atol = self.tol * (1.0 + float(np.linalg.norm(rhs)))
        w, info = spla.cg(self._op, rhs, x0=warm, rtol=0.0, atol=atol,
                          maxiter=self.max_iters)
        if info != 0:
            raise AffineProjectionError(
                f"normal-equation CG failed to reach {atol:.2e} (info={info})")
        return w


def affine_project(A, b, point, tol=1e-10):
    """One-shot Euclidean projection of ``point`` onto {x : Ax = b}."""
    return AffineProjector(A, b, tol=tol).project(np.asarray(point, dtype=np.float64))


@dataclass
class AdmmPoint:
    """A point of the splitting formulation: (x_U, x_V, y) with x_U in
    {Ax = b}, x_V >= 0, and y the multiplier of x_U - x_V = 0."""

    x_u: np.ndarray
    x_v: np.ndarray
    y: np.ndarray

    def as_vector(self):
        return np.concatenate([self.x_u, self.x_v, self.y])

    @classmethod
    def from_vector(cls, v, n):
        return cls(v[:n].copy(), v[n:2 * n].copy(), v[2 * n:].copy())

    def copy(self):
        return AdmmPoint(self.x_u.copy(), self.x_v.copy(), self.y.copy())


@dataclass
class AdmmState:
    """ADMM iterate plus the cached affine projector for {Ax = b}."""

    x_u: np.ndarray
    x_v: np.ndarray
    y: np.ndarray
    projector: AffineProjector

    def point(self):
        return AdmmPoint(self.x_u, self.x_v, self.y)


def initial_admm_state(problem, tol=1e-10):
    n = problem.n
    proj = AffineProjector(problem.A, problem.b, tol=tol)
    return AdmmState(np.zeros(n), np.zeros(n), np.zeros(n), proj)


def admm_step(problem, state, config):
    """One ADMM iteration on the split form min c'x_V over x_U = x_V,
    x_U in {Ax = b}, x_V >= 0.

        x_U^{t+1} = proj_{Ax=b}(x_V^t + y^t / eta)
        x_V^{t+1} = (x_U^{t+1} - y^t/eta - c/eta)^+
        y^{t+1}   = y^t - eta (x_U^{t+1} - x_V^{t+1})

    The target differs from the iterate by eta (x_V^{t+1} - x_V^t) in the
    multiplier block.
    """
    eta = config.eta
    xu = state.projector.project(state.x_v + state.y / eta)
    xv = np.maximum(xu - state.y / eta - problem.c / eta, 0.0)
    y = state.y - eta * (xu - xv)
    y_hat = state.y - eta * (xu - state.x_v)
    out = StepOutput(next=AdmmPoint(xu, xv, y), target=AdmmPoint(xu, xv, y_hat))
    return out, AdmmState(xu, xv, y, state.projector)
