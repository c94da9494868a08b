"""Closed-form spectral analysis of PDHG on diagonal bilinear problems.

On L(x, y) = y' diag(sigma) x the PDHG recurrence decouples into independent
2x2 blocks z_i <- P_i z_i.  Each block has complex eigenvalues of squared
modulus 1 - eta^2 sigma_i^2, and in the metric B_i of the eigenbasis the
iterates decay geometrically at exactly that rate while the running average
decays like 1/K within explicit two-sided bounds.  The scaling experiment
measures how iteration counts of the last iterate, the average iterate, and
fixed-frequency restarts grow with the condition number, reproducing the
square-root gap that restarting closes.

Complex arithmetic is carried as explicit real 2x2 algebra throughout: the
eigenbasis metric works out to the real symmetric matrix
B = [[1, -eta sigma], [-eta sigma, 1]] / (2 (1 - eta^2 sigma^2)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ingest import DiagonalBilinear, generate
from .lp_core import SaddlePoint
from .restarts import fixed_frequency_tstar
from .steps import PDHG, StepConfig, pdhg_step

__all__ = [
    "SpectralBlock",
    "dynamics_matrix",
    "b_metric_matrix",
    "b_norm_sq",
    "theoretical_B_norm_decay",
    "theoretical_average_bound",
    "Table3Report",
    "table3_scaling_experiment",
    "two_dim_toy_series",
]


def _check_block(sigma, eta):
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if not 0 < eta <= 1.0 / sigma:
        raise ValueError("need 0 < eta <= 1/sigma")


def dynamics_matrix(sigma, eta):
    """The 2x2 update matrix of one PDHG step on the (x_i, y_i) block."""
    _check_block(sigma, eta)
    a = eta * sigma
    return np.array([[1.0, -a], [a, 1.0 - 2.0 * a * a]])


def b_metric_matrix(sigma, eta):
    """The eigenbasis metric B with (1/3)|v|^2 <= v'Bv <= |v|^2 for
    eta <= 1/(2 sigma)."""
    _check_block(sigma, eta)
    a = eta * sigma
    s2 = 1.0 - a * a
    if s2 <= 0:
        raise ValueError("B is defined for eta < 1/sigma")
    return np.array([[1.0, -a], [-a, 1.0]]) / (2.0 * s2)


def b_norm_sq(v, sigma, eta):
    v = np.asarray(v, dtype=np.float64)
    B = b_metric_matrix(sigma, eta)
    return float(v @ (B @ v))


@dataclass(frozen=True)
class SpectralBlock:
    """Spectral data of one coordinate block of the PDHG dynamics."""

    sigma: float
    eta: float

    def __post_init__(self):
        _check_block(self.sigma, self.eta)

    @property
    def dynamics(self):
        return dynamics_matrix(self.sigma, self.eta)

    @property
    def b_metric(self):
        return b_metric_matrix(self.sigma, self.eta)

    @property
    def eigenvalue_modulus_sq(self):
        a = self.eta * self.sigma
        return 1.0 - a * a

    @property
    def eigenvalues(self):
        """The conjugate pair as (real, +/- imaginary) parts."""
        a = self.eta * self.sigma
        re = 1.0 - a * a
        im = a * math.sqrt(max(1.0 - a * a, 0.0))
        return re, im

    @property
    def one_minus_eigenvalue_abs(self):
        """|1 - gamma|, which equals eta * sigma."""
        re, im = self.eigenvalues
        return math.hypot(1.0 - re, im)


def theoretical_B_norm_decay(z0, sigma, eta, t):
    """Exact B-norm-squared of the iterate after t steps:
    (1 - eta^2 sigma^2)^t |z0|_B^2."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    a = eta * sigma
    return (1.0 - a * a) ** t * b_norm_sq(z0, sigma, eta)


def theoretical_average_bound(z0, sigma, eta, K):
    """Two-sided envelope (upper, lower) for the B-norm of the K-step
    running average of the block iterates.

    upper = 2 |z0|_B / (K eta sigma)
    lower = (sqrt(3)/2) eta sigma |z0|_B / (2 + K eta^2 sigma^2)

    Both hold for every K >= 1 when eta sigma <= 1/2; they only meet (up to
    constants) once K is of order 1/(eta sigma)^2.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    a = eta * sigma
    nb = math.sqrt(b_norm_sq(z0, sigma, eta))
    upper = 2.0 * nb / (K * a)
    lower = (math.sqrt(3.0) / 2.0) * a * nb / (2.0 + K * a * a)
    return upper, lower


# ---------------------------------------------------------------------------
# Condition-number scaling experiment
# ---------------------------------------------------------------------------


@dataclass
class Table3Report:
    """Iterations-to-threshold for the three PDHG modes across kappa."""

    rows: list = field(default_factory=list)          # (kappa, mode, iterations or None)
    average_rows: list = field(default_factory=list)  # (eps, iterations or None)
    last_slope: float = float("nan")
    restarted_slope: float = float("nan")
    average_slope: float = float("nan")

    def csv_rows(self):
        out = [("kappa", "mode", "iterations")]
        for kappa, mode, iters in self.rows:
            out.append((kappa, mode, "" if iters is None else iters))
        for eps, iters in self.average_rows:
            out.append((eps, "average_vs_eps", "" if iters is None else iters))
        return out


def _toy_problem(kappa):
    problem, _ = generate(DiagonalBilinear((1.0 / kappa, 1.0)))
    z0 = SaddlePoint(np.ones(2), np.ones(2))
    return problem, z0


def _iterate_until(problem, config, z0, stop, cap):
    """Step PDHG until ``stop(t, z, avg)`` returns True; gives (t, z, avg)."""
    z = z0.copy()
    avg = None
    for t in range(1, cap + 1):
        z = pdhg_step(problem, z, config).next
        zv = z.as_vector()
        avg = zv.copy() if avg is None else avg + (zv - avg) / t
        if stop(t, zv, avg):
            return t, zv, avg
    return None, z.as_vector(), avg


def table3_scaling_experiment(kappas, eps, avg_kappa=4, avg_eps=(1e-2, 1e-3, 1e-4),
                              cap=5_000_000):
    """Measure iterations-to-threshold vs condition number at eta = 1/2
    (i.e. 1/(2 sigma_max) for the two-point spectrum (1/kappa, 1)).

    * last iterate / restarted: first t with |z - z*|^2 / |z0 - z*|^2 <= eps,
      where the restarted mode runs fixed-frequency restarts at
      t* = ceil(2C(q+2)/(alpha beta)) with alpha = 1/kappa and monitors the
      running average.
    * average mode (at ``avg_kappa``): first K with |zbar - z*| / |z0 - z*|
      <= eps_a for each eps_a, whose growth is linear in 1/eps_a.

    Modes that fail to converge within ``cap`` are recorded with ``None``.
    """
    kappas = [float(k) for k in kappas]
    if not kappas:
        raise ValueError("kappa list must be nonempty")
    if any(k < 2 for k in kappas):
        raise ValueError("kappa values must be >= 2")
    if not 0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 1/2]")
    eta = 0.5
    config = StepConfig(PDHG, eta)
    report = Table3Report()

    last_pts, restart_pts = [], []
    for kappa in kappas:
        problem, z0 = _toy_problem(kappa)
        d0sq = float(z0.as_vector() @ z0.as_vector())

        t_last, _, _ = _iterate_until(
            problem, config, z0,
            lambda t, zv, avg: float(zv @ zv) / d0sq <= eps, cap)
        report.rows.append((kappa, "last", t_last))
        if t_last is not None:
            last_pts.append((math.log(kappa), math.log(t_last)))

        tstar = fixed_frequency_tstar(1.0 / eta, 0.0, 1.0 / kappa, math.exp(-1.0))
        t_restart = _run_restarted_mode(problem, config, z0, eps, tstar, cap)
        report.rows.append((kappa, "restarted", t_restart))
        if t_restart is not None:
            restart_pts.append((math.log(kappa), math.log(t_restart)))

    problem, z0 = _toy_problem(avg_kappa)
    d0 = float(np.linalg.norm(z0.as_vector()))
    thresholds = sorted(avg_eps, reverse=True)
    hits = _run_average_mode(problem, config, z0, [e * d0 for e in thresholds], cap)
    avg_pts = []
    for eps_a, k_hit in zip(thresholds, hits):
        report.average_rows.append((eps_a, k_hit))
        if k_hit is not None:
            avg_pts.append((math.log(1.0 / eps_a), math.log(k_hit)))

    report.last_slope = _fit_slope(last_pts)
    report.restarted_slope = _fit_slope(restart_pts)
    report.average_slope = _fit_slope(avg_pts)
    return report


def _fit_slope(points):
    if len(points) < 2:
        return float("nan")
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    return float(np.polyfit(xs, ys, 1)[0])


def _run_restarted_mode(problem, config, z0, eps, tstar, cap):
    d0sq = float(z0.as_vector() @ z0.as_vector())
    z = z0.copy()
    avg = None
    inner = 0
    for t in range(1, cap + 1):
        z = pdhg_step(problem, z, config).next
        zv = z.as_vector()
        inner += 1
        avg = zv.copy() if avg is None else avg + (zv - avg) / inner
        if float(avg @ avg) / d0sq <= eps:
            return t
        if inner >= tstar:
            z = SaddlePoint.from_vector(avg, problem.n)
            avg = None
            inner = 0
    return None


def _run_average_mode(problem, config, z0, thresholds, cap):
    """First K with |avg| <= thr for each (descending) threshold."""
    z = z0.copy()
    avg = None
    hits = [None] * len(thresholds)
    idx = 0
    for t in range(1, cap + 1):
        z = pdhg_step(problem, z, config).next
        zv = z.as_vector()
        avg = zv.copy() if avg is None else avg + (zv - avg) / t
        nrm = float(np.linalg.norm(avg))
        while idx < len(thresholds) and nrm <= thresholds[idx]:
            hits[idx] = t
            idx += 1
        if idx == len(thresholds):
            break
    return hits


# ---------------------------------------------------------------------------
# The two-dimensional toy trajectories
# ---------------------------------------------------------------------------


def two_dim_toy_series(iterations=50, eta=0.2, restart_length=25,
                       start=(1.0, 1.0)):
    """Iterate paths on L(x, y) = x y: plain PDHG and fixed-frequency
    restarted PDHG.

    Returns ``(plain, restarted)`` arrays of shape (iterations + 1, 2): the
    plain path holds the iterates z^t, the restarted path the running
    average that the restart scheme tracks (reset every ``restart_length``
    steps, like the candidate it restarts to).
    """
    problem, _ = generate(DiagonalBilinear((1.0,)))
    config = StepConfig(PDHG, eta)
    z = SaddlePoint(np.array([start[0]]), np.array([start[1]]))

    plain = np.empty((iterations + 1, 2))
    plain[0] = start
    zz = z.copy()
    for t in range(1, iterations + 1):
        zz = pdhg_step(problem, zz, config).next
        plain[t] = (zz.x[0], zz.y[0])

    restarted = np.empty((iterations + 1, 2))
    restarted[0] = start
    zz = z.copy()
    avg = None
    inner = 0
    for t in range(1, iterations + 1):
        zz = pdhg_step(problem, zz, config).next
        inner += 1
        zv = zz.as_vector()
        avg = zv.copy() if avg is None else avg + (zv - avg) / inner
        restarted[t] = avg
        if inner >= restart_length:
            zz = SaddlePoint.from_vector(avg, 1)
            avg = None
            inner = 0
    return plain, restarted
