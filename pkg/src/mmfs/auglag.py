"""Method of multipliers for  min f(x)  s.t.  h(x) = 0,  lb <= x <= ub.

Each outer step minimises the augmented Lagrangian

    f(x) + mu'h(x) + rho/2 |h(x)|^2

over the box with scipy's L-BFGS-B, then updates mu <- mu + rho h. A problem
may hand the quasi-Newton solver only part of x (``z``) when the remaining
coordinates can be minimised exactly for fixed ``z``; ``lift`` rebuilds the
full point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
from scipy.optimize import minimize

log = logging.getLogger(__name__)

RHO_MAX = 1e8


class MultiplierProblem(Protocol):
    def merit(self, z, mu, rho) -> tuple[float, np.ndarray]: ...
    def lift(self, z, mu, rho) -> np.ndarray: ...
    def measure(self, x, mu) -> tuple[float, np.ndarray, float]: ...
    def reduce(self, x) -> np.ndarray: ...


@dataclass
class OuterRecord:
    iteration: int
    x: np.ndarray
    f: float
    eq_residual: float
    kkt_residual: float
    rho: float
    inner_iterations: int


@dataclass
class AugLagResult:
    x: np.ndarray
    mu: np.ndarray
    f: float
    eq_residual: float
    kkt_residual: float
    converged: bool
    n_outer: int
    history: list = field(default_factory=list)


def projected_gradient_norm(x, g, lb, ub) -> float:
    if len(x) == 0:
        return 0.0
    return float(np.max(np.abs(np.clip(x - g, lb, ub) - x)))


def method_of_multipliers(
    problem: MultiplierProblem,
    x0,
    z_lb,
    z_ub,
    mu0=None,
    eq_tol: float = 1e-5,
    opt_tol: float = 1e-5,
    max_outer: int = 50,
    max_inner: int = 500,
    rho: float = 10.0,
    rho_growth: float = 10.0,
    stall_window: int = 5,
    callback: Callable[[OuterRecord], None] | None = None,
) -> AugLagResult:
    """Run the multiplier loop from the full point ``x0``.

    ``problem.measure(x, mu)`` returns (f, h, stationarity) for a full point.
    Stops when |h|_inf <= eq_tol and stationarity <= opt_tol, after
    ``max_outer`` steps, or when |h|_inf has not improved over the best outer
    iterate for ``stall_window`` consecutive steps. rho grows by
    ``rho_growth`` whenever |h|_inf fails to drop by a factor 4, capped at 1e8.
    """
    z_lb = np.asarray(z_lb, dtype=float)
    z_ub = np.asarray(z_ub, dtype=float)
    x = np.asarray(x0, dtype=float)
    mu = None if mu0 is None else np.array(mu0, dtype=float)
    f, h, kr = problem.measure(x, mu)
    if mu is None:
        mu = np.zeros_like(h)
    eq = float(np.max(np.abs(h))) if len(h) else 0.0
    res = AugLagResult(x=x, mu=mu, f=f, eq_residual=eq, kkt_residual=kr, converged=False, n_outer=0)
    if eq <= eq_tol and kr <= opt_tol:
        res.converged = True
        return res

    bounds = list(zip(np.where(np.isfinite(z_lb), z_lb, None), np.where(np.isfinite(z_ub), z_ub, None)))
    z = np.clip(problem.reduce(x), z_lb, z_ub)
    best_eq = np.inf
    since_best = 0
    prev_eq = eq
    for k in range(1, max_outer + 1):
        mu_k, rho_k = mu, rho
        sol = minimize(
            lambda w: problem.merit(w, mu_k, rho_k),
            z,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": max_inner, "maxfun": 2 * max_inner, "gtol": 0.1 * opt_tol, "ftol": 1e-15},
        )
        z = np.clip(sol.x, z_lb, z_ub)
        x = problem.lift(z, mu, rho)
        f, h, _ = problem.measure(x, mu)
        eq = float(np.max(np.abs(h))) if len(h) else 0.0
        mu = mu + rho * h
        _, _, kr = problem.measure(x, mu)
        rec = OuterRecord(k, x.copy(), f, eq, kr, rho, int(sol.nit))
        res.history.append(rec)
        if callback is not None:
            callback(rec)
        log.debug("outer %d: f=%.8g |h|=%.3g kkt=%.3g rho=%.1e inner=%d", k, f, eq, kr, rho, sol.nit)
        res.x, res.mu, res.f, res.eq_residual, res.kkt_residual, res.n_outer = x, mu, f, eq, kr, k
        if eq <= eq_tol and kr <= opt_tol:
            res.converged = True
            break
        if eq < best_eq * (1 - 1e-3):
            best_eq, since_best = eq, 0
        else:
            since_best += 1
            if since_best >= stall_window:
                log.debug("equality residual stalled for %d outer steps", stall_window)
                break
        if eq > 0.25 * prev_eq:
            rho = min(rho * rho_growth, RHO_MAX)
        prev_eq = eq
    return res
