"""Single-level nonconvex program for min-max kernel feature selection.

Decision variables (gamma, alpha, nu, lambda0, lambdaC); with s = e - nu y + lambda0 - lambdaC:

    min   C2 |gamma|_p^p - (1 - C2) (1/2 a'G a - s'a - C e'lambdaC)
    s.t.  G a - s = 0
          gamma, lambda0, lambdaC >= 0,   0 <= a <= C

where G = diag(y) K_gamma diag(y) and K_gamma is the anisotropic Gaussian kernel.

On the feasible set the objective equals C2 |gamma|_p^p + (1 - C2) times the
kernel SVM primal value written in the coefficients a, so for fixed gamma the
best (a, nu, lambda) is the SVM optimum with lambda completed in closed form.
The default solver ("reduced") therefore runs projected quasi-Newton over gamma
alone on phi(gamma) = C2 |gamma|_p^p + (1 - C2) D(gamma), D being the optimal
dual value, whose gradient follows from the inner optimum. Every evaluated
point is exactly feasible. The method of multipliers over all variables
("multipliers") is kept as an alternative.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import lsq_linear, minimize

from .auglag import method_of_multipliers, projected_gradient_norm
from .data import Dataset
from .kernel import PairwiseSquares
from .svm_dual import SvmHyper, solve_dual

log = logging.getLogger(__name__)

# below this, gamma_j^(p-1) is frozen (p < 1 only)
P_LT1_FLOOR = 1e-6
# lambda above this (or alpha within this fraction of a bound) counts as active
CERT_ACTIVE = 1e-8


@dataclass(frozen=True)
class MinMaxConfig:
    C2: float
    C: float
    p: float = 1.0
    eq_tol: float = 1e-5
    opt_tol: float = 1e-5
    max_outer: int = 50
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    max_inner: int = 500
    restart: bool = True
    method: str = "reduced"
    inner_tol: float = 1e-10

    def __post_init__(self):
        if not 0.0 <= self.C2 <= 1.0:
            raise ValueError("C2 must lie in [0, 1]")
        if not self.p > 0:
            raise ValueError("p must be positive")
        if not (math.isfinite(self.C) and self.C > 0):
            raise ValueError("C must be positive and finite")
        if self.method not in ("reduced", "multipliers"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class MinMaxPoint:
    gamma: np.ndarray
    alpha: np.ndarray
    nu: float
    lambda0: np.ndarray
    lambdaC: np.ndarray
    objective: float = float("nan")
    eq_residual: float = float("nan")
    kkt_residual: float = float("nan")
    converged: bool = False

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma.tolist(),
            "alpha": self.alpha.tolist(),
            "nu": float(self.nu),
            "lambda0": self.lambda0.tolist(),
            "lambdaC": self.lambdaC.tolist(),
            "objective": float(self.objective),
            "eq_residual": float(self.eq_residual),
            "kkt_residual": float(self.kkt_residual),
            "converged": bool(self.converged),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MinMaxPoint":
        arr = lambda k: np.asarray(d[k], dtype=float)  # noqa: E731
        return cls(arr("gamma"), arr("alpha"), float(d["nu"]), arr("lambda0"), arr("lambdaC"),
                   float(d["objective"]), float(d["eq_residual"]), float(d["kkt_residual"]), bool(d["converged"]))


@dataclass
class PointGradient:
    gamma: np.ndarray
    alpha: np.ndarray
    nu: float
    lambda0: np.ndarray
    lambdaC: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.gamma, self.alpha, [self.nu], self.lambda0, self.lambdaC])


def norm_p(gamma, p: float) -> float:
    return float(np.sum(np.asarray(gamma) ** p))


def norm_p_grad(gamma, p: float) -> np.ndarray:
    """Derivative of sum gamma_j^p on gamma >= 0.

    p = 1 gives ones (the one-sided derivative at 0); p < 1 evaluates the
    power at max(gamma_j, P_LT1_FLOOR), capping the derivative near 0.
    """
    gamma = np.asarray(gamma, dtype=float)
    if p == 1.0:
        return np.ones_like(gamma)
    if p < 1.0:
        return p * np.maximum(gamma, P_LT1_FLOOR) ** (p - 1.0)
    return p * gamma ** (p - 1.0)


class SingleLevelProblem:
    """Objective, constraint and derivatives on the stacked vector
    x = [gamma (M), alpha (n), nu, lambda0 (n), lambdaC (n)]."""

    def __init__(self, ds: Dataset, cfg: MinMaxConfig, squares: PairwiseSquares | None = None):
        self.ds = ds
        self.cfg = cfg
        self.y = ds.y
        self.yy = np.outer(ds.y, ds.y)
        self.squares = squares if squares is not None else PairwiseSquares(ds.X)
        self.m = ds.n_features
        self.n = ds.n

    # packing -----------------------------------------------------------
    def pack(self, pt: MinMaxPoint) -> np.ndarray:
        return np.concatenate([pt.gamma, pt.alpha, [pt.nu], pt.lambda0, pt.lambdaC])

    def unpack(self, x):
        m, n = self.m, self.n
        return x[:m], x[m:m + n], float(x[m + n]), x[m + n + 1:m + 2 * n + 1], x[m + 2 * n + 1:]

    def bounds(self):
        m, n, C = self.m, self.n, self.cfg.C
        lb = np.concatenate([np.zeros(m), np.zeros(n), [-np.inf], np.zeros(2 * n)])
        ub = np.concatenate([np.full(m, np.inf), np.full(n, C), [np.inf], np.full(2 * n, np.inf)])
        return lb, ub

    def G(self, gamma) -> np.ndarray:
        return self.squares.kernel(gamma) * self.yy

    # pieces ------------------------------------------------------------
    def _full(self, gamma, a, nu, l0, lC, G, Ga, mu, rho):
        c2, C = self.cfg.C2, self.cfg.C
        w = 1.0 - c2
        s = 1.0 - nu * self.y + l0 - lC
        h = Ga - s
        f = c2 * norm_p(gamma, self.cfg.p) - w * (0.5 * a @ Ga - s @ a - C * lC.sum())
        v = rho * h if mu is None else mu + rho * h
        g_gamma = c2 * norm_p_grad(gamma, self.cfg.p) + self.squares.contract(G * np.outer(0.5 * w * a - v, a))
        g_alpha = -w * h + G @ v
        g_nu = -w * (self.y @ a) + self.y @ v
        g_l0 = w * a - v
        g_lC = w * (C - a) + v
        grad = np.concatenate([g_gamma, g_alpha, [g_nu], g_l0, g_lC])
        if not (math.isfinite(f) and np.all(np.isfinite(grad))):
            raise FloatingPointError("non-finite objective or gradient")
        return f, h, grad

    def evaluate(self, x, mu=None, rho: float = 0.0):
        """(f, h, gradient of f + mu'h + rho/2 |h|^2) at ``x``."""
        gamma, a, nu, l0, lC = self.unpack(np.asarray(x, dtype=float))
        G = self.G(gamma)
        return self._full(gamma, a, nu, l0, lC, G, G @ a, mu, rho)

    def _eliminate(self, a, q, mu, rho):
        # per individual, minimise over t = lC - l0 the convex function
        #   c t+ + b t- + mu (q + t) + rho/2 (q + t)^2
        # with b = (1-C2) a, c = (1-C2)(C - a)
        w = 1.0 - self.cfg.C2
        m = 0.0 if mu is None else mu
        t_pos = -(w * (self.cfg.C - a) + m) / rho - q
        t_neg = (w * a - m) / rho - q
        t = np.where(t_pos > 0, t_pos, np.where(t_neg < 0, t_neg, 0.0))
        return np.maximum(-t, 0.0), np.maximum(t, 0.0)

    # interface used by the multiplier loop --------------------------------
    def reduce(self, x):
        return np.asarray(x[: self.m + self.n + 1], dtype=float)

    def z_bounds(self):
        lb, ub = self.bounds()
        k = self.m + self.n + 1
        return lb[:k], ub[:k]

    def lift(self, z, mu, rho):
        m, n = self.m, self.n
        gamma, a, nu = z[:m], z[m:m + n], float(z[m + n])
        G = self.G(gamma)
        l0, lC = self._eliminate(a, G @ a - 1.0 + nu * self.y, mu, rho)
        return np.concatenate([z, l0, lC])

    def merit(self, z, mu, rho):
        """Augmented Lagrangian minimised over lambda0, lambdaC, with its z-gradient."""
        m, n = self.m, self.n
        gamma, a, nu = z[:m], z[m:m + n], float(z[m + n])
        G = self.G(gamma)
        Ga = G @ a
        l0, lC = self._eliminate(a, Ga - 1.0 + nu * self.y, mu, rho)
        f, h, grad = self._full(gamma, a, nu, l0, lC, G, Ga, mu, rho)
        val = f + (0.0 if mu is None else mu @ h) + 0.5 * rho * (h @ h)
        return val, grad[: m + n + 1]

    def measure(self, x, mu):
        """(f, h, stationarity) where stationarity is the projected-gradient norm
        of f + mu'h over the full box, relative to max(1, |grad f|_inf)."""
        f, h, g_f = self.evaluate(x)
        g_lag = g_f if mu is None else self.evaluate(x, mu, 0.0)[2]
        lb, ub = self.bounds()
        scale = max(1.0, float(np.max(np.abs(g_f))))
        return f, h, projected_gradient_norm(x, g_lag, lb, ub) / scale

    def point(self, x, **extra) -> MinMaxPoint:
        gamma, a, nu, l0, lC = self.unpack(np.asarray(x, dtype=float))
        return MinMaxPoint(gamma.copy(), a.copy(), nu, l0.copy(), lC.copy(), **extra)

    def complete(self, gamma, alpha, nu) -> np.ndarray:
        """Smallest lambda0, lambdaC making the equality constraint hold exactly."""
        G = self.G(gamma)
        r = 1.0 - G @ alpha - nu * self.y
        return np.concatenate([gamma, alpha, [nu], np.maximum(0.0, -r), np.maximum(0.0, r)])


    # first-order certificate -------------------------------------------
    def gamma_coupling(self, G, a) -> np.ndarray:
        """A with A[j, i] = sum_l G_il a_l (x_ij - x_lj)^2, so the gamma part of
        J'v is -A v."""
        X = self.squares.X
        X2 = self.squares._X2
        Ga = G @ a
        At = X2 * Ga[:, None] + G @ (a[:, None] * X2) - 2.0 * X * (G @ (a[:, None] * X))
        return At.T

    def certificate(self, x) -> tuple[float, np.ndarray]:
        """Stationarity of ``x`` under the best equality multiplier.

        mu is fitted by bound-constrained least squares on the gamma, alpha and
        nu rows of grad f + J'mu, with the lambda rows turned into bounds
        mu_i in [-(1-C2)(C-a_i), (1-C2) a_i] (an endpoint when the matching
        lambda is positive) and one sign-constrained slack per coordinate at a
        bound. Returns the projected-gradient inf-norm of the Lagrangian at that
        mu over the full box, relative to max(1, |grad f|_inf), and mu.
        """
        x = np.asarray(x, dtype=float)
        gamma, a, nu, l0, lC = self.unpack(x)
        m, n, C = self.m, self.n, self.cfg.C
        w = 1.0 - self.cfg.C2
        G = self.G(gamma)
        _, _, gf = self.evaluate(x)
        lo, hi = -w * (C - a), w * a
        pin = np.full(n, np.nan)
        pin = np.where(lC > CERT_ACTIVE, lo, pin)
        pin = np.where(l0 > CERT_ACTIVE, hi, pin)
        pin = np.where(np.isnan(pin) & (hi - lo <= 0), 0.5 * (lo + hi), pin)
        fixed = ~np.isnan(pin)
        free = ~fixed
        mu = np.where(fixed, pin, 0.0)

        M = np.vstack([-self.gamma_coupling(G, a), G, self.y[None, :]])
        rhs = -np.concatenate([gf[:m], gf[m:m + n], [gf[m + n]]]) - M[:, fixed] @ mu[fixed]
        at_lo = np.concatenate([gamma <= 0, a <= CERT_ACTIVE * C, [False]])
        at_hi = np.concatenate([np.zeros(m, bool), a >= C * (1 - CERT_ACTIVE), [False]])
        slack_rows = np.concatenate([np.flatnonzero(at_lo), np.flatnonzero(at_hi)])
        S = np.zeros((len(rhs), len(slack_rows)))
        S[slack_rows, np.arange(len(slack_rows))] = -1.0
        k_lo = int(at_lo.sum())
        s_lb = np.concatenate([np.zeros(k_lo), np.full(len(slack_rows) - k_lo, -np.inf)])
        s_ub = np.concatenate([np.full(k_lo, np.inf), np.zeros(len(slack_rows) - k_lo)])
        A = np.hstack([M[:, free], S])
        if A.shape[1]:
            sol = lsq_linear(A, rhs, bounds=(np.concatenate([lo[free], s_lb]), np.concatenate([hi[free], s_ub])),
                             tol=1e-12, lsmr_tol="auto")
            mu[free] = sol.x[: int(free.sum())]
        _, _, g_lag = self.evaluate(x, mu, 0.0)
        lb, ub = self.bounds()
        scale = max(1.0, float(np.max(np.abs(gf))))
        return projected_gradient_norm(x, g_lag, lb, ub) / scale, mu


def objective_and_gradient(pt: MinMaxPoint, ds: Dataset, cfg: MinMaxConfig, squares=None):
    prob = SingleLevelProblem(ds, cfg, squares)
    f, _, g = prob.evaluate(prob.pack(pt))
    gg, ga, gn, g0, gc = prob.unpack(g)
    return f, PointGradient(gg, ga, gn, g0, gc)


def constraint_and_jacobian(pt: MinMaxPoint, ds: Dataset, cfg: MinMaxConfig, squares=None):
    """Residual h = G a - e + nu y - lambda0 + lambdaC and a map v -> J'v."""
    prob = SingleLevelProblem(ds, cfg, squares)
    x = prob.pack(pt)
    gamma, a, nu, l0, lC = prob.unpack(x)
    G = prob.G(gamma)
    h = G @ a - 1.0 + nu * prob.y - l0 + lC

    def jtv(v) -> PointGradient:
        v = np.asarray(v, dtype=float)
        return PointGradient(
            gamma=-prob.squares.contract(G * np.outer(v, a)),
            alpha=G @ v,
            nu=float(prob.y @ v),
            lambda0=-v,
            lambdaC=v.copy(),
        )

    return h, jtv


def feasible_objective(pt: MinMaxPoint, ds: Dataset, cfg: MinMaxConfig, squares=None) -> float:
    """C2 |gamma|_p^p + (1 - C2)(1/2 a'G a + C e'lambdaC): the objective once h = 0."""
    sq = squares if squares is not None else PairwiseSquares(ds.X)
    G = sq.kernel(pt.gamma) * np.outer(ds.y, ds.y)
    return cfg.C2 * norm_p(pt.gamma, cfg.p) + (1.0 - cfg.C2) * (
        0.5 * pt.alpha @ G @ pt.alpha + cfg.C * float(np.sum(pt.lambdaC)))


def _feasible_start(prob: SingleLevelProblem, x0, cfg: MinMaxConfig):
    f0, h0, _ = prob.evaluate(x0)
    eq0 = float(np.max(np.abs(h0)))
    return f0, eq0, eq0 <= cfg.eq_tol


def _finish(prob, cfg, candidates, label, n_steps, f0):
    f_best, x_best, eq_best = min(candidates, key=lambda c: c[0])
    kr, _ = prob.certificate(x_best)
    ok = eq_best <= cfg.eq_tol and kr <= cfg.opt_tol
    log.info("%s run: %d steps, f=%.8g (start %.8g), |h|=%.2g, kkt=%.2g, converged=%s",
             label, n_steps, f_best, f0, eq_best, kr, ok)
    return prob.point(x_best, objective=f_best, eq_residual=eq_best, kkt_residual=kr, converged=ok)


def _run_reduced(prob: SingleLevelProblem, x0, cfg: MinMaxConfig, iterate_log):
    """Quasi-Newton over gamma on the optimal-value function; every evaluated
    point is the inner SVM optimum with its multipliers completed."""
    lb, ub = prob.bounds()
    x0 = np.clip(x0, lb, ub)
    f0, eq0, feasible = _feasible_start(prob, x0, cfg)
    candidates = [(f0, x0, eq0)] if feasible else []
    m, n = prob.m, prob.n
    y = prob.y
    hyper = SvmHyper(cfg.C)
    w = 1.0 - cfg.C2
    gamma0, a0, _, _, _ = prob.unpack(x0)
    if abs(a0 @ y) > 1e-8 * max(1.0, cfg.C * n):
        a0 = None
    state = {"alpha": a0, "evals": 0}

    def phi(g):
        g = np.maximum(g, 0.0)
        G = prob.G(g)
        sol = solve_dual(G, y, hyper, tol=cfg.inner_tol, alpha0=state["alpha"])
        state["alpha"] = sol.alpha
        state["evals"] += 1
        xc = prob.complete(g, sol.alpha, sol.bias)
        f, h, grad = prob.evaluate(xc)
        eq = float(np.max(np.abs(h)))
        candidates.append((f, xc, eq))
        if iterate_log is not None:
            iterate_log.append(prob.point(xc, objective=f, eq_residual=eq))
        val = cfg.C2 * norm_p(g, cfg.p) + w * sol.objective
        return val, grad[:m]

    res = minimize(phi, gamma0, jac=True, method="L-BFGS-B", bounds=[(0.0, None)] * m,
                   options={"maxiter": cfg.max_inner, "maxfun": 2 * cfg.max_inner,
                            "gtol": 0.1 * cfg.opt_tol, "ftol": 1e-14})
    log.debug("gamma search: %s after %d iterations", res.message, res.nit)
    return _finish(prob, cfg, candidates, "reduced", int(res.nit), f0)


def _run_multipliers(prob: SingleLevelProblem, x0, cfg: MinMaxConfig, iterate_log):
    """Method of multipliers over all variables; reports the lowest-objective
    exactly-feasible point seen (outer iterates completed in closed form)."""
    lb, ub = prob.bounds()
    x0 = np.clip(x0, lb, ub)
    f0, eq0, feasible = _feasible_start(prob, x0, cfg)
    candidates = [(f0, x0, eq0)] if feasible else []

    def on_outer(rec):
        g, a, nu, _, _ = prob.unpack(rec.x)
        xc = prob.complete(g, a, nu)
        fc, hc, _ = prob.evaluate(xc)
        eqc = float(np.max(np.abs(hc)))
        candidates.append((fc, xc, eqc))
        if iterate_log is not None:
            iterate_log.append(prob.point(rec.x, objective=rec.f, eq_residual=rec.eq_residual,
                                          kkt_residual=rec.kkt_residual))
            iterate_log.append(prob.point(xc, objective=fc, eq_residual=eqc))

    z_lb, z_ub = prob.z_bounds()
    res = method_of_multipliers(
        prob, x0, z_lb, z_ub,
        eq_tol=cfg.eq_tol, opt_tol=cfg.opt_tol, max_outer=cfg.max_outer, max_inner=cfg.max_inner,
        rho=cfg.penalty_init, rho_growth=cfg.penalty_growth, callback=on_outer,
    )
    if not candidates:
        candidates.append((res.f, res.x, res.eq_residual))
    return _finish(prob, cfg, candidates, "multiplier", res.n_outer, f0)


def solve_single_level(warm: MinMaxPoint, ds: Dataset, cfg: MinMaxConfig,
                       squares: PairwiseSquares | None = None, iterate_log: list | None = None) -> MinMaxPoint:
    """Locally solve the single-level program from ``warm``.

    A warm start that is feasible and already stationary (both within the
    configured tolerances) is returned unchanged. Otherwise the returned point
    is the lowest-objective exactly-feasible point visited, so its objective
    never exceeds that of a feasible warm start. kkt_residual is the
    best-multiplier certificate of ``SingleLevelProblem.certificate``. If the
    first run does not converge, one more run starts from the warm point with
    gamma halved and the point with the lower objective is kept.
    """
    prob = SingleLevelProblem(ds, cfg, squares)
    x0 = prob.pack(warm)
    f0, h0, _ = prob.evaluate(x0)
    if not math.isfinite(f0):
        raise FloatingPointError("non-finite objective at the warm start")
    eq0 = float(np.max(np.abs(h0)))
    if eq0 <= cfg.eq_tol:
        kr0, _ = prob.certificate(x0)
        if kr0 <= cfg.opt_tol:
            return prob.point(x0, objective=f0, eq_residual=eq0, kkt_residual=kr0, converged=True)
    run = _run_reduced if cfg.method == "reduced" else _run_multipliers
    best = run(prob, x0, cfg, iterate_log)
    if not best.converged and cfg.restart:
        g = 0.5 * np.asarray(warm.gamma)
        x1 = prob.complete(g, np.asarray(warm.alpha), warm.nu)
        log.info("restarting from the warm start with gamma halved")
        second = run(prob, x1, replace(cfg, restart=False), iterate_log)
        if second.objective < best.objective:
            best = second
    return best


class FixedGammaProblem(SingleLevelProblem):
    """The lower-level Lagrangian dual for a fixed gamma:

        min  -1/2 a'G a + s'a + C e'lambdaC   s.t.  G a - s = 0,  lambda >= 0

    which is the single-level objective at C2 = 0 with gamma frozen. The
    redundant bound 0 <= a <= C is kept. The multiplier loop sees z = (a, nu).
    """

    def __init__(self, ds: Dataset, gamma, C: float, squares: PairwiseSquares | None = None,
                 eq_tol: float = 1e-8, opt_tol: float = 1e-8):
        super().__init__(ds, MinMaxConfig(C2=0.0, C=C, eq_tol=eq_tol, opt_tol=opt_tol), squares)
        self.gamma = np.asarray(gamma, dtype=float).copy()
        self._G = super().G(self.gamma)

    def G(self, gamma) -> np.ndarray:
        return self._G

    def _x(self, z, l0, lC):
        return np.concatenate([self.gamma, z, l0, lC])

    def reduce(self, x):
        return np.asarray(x[self.m: self.m + self.n + 1], dtype=float)

    def z_bounds(self):
        lb, ub = self.bounds()
        return lb[self.m: self.m + self.n + 1], ub[self.m: self.m + self.n + 1]

    def lift(self, z, mu, rho):
        a, nu = z[: self.n], float(z[self.n])
        l0, lC = self._eliminate(a, self._G @ a - 1.0 + nu * self.y, mu, rho)
        return self._x(z, l0, lC)

    def merit(self, z, mu, rho):
        x = self.lift(z, mu, rho)
        gamma, a, nu, l0, lC = self.unpack(x)
        G = self._G
        m, n = self.m, self.n
        c2, C = self.cfg.C2, self.cfg.C
        s = 1.0 - nu * self.y + l0 - lC
        Ga = G @ a
        h = Ga - s
        f = -(0.5 * a @ Ga - s @ a - C * lC.sum())
        v = rho * h if mu is None else mu + rho * h
        val = f + (0.0 if mu is None else mu @ h) + 0.5 * rho * (h @ h)
        return val, np.concatenate([-h + G @ v, [-(self.y @ a) + self.y @ v]])

    def measure(self, x, mu):
        f, h, gf = self.evaluate(x)
        g = gf if mu is None else self.evaluate(x, mu, 0.0)[2]
        lb, ub = self.bounds()
        sl = slice(self.m, None)
        scale = max(1.0, float(np.max(np.abs(gf[sl]))))
        return f, h, projected_gradient_norm(x[sl], g[sl], lb[sl], ub[sl]) / scale


def solve_lower_dual(ds: Dataset, gamma, C: float, squares: PairwiseSquares | None = None,
                     start=None, tol: float = 1e-8, max_outer: int = 50, max_inner: int = 2000):
    """Solve the lower-level Lagrangian dual for fixed ``gamma`` by the method of
    multipliers, from ``start`` = (alpha, nu) or from alpha = 0, nu = 0.

    Returns (alpha, nu, lambda0, lambdaC, eq_residual, stationarity, converged).
    """
    prob = FixedGammaProblem(ds, gamma, C, squares, eq_tol=tol, opt_tol=tol)
    if start is None:
        a0, nu0 = np.zeros(ds.n), 0.0
    else:
        a0, nu0 = np.asarray(start[0], dtype=float), float(start[1])
    x0 = np.concatenate([prob.gamma, a0, [nu0], np.zeros(2 * ds.n)])
    z_lb, z_ub = prob.z_bounds()
    res = method_of_multipliers(prob, x0, z_lb, z_ub, eq_tol=tol, opt_tol=tol,
                                max_outer=max_outer, max_inner=max_inner)
    _, a, nu, l0, lC = prob.unpack(res.x)
    return a.copy(), nu, l0.copy(), lC.copy(), res.eq_residual, res.kkt_residual, res.converged


def selected_features(pt, threshold: float = 1e-2) -> np.ndarray:
    """Indices j with gamma_j > threshold."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    gamma = pt.gamma if isinstance(pt, MinMaxPoint) else np.asarray(pt)
    return np.flatnonzero(np.asarray(gamma) > threshold)


def warm_start(gamma, sol, mult) -> MinMaxPoint:
    """Starting point from a dual solution and its recovered multipliers."""
    return MinMaxPoint(np.asarray(gamma, dtype=float).copy(), sol.alpha.copy(), float(mult.nu),
                       mult.lambda0.copy(), mult.lambdaC.copy())
