"""Log-concave maximum-likelihood projection of a discrete distribution.

The log-density is parameterized by its values at the atoms and is linear
between them. The solver maximizes

    l(phi, P) = sum_i w_i phi(x_i) - int exp(phi) + 1

over concave ``phi`` with an active-set method: inside the current set of
kinks the problem is smooth and unconstrained, and is solved by damped Newton
steps with backtracking. Steps that would break concavity are cut back to the
boundary, dropping the kink that straightened out; kinks are added where the
directional derivative of a new kink is positive.

Work is done on the support rescaled to ``[0, 1]``; the result is mapped back
affinely, which is exact because the projection commutes with affine maps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solveh_banded
from scipy.optimize import minimize, minimize_scalar

from .density import PiecewiseLogLinearDensity, integral, j_integral, log_eval, segment_moments
from .dist import DiscreteDistribution, NotInP1

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    grad_tol: float = 1e-9
    norm_tol: float = 1e-8
    max_iter: int = 500
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60

    def __post_init__(self):
        if not (self.grad_tol > 0 and self.norm_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not (0 < self.armijo < 0.5 and 0 < self.backtrack < 1):
            raise ValueError("invalid line-search parameters")


@dataclass
class ProjectionResult:
    density: PiecewiseLogLinearDensity
    objective: float
    optimality_residual: float
    iterations: int
    active_knots: list[int]
    converged: bool = True
    history: list[float] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "density": self.density.to_json(),
            "objective": self.objective,
            "optimality_residual": self.optimality_residual,
            "iterations": self.iterations,
            "active_knots": list(self.active_knots),
            "converged": self.converged,
        }


def objective(phi, P: DiscreteDistribution) -> float:
    """``E_P[phi(X)] - int exp(phi) + 1``; ``-inf`` if an atom falls outside the domain.

    ``phi`` is a :class:`PiecewiseLogLinearDensity` (read as its log-density) or
    anything exposing ``log_eval`` and ``integral`` methods, such as a
    Lipschitz envelope.
    """
    if isinstance(phi, PiecewiseLogLinearDensity):
        vals = log_eval(phi, P.locations)
        total = integral(phi)
    else:
        vals = phi.log_eval(P.locations)
        total = phi.integral()
    vals = np.atleast_1d(vals)
    if np.any(~np.isfinite(vals)):
        return -math.inf
    return float(np.dot(P.weights, vals) - total + 1.0)


# --- reduced problem on a fixed kink set -----------------------------------

def _interp_weights(z: np.ndarray, w: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """``B^T w`` where ``B`` interpolates node values linearly to every atom."""
    zn = z[nodes]
    seg = np.clip(np.searchsorted(zn, z, side="right") - 1, 0, nodes.size - 2)
    u = (z - zn[seg]) / (zn[seg + 1] - zn[seg])
    c = np.zeros(nodes.size)
    np.add.at(c, seg, w * (1.0 - u))
    np.add.at(c, seg + 1, w * u)
    return c


def _reduced_value(theta, h, c):
    return float(c @ theta - np.sum(j_integral(theta[:-1], theta[1:], h)) + 1.0)


def _reduced_derivatives(theta, h, c):
    I0, I1, I2 = segment_moments(theta[:-1], theta[1:])
    grad = c.copy()
    grad[:-1] -= h * (I0 - I1)
    grad[1:] -= h * I1
    # upper-banded storage of the (positive definite) Hessian of the integral
    diag = np.zeros(theta.size)
    diag[:-1] += h * (I0 - 2.0 * I1 + I2)
    diag[1:] += h * I2
    off = h * (I1 - I2)
    band = np.zeros((2, theta.size))
    band[0, 1:] = off
    band[1] = diag
    return grad, band


def _full_gradient(phi, z, w):
    h = np.diff(z)
    I0, I1, _ = segment_moments(phi[:-1], phi[1:])
    g = w.copy()
    g[:-1] -= h * (I0 - I1)
    g[1:] -= h * I1
    return g


def _kink_derivatives(g, z):
    """Directional derivative of adding ``-(z - z_j)_+`` to ``phi``, for each ``j``."""
    S0 = np.concatenate((np.cumsum(g[::-1])[::-1][1:], [0.0]))
    S1 = np.concatenate((np.cumsum((g * z)[::-1])[::-1][1:], [0.0]))
    return -(S1 - z * S0)


def _kinks(phi_nodes, zn):
    s = np.diff(phi_nodes) / np.diff(zn)
    return s[:-1] - s[1:]


def project(P: DiscreteDistribution, opts: SolverOptions | None = None) -> ProjectionResult:
    """Log-concave MLE ``psi*(P)`` with knots at the atoms of ``P``."""
    opts = opts or SolverOptions()
    if not P.in_p1():
        raise NotInP1("projection is undefined for a single-atom distribution")
    x = P.locations
    w = P.weights
    lo, span = float(x[0]), float(x[-1] - x[0])
    z = (x - lo) / span
    z[-1] = 1.0
    m = z.size - 1

    active = np.zeros(m + 1, dtype=bool)
    active[0] = active[-1] = True
    phi = np.zeros(m + 1)  # uniform on [0, 1]
    history = [_reduced_value(np.zeros(2), np.array([1.0]), _interp_weights(z, w, np.array([0, m])))]
    iterations = 0
    converged = False
    residual = math.inf

    while iterations < opts.max_iter:
        nodes = np.flatnonzero(active)
        zn = z[nodes]
        h = np.diff(zn)
        c = _interp_weights(z, w, nodes)
        theta = phi[nodes].copy()
        value = _reduced_value(theta, h, c)
        grad, band = _reduced_derivatives(theta, h, c)
        gnorm = float(np.max(np.abs(grad)))

        if gnorm <= opts.grad_tol:
            phi = np.interp(z, zn, theta)
            dk = _kink_derivatives(_full_gradient(phi, z, w), z)
            dk[active] = -math.inf
            j = int(np.argmax(dk))
            residual = max(gnorm, float(max(dk[j], 0.0)))
            if dk[j] <= opts.grad_tol:
                converged = True
                break
            active[j] = True
            continue

        iterations += 1
        step = solveh_banded(band, grad)
        slope = float(grad @ step)
        if slope <= 1e-12 * max(1.0, abs(value)):
            # Newton decrement below roundoff: the objective cannot resolve the step
            trial = theta + step
            new_value = _reduced_value(trial, h, c)
        else:
            t = 1.0
            for _ in range(opts.max_backtracks):
                trial = theta + t * step
                new_value = _reduced_value(trial, h, c)
                if new_value >= value + opts.armijo * t * slope:
                    break
                t *= opts.backtrack
            else:
                phi = np.interp(z, zn, theta)
                residual = gnorm
                logger.debug("line search stalled at gradient %.3e", gnorm)
                converged = gnorm <= 1e3 * opts.grad_tol
                break

        # cut the step back to the concavity boundary if a kink would turn convex
        old_k = _kinks(theta, zn)
        new_k = _kinks(trial, zn)
        bad = new_k < 0
        if np.any(bad):
            ratios = np.full(old_k.size, math.inf)
            ratios[bad] = np.maximum(old_k[bad], 0.0) / (old_k[bad] - new_k[bad])
            s = float(min(ratios.min(), 1.0))
            trial = theta + s * (trial - theta)
            active[nodes[1:-1][ratios <= s + 1e-12]] = False
            new_value = _reduced_value(trial, h, c)

        phi = np.interp(z, zn, trial)
        history.append(new_value)

    # back to original coordinates: phi_x(x) = phi_z(z) - log(span)
    logvals = phi - math.log(span)
    f = PiecewiseLogLinearDensity(x, logvals, check=False)
    total = integral(f)
    if abs(total - 1.0) > opts.norm_tol:
        logger.warning("projection integral off by %.3e before renormalizing", total - 1.0)
    f = PiecewiseLogLinearDensity(x, logvals - math.log(total), normalized=True, check=False)
    if not f.is_concave():
        raise ArithmeticError("solver produced a non-concave log-density")
    if not converged:
        logger.warning("projection did not converge: residual %.3e after %d iterations",
                       residual, iterations)
    history = [v - math.log(span) for v in history]
    return ProjectionResult(
        density=f,
        objective=objective(f, P),
        optimality_residual=residual,
        iterations=iterations,
        active_knots=[int(i) for i in np.flatnonzero(active)],
        converged=converged,
        history=history,
    )


# --- brute-force oracle ----------------------------------------------------

ORACLE_MAX_ATOMS = 5


def _oracle_logvals(params, x):
    level, slope = params[0], params[1]
    kinks = params[2:]
    phi = level + slope * (x - x[0])
    for j, cj in enumerate(kinks, start=1):
        phi = phi - cj * np.maximum(x - x[j], 0.0)
    return phi


def _oracle_value(params, P):
    x = P.locations
    phi = _oracle_logvals(params, x)
    return float(P.weights @ phi - np.sum(j_integral(phi[:-1], phi[1:], np.diff(x))) + 1.0)


def brute_force_oracle(P: DiscreteDistribution, sweeps: int = 4000, tol: float = 1e-15) -> ProjectionResult:
    """Independent maximizer of the same objective, for at most five atoms.

    The concave log-density is written as ``level + slope (z - z_0) - sum_j c_j (z - z_j)_+``
    on the support rescaled to ``[0, 1]``, with ``c_j >= 0``, so the concavity cone
    is a box. A grid search over the slope (level solved in closed form) seeds a
    box-constrained quasi-Newton run on finite differences, which is then polished
    by cyclic one-dimensional maximization with each kink clamped to the cone and
    a pattern move along every sweep's net displacement.
    """
    if P.size > ORACLE_MAX_ATOMS:
        raise ValueError(f"oracle supports at most {ORACLE_MAX_ATOMS} atoms")
    if not P.in_p1():
        raise NotInP1("projection is undefined for a single-atom distribution")
    x = P.locations
    span = float(x[-1] - x[0])
    z = (x - x[0]) / span
    Pz = DiscreteDistribution(z, P.weights)
    m = z.size - 1

    def value_of(p):
        return _oracle_value(p, Pz)

    def best_level(slope):
        # for a fixed shape the optimal level makes exp(phi) integrate to one
        phi = slope * z
        return -math.log(float(np.sum(j_integral(phi[:-1], phi[1:], np.diff(z)))))

    grid = np.linspace(-60.0, 60.0, 2401)
    seeds = [np.concatenate(([best_level(s), s], np.zeros(m - 1))) for s in grid]
    params = max(seeds, key=value_of)
    res = minimize(lambda p: -value_of(p), params, method="L-BFGS-B",
                   bounds=[(None, None)] * 2 + [(0.0, None)] * (m - 1),
                   options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 20000})
    if -res.fun > value_of(params):
        params = np.asarray(res.x, dtype=float)
    value = value_of(params)
    history = [value]
    kink_cap = 400.0

    def line_max(direction, bounds=None):
        nonlocal params, value

        def neg(t):
            return -value_of(params + t * direction)

        if bounds is None:
            res = minimize_scalar(neg, bracket=(-1e-3, 1e-3), method="brent", tol=1e-12)
        else:
            res = minimize_scalar(neg, bounds=bounds, method="bounded", options={"xatol": 1e-13})
        if np.isfinite(res.fun) and -res.fun > value:
            params = params + res.x * direction
            value = -res.fun

    it = 0
    for it in range(1, sweeps + 1):
        start = params.copy()
        before = value
        for k in range(params.size):
            e = np.zeros(params.size)
            e[k] = 1.0
            if k < 2:
                line_max(e)
            else:
                line_max(e, bounds=(-params[k], kink_cap - params[k]))
        move = params - start
        if np.any(move != 0):
            lims = [10.0] + [-params[k] / move[k] for k in range(2, params.size) if move[k] < 0]
            line_max(move, bounds=(0.0, min(lims)))
        history.append(value)
        if value - before <= tol:
            break

    phi = _oracle_logvals(params, z) - math.log(span)
    f = PiecewiseLogLinearDensity(x, phi, check=False)
    f = PiecewiseLogLinearDensity(x, phi - math.log(integral(f)), normalized=True, check=False)
    active = [0] + [j for j in range(1, m) if params[j + 1] > 1e-10] + [m]
    return ProjectionResult(
        density=f,
        objective=objective(f, P),
        optimality_residual=float("nan"),
        iterations=it,
        active_knots=active,
        converged=True,
        history=[v - math.log(span) for v in history],
    )
