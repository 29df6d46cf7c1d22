"""Exact distances between discrete laws and between projected densities."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import density as dens
from .dist import DiscreteDistribution, epsilon
from .solver import ProjectionResult, SolverOptions, project


def wasserstein1(P: DiscreteDistribution, Q: DiscreteDistribution) -> float:
    """``int |F_P - F_Q|``, summed exactly over the merged atom grid."""
    u = np.union1d(P.locations, Q.locations)
    if u.size < 2:
        return 0.0
    FP = _cdf_on(P, u)
    FQ = _cdf_on(Q, u)
    return float(np.sum(np.abs(FP[:-1] - FQ[:-1]) * np.diff(u)))


def _cdf_on(P: DiscreteDistribution, u: np.ndarray) -> np.ndarray:
    cum = np.concatenate(([0.0], np.cumsum(P.weights)))
    return cum[np.searchsorted(P.locations, u, side="right")]


def _tails_on(P: DiscreteDistribution, u: np.ndarray):
    """``Pr[X < u], Pr[X <= u], Pr[X > u], Pr[X >= u]`` at every grid point.

    Upper tails come from suffix sums so that small tail masses keep full
    relative precision.
    """
    w = P.weights
    prefix = np.concatenate(([0.0], np.cumsum(w)))
    suffix = np.concatenate((np.cumsum(w[::-1])[::-1], [0.0]))
    left = np.searchsorted(P.locations, u, side="left")
    right = np.searchsorted(P.locations, u, side="right")
    return prefix[left], prefix[right], suffix[right], suffix[left]


def delta_cdf(P: DiscreteDistribution, Q: DiscreteDistribution) -> float:
    """``max(sup_t |sqrt P(X>t) - sqrt Q(X>t)|, sup_t |sqrt P(X<t) - sqrt Q(X<t)|)``.

    Both one-sided tails are step functions that jump only at atoms, so the
    supremum is attained at an atom, approached from one side or the other.
    """
    u = np.union1d(P.locations, Q.locations)
    best = 0.0
    for a, b in zip(_tails_on(P, u), _tails_on(Q, u)):
        best = max(best, float(np.max(np.abs(np.sqrt(a) - np.sqrt(b)))))
    return min(best, 1.0)


def delta_cdf_uniform(P: DiscreteDistribution) -> float:
    """Exact ``Delta_CDF(P, Unif[0, 1])`` for ``P`` supported in ``[0, 1]``.

    Between atoms the empirical tail is constant while the uniform tail is
    monotone, so each piece attains its extreme discrepancy at an endpoint.
    """
    x = P.locations
    if x[0] < 0 or x[-1] > 1:
        raise ValueError("P must be supported in [0, 1]")
    below_strict, below, above, above_eq = _tails_on(P, x)
    # pieces [x_k, x_{k+1}) carry Pr[X > t] = above[k]; (x_{k-1}, x_k] carry Pr[X < t] = below_strict[k]
    starts = np.concatenate(([0.0], x))
    ends = np.concatenate((x, [1.0]))
    surv = np.concatenate(([1.0], above))
    cdfv = np.concatenate((below_strict, [1.0]))
    d0 = np.maximum(np.abs(np.sqrt(surv) - np.sqrt(1.0 - starts)),
                    np.abs(np.sqrt(surv) - np.sqrt(1.0 - ends)))
    lo = np.concatenate(([0.0], x))
    hi = np.concatenate((x, [1.0]))
    d1 = np.maximum(np.abs(np.sqrt(cdfv) - np.sqrt(lo)), np.abs(np.sqrt(cdfv) - np.sqrt(hi)))
    return float(min(1.0, max(d0.max(), d1.max())))


def hellinger_sq(f: dens.PiecewiseLogLinearDensity, g: dens.PiecewiseLogLinearDensity) -> float:
    return float(min(2.0, max(0.0, 2.0 - 2.0 * dens.hellinger_affinity(f, g))))


def hellinger(f: dens.PiecewiseLogLinearDensity, g: dens.PiecewiseLogLinearDensity) -> float:
    return math.sqrt(hellinger_sq(f, g))


@dataclass(frozen=True)
class ContinuityRecord:
    dW: float
    dH: float
    eps_max: float
    ratio: float

    def as_dict(self) -> dict:
        return asdict(self)


def holder_ratio(dW: float, dH: float, eps_max: float) -> float:
    """``dH / (dW / eps_max)^(1/4)``, taken as 0 when the laws coincide."""
    if dW == 0.0:
        return 0.0
    return dH / (dW / eps_max) ** 0.25


def continuity_record(P: DiscreteDistribution, Q: DiscreteDistribution,
                      opts: SolverOptions | None = None,
                      projections: tuple[ProjectionResult, ProjectionResult] | None = None) -> ContinuityRecord:
    if projections is None:
        fP, fQ = project(P, opts), project(Q, opts)
    else:
        fP, fQ = projections
    dW = wasserstein1(P, Q)
    eps_max = max(epsilon(P), epsilon(Q))
    dH = 0.0 if dW == 0.0 else hellinger(fP.density, fQ.density)
    return ContinuityRecord(dW=dW, dH=dH, eps_max=eps_max, ratio=holder_ratio(dW, dH, eps_max))
