"""Finite discrete distributions on the real line.

A :class:`DiscreteDistribution` is an immutable, sorted list of weighted atoms.
It carries the moment functionals used throughout the package (mean, mean
absolute deviation, q-th moments, one-sided tail probabilities) together with
the explicit constructions used by the experiments.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MERGE_TOL = 1e-12
RENORM_TOL = 1e-9


class NotInP1(ValueError):
    """Raised when a distribution is concentrated on a single point."""


def make_rng(seed) -> np.random.Generator:
    """Deterministic generator from an int or a tuple of ints.

    Tuples such as ``(seed, cell, trial)`` give independent, reproducible
    streams regardless of the order in which trials are scheduled.
    """
    if isinstance(seed, (tuple, list)):
        entropy = [int(s) for s in seed]
    else:
        entropy = int(seed)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    locations: np.ndarray
    weights: np.ndarray

    def __init__(self, locations: Iterable[float], weights: Iterable[float]):
        x = np.asarray(list(locations) if not isinstance(locations, np.ndarray) else locations,
                       dtype=np.float64).ravel()
        w = np.asarray(list(weights) if not isinstance(weights, np.ndarray) else weights,
                       dtype=np.float64).ravel()
        if x.shape != w.shape or x.size == 0:
            raise ValueError("locations and weights must be nonempty and of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise ValueError("locations and weights must be finite")
        if np.any(w <= 0):
            raise ValueError("weights must be strictly positive")
        total = float(w.sum())
        if abs(total - 1.0) > RENORM_TOL:
            raise ValueError(f"weights sum to {total!r}, not 1")
        w = w / total

        order = np.argsort(x, kind="stable")
        x, w = x[order], w[order]
        if x.size > 1:
            # start a new group wherever the gap to the previous atom is not negligible
            new_group = np.concatenate(([True], np.diff(x) >= MERGE_TOL))
            if not new_group.all():
                group = np.cumsum(new_group) - 1
                w = np.bincount(group, weights=w)
                x = x[new_group]
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "locations", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_pairs(cls, atoms: Sequence[Sequence[float]]) -> "DiscreteDistribution":
        atoms = list(atoms)
        return cls([a[0] for a in atoms], [a[1] for a in atoms])

    @classmethod
    def uniform(cls, locations: Iterable[float]) -> "DiscreteDistribution":
        x = np.asarray(list(locations), dtype=np.float64)
        return cls(x, np.full(x.size, 1.0 / x.size))

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return [(float(a), float(b)) for a, b in zip(self.locations, self.weights)]

    @property
    def size(self) -> int:
        return int(self.locations.size)

    def in_p1(self) -> bool:
        """True when there are at least two distinct atoms."""
        return self.size >= 2

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return (self.size == other.size
                and np.array_equal(self.locations, other.locations)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self) -> int:
        return hash((self.locations.tobytes(), self.weights.tobytes()))

    def __repr__(self) -> str:
        inner = ", ".join(f"({x:.6g}, {w:.6g})" for x, w in self.atoms[:6])
        more = ", ..." if self.size > 6 else ""
        return f"DiscreteDistribution([{inner}{more}])"

    def allclose(self, other: "DiscreteDistribution", atol: float = 1e-12) -> bool:
        return (self.size == other.size
                and np.allclose(self.locations, other.locations, rtol=0, atol=atol)
                and np.allclose(self.weights, other.weights, rtol=0, atol=atol))

    def to_json(self) -> dict:
        return {"atoms": [[x, w] for x, w in self.atoms]}

    @classmethod
    def from_json(cls, obj) -> "DiscreteDistribution":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if not isinstance(obj, dict) or "atoms" not in obj:
            raise ValueError("expected an object with an 'atoms' field")
        atoms = obj["atoms"]
        if not all(isinstance(a, (list, tuple)) and len(a) == 2 for a in atoms):
            raise ValueError("each atom must be a [location, weight] pair")
        return cls.from_pairs(atoms)


# --- functionals -----------------------------------------------------------

def mean(P: DiscreteDistribution) -> float:
    return float(np.dot(P.weights, P.locations))


def epsilon(P: DiscreteDistribution) -> float:
    """Mean absolute deviation about the mean, ``E|X - mu_P|``."""
    return float(np.dot(P.weights, np.abs(P.locations - mean(P))))


def moment_q(P: DiscreteDistribution, q: float) -> float:
    """Raw absolute moment ``(E|X|^q)^(1/q)`` for ``q > 1``."""
    if not q > 1:
        raise ValueError("q must be > 1")
    return float(np.dot(P.weights, np.abs(P.locations) ** q) ** (1.0 / q))


def cdf(P: DiscreteDistribution, t: float) -> float:
    """``Pr[X <= t]``."""
    k = np.searchsorted(P.locations, t, side="right")
    return float(min(1.0, P.weights[:k].sum()))


def cdf_strict(P: DiscreteDistribution, t: float) -> float:
    """``Pr[X < t]``."""
    k = np.searchsorted(P.locations, t, side="left")
    return float(min(1.0, P.weights[:k].sum()))


def survival(P: DiscreteDistribution, t: float) -> float:
    """``Pr[X >= t]``."""
    k = np.searchsorted(P.locations, t, side="left")
    return float(min(1.0, P.weights[k:].sum()))


def survival_strict(P: DiscreteDistribution, t: float) -> float:
    """``Pr[X > t]``."""
    k = np.searchsorted(P.locations, t, side="right")
    return float(min(1.0, P.weights[k:].sum()))


# --- transformations -------------------------------------------------------

def truncate(P: DiscreteDistribution, R: float) -> DiscreteDistribution:
    """Law of ``X`` clamped to ``[-R, R]``."""
    if not R > 0:
        raise ValueError("R must be positive")
    return DiscreteDistribution(np.clip(P.locations, -R, R), P.weights)


def affine(P: DiscreteDistribution, a: float, b: float) -> DiscreteDistribution:
    if a == 0:
        raise ValueError("affine map requires a != 0")
    return DiscreteDistribution(a * P.locations + b, P.weights)


def mixture(components: Sequence[tuple[DiscreteDistribution, float]]) -> DiscreteDistribution:
    if not components:
        raise ValueError("mixture needs at least one component")
    mix = np.array([float(w) for _, w in components])
    if np.any(mix <= 0) or abs(mix.sum() - 1.0) > RENORM_TOL:
        raise ValueError(f"invalid mixture weights {mix.tolist()}")
    x = np.concatenate([P.locations for P, _ in components])
    w = np.concatenate([P.weights * m for (P, _), m in zip(components, mix)])
    return DiscreteDistribution(x, w)


def sample(P: DiscreteDistribution, n: int, seed) -> DiscreteDistribution:
    """Empirical distribution of ``n`` inverse-CDF draws from ``P``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed)
    counts = sample_counts(P, n, rng)
    keep = counts > 0
    return DiscreteDistribution(P.locations[keep], counts[keep] / n)


def sample_counts(P: DiscreteDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(P.weights)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, rng.random(n), side="right")
    return np.bincount(np.minimum(idx, P.size - 1), minlength=P.size)


# --- constructions ---------------------------------------------------------

def two_point_sphere(rho: float) -> DiscreteDistribution:
    """Uniform law on the zero-sphere ``{-rho, +rho}``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return DiscreteDistribution([-rho, rho], [0.5, 0.5])


def lowerbound_pair(eps: float, delta: float) -> tuple[DiscreteDistribution, DiscreteDistribution]:
    """Pair ``(P, Q)`` with ``eps_P >= eps_Q = eps`` and ``W1(P, Q) = beta * eps <= delta``.

    ``Q`` is uniform on ``{-eps, eps}``; ``P`` moves a fraction
    ``beta = min(delta / eps, 1/2)`` of that mass out to ``{-2 eps, 2 eps}``.
    """
    if not (eps > 0 and delta > 0):
        raise ValueError("eps and delta must be positive")
    beta = min(delta / eps, 0.5)
    Q = two_point_sphere(eps)
    P = mixture([(two_point_sphere(eps), 1.0 - beta), (two_point_sphere(2.0 * eps), beta)])
    return P, Q


def lowerbound_beta(eps: float, delta: float) -> float:
    return min(delta / eps, 0.5)


def heavy_tail_radius(n: int, q: float) -> DiscreteDistribution:
    """Symmetric four-atom law: radius 1/2 w.p. ``1 - 1/(2n)``, else ``n**(1/q)``."""
    if n < 2 or not q > 1:
        raise ValueError("need n >= 2 and q > 1")
    far = n ** (1.0 / q)
    p_far = 1.0 / (2.0 * n)
    w_near = (1.0 - p_far) / 2.0
    w_far = p_far / 2.0
    return DiscreteDistribution([-far, -0.5, 0.5, far], [w_far, w_near, w_near, w_far])


def discretized_uniform(a: float, b: float, m: int) -> DiscreteDistribution:
    """``m`` equal-weight atoms at the cell midpoints of ``[a, b]``."""
    if m < 1 or not b > a:
        raise ValueError("need m >= 1 and b > a")
    x = a + (b - a) * (np.arange(m) + 0.5) / m
    return DiscreteDistribution(x, np.full(m, 1.0 / m))


def random_distribution(rng: np.random.Generator, min_atoms: int = 2, max_atoms: int = 8,
                        low: float = -5.0, high: float = 5.0) -> DiscreteDistribution:
    """Random corpus member: uniform locations, flat-Dirichlet weights."""
    while True:
        m = int(rng.integers(min_atoms, max_atoms + 1))
        x = rng.uniform(low, high, size=m)
        w = rng.dirichlet(np.ones(m))
        w = np.maximum(w, 1e-6)
        P = DiscreteDistribution(x, w / w.sum())
        if P.size >= min_atoms:
            return P
