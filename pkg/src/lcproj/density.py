"""Piecewise log-linear densities with compact support.

A density is ``exp`` of the linear interpolant of ``logvals`` over ``knots`` on
``[knots[0], knots[-1]]`` and zero elsewhere. Every integral is evaluated in
closed form segment by segment; nothing here uses quadrature.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

TAYLOR_SWITCH = 1e-6
SLOPE_TOL = 1e-9
KNOT_DEDUP = 1e-12
_SERIES_TERMS = 30


def j_integral(a, b, length):
    """``length * int_0^1 exp((1-u) a + u b) du``, vectorized.

    Uses an even Taylor expansion about the midpoint when ``|b - a| <= 1e-6``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    length = np.asarray(length, dtype=np.float64)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(length))):
        raise ValueError("j_integral requires finite arguments")
    d = np.abs(b - a)
    hi = np.maximum(a, b)
    small = d <= TAYLOR_SWITCH
    safe_d = np.where(small, 1.0, d)
    exact = np.exp(hi) * (-np.expm1(-safe_d)) / safe_d
    d2 = d * d
    taylor = np.exp(0.5 * (a + b)) * (1.0 + d2 / 24.0 + d2 * d2 / 1920.0)
    out = length * np.where(small, taylor, exact)
    return float(out) if out.ndim == 0 else out


def _k_moments(D: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``int_0^1 u^k exp(u D) du`` for ``k = 0, 1, 2`` and ``D <= 0``."""
    K0 = np.empty_like(D)
    K1 = np.empty_like(D)
    K2 = np.empty_like(D)
    near = D > -1.0
    if np.any(near):
        x = D[near]
        s0 = np.zeros_like(x)
        s1 = np.zeros_like(x)
        s2 = np.zeros_like(x)
        term = np.ones_like(x)
        for j in range(_SERIES_TERMS):
            s0 += term / (j + 1)
            s1 += term / (j + 2)
            s2 += term / (j + 3)
            term = term * x / (j + 1)
        K0[near], K1[near], K2[near] = s0, s1, s2
    far = ~near
    if np.any(far):
        x = D[far]
        e = np.exp(x)
        K0[far] = np.expm1(x) / x
        K1[far] = (1.0 + e * (x - 1.0)) / (x * x)
        K2[far] = (e * (x * x - 2.0 * x + 2.0) - 2.0) / (x ** 3)
    return K0, K1, K2


def segment_moments(a, b) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``I_k = int_0^1 u^k exp((1-u) a + u b) du`` for ``k = 0, 1, 2``."""
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    d = b - a
    rising = d > 0
    K0, K1, K2 = _k_moments(-np.abs(d))
    scale = np.exp(np.maximum(a, b))
    # on rising segments substitute v = 1 - u so the exponent stays nonpositive
    I0 = K0
    I1 = np.where(rising, K0 - K1, K1)
    I2 = np.where(rising, K0 - 2.0 * K1 + K2, K2)
    return scale * I0, scale * I1, scale * I2


@dataclass(frozen=True, eq=False)
class PiecewiseLogLinearDensity:
    knots: np.ndarray
    logvals: np.ndarray
    normalized: bool = False

    def __init__(self, knots: Iterable[float], logvals: Iterable[float],
                 normalized: bool = False, check: bool = True):
        t = np.array(knots, dtype=np.float64).ravel()
        phi = np.array(logvals, dtype=np.float64).ravel()
        if t.size < 2 or t.shape != phi.shape:
            raise ValueError("need at least two knots and one logval per knot")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(phi))):
            raise ValueError("knots and logvals must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("knots must be strictly increasing")
        t.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "knots", t)
        object.__setattr__(self, "logvals", phi)
        object.__setattr__(self, "normalized", bool(normalized))
        if check:
            if not self.is_concave():
                raise ValueError("log-density is not concave")
            if normalized and abs(integral(self) - 1.0) > 1e-8:
                raise ValueError("density marked normalized does not integrate to 1")

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.logvals) / np.diff(self.knots)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def is_concave(self, tol: float = SLOPE_TOL) -> bool:
        s = self.slopes
        if s.size < 2:
            return True
        scale = np.maximum(1.0, np.maximum(np.abs(s[:-1]), np.abs(s[1:])))
        return bool(np.all(np.diff(s) <= tol * scale))

    def __call__(self, x):
        return eval_density(self, x)

    def __repr__(self) -> str:
        return (f"PiecewiseLogLinearDensity(knots={np.array2string(self.knots, precision=4)}, "
                f"logvals={np.array2string(self.logvals, precision=4)})")

    def to_json(self) -> dict:
        return {"knots": self.knots.tolist(), "logvals": self.logvals.tolist(),
                "normalized": self.normalized}

    @classmethod
    def from_json(cls, obj) -> "PiecewiseLogLinearDensity":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if not isinstance(obj, dict) or "knots" not in obj or "logvals" not in obj:
            raise ValueError("expected an object with 'knots' and 'logvals'")
        return cls(obj["knots"], obj["logvals"], bool(obj.get("normalized", False)))


def integral(f: PiecewiseLogLinearDensity) -> float:
    return float(np.sum(j_integral(f.logvals[:-1], f.logvals[1:], np.diff(f.knots))))


def log_eval(f: PiecewiseLogLinearDensity, x):
    x = np.asarray(x, dtype=np.float64)
    inside = (x >= f.knots[0]) & (x <= f.knots[-1])
    out = np.where(inside, np.interp(x, f.knots, f.logvals), -np.inf)
    return float(out) if out.ndim == 0 else out


def eval_density(f: PiecewiseLogLinearDensity, x):
    out = np.exp(log_eval(f, x))
    return float(out) if np.ndim(out) == 0 else out


def normalize(f: PiecewiseLogLinearDensity) -> PiecewiseLogLinearDensity:
    total = integral(f)
    if not (np.isfinite(total) and total > 0):
        raise ValueError(f"cannot normalize density with integral {total!r}")
    return PiecewiseLogLinearDensity(f.knots, f.logvals - math.log(total), normalized=True,
                                     check=False)


def _pieces(f: PiecewiseLogLinearDensity, center: float = 0.0):
    """Per-segment ``int (x - center)^k f(x) dx`` for ``k = 0, 1, 2``."""
    t = f.knots
    h = np.diff(t)
    I0, I1, I2 = segment_moments(f.logvals[:-1], f.logvals[1:])
    left = t[:-1] - center
    m0 = h * I0
    m1 = h * (left * I0 + h * I1)
    m2 = h * (left * left * I0 + 2.0 * left * h * I1 + h * h * I2)
    return m0, m1, m2


def mean(f: PiecewiseLogLinearDensity) -> float:
    # center at the support midpoint to keep the per-segment terms small
    c = 0.5 * (f.knots[0] + f.knots[-1])
    m0, m1, _ = _pieces(f, c)
    return float(c + m1.sum() / m0.sum())


def variance(f: PiecewiseLogLinearDensity) -> float:
    mu = mean(f)
    m0, _, m2 = _pieces(f, mu)
    return float(max(m2.sum() / m0.sum(), 0.0))


def second_moment_about(f: PiecewiseLogLinearDensity, c: float) -> float:
    m0, _, m2 = _pieces(f, c)
    return float(m2.sum() / m0.sum())


def refine(f: PiecewiseLogLinearDensity, points: Iterable[float]) -> PiecewiseLogLinearDensity:
    """Same density with extra knots inserted at ``points`` inside the support."""
    pts = np.asarray(list(points), dtype=np.float64)
    pts = pts[(pts > f.knots[0]) & (pts < f.knots[-1])]
    if pts.size == 0:
        return f
    t = np.union1d(f.knots, pts)
    keep = np.concatenate(([True], np.diff(t) > KNOT_DEDUP))
    t = t[keep]
    t[-1] = f.knots[-1]
    return PiecewiseLogLinearDensity(t, np.interp(t, f.knots, f.logvals), f.normalized, check=False)


def abs_moment(f: PiecewiseLogLinearDensity, c: float) -> float:
    """``E_f |X - c|``."""
    g = refine(f, [c])
    m0, m1, _ = _pieces(g, c)
    mid = 0.5 * (g.knots[:-1] + g.knots[1:])
    return float(np.sum(np.where(mid >= c, m1, -m1)) / m0.sum())


def exp_moment(f: PiecewiseLogLinearDensity, s: float) -> float:
    """``E_f exp(s X)``."""
    tilted = f.logvals + s * f.knots
    num = np.sum(j_integral(tilted[:-1], tilted[1:], np.diff(f.knots)))
    return float(num / integral(f))


def mass_between(f: PiecewiseLogLinearDensity, lo: float, hi: float) -> float:
    """``int_lo^hi f`` for a normalized ``f``."""
    lo = max(lo, f.knots[0])
    hi = min(hi, f.knots[-1])
    if hi <= lo:
        return 0.0
    g = refine(f, [lo, hi])
    a = np.searchsorted(g.knots, lo - KNOT_DEDUP, side="left")
    b = np.searchsorted(g.knots, hi + KNOT_DEDUP, side="right") - 1
    sel = slice(a, b + 1)
    t, phi = g.knots[sel], g.logvals[sel]
    if t.size < 2:
        return 0.0
    return float(np.sum(j_integral(phi[:-1], phi[1:], np.diff(t))))


def max_log(f: PiecewiseLogLinearDensity, tol: float = 1e-12) -> tuple[float, tuple[float, float]]:
    """Maximum of the log-density and the knot interval attaining it."""
    M = float(f.logvals.max())
    at = np.flatnonzero(f.logvals >= M - tol)
    return M, (float(f.knots[at[0]]), float(f.knots[at[-1]]))


def superlevel(f: PiecewiseLogLinearDensity, t: float) -> tuple[float, float] | None:
    """``{x : log f(x) >= t}`` as a closed interval, or ``None`` when empty."""
    M, (lo_arg, hi_arg) = max_log(f, tol=0.0)
    if t > M:
        return None
    k = f.knots
    phi = f.logvals
    i_lo = int(np.searchsorted(k, lo_arg))
    i_hi = int(np.searchsorted(k, hi_arg))

    # left flank: logvals nondecreasing on knots[0..i_lo]
    if phi[0] >= t:
        left = float(k[0])
    else:
        j = int(np.argmax(phi[: i_lo + 1] >= t))
        a, b = phi[j - 1], phi[j]
        left = float(k[j - 1] + (t - a) / (b - a) * (k[j] - k[j - 1]))
    if phi[-1] >= t:
        right = float(k[-1])
    else:
        tail = phi[i_hi:]
        j = i_hi + int(np.argmax(tail < t))
        a, b = phi[j - 1], phi[j]
        right = float(k[j - 1] + (a - t) / (a - b) * (k[j] - k[j - 1]))
    return left, right


def merged_grid(f: PiecewiseLogLinearDensity, g: PiecewiseLogLinearDensity) -> np.ndarray | None:
    lo = max(f.knots[0], g.knots[0])
    hi = min(f.knots[-1], g.knots[-1])
    if not hi - lo > KNOT_DEDUP:
        return None
    t = np.union1d(f.knots, g.knots)
    t = t[(t >= lo) & (t <= hi)]
    t = np.union1d(t, [lo, hi])
    keep = np.concatenate(([True], np.diff(t) > KNOT_DEDUP))
    t = t[keep]
    t[-1] = hi
    return t


def hellinger_affinity(f: PiecewiseLogLinearDensity, g: PiecewiseLogLinearDensity) -> float:
    """``int sqrt(f g)``, clamped to ``[0, 1]``."""
    t = merged_grid(f, g)
    if t is None:
        return 0.0
    half = 0.5 * (np.interp(t, f.knots, f.logvals) + np.interp(t, g.knots, g.logvals))
    aff = float(np.sum(j_integral(half[:-1], half[1:], np.diff(t))))
    if aff > 1.0 + 1e-6:
        raise ValueError(f"affinity {aff!r} exceeds 1; are the inputs normalized?")
    return min(max(aff, 0.0), 1.0)


def kl_divergence(f: PiecewiseLogLinearDensity, g: PiecewiseLogLinearDensity) -> float:
    """``int f log(f/g)``; ``inf`` unless the support of ``f`` lies inside that of ``g``."""
    if f.knots[0] < g.knots[0] - KNOT_DEDUP or f.knots[-1] > g.knots[-1] + KNOT_DEDUP:
        return math.inf
    t = merged_grid(f, g)
    pf = np.interp(t, f.knots, f.logvals)
    diff = pf - np.interp(t, g.knots, g.logvals)
    h = np.diff(t)
    I0, I1, _ = segment_moments(pf[:-1], pf[1:])
    # integrand (diff_left + u (diff_right - diff_left)) * exp(affine)
    seg = h * (diff[:-1] * I0 + (diff[1:] - diff[:-1]) * I1)
    return float(max(seg.sum(), 0.0))


def affine_image(f: PiecewiseLogLinearDensity, a: float, b: float) -> PiecewiseLogLinearDensity:
    """Density of ``a X + b`` when ``X ~ f``."""
    if a == 0:
        raise ValueError("affine map requires a != 0")
    t = a * f.knots + b
    phi = f.logvals - math.log(abs(a))
    if a < 0:
        t, phi = t[::-1], phi[::-1]
    return PiecewiseLogLinearDensity(t, phi, f.normalized, check=False)


def uniform_density(lo: float, hi: float) -> PiecewiseLogLinearDensity:
    v = -math.log(hi - lo)
    return PiecewiseLogLinearDensity([lo, hi], [v, v], normalized=True)
