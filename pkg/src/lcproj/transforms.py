"""Lipschitz majorization of a concave piecewise-linear log-density.

The envelope of ``phi`` with constant ``L`` is ``sup_y {phi(y) - L |x - y|}``.
In one dimension, for concave piecewise-linear ``phi``, this is ``phi`` with its
slopes clipped into ``[-L, L]`` outward from the mode, continued beyond the
support by tails of slope ``+L`` on the left and ``-L`` on the right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import PiecewiseLogLinearDensity, j_integral

DEFAULT_CLIP = 60.0


@dataclass(frozen=True, eq=False)
class LipschitzEnvelope:
    base: PiecewiseLogLinearDensity
    L: float
    knots: np.ndarray
    values: np.ndarray

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.knots)

    def log_eval(self, x):
        x = np.asarray(x, dtype=np.float64)
        t, v = self.knots, self.values
        out = np.interp(x, t, v)
        out = np.where(x < t[0], v[0] - self.L * (t[0] - x), out)
        out = np.where(x > t[-1], v[-1] - self.L * (x - t[-1]), out)
        return float(out) if out.ndim == 0 else out

    def integral(self) -> float:
        return envelope_integral(self)

    def is_concave(self, tol: float = 1e-9) -> bool:
        s = np.concatenate(([self.L], self.slopes, [-self.L]))
        return bool(np.all(np.diff(s) <= tol * np.maximum(1.0, np.abs(s[1:]))))


def lipschitz_majorize(phi: PiecewiseLogLinearDensity, L: float) -> LipschitzEnvelope:
    if not L > 0:
        raise ValueError("L must be positive")
    t = phi.knots
    v = phi.logvals
    h = np.diff(t)
    s = np.clip(phi.slopes, -L, L)
    top = int(np.argmax(v))
    out = np.empty_like(v)
    out[top] = v[top]
    # accumulate clipped increments outward from the mode
    if top + 1 < v.size:
        out[top + 1:] = v[top] + np.cumsum(s[top:] * h[top:])
    if top > 0:
        out[:top] = v[top] - np.cumsum((s[:top] * h[:top])[::-1])[::-1]
    out.setflags(write=False)
    return LipschitzEnvelope(base=phi, L=float(L), knots=t, values=out)


def sup_convolution(phi: PiecewiseLogLinearDensity, L: float, x) -> np.ndarray:
    """Direct evaluation of ``sup_y {phi(y) - L |x - y|}`` over the support of ``phi``.

    The maximand is concave and piecewise linear in ``y``, so the supremum is
    attained at a knot or at ``y = x`` itself.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    at_knots = np.max(phi.logvals[None, :] - L * np.abs(x[:, None] - phi.knots[None, :]), axis=1)
    inside = (x >= phi.knots[0]) & (x <= phi.knots[-1])
    at_x = np.where(inside, np.interp(x, phi.knots, phi.logvals), -np.inf)
    return np.maximum(at_knots, at_x)


def envelope_integral(e: LipschitzEnvelope) -> float:
    """``int exp(envelope)`` over the whole line: segments plus two exponential tails."""
    body = float(np.sum(j_integral(e.values[:-1], e.values[1:], np.diff(e.knots))))
    return body + (math.exp(e.values[0]) + math.exp(e.values[-1])) / e.L


def truncated_tail_mass(e: LipschitzEnvelope, clip_at: float = DEFAULT_CLIP) -> float:
    """Fraction of ``int exp(envelope)`` lost when tails are cut at ``max - clip_at``."""
    M = float(e.values.max())
    floor = M - clip_at
    lost = sum(math.exp(min(v, floor)) / e.L for v in (e.values[0], e.values[-1]))
    return lost / envelope_integral(e)


def normalize_envelope(e: LipschitzEnvelope, clip_at: float = DEFAULT_CLIP) -> PiecewiseLogLinearDensity:
    """Normalized envelope on a compact support.

    Each tail is followed down to ``max - clip_at`` nats and cut there; the
    discarded mass is reported by :func:`truncated_tail_mass`.
    """
    if not clip_at > 0:
        raise ValueError("clip_at must be positive")
    t, v = e.knots, e.values
    floor = float(v.max()) - clip_at
    knots = list(t)
    vals = list(v)
    if v[0] > floor:
        knots.insert(0, t[0] - (v[0] - floor) / e.L)
        vals.insert(0, floor)
    if v[-1] > floor:
        knots.append(t[-1] + (v[-1] - floor) / e.L)
        vals.append(floor)
    knots = np.asarray(knots)
    vals = np.asarray(vals)
    total = float(np.sum(j_integral(vals[:-1], vals[1:], np.diff(knots))))
    return PiecewiseLogLinearDensity(knots, vals - math.log(total), normalized=True, check=False)
