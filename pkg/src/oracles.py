#!/usr/bin/env python3

"""Closed-form harmonic measures used as ground truth for the walk estimator."""

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .errors import InvalidParameter, PointOutsideDomain

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ArcSpec:
    """Counterclockwise arc of the unit circle from e^{i theta1} to e^{i theta2}.

    theta2 is normalised so that 0 < theta2 - theta1 <= 2 pi; any nonzero
    multiple of 2 pi denotes the full circle.
    """

    theta1: float
    theta2: float

    def __post_init__(self):
        raw = self.theta2 - self.theta1
        if not math.isfinite(raw) or raw == 0:
            raise InvalidParameter(f"Arc endpoints must differ, got {self.theta1}, {self.theta2}")
        span = math.fmod(raw, TWO_PI)
        if span <= 0:
            span += TWO_PI
        object.__setattr__(self, "theta2", self.theta1 + span)

    @property
    def span(self) -> float:
        return self.theta2 - self.theta1

    @property
    def is_full(self) -> bool:
        return self.span >= TWO_PI


def bn_lower_bound(r0: float) -> float:
    """(2/pi) arcsin((1 - r0)/(1 + r0)), the Beurling-Nevanlinna bound.

    Lower bound for the harmonic measure at 0 of any connected closed set
    meeting the unit circle whose radial projection covers [r0, 1].
    """
    if not 0 < r0 <= 1:
        raise InvalidParameter(f"r0 must lie in (0, 1], got {r0}")
    return 2.0 / math.pi * math.asin((1.0 - r0) / (1.0 + r0))


def slit_disk_escape(a: float, b: float) -> float:
    """Harmonic measure of the unit circle at -b in the disk minus the slit [a, 1)."""
    if not 0 < a < 1:
        raise InvalidParameter(f"a must lie in (0, 1), got {a}")
    if not 0 <= b < 1:
        raise InvalidParameter(f"b must lie in [0, 1), got {b}")
    q = (1 + a) * (1 + b) / ((1 - a) * (1 - b))
    return 1.0 - 2.0 / math.pi * math.atan(1.0 / math.sqrt(q * q - 1.0))


def _check_koebe_radius(R: float) -> float:
    if not (math.isfinite(R) and R > 0.25):
        raise InvalidParameter(f"R must be finite and exceed 1/4, got {R}")
    return float(R)


def koebe_omega_hat(R: float) -> float:
    """omega_hat(R) for C minus (-inf, -1/4]."""
    R = _check_koebe_radius(R)
    return 1.0 - 2.0 / math.pi * math.atan((4 * R - 1) / (4 * math.sqrt(R)))


def koebe_omega(R: float) -> float:
    """omega(R) for C minus (-inf, -1/4]; atan2 keeps it continuous through R = 1/2."""
    R = _check_koebe_radius(R)
    return math.atan2(math.sqrt(4 * R - 1), 2 * R - 1) / math.pi


def koebe_ratio(R: float) -> float:
    return koebe_omega_hat(R) / koebe_omega(R)


def center_arc_measure(arc: ArcSpec) -> float:
    return min(arc.span / TWO_PI, 1.0)


def arc_measure(z, arc: ArcSpec) -> Union[float, np.ndarray]:
    """Harmonic measure of arc at z in the unit disk.

    The Mobius map w -> (w - z)/(1 - conj(z) w) sends z to 0 and keeps the
    orientation of the circle, so the measure is the image span over 2 pi.
    Accepts a scalar or a numpy array of points.
    """
    pts = np.asarray(z, dtype=np.complex128)
    if not np.all(np.isfinite(pts)) or np.any(np.abs(pts) >= 1.0):
        raise PointOutsideDomain("arc_measure needs points strictly inside the unit disk")
    if arc.is_full:
        result = np.ones(pts.shape)
    else:
        ends = np.exp(1j * np.array([arc.theta1, arc.theta2]))
        start = (ends[0] - pts) / (1 - np.conj(pts) * ends[0])
        stop = (ends[1] - pts) / (1 - np.conj(pts) * ends[1])
        result = np.mod(np.angle(stop) - np.angle(start), TWO_PI) / TWO_PI
    return float(result) if result.ndim == 0 else result


def geodesic_bounds(d: float) -> Tuple[float, float]:
    """(e^-d, min(1, (4/pi) e^-d)): bracket for the harmonic measure of a geodesic at distance d."""
    if not d >= 0:
        raise InvalidParameter(f"d must be nonnegative, got {d}")
    lower = math.exp(-d)
    return lower, min(1.0, 4.0 / math.pi * lower)


def geodesic_omega(alpha: float) -> float:
    """Exact harmonic measure at 0 of the geodesic through e^{i alpha} and e^{-i alpha}.

    A point of the geodesic sees the arc beyond it with measure 1/2, so by
    the strong Markov property the value is twice the centre measure of that arc.
    """
    if not 0 < alpha < math.pi:
        raise InvalidParameter(f"alpha must lie in (0, pi), got {alpha}")
    return 2.0 * min(alpha, math.pi - alpha) / math.pi
