#!/usr/bin/env python3

"""Hyperbolic metric on the disk and the Koebe domain, plus quasi-hyperbolic segment integrals."""

import cmath
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    InvalidParameter,
    PointOutsideDomain,
    QuadratureNonConvergence,
    SegmentLeavesDomain,
)
from .geometry import DomainSpec, build_koebe, validate_point

GL_NODES = 16
QUADRATURE_RTOL = 1e-8
MAX_PANELS = 2 ** 20
ARCSINH_LARGE = 1e8

_KOEBE = build_koebe()


@dataclass(frozen=True)
class GeodesicChordData:
    """Geodesic of the disk through e^{ia} and e^{-ia}.

    x0 is its Euclidean distance to 0 and d the hyperbolic distance d(0, geodesic).
    center/radius describe the orthogonal circle; both are None for the diameter.
    """

    alpha: float
    x0: float
    d: float
    center: Optional[float] = None
    radius: Optional[float] = None


def _check_disk_point(z) -> complex:
    z = validate_point(z)
    if abs(z) >= 1.0:
        raise PointOutsideDomain(f"{z} is not in the unit disk")
    return z


def disk_distance(z, w) -> float:
    """d(z, w) = log((1+t)/(1-t)) with t the pseudo-hyperbolic distance."""
    z = _check_disk_point(z)
    w = _check_disk_point(w)
    if z == w:
        return 0.0
    t = abs(z - w) / abs(1 - z.conjugate() * w)
    return 2.0 * math.atanh(min(t, 1.0 - 2.0 ** -53))


def disk_density(z) -> float:
    """Hyperbolic density 2/(1 - |z|^2) of the unit disk."""
    z = _check_disk_point(z)
    return 2.0 / (1.0 - abs(z) ** 2)


def distance_from_green(g: float) -> float:
    """Hyperbolic distance d(0, z) from the Green function value g(0, z).

    The map is its own inverse. For small g the direct formula loses the
    denominator 1 - e^{-g} to cancellation, so that branch uses expm1.
    """
    if not (math.isfinite(g) and g > 0):
        raise InvalidParameter(f"Green function value must be positive, got {g}")
    q = math.exp(-g)
    if g > math.log(2.0):
        return 2.0 * math.atanh(q)
    return math.log1p(q) - math.log(-math.expm1(-g))


def _clearance(domain: DomainSpec, points: np.ndarray) -> np.ndarray:
    clearance = np.full(points.shape, np.inf)
    for piece in domain.boundary_pieces():
        clearance = np.minimum(clearance, piece.distance(points))
    return clearance


def gauss_legendre_segment(domain: DomainSpec, a: complex, b: complex, panels: int) -> float:
    """Composite 16-point Gauss-Legendre rule for the integral of |dz|/d(z, boundary) on [a, b]."""
    if isinstance(panels, bool) or int(panels) != panels or panels < 1:
        raise InvalidParameter(f"panels must be a positive integer, got {panels}")
    nodes, weights = np.polynomial.legendre.leggauss(GL_NODES)
    edges = np.linspace(0.0, 1.0, int(panels) + 1)
    half = 0.5 * np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    t = (mids[:, np.newaxis] + half[:, np.newaxis] * nodes[np.newaxis, :]).ravel()
    points = a + t * (b - a)

    # Panel midpoints double as the "does the segment stay inside" check.
    checked = np.concatenate([points, a + mids * (b - a)])
    clearance = _clearance(domain, checked)
    if not (np.all(domain.contains(checked)) and np.all(clearance > 0)):
        raise SegmentLeavesDomain(f"Segment [{a}, {b}] leaves {domain.name}")

    integrand = abs(b - a) / clearance[: points.size]
    panel_weights = (half[:, np.newaxis] * weights[np.newaxis, :]).ravel()
    return float(np.dot(panel_weights, integrand))


def quasi_hyperbolic_segment(domain: DomainSpec, a, b, panels: int = 1) -> float:
    """Quasi-hyperbolic length of the straight segment [a, b].

    This is an upper bound for the quasi-hyperbolic distance. Panels double
    from the given count until two successive values agree to 1e-8 relative.
    """
    a = validate_point(a)
    b = validate_point(b)
    for endpoint in (a, b):
        if not domain.contains(endpoint):
            raise PointOutsideDomain(f"{endpoint} is not in domain {domain.name}")
    if a == b:
        return 0.0

    previous = gauss_legendre_segment(domain, a, b, panels)
    while True:
        panels *= 2
        if panels > MAX_PANELS:
            raise QuadratureNonConvergence(
                f"Quadrature on [{a}, {b}] did not reach rtol {QUADRATURE_RTOL} within {MAX_PANELS} panels"
            )
        current = gauss_legendre_segment(domain, a, b, panels)
        if abs(current - previous) <= QUADRATURE_RTOL * abs(current):
            return current
        previous = current


def geodesic_chord(alpha: float) -> GeodesicChordData:
    """The geodesic joining e^{i alpha} and e^{-i alpha}."""
    if not 0 < alpha < math.pi:
        raise InvalidParameter(f"alpha must lie in (0, pi), got {alpha}")
    # (1 - sin a)/cos a, written so it stays exact at a = pi/2
    x0 = abs(math.tan(math.pi / 4 - alpha / 2))
    d = 2.0 * math.atanh(x0)
    cos_alpha = math.cos(alpha)
    if abs(cos_alpha) < 1e-15:
        return GeodesicChordData(alpha=alpha, x0=0.0, d=0.0)
    return GeodesicChordData(
        alpha=alpha,
        x0=x0,
        d=d,
        center=1.0 / cos_alpha,
        radius=abs(math.tan(alpha)),
    )


def koebe(z) -> complex:
    """The Koebe function K(z) = z/(1 - z)^2."""
    z = validate_point(z)
    if z == 1:
        raise InvalidParameter("The Koebe function has a pole at z = 1")
    return z / (1 - z) ** 2


def koebe_inverse(w) -> complex:
    """Preimage of w under K in the closed unit disk.

    Roots of w z^2 - (2w + 1) z + w = 0 multiply to 1, so the smaller one lies
    inside the disk. On the slit both lie on the circle and are conjugate;
    then the root with nonnegative imaginary part is returned.
    """
    w = validate_point(w)
    if w == 0:
        return 0j
    b = 2 * w + 1
    s = cmath.sqrt(4 * w + 1)
    q = b + s if abs(b + s) >= abs(b - s) else b - s
    inner = 2 * w / q
    if w.imag == 0 and w.real <= -0.25:
        return inner if inner.imag >= 0 else inner.conjugate()
    return inner


def koebe_distance(w1, w2) -> float:
    """Hyperbolic distance in C minus (-inf, -1/4], pulled back through K."""
    for w in (w1, w2):
        if not _KOEBE.contains(validate_point(w)):
            raise PointOutsideDomain(f"{w} is not in the Koebe domain")
    return disk_distance(koebe_inverse(w1), koebe_inverse(w2))


def koebe_density(w) -> float:
    """Hyperbolic density of the Koebe domain at w."""
    if not _KOEBE.contains(validate_point(w)):
        raise PointOutsideDomain(f"{w} is not in the Koebe domain")
    z = koebe_inverse(w)
    derivative = abs(1 + z) / abs(1 - z) ** 3
    return disk_density(z) / derivative


def arcsinh(x: float) -> float:
    """log(x + sqrt(x^2 + 1)) without overflow for huge x."""
    if x > ARCSINH_LARGE:
        return math.log(2.0 * x) + math.log1p(0.25 / (x * x))
    if x < 0:
        return -arcsinh(-x)
    return math.log(x + math.sqrt(x * x + 1.0))


def ce1_ratio_lower_bound(n: int, log_rn_minus_n: float) -> float:
    """max(0, asinh(40^n t)/2 - asinh(1)/2) with t = log r_n - n.

    A lower bound for the hyperbolic distance between R_n and r_n in the
    sector part of the first counter-example; exp(value / 4) then bounds
    the omega_hat/omega ratio from below.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise InvalidParameter(f"n must be a positive integer, got {n}")
    t = log_rn_minus_n
    if not (math.isfinite(t) and t > 0):
        raise InvalidParameter(f"log(r_n) - n must be positive, got {t}")
    value = 0.5 * arcsinh(40.0 ** int(n) * t) - 0.5 * arcsinh(1.0)
    return max(0.0, value)
