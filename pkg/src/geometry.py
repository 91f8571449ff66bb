#!/usr/bin/env python3

"""Planar domains as explicit boundary-piece lists with exact distance queries.

Points are Python/numpy complex numbers. Every piece answers distance and
nearest-point queries for scalars or numpy arrays of points, so the walk
kernel can evaluate a whole batch of walkers at once.
"""

import math
import re
from dataclasses import dataclass, replace
from functools import partial
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy import ndimage

from .errors import InvalidParameter, PointOutsideDomain, UnknownDomain

Point = complex

TWO_PI = 2.0 * math.pi
ON_BOUNDARY_TOL = 1e-15
MAX_LEVELS = 8
SECTOR_HALF_ANGLE = 1.0
MAX_GRID_CELLS = 4_000_000


def _as_points(z) -> np.ndarray:
    return np.asarray(z, dtype=np.complex128)


def _unit(theta: float) -> complex:
    """e^{i theta} with exact zeros on the coordinate axes."""
    c, s = math.cos(theta), math.sin(theta)
    if abs(c) < 1e-15:
        c = 0.0
    if abs(s) < 1e-15:
        s = 0.0
    return complex(c, s)


def validate_point(z) -> complex:
    """Return z as a complex number, rejecting NaN and infinite coordinates."""
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise InvalidParameter(f"Point must have finite coordinates, got {z}")
    return z


@dataclass(frozen=True)
class Arc:
    """Counterclockwise circular arc from theta_min to theta_max."""

    center: complex
    radius: float
    theta_min: float
    theta_max: float

    def __post_init__(self):
        span = self.theta_max - self.theta_min
        if not self.radius > 0:
            raise InvalidParameter(f"Arc radius must be positive, got {self.radius}")
        if not 0 < span <= TWO_PI:
            raise InvalidParameter(f"Arc span must lie in (0, 2pi], got {span}")

    @property
    def kind(self) -> str:
        return "arc"

    @property
    def span(self) -> float:
        return self.theta_max - self.theta_min

    @property
    def endpoints(self) -> Tuple[complex, complex]:
        return (
            self.center + self.radius * _unit(self.theta_min),
            self.center + self.radius * _unit(self.theta_max),
        )

    def _covers(self, phi: np.ndarray) -> np.ndarray:
        if self.span >= TWO_PI:
            return np.ones(np.shape(phi), dtype=bool)
        return np.mod(phi - self.theta_min, TWO_PI) <= self.span

    def nearest(self, z) -> np.ndarray:
        z = _as_points(z)
        w = z - self.center
        # From the centre every arc point is a foot; take the midpoint.
        phi = np.where(w == 0, 0.5 * (self.theta_min + self.theta_max), np.angle(w))
        on_arc = self.center + self.radius * np.exp(1j * phi)
        a, b = self.endpoints
        end = np.where(np.abs(z - a) <= np.abs(z - b), a, b)
        return np.where(self._covers(phi) | (w == 0), on_arc, end)

    def distance(self, z) -> np.ndarray:
        z = _as_points(z)
        w = z - self.center
        radial = np.abs(np.abs(w) - self.radius)
        a, b = self.endpoints
        chord = np.minimum(np.abs(z - a), np.abs(z - b))
        return np.where(self._covers(np.angle(w)) | (w == 0), radial, chord)

    def conjugate(self) -> "Arc":
        return Arc(self.center.conjugate(), self.radius, -self.theta_max, -self.theta_min)

    def sample(self, count: int, length: Optional[float] = None) -> np.ndarray:
        theta = np.linspace(self.theta_min, self.theta_max, count)
        return self.center + self.radius * np.exp(1j * theta)


@dataclass(frozen=True)
class Segment:
    """Closed straight segment [a, b]."""

    a: complex
    b: complex

    def __post_init__(self):
        if self.a == self.b:
            raise InvalidParameter(f"Segment endpoints must differ, got {self.a}")

    @property
    def kind(self) -> str:
        return "segment"

    def nearest(self, z) -> np.ndarray:
        z = _as_points(z)
        d = self.b - self.a
        t = ((z - self.a) * d.conjugate()).real / (abs(d) ** 2)
        return self.a + np.clip(t, 0.0, 1.0) * d

    def distance(self, z) -> np.ndarray:
        z = _as_points(z)
        return np.abs(z - self.nearest(z))

    def conjugate(self) -> "Segment":
        return Segment(self.a.conjugate(), self.b.conjugate())

    def sample(self, count: int, length: Optional[float] = None) -> np.ndarray:
        t = np.linspace(0.0, 1.0, count)
        return self.a + t * (self.b - self.a)


@dataclass(frozen=True)
class Ray:
    """Closed half-line starting at origin in direction angle."""

    origin: complex
    angle: float

    @property
    def kind(self) -> str:
        return "ray"

    @property
    def direction(self) -> complex:
        return _unit(self.angle)

    def nearest(self, z) -> np.ndarray:
        z = _as_points(z)
        u = self.direction
        t = np.maximum(((z - self.origin) * u.conjugate()).real, 0.0)
        return self.origin + t * u

    def distance(self, z) -> np.ndarray:
        z = _as_points(z)
        return np.abs(z - self.nearest(z))

    def conjugate(self) -> "Ray":
        return Ray(self.origin.conjugate(), -self.angle)

    def sample(self, count: int, length: Optional[float] = None) -> np.ndarray:
        t = np.linspace(0.0, 10.0 if length is None else length, count)
        return self.origin + t * self.direction


@dataclass(frozen=True)
class Circle:
    """Full circle; used for the unit circle and the escape circle |z| = R."""

    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidParameter(f"Circle radius must be positive, got {self.radius}")

    @property
    def kind(self) -> str:
        return "circle"

    def nearest(self, z) -> np.ndarray:
        z = _as_points(z)
        w = z - self.center
        m = np.abs(w)
        direction = np.where(m > 0, w / np.where(m > 0, m, 1.0), 1.0)
        return self.center + self.radius * direction

    def distance(self, z) -> np.ndarray:
        z = _as_points(z)
        return np.abs(np.abs(z - self.center) - self.radius)

    def conjugate(self) -> "Circle":
        return Circle(self.center.conjugate(), self.radius)

    def sample(self, count: int, length: Optional[float] = None) -> np.ndarray:
        theta = np.linspace(0.0, TWO_PI, count, endpoint=False)
        return self.center + self.radius * np.exp(1j * theta)


BoundaryPiece = Union[Arc, Segment, Ray, Circle]


@dataclass(frozen=True)
class DomainSpec:
    """A simply connected domain: region predicate plus the pieces of its boundary.

    The pieces cover the boundary exactly, so the minimum distance over
    pieces is the distance to the boundary. `region` only needs to be right
    away from the boundary; `contains` removes points lying on a piece.
    """

    name: str
    pieces: Tuple[BoundaryPiece, ...]
    region: Callable[[np.ndarray], np.ndarray]
    scale: float = 1.0
    starlike: bool = False
    basepoint: complex = 0j
    unbounded: bool = False
    radii: Tuple[float, ...] = ()
    escape_index: Optional[int] = None

    @property
    def escape_radius(self) -> Optional[float]:
        if self.escape_index is None:
            return None
        return self.pieces[self.escape_index].radius

    def boundary_pieces(self) -> Tuple[BoundaryPiece, ...]:
        """The pieces of the true boundary, without the escape circle."""
        return tuple(p for i, p in enumerate(self.pieces) if i != self.escape_index)

    def contains(self, z):
        pts = _as_points(z)
        with np.errstate(invalid="ignore"):
            inside = np.asarray(self.region(pts), dtype=bool) & np.isfinite(pts)
            tol = ON_BOUNDARY_TOL * np.maximum(1.0, np.abs(pts))
            for piece in self.boundary_pieces():
                inside = inside & (piece.distance(pts) > tol)
        return bool(inside) if inside.ndim == 0 else inside

    def distance_matrix(self, points) -> np.ndarray:
        """Distances from every point to every piece, shape (..., len(pieces))."""
        pts = _as_points(points)
        return np.stack([piece.distance(pts) for piece in self.pieces], axis=-1)

    def feet(self, points, indices) -> np.ndarray:
        """Foot point of points[i] on piece indices[i]."""
        pts = _as_points(points)
        indices = np.asarray(indices)
        out = np.empty_like(pts)
        for index in np.unique(indices):
            selected = indices == index
            out[selected] = self.pieces[int(index)].nearest(pts[selected])
        return out


def _require_inside(domain: DomainSpec, z) -> complex:
    z = validate_point(z)
    if not domain.contains(z):
        raise PointOutsideDomain(f"{z} is not in domain {domain.name}")
    return z


def boundary_distance(domain: DomainSpec, z) -> float:
    """Euclidean distance from an interior point to the nearest piece."""
    z = _require_inside(domain, z)
    return float(domain.distance_matrix(z).min())


def nearest_piece(domain: DomainSpec, z) -> Tuple[int, complex, float]:
    """(piece index, foot point, distance); ties go to the lowest index."""
    z = _require_inside(domain, z)
    distances = domain.distance_matrix(z)
    index = int(np.argmin(distances))
    foot = complex(domain.pieces[index].nearest(z))
    return index, foot, float(distances[index])


# Region predicates are module-level so domains pickle into worker processes.

def _inside_unit_disk(z: np.ndarray) -> np.ndarray:
    return np.abs(z) < 1.0


def _whole_plane(z: np.ndarray) -> np.ndarray:
    return np.ones(np.shape(z), dtype=bool)


def _inside_disk_or_sector(z: np.ndarray) -> np.ndarray:
    return (np.abs(z) < 1.0) | (np.abs(np.angle(z)) < SECTOR_HALF_ANGLE)


def _inside_polygon(z: np.ndarray, vertices: Tuple[complex, ...]) -> np.ndarray:
    """Even-odd rule with a horizontal ray towards +infinity."""
    x, y = np.real(z), np.imag(z)
    inside = np.zeros(np.shape(z), dtype=bool)
    count = len(vertices)
    for k in range(count):
        p, q = vertices[k], vertices[(k + 1) % count]
        crosses = (p.imag > y) != (q.imag > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = p.real + (y - p.imag) * (q.real - p.real) / (q.imag - p.imag)
        inside ^= crosses & (x < x_cross)
    return inside


def build_unit_disk() -> DomainSpec:
    return DomainSpec(
        name="disk",
        pieces=(Circle(0j, 1.0),),
        region=_inside_unit_disk,
        starlike=True,
    )


def build_unit_disk_slit(a: float) -> DomainSpec:
    """The unit disk minus the radial slit [a, 1)."""
    if not 0 < a < 1:
        raise InvalidParameter(f"Slit start a must lie in (0, 1), got {a}")
    a = float(a)
    return DomainSpec(
        name=f"slit-disk:a={a:g}",
        pieces=(Circle(0j, 1.0), Segment(complex(a), 1 + 0j)),
        region=_inside_unit_disk,
        starlike=True,
    )


def build_koebe() -> DomainSpec:
    """The Koebe domain C minus (-inf, -1/4], image of the disk under z/(1-z)^2."""
    return DomainSpec(
        name="koebe",
        pieces=(Ray(-0.25 + 0j, math.pi),),
        region=_whole_plane,
        starlike=True,
        unbounded=True,
    )


def ce_radius(n: int) -> float:
    """R_n = e^{n + 40^-n}, the probing radius just past obstacle level n."""
    return math.exp(n + 40.0 ** -n)


def _check_levels(levels) -> int:
    if isinstance(levels, bool) or int(levels) != levels or not 1 <= levels <= MAX_LEVELS:
        raise InvalidParameter(f"levels must be an integer in [1, {MAX_LEVELS}], got {levels}")
    return int(levels)


def _sector_pieces(levels: int, walls: bool) -> Tuple[BoundaryPiece, ...]:
    pieces = [
        Arc(0j, 1.0, 1.0, math.pi),
        Arc(0j, 1.0, -math.pi, -1.0),
        Ray(_unit(1.0), 1.0),
        Ray(_unit(-1.0), -1.0),
    ]
    for n in range(1, levels + 1):
        radius = math.exp(n)
        gap = 40.0 ** -n
        pieces.append(Arc(0j, radius, gap, 1.0))
        pieces.append(Arc(0j, radius, -1.0, -gap))
        if walls:
            outer = ce_radius(n)
            pieces.append(Segment(radius * _unit(gap), outer * _unit(gap)))
            pieces.append(Segment(radius * _unit(-gap), outer * _unit(-gap)))
    return tuple(pieces)


def build_ce1(levels: int) -> DomainSpec:
    """Unit disk joined to the sector |Arg z| < 1 cut by arcs at radii e^n.

    Level n removes the arcs 40^-n <= |Arg z| <= 1 of the circle |z| = e^n,
    leaving an aperture of half-angle 40^-n around the positive axis.
    """
    levels = _check_levels(levels)
    return DomainSpec(
        name=f"ce1:levels={levels}",
        pieces=_sector_pieces(levels, walls=False),
        region=_inside_disk_or_sector,
        radii=tuple(ce_radius(n) for n in range(1, levels + 1)),
    )


def build_ce2(levels: int) -> DomainSpec:
    """ce1 plus radial walls at |Arg z| = 40^-n between e^n and R_n (pockets)."""
    levels = _check_levels(levels)
    return DomainSpec(
        name=f"ce2:levels={levels}",
        pieces=_sector_pieces(levels, walls=True),
        region=_inside_disk_or_sector,
        radii=tuple(ce_radius(n) for n in range(1, levels + 1)),
    )


def build_star_polygon(spikes: int, r_in: float, r_out: float) -> DomainSpec:
    if isinstance(spikes, bool) or int(spikes) != spikes or spikes < 3:
        raise InvalidParameter(f"spikes must be an integer >= 3, got {spikes}")
    if not 0 < r_in < r_out:
        raise InvalidParameter(f"Need 0 < r_in < r_out, got r_in={r_in}, r_out={r_out}")
    spikes = int(spikes)
    vertices = []
    for k in range(spikes):
        vertices.append(r_out * _unit(TWO_PI * k / spikes))
        vertices.append(r_in * _unit(TWO_PI * (k + 0.5) / spikes))
    pieces = tuple(
        Segment(vertices[k], vertices[(k + 1) % len(vertices)]) for k in range(len(vertices))
    )
    return DomainSpec(
        name=f"star:k={spikes},rin={r_in:g},rout={r_out:g}",
        pieces=pieces,
        region=partial(_inside_polygon, vertices=tuple(vertices)),
        scale=float(r_out),
        starlike=True,
    )


def with_escape_circle(domain: DomainSpec, R: float) -> DomainSpec:
    """Append the circle |z| = R as the distinguished escape piece."""
    if domain.escape_index is not None:
        raise InvalidParameter(f"{domain.name} already carries an escape circle")
    if not (math.isfinite(R) and R > abs(domain.basepoint)):
        raise InvalidParameter(f"Escape radius must exceed |basepoint| = {abs(domain.basepoint)}, got {R}")
    if not domain.contains(domain.basepoint):
        raise PointOutsideDomain(f"Basepoint {domain.basepoint} is not in {domain.name}")
    return replace(
        domain,
        pieces=domain.pieces + (Circle(0j, float(R)),),
        escape_index=len(domain.pieces),
    )


_CATALOG: Dict[str, Tuple[Callable[..., DomainSpec], Dict[str, Tuple[str, type]]]] = {
    "disk": (build_unit_disk, {}),
    "slit-disk": (build_unit_disk_slit, {"a": ("a", float)}),
    "koebe": (build_koebe, {}),
    "ce1": (build_ce1, {"levels": ("levels", int)}),
    "ce2": (build_ce2, {"levels": ("levels", int)}),
    "star": (build_star_polygon, {
        "k": ("spikes", int),
        "rin": ("r_in", float),
        "rout": ("r_out", float),
    }),
}

_DOMAIN_PATTERN = re.compile(r"^(?P<name>[a-z0-9-]+)(?::(?P<params>.*))?$")


def parse_domain(text: str) -> DomainSpec:
    """Build a domain from its catalog string, e.g. "star:k=4,rin=1,rout=3"."""
    match = _DOMAIN_PATTERN.match(text.strip())
    if not match or match.group("name") not in _CATALOG:
        raise UnknownDomain(f"Unknown domain '{text}'; expected one of {', '.join(_CATALOG)}")
    builder, schema = _CATALOG[match.group("name")]

    raw: Dict[str, str] = {}
    params = match.group("params")
    if params:
        for item in params.split(","):
            key, sep, value = item.partition("=")
            if not sep or key.strip() not in schema or key.strip() in raw:
                raise UnknownDomain(f"Bad parameter '{item}' in domain '{text}'")
            raw[key.strip()] = value.strip()
    missing = set(schema) - set(raw)
    if missing:
        raise UnknownDomain(f"Domain '{text}' is missing {', '.join(sorted(missing))}")

    kwargs = {}
    for key, value in raw.items():
        argument, kind = schema[key]
        try:
            kwargs[argument] = kind(value)
        except ValueError:
            raise UnknownDomain(f"Parameter {key}={value} in '{text}' is not a valid {kind.__name__}")
    return builder(**kwargs)


def component_mask(domain: DomainSpec, R: float, spacing: float) -> Tuple[np.ndarray, np.ndarray]:
    """Grid flood fill of the component of D ∩ {|z| < R} holding the basepoint.

    Returns (axis, mask): cell (i, j) is centred at axis[j] + 1j * axis[i].
    A cell is open when its centre is in D, inside the circle, and farther
    than half a cell diagonal from the boundary, so two adjacent open cells
    are joined by a boundary-free path.
    """
    if not (spacing > 0 and R > 0):
        raise InvalidParameter(f"Need positive R and spacing, got R={R}, spacing={spacing}")
    cells = int(math.ceil(2.0 * R / spacing))
    if cells * cells > MAX_GRID_CELLS:
        raise InvalidParameter(f"Flood-fill grid of {cells}x{cells} cells exceeds {MAX_GRID_CELLS}")

    axis = -R + spacing * (np.arange(cells) + 0.5)
    centres = axis[np.newaxis, :] + 1j * axis[:, np.newaxis]
    clearance = np.full(centres.shape, np.inf)
    for piece in domain.boundary_pieces():
        clearance = np.minimum(clearance, piece.distance(centres))
    open_cells = (np.abs(centres) < R) & domain.contains(centres) & (clearance > spacing * math.sqrt(0.5))

    labels, _ = ndimage.label(open_cells)
    i, j = _cell_of(domain.basepoint, R, spacing, cells)
    if labels[i, j] == 0:
        raise InvalidParameter(f"Basepoint cell is blocked at spacing {spacing}; refine the grid")
    return axis, labels == labels[i, j]


def _cell_of(z: complex, R: float, spacing: float, cells: int) -> Tuple[int, int]:
    i = min(max(int((z.imag + R) // spacing), 0), cells - 1)
    j = min(max(int((z.real + R) // spacing), 0), cells - 1)
    return i, j


def reachable(domain: DomainSpec, R: float, point, spacing: float) -> bool:
    """Whether point lies in the basepoint's component of D ∩ {|z| < R}."""
    point = validate_point(point)
    if abs(point) >= R or not domain.contains(point):
        return False
    axis, mask = component_mask(domain, R, spacing)
    i, j = _cell_of(point, R, spacing, len(axis))
    return bool(mask[i, j])
