#!/usr/bin/env python3

"""Walk-on-spheres estimator for Brownian first-hit probabilities.

Walker i draws its k-th direction from a SplitMix64 counter stream keyed by
(seed, i), so the result of a run depends on the seed and the sample count
only. Batch size and worker count just decide how the index range is cut up.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import IntEnum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .console import status, warning
from .errors import (
    ContextMismatch,
    InvalidParameter,
    PointOutsideDomain,
    TooManyTimeouts,
)
from .geometry import DomainSpec, validate_point, with_escape_circle

TWO_PI = 2.0 * math.pi
MAX_TIMEOUT_FRACTION = 1e-3
# feet computed on the circle |z| = R may land an ulp inside it
FOOT_RTOL = 1e-12

MASK64 = 0xFFFFFFFFFFFFFFFF
SM_CONST = np.uint64(0x9E3779B97F4A7C15)
SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
SM_M2 = np.uint64(0x94D049BB133111EB)
STREAM_MULT = np.uint64(0xD2B74407B1CE6E93)


class HitClass(IntEnum):
    """How a walk ended. TIMEOUT marks walks that hit the step cap."""

    FAR = 0
    NEAR = 1
    ESCAPE = 2
    AMBIGUOUS = 3
    TIMEOUT = 4


def mix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + SM_CONST
        z = (z ^ (z >> np.uint64(30))) * SM_M1
        z = (z ^ (z >> np.uint64(27))) * SM_M2
        return z ^ (z >> np.uint64(31))


def stream_keys(seed: int, indices: np.ndarray) -> np.ndarray:
    """Per-walker stream keys for global sample indices."""
    with np.errstate(over="ignore"):
        x = np.uint64(seed & MASK64) ^ (np.asarray(indices, dtype=np.uint64) * STREAM_MULT)
    return mix64(x)


def uniform_draws(keys: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Doubles in [0, 1) for draw number `counters` of each stream."""
    with np.errstate(over="ignore"):
        x = keys + np.asarray(counters, dtype=np.uint64) * SM_CONST
    return (mix64(x) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class WosConfig:
    eps: float = 1e-4
    max_steps: int = 10 ** 6
    samples: int = 100000
    seed: int = 0
    batch: int = 4096
    workers: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise InvalidParameter(f"eps must be positive, got {self.eps}")
        for name in ("max_steps", "samples", "batch", "workers"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise InvalidParameter(f"{name} must be a positive integer, got {value}")
        if not -(1 << 63) <= self.seed <= MASK64:
            raise InvalidParameter(f"seed must fit in 64 bits, got {self.seed}")
        if self.batch > self.samples:
            object.__setattr__(self, "batch", int(self.samples))


@dataclass(frozen=True)
class TallyEstimate:
    """Counts from a batch of walks; hits are FAR walks for omega, ESCAPE walks for omega_hat."""

    hits: int
    samples: int
    ambiguous: int = 0
    timeouts: int = 0
    steps: int = 0
    seed: int = 0
    eps: float = 1e-4
    domain: str = ""
    R: Optional[float] = None

    def __post_init__(self):
        if min(self.hits, self.ambiguous, self.timeouts, self.steps) < 0 or self.misses < 0:
            raise InvalidParameter(f"Inconsistent tally counts: {self}")

    @property
    def effective(self) -> int:
        return self.samples - self.ambiguous - self.timeouts

    @property
    def misses(self) -> int:
        return self.effective - self.hits

    @property
    def p_hat(self) -> float:
        if self.effective == 0:
            return 0.0
        return self.hits / self.effective

    @property
    def stderr(self) -> float:
        if self.effective == 0:
            return 0.0
        p = self.p_hat
        return math.sqrt(p * (1.0 - p) / self.effective)

    @property
    def ambiguous_frac(self) -> float:
        return self.ambiguous / self.samples if self.samples else 0.0

    @property
    def timeout_frac(self) -> float:
        return self.timeouts / self.samples if self.samples else 0.0


def merge(tallies: Sequence[TallyEstimate]) -> TallyEstimate:
    """Pool tallies from one (domain, R, eps) context; the seed echo is the smallest seed."""
    if not tallies:
        raise InvalidParameter("merge needs at least one tally")
    first = tallies[0]
    for tally in tallies[1:]:
        if tally.eps != first.eps or tally.domain != first.domain or tally.R != first.R:
            raise ContextMismatch(
                f"Cannot merge tallies of {first.domain} (eps={first.eps}, R={first.R}) "
                f"and {tally.domain} (eps={tally.eps}, R={tally.R})"
            )
    return TallyEstimate(
        hits=sum(t.hits for t in tallies),
        samples=sum(t.samples for t in tallies),
        ambiguous=sum(t.ambiguous for t in tallies),
        timeouts=sum(t.timeouts for t in tallies),
        steps=sum(t.steps for t in tallies),
        seed=min(t.seed for t in tallies),
        eps=first.eps,
        domain=first.domain,
        R=first.R,
    )


@dataclass(frozen=True)
class DecompositionTally:
    """Walks split at the escape circle, then continued in D until they hit the boundary.

    near_first counts walks that reach the boundary before the circle.
    """

    escaped_far: int
    escaped_near: int
    near_first: int
    ambiguous: int
    timeouts: int
    samples: int
    steps: int = 0
    seed: int = 0
    eps: float = 1e-4
    domain: str = ""
    R: Optional[float] = None

    @property
    def escaped(self) -> int:
        return self.escaped_far + self.escaped_near

    def _tally(self, hits: int, samples: int, ambiguous: int, timeouts: int) -> TallyEstimate:
        return TallyEstimate(
            hits=hits, samples=samples, ambiguous=ambiguous, timeouts=timeouts,
            steps=self.steps, seed=self.seed, eps=self.eps, domain=self.domain, R=self.R,
        )

    def omega_hat(self) -> TallyEstimate:
        return self._tally(self.escaped, self.samples, self.ambiguous, self.timeouts)

    def omega(self) -> TallyEstimate:
        return self._tally(self.escaped_far, self.samples, self.ambiguous, self.timeouts)

    def near_given_escape(self) -> TallyEstimate:
        return self._tally(self.escaped_near, self.escaped, 0, 0)


def _piece_classes(domain: DomainSpec, points: np.ndarray, indices: np.ndarray,
                   R: Optional[float]) -> np.ndarray:
    if R:
        far = np.abs(domain.feet(points, indices)) >= R * (1.0 - FOOT_RTOL)
    else:
        far = np.ones(points.shape, dtype=bool)
    classes = np.where(far, HitClass.FAR, HitClass.NEAR).astype(np.int8)
    if domain.escape_index is not None:
        classes[indices == domain.escape_index] = HitClass.ESCAPE
    return classes


def _classify(domain: DomainSpec, points: np.ndarray, dist: np.ndarray,
              R: Optional[float], eps_abs: float) -> np.ndarray:
    """Class of the nearest piece; AMBIGUOUS when a piece of another class is within 2 eps."""
    nearest = np.argmin(dist, axis=1)
    classes = _piece_classes(domain, points, nearest, R)
    if dist.shape[1] < 2:
        return classes
    rows = np.arange(points.size)
    others = dist.copy()
    others[rows, nearest] = np.inf
    second = np.argmin(others, axis=1)
    close = np.flatnonzero(others[rows, second] < 2.0 * eps_abs)
    if close.size:
        rival = _piece_classes(domain, points[close], second[close], R)
        classes[close[rival != classes[close]]] = HitClass.AMBIGUOUS
    return classes


def _walk(domain: DomainSpec, z: np.ndarray, keys: np.ndarray, counters: np.ndarray,
          R: Optional[float], eps_abs: float, max_steps: int
          ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Advance every walker until it enters the eps shell or uses up max_steps jumps.

    Returns (classes, end points, jumps per walker, stream counters).
    """
    z = np.array(z, dtype=np.complex128)
    counters = np.array(counters, dtype=np.uint64)
    classes = np.full(z.size, HitClass.TIMEOUT, dtype=np.int8)
    steps = np.zeros(z.size, dtype=np.int64)
    alive = np.arange(z.size)

    while alive.size:
        position = z[alive]
        dist = domain.distance_matrix(position)
        rho = dist.min(axis=1)
        done = rho < eps_abs
        if np.any(done):
            classes[alive[done]] = _classify(domain, position[done], dist[done], R, eps_abs)

        moving = ~done & (steps[alive] < max_steps)
        alive = alive[moving]
        if not alive.size:
            break
        theta = TWO_PI * uniform_draws(keys[alive], counters[alive])
        z[alive] = position[moving] + rho[moving] * np.exp(1j * theta)
        counters[alive] += np.uint64(1)
        steps[alive] += 1

    return classes, z, steps, counters


@dataclass(frozen=True)
class _BlockTask:
    domain: DomainSpec
    start: complex
    R: Optional[float]
    eps_abs: float
    max_steps: int
    seed: int
    lo: int
    hi: int
    follow: Optional[DomainSpec] = None
    keep_points: bool = False


@dataclass(frozen=True)
class _BlockResult:
    counts: np.ndarray
    steps: int
    classes: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None
    follow_counts: Optional[np.ndarray] = None


def _run_block(task: _BlockTask) -> _BlockResult:
    """Walk samples [lo, hi); module-level so it pickles into worker processes."""
    count = task.hi - task.lo
    keys = stream_keys(task.seed, np.arange(task.lo, task.hi, dtype=np.uint64))
    start = np.full(count, task.start, dtype=np.complex128)
    classes, points, steps, counters = _walk(
        task.domain, start, keys, np.zeros(count, dtype=np.uint64),
        task.R, task.eps_abs, task.max_steps,
    )
    total_steps = int(steps.sum())

    follow_counts = None
    if task.follow is not None:
        # Escaped walks keep their stream and carry on in D.
        escaped = np.flatnonzero(classes == HitClass.ESCAPE)
        follow_classes, _, follow_steps, _ = _walk(
            task.follow, points[escaped], keys[escaped], counters[escaped],
            task.R, task.eps_abs, task.max_steps,
        )
        follow_counts = np.bincount(follow_classes, minlength=len(HitClass))
        total_steps += int(follow_steps.sum())

    return _BlockResult(
        counts=np.bincount(classes, minlength=len(HitClass)),
        steps=total_steps,
        classes=classes if task.keep_points else None,
        points=points if task.keep_points else None,
        follow_counts=follow_counts,
    )


def _execute(tasks: List[_BlockTask], workers: int) -> List[_BlockResult]:
    if workers <= 1 or len(tasks) == 1:
        return [_run_block(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(_run_block, tasks))


def _absorption_radius(domain: DomainSpec, R: Optional[float], config: WosConfig) -> float:
    # Shell thickness is relative to the target radius when there is one.
    return config.eps * (float(R) if R else domain.scale)


def _check_start(domain: DomainSpec, start) -> complex:
    start = validate_point(domain.basepoint if start is None else start)
    if not domain.contains(start):
        raise PointOutsideDomain(f"Start point {start} is not in {domain.name}")
    radius = domain.escape_radius
    if radius is not None and abs(start) >= radius:
        raise PointOutsideDomain(f"Start point {start} is outside the escape circle |z| = {radius}")
    return start


def _check_radius(R) -> float:
    if not (R is not None and math.isfinite(R) and R > 0):
        raise InvalidParameter(f"R must be positive and finite, got {R}")
    return float(R)


def _blocks(domain: DomainSpec, start: complex, R: Optional[float], config: WosConfig,
            follow: Optional[DomainSpec] = None, keep_points: bool = False) -> List[_BlockResult]:
    eps_abs = _absorption_radius(domain, R, config)
    tasks = [
        _BlockTask(
            domain=domain, start=start, R=R, eps_abs=eps_abs,
            max_steps=config.max_steps, seed=config.seed,
            lo=lo, hi=min(lo + config.batch, config.samples),
            follow=follow, keep_points=keep_points,
        )
        for lo in range(0, config.samples, config.batch)
    ]
    return _execute(tasks, config.workers)


def _tally_from(counts: np.ndarray, steps: int, hit: HitClass, domain: DomainSpec,
                R: Optional[float], config: WosConfig) -> TallyEstimate:
    tally = TallyEstimate(
        hits=int(counts[hit]),
        samples=config.samples,
        ambiguous=int(counts[HitClass.AMBIGUOUS]),
        timeouts=int(counts[HitClass.TIMEOUT]),
        steps=steps,
        seed=config.seed,
        eps=config.eps,
        domain=domain.name,
        R=R,
    )
    _report(tally)
    return tally


def _report(tally: TallyEstimate) -> None:
    status("WoS", f"{tally.domain} R={tally.R:g}: {tally.hits}/{tally.effective} hits, "
                  f"p={tally.p_hat:.6f} ± {tally.stderr:.1e}")
    if tally.ambiguous or tally.timeouts:
        warning(f"{tally.ambiguous} ambiguous and {tally.timeouts} timed-out walks excluded")
    if tally.timeouts > MAX_TIMEOUT_FRACTION * tally.samples:
        raise TooManyTimeouts(
            f"{tally.timeouts} of {tally.samples} walks in {tally.domain} hit the step cap; "
            f"raise max_steps or eps"
        )


def sample_exit(domain: DomainSpec, start, R: Optional[float], config: WosConfig,
                stream_index: int) -> Tuple[HitClass, int]:
    """Run the single walk with global index stream_index; returns (class, jumps)."""
    start = _check_start(domain, start)
    keys = stream_keys(config.seed, np.array([stream_index], dtype=np.uint64))
    classes, _, steps, _ = _walk(
        domain, np.array([start]), keys, np.zeros(1, dtype=np.uint64),
        R, _absorption_radius(domain, R, config), config.max_steps,
    )
    return HitClass(int(classes[0])), int(steps[0])


def estimate_omega(domain: DomainSpec, R: float, config: WosConfig, start=None) -> TallyEstimate:
    """Fraction of walks whose first boundary hit has |p| >= R."""
    R = _check_radius(R)
    if domain.escape_index is not None:
        raise InvalidParameter(f"{domain.name} carries an escape circle; omega needs the bare domain")
    start = _check_start(domain, start)
    results = _blocks(domain, start, R, config)
    counts = sum(result.counts for result in results)
    return _tally_from(counts, sum(r.steps for r in results), HitClass.FAR, domain, R, config)


def estimate_omega_hat(domain: DomainSpec, R: float, config: WosConfig, start=None) -> TallyEstimate:
    """Fraction of walks that reach |z| = R before the boundary of D."""
    R = _check_radius(R)
    escaped = with_escape_circle(domain, R)
    start = _check_start(escaped, start)
    results = _blocks(escaped, start, R, config)
    counts = sum(result.counts for result in results)
    return _tally_from(counts, sum(r.steps for r in results), HitClass.ESCAPE, domain, R, config)


def exit_points(domain: DomainSpec, start, R: Optional[float],
                config: WosConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Termination classes and points of every walk, in sample-index order."""
    start = _check_start(domain, start)
    results = _blocks(domain, start, R, config, keep_points=True)
    classes = np.concatenate([result.classes for result in results])
    points = np.concatenate([result.points for result in results])
    return classes, points


def estimate_decomposition(domain: DomainSpec, R: float, config: WosConfig) -> DecompositionTally:
    """Split each walk at the circle |z| = R and follow escaped walks to the boundary."""
    R = _check_radius(R)
    if domain.escape_index is not None:
        raise InvalidParameter(f"{domain.name} already carries an escape circle")
    escaped = with_escape_circle(domain, R)
    start = _check_start(escaped, None)
    results = _blocks(escaped, start, R, config, follow=domain)

    first = sum(result.counts for result in results)
    then = sum(result.follow_counts for result in results)
    tally = DecompositionTally(
        escaped_far=int(then[HitClass.FAR]),
        escaped_near=int(then[HitClass.NEAR]),
        near_first=int(first[HitClass.FAR] + first[HitClass.NEAR]),
        ambiguous=int(first[HitClass.AMBIGUOUS] + then[HitClass.AMBIGUOUS]),
        timeouts=int(first[HitClass.TIMEOUT] + then[HitClass.TIMEOUT]),
        samples=config.samples,
        steps=sum(result.steps for result in results),
        seed=config.seed,
        eps=config.eps,
        domain=domain.name,
        R=R,
    )
    status("WoS", f"{domain.name} R={R:g}: {tally.escaped} escaped "
                  f"({tally.escaped_near} then hit near the origin)")
    if tally.timeouts > MAX_TIMEOUT_FRACTION * tally.samples:
        raise TooManyTimeouts(f"{tally.timeouts} of {tally.samples} walks hit the step cap")
    return tally
