#!/usr/bin/env python3

"""Scenario runners: each one returns an ExperimentReport for the CLI to write."""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .console import status
from .errors import InsufficientSamples, InvalidParameter, NotStarlike
from .geometry import (
    DomainSpec,
    MAX_GRID_CELLS,
    boundary_distance,
    build_ce1,
    build_ce2,
    build_koebe,
    build_unit_disk,
    build_unit_disk_slit,
    ce_radius,
    reachable,
    with_escape_circle,
)
from .hyperbolic import ce1_ratio_lower_bound
from .oracles import (
    ArcSpec,
    arc_measure,
    bn_lower_bound,
    center_arc_measure,
    koebe_omega,
    koebe_omega_hat,
    koebe_ratio,
    slit_disk_escape,
)
from .wos import (
    HitClass,
    TallyEstimate,
    WosConfig,
    estimate_decomposition,
    estimate_omega,
    estimate_omega_hat,
    exit_points,
)

Estimate = Union[TallyEstimate, float, None]

DEFAULT_CONFIDENCE = 0.99
MAX_RELATIVE_STDERR = 0.25
SIGMAS = 3.0
EPS_BAND = 5.0
QUANTITIES = ("omega", "omega-hat", "both")


@dataclass
class ReportRow:
    R: float
    omega_hat: Estimate = None
    omega: Estimate = None
    ratio: Optional[float] = None
    ratio_lo: Optional[float] = None
    ratio_hi: Optional[float] = None
    seed: Optional[int] = None
    label: str = ""
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def ambiguous_frac(self) -> float:
        return sum(t.ambiguous_frac for t in self.tallies())

    @property
    def timeout_frac(self) -> float:
        return sum(t.timeout_frac for t in self.tallies())

    def tallies(self) -> List[TallyEstimate]:
        return [e for e in (self.omega_hat, self.omega) if isinstance(e, TallyEstimate)]


@dataclass
class ExperimentReport:
    scenario: str
    rows: List[ReportRow] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    checks: Dict[str, bool] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def value_of(estimate: Estimate) -> Optional[float]:
    if isinstance(estimate, TallyEstimate):
        return estimate.p_hat
    return None if estimate is None else float(estimate)


def stderr_of(estimate: Estimate) -> float:
    return estimate.stderr if isinstance(estimate, TallyEstimate) else 0.0


def z_value(confidence: float = DEFAULT_CONFIDENCE) -> float:
    """Two-sided normal quantile for the given confidence level."""
    if not 0 < confidence < 1:
        raise InvalidParameter(f"confidence must lie in (0, 1), got {confidence}")
    return float(stats.norm.ppf(1.0 - (1.0 - confidence) / 2.0))


def config_echo(cfg: Optional[WosConfig]) -> Dict[str, Any]:
    # workers and batch never change results, so they stay out of reports
    if cfg is None:
        return {"mode": "exact"}
    return {"eps": cfg.eps, "samples": cfg.samples, "seed": cfg.seed, "max_steps": cfg.max_steps}


def ratio_with_interval(omega_hat: Estimate, omega: Estimate, z: float
                        ) -> Tuple[Optional[float], Optional[float], Optional[float], float, bool]:
    """Delta-method ratio omega_hat/omega for independent estimates.

    Returns (ratio, lo, hi, stderr, insufficient). The interval's upper end
    is infinite, and the row insufficient, when omega's interval reaches 0.
    """
    p1, p2 = value_of(omega_hat), value_of(omega)
    s1, s2 = stderr_of(omega_hat), stderr_of(omega)
    if p1 is None or p2 is None:
        return None, None, None, 0.0, False
    if p2 <= 0:
        return None, 0.0, math.inf, math.inf, True
    ratio = p1 / p2
    if p1 > 0:
        se = ratio * math.sqrt((s1 / p1) ** 2 + (s2 / p2) ** 2)
    else:
        se = s1 / p2
    lo = max(0.0, ratio - z * se)
    if p2 - z * s2 <= 0:
        return ratio, lo, math.inf, se, True
    return ratio, lo, ratio + z * se, se, False


def _make_row(R: float, omega_hat: Estimate, omega: Estimate, z: float, seed: Optional[int],
              label: str = "", **diagnostics: Any) -> ReportRow:
    ratio, lo, hi, se, insufficient = ratio_with_interval(omega_hat, omega, z)
    row = ReportRow(R=R, omega_hat=omega_hat, omega=omega, ratio=ratio, ratio_lo=lo,
                    ratio_hi=hi, seed=seed, label=label, diagnostics=dict(diagnostics))
    if insufficient:
        row.diagnostics["insufficient"] = True
    row.diagnostics["ratio_stderr"] = se
    return row


def _ordering_holds(omega_hat: Estimate, omega: Estimate) -> bool:
    """omega <= omega_hat up to 3 joint standard errors."""
    joint = math.hypot(stderr_of(omega_hat), stderr_of(omega))
    return value_of(omega) <= value_of(omega_hat) + SIGMAS * joint + 1e-12


def _starlike_bound_holds(omega_hat: Estimate, omega: Estimate) -> bool:
    """omega_hat <= 2 omega up to 3 combined standard errors."""
    joint = math.sqrt(stderr_of(omega_hat) ** 2 + 4.0 * stderr_of(omega) ** 2)
    return value_of(omega_hat) <= 2.0 * value_of(omega) + SIGMAS * joint + 1e-12


def _within_band(tally: TallyEstimate, exact: float) -> bool:
    return abs(tally.p_hat - exact) <= max(SIGMAS * tally.stderr, EPS_BAND * tally.eps)


def _check_increasing(Rs: Sequence[float], lower: float = 0.0) -> List[float]:
    Rs = [float(R) for R in Rs]
    if not Rs:
        raise InvalidParameter("The R grid must not be empty")
    if any(not (math.isfinite(R) and R > lower) for R in Rs):
        raise InvalidParameter(f"Every R must be finite and exceed {lower:g}, got {Rs}")
    if any(b <= a for a, b in zip(Rs, Rs[1:])):
        raise InvalidParameter(f"The R grid must be strictly increasing, got {Rs}")
    return Rs


def hardy_exponent(Rs: Sequence[float], omega_hats: Sequence[float]) -> float:
    """Least-squares slope of -log omega_hat against log R."""
    if len(Rs) != len(omega_hats) or len(Rs) < 2:
        raise InvalidParameter("hardy_exponent needs at least two (R, omega_hat) pairs")
    values = np.asarray(omega_hats, dtype=float)
    if np.any(values <= 0):
        raise InvalidParameter("omega_hat values must be positive to take logs")
    slope, _ = np.polyfit(np.log(np.asarray(Rs, dtype=float)), -np.log(values), 1)
    return float(slope)


def koebe_sweep(Rs: Sequence[float], cfg: Optional[WosConfig] = None,
                confidence: float = DEFAULT_CONFIDENCE) -> ExperimentReport:
    """Exact Koebe omega_hat, omega and their ratio, optionally checked by simulation."""
    Rs = _check_increasing(Rs, lower=0.25)
    z = z_value(confidence)
    report = ExperimentReport(scenario="koebe_sweep", config={**config_echo(cfg), "confidence": confidence})
    domain = build_koebe()

    for R in Rs:
        exact_hat, exact_omega, exact_ratio = koebe_omega_hat(R), koebe_omega(R), koebe_ratio(R)
        if cfg is None:
            row = _make_row(R, exact_hat, exact_omega, z, None, label=f"R={R:g}")
        else:
            status("Koebe", f"simulating R={R:g}")
            omega_hat = estimate_omega_hat(domain, R, cfg)
            omega = estimate_omega(domain, R, cfg)
            row = _make_row(R, omega_hat, omega, z, cfg.seed, label=f"R={R:g}",
                            exact_omega_hat=exact_hat, exact_omega=exact_omega)
            report.checks[f"agree_omega_hat@R={R:g}"] = _within_band(omega_hat, exact_hat)
            report.checks[f"agree_omega@R={R:g}"] = _within_band(omega, exact_omega)
        row.diagnostics["exact_ratio"] = exact_ratio
        report.checks[f"ordering@R={R:g}"] = _ordering_holds(row.omega_hat, row.omega)
        report.rows.append(row)

    gaps = [abs(koebe_ratio(R) - 2.0) for R in Rs]
    tail = gaps[-3:]
    report.checks["ratio_tends_to_2"] = all(b < a for a, b in zip(tail, tail[1:]))
    if len(Rs) >= 2:
        report.summary["hardy_exponent"] = hardy_exponent(Rs, [koebe_omega_hat(R) for R in Rs])
    return report


def _relative_stderr(tally: TallyEstimate) -> float:
    return tally.stderr / tally.p_hat if tally.p_hat > 0 else math.inf


def counterexample_run(which: int, ns: Sequence[int], cfg: WosConfig, t: Optional[float] = None,
                       flood_spacing: Optional[float] = None,
                       confidence: float = DEFAULT_CONFIDENCE) -> ExperimentReport:
    """omega_hat/omega at R_n on the sector counter-examples; the ratio must grow with n."""
    if which not in (1, 2):
        raise InvalidParameter(f"which must be 1 or 2, got {which}")
    ns = sorted(set(int(n) for n in ns))
    if not ns or any(n not in (1, 2) for n in ns):
        raise InvalidParameter(f"ns must be a nonempty subset of {{1, 2}} at desk scale, got {ns}")
    levels = max(ns) + 1
    domain = build_ce1(levels) if which == 1 else build_ce2(levels)
    z = z_value(confidence)
    report = ExperimentReport(
        scenario=f"counterexample_{which}",
        config={**config_echo(cfg), "confidence": confidence, "levels": levels},
    )

    ratios: Dict[int, Tuple[float, float]] = {}
    for n in ns:
        R = ce_radius(n)
        status("Counterexample", f"{domain.name}: n={n}, R_n={R:.9g}")
        omega_hat = estimate_omega_hat(domain, R, cfg)
        omega = estimate_omega(domain, R, cfg)
        for name, tally in (("omega_hat", omega_hat), ("omega", omega)):
            if _relative_stderr(tally) > MAX_RELATIVE_STDERR:
                raise InsufficientSamples(
                    f"{name} at R_{n} has relative stderr {_relative_stderr(tally):.2f} "
                    f"(> {MAX_RELATIVE_STDERR}); increase --samples"
                )

        row = _make_row(R, omega_hat, omega, z, cfg.seed, label=f"n={n}", n=n, R_n=R, levels=levels)
        if which == 1 and t is not None:
            row.diagnostics["ce1_bound"] = math.exp(ce1_ratio_lower_bound(n, t) / 4.0)
        if which == 2:
            mouth = R * math.sin(1.0)
            gap = boundary_distance(domain, complex(R))
            row.diagnostics["mouth_proxy"] = math.sqrt(mouth / (2.0 * gap))
        side = _side_reachable(domain, n, R, flood_spacing)
        if side is not None:
            row.diagnostics["side_reachable"] = side
        else:
            report.notes.append(f"side_reachable skipped at n={n}: flood-fill grid too large")

        report.checks[f"ordering@n={n}"] = _ordering_holds(omega_hat, omega)
        ratios[n] = (row.ratio, row.diagnostics["ratio_stderr"])
        report.rows.append(row)

    if 1 in ratios and 2 in ratios:
        (r1, se1), (r2, se2) = ratios[1], ratios[2]
        one_sided = float(stats.norm.ppf(confidence))
        report.checks["ratio_increases"] = r2 - r1 > one_sided * math.hypot(se1, se2)
    return report


def _side_reachable(domain: DomainSpec, n: int, R: float, spacing: Optional[float]) -> Optional[bool]:
    """Flood-fill answer for a point between e^n and R_n at angle 1/2, or None if the grid is too big."""
    inner = math.exp(n)
    if spacing is None:
        spacing = (R - inner) / 8.0
    cells = math.ceil(2.0 * R / spacing)
    if cells * cells > MAX_GRID_CELLS:
        return None
    point = 0.5 * (inner + R) * complex(math.cos(0.5), math.sin(0.5))
    return reachable(domain, R, point, spacing)


def _exact_koebe(R: float) -> Tuple[float, float]:
    return koebe_omega_hat(R), koebe_omega(R)


def starlike_suite(cases: Sequence[Tuple[DomainSpec, Sequence[float]]], cfg: WosConfig,
                   confidence: float = DEFAULT_CONFIDENCE) -> ExperimentReport:
    """omega_hat <= 2 omega on starlike domains; the Koebe domain uses its closed forms."""
    for domain, _ in cases:
        if not domain.starlike:
            raise NotStarlike(f"{domain.name} is not flagged starlike")
    z = z_value(confidence)
    report = ExperimentReport(scenario="starlike_suite", config={**config_echo(cfg), "confidence": confidence})

    for domain, Rs in cases:
        for R in _check_increasing(Rs):
            label = f"{domain.name}@R={R:g}"
            status("Starlike", label)
            if domain.name == "koebe":
                omega_hat, omega = _exact_koebe(R)
                seed = None
            else:
                omega_hat = estimate_omega_hat(domain, R, cfg)
                omega = estimate_omega(domain, R, cfg)
                seed = cfg.seed
            row = _make_row(R, omega_hat, omega, z, seed, label=label,
                            slack=2.0 * value_of(omega) - value_of(omega_hat))
            report.checks[f"starlike_bound[{label}]"] = _starlike_bound_holds(omega_hat, omega)
            report.checks[f"ordering[{label}]"] = _ordering_holds(omega_hat, omega)
            report.rows.append(row)
    return report


def _nested_arc_measure(points: np.ndarray, arc: ArcSpec) -> Tuple[float, float]:
    values = arc_measure(points, arc)
    return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(values.size))


def markov_check(cfg: WosConfig) -> ExperimentReport:
    """Arc measure at 0 versus its average over exit points of the disk of radius 1/2."""
    inner = with_escape_circle(build_unit_disk(), 0.5)
    classes, points = exit_points(inner, 0j, 0.5, cfg)
    escaped = points[classes == HitClass.ESCAPE]
    report = ExperimentReport(scenario="markov_check", config=config_echo(cfg))
    if escaped.size < 2:
        raise InsufficientSamples("markov_check needs at least two exit samples")

    cases = (
        ("half-arc", ArcSpec(math.pi / 2, 3 * math.pi / 2)),
        ("quarter-arc", ArcSpec(0.0, math.pi / 2)),
    )
    for label, arc in cases:
        direct = center_arc_measure(arc)
        nested, se = _nested_arc_measure(escaped, arc)
        row = ReportRow(R=0.5, seed=cfg.seed, label=label,
                        diagnostics={"direct": direct, "nested": nested, "nested_stderr": se,
                                     "exit_samples": int(escaped.size)})
        if label == "half-arc":
            row.diagnostics["pointwise_at_half"] = arc_measure(0.5, arc)
        report.checks[f"strong_markov[{label}]"] = abs(nested - direct) <= SIGMAS * se + 1e-12
        report.rows.append(row)
    return report


def slit_validation(grid: Sequence[Tuple[float, float]], cfg: WosConfig,
                    confidence: float = DEFAULT_CONFIDENCE) -> ExperimentReport:
    """Circle-hit frequency from -b on the disk minus [a, 1) against the closed form."""
    if not grid:
        raise InvalidParameter("The (a, b) grid must not be empty")
    z = z_value(confidence)
    report = ExperimentReport(scenario="slit_validation", config={**config_echo(cfg), "confidence": confidence})

    for a, b in grid:
        exact = slit_disk_escape(a, b)
        start = complex(-b)
        domain = replace(build_unit_disk_slit(a), basepoint=start)
        label = f"a={a:g},b={b:g}"
        status("Slit", label)
        tally = estimate_omega(domain, 1.0, cfg, start=start)
        row = _make_row(1.0, None, tally, z, cfg.seed, label=label, a=a, b=b, exact=exact)
        report.checks[f"slit[{label}]"] = _within_band(tally, exact)
        report.rows.append(row)
    return report


def _exact_columns(domain: DomainSpec, R: float) -> Dict[str, float]:
    if domain.name == "koebe" and R > 0.25:
        exact_hat, exact_omega = _exact_koebe(R)
        return {"exact_omega_hat": exact_hat, "exact_omega": exact_omega}
    if domain.name == "disk":
        return {"exact_omega_hat": 1.0 if R < 1 else 0.0, "exact_omega": 1.0 if R <= 1 else 0.0}
    return {}


def estimate_run(domain: DomainSpec, Rs: Sequence[float], quantity: str, cfg: WosConfig,
                 confidence: float = DEFAULT_CONFIDENCE) -> ExperimentReport:
    """Plain estimates of omega and/or omega_hat along an R grid."""
    if quantity not in QUANTITIES:
        raise InvalidParameter(f"quantity must be one of {', '.join(QUANTITIES)}, got {quantity}")
    Rs = _check_increasing(Rs)
    z = z_value(confidence)
    report = ExperimentReport(scenario="estimate",
                              config={**config_echo(cfg), "confidence": confidence,
                                      "domain": domain.name, "quantity": quantity})

    for R in Rs:
        omega_hat = estimate_omega_hat(domain, R, cfg) if quantity in ("omega-hat", "both") else None
        omega = estimate_omega(domain, R, cfg) if quantity in ("omega", "both") else None
        row = _make_row(R, omega_hat, omega, z, cfg.seed, label=f"{domain.name}@R={R:g}",
                        **_exact_columns(domain, R))
        if quantity == "both":
            report.checks[f"ordering@R={R:g}"] = _ordering_holds(omega_hat, omega)
        report.rows.append(row)

    for column in ("omega_hat", "omega"):
        series = [getattr(row, column) for row in report.rows]
        if series[0] is None or len(series) < 2:
            continue
        report.checks[f"nonincreasing_{column}"] = all(
            value_of(b) <= value_of(a) + SIGMAS * math.hypot(stderr_of(a), stderr_of(b)) + 1e-12
            for a, b in zip(series, series[1:])
        )
    return report


def beurling_nevanlinna_check(a_values: Sequence[float], cfg: WosConfig) -> ExperimentReport:
    """Slit-hit probability from 0 on the disk minus [a, 1) against (2/pi) arcsin((1-a)/(1+a))."""
    if not a_values:
        raise InvalidParameter("Need at least one slit start a")
    report = ExperimentReport(scenario="beurling_nevanlinna", config=config_echo(cfg))
    for a in a_values:
        bound = bn_lower_bound(a)
        exact = 1.0 - slit_disk_escape(a, 0.0)
        label = f"a={a:g}"
        status("BN", label)
        circle = estimate_omega(build_unit_disk_slit(a), 1.0, cfg)
        slit = replace(circle, hits=circle.misses)
        row = ReportRow(R=1.0, omega=slit, seed=cfg.seed, label=label,
                        diagnostics={"a": a, "bound": bound, "exact": exact})
        report.checks[f"bn_bound[{label}]"] = slit.p_hat >= bound - SIGMAS * slit.stderr
        report.checks[f"bn_identity[{label}]"] = abs(exact - bound) <= 1e-12
        report.rows.append(row)
    return report


def decomposition_check(cases: Sequence[Tuple[DomainSpec, Sequence[float]]], cfg: WosConfig,
                        confidence: float = DEFAULT_CONFIDENCE) -> ExperimentReport:
    """Coupled omega_hat/omega from one set of walks split at |z| = R.

    On a starlike domain a walk that escapes hits the near boundary next with
    probability at most 1/2, which is where the factor 2 comes from.
    """
    for domain, _ in cases:
        if not domain.starlike:
            raise NotStarlike(f"{domain.name} is not flagged starlike")
    z = z_value(confidence)
    report = ExperimentReport(scenario="decomposition", config={**config_echo(cfg), "confidence": confidence})

    for domain, Rs in cases:
        for R in _check_increasing(Rs):
            label = f"{domain.name}@R={R:g}"
            status("Decompose", label)
            tally = estimate_decomposition(domain, R, cfg)
            near = tally.near_given_escape()
            row = _make_row(R, tally.omega_hat(), tally.omega(), z, cfg.seed, label=label,
                            near_given_escape=near.p_hat, near_given_escape_stderr=near.stderr,
                            near_first=tally.near_first)
            effective = tally.omega().effective
            report.checks[f"near_given_escape[{label}]"] = near.p_hat <= 0.5 + SIGMAS * near.stderr + 1e-12
            if effective:
                p_near = tally.escaped_near / effective
                p_far = tally.escaped_far / effective
                # per-walk variable in {-1, 0, 1}; its mean is omega_hat - 2 omega
                variance = max(p_near + p_far - (p_near - p_far) ** 2, 0.0)
                report.checks[f"starlike_bound[{label}]"] = (
                    p_near - p_far <= SIGMAS * math.sqrt(variance / effective) + 1e-12
                )
            report.rows.append(row)
    return report
