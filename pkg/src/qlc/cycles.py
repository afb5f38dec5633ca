"""Limit cycles around the origin via the return-map displacement.

On a section ray from the origin, the displacement d(x) = P(x) - x of the
Poincare return map P vanishes exactly on closed orbits; isolated zeros
are limit cycles.  This module samples d on geometric grids, refines
bracketed sign changes by bisection, detects semi-stable (fold) cycles as
tangential dips of |d|, tracks cycle families across a rotation
parameter, and counts cycles with grid-refinement agreement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import PreconditionError, QlcError
from .flow import (DEFAULT_CONFIG, IntegratorConfig, NoReturnError, Section,
                   TerminalStatus, Trajectory, next_section_crossing)
from .rotation import RotationParam
from .singular import SingularKind, finite_singular_points, kind_from_jacobian
from .vectorfield import CanonicalParamsII, canonical_to_general, jacobian

__all__ = [
    "NoCyclesPossibleError",
    "RefineGridError",
    "InconclusiveCountError",
    "ContinuationError",
    "CycleStability",
    "DisplacementSample",
    "DisplacementSamples",
    "LimitCycleRecord",
    "CycleSearchResult",
    "FamilyPoint",
    "FamilyTermination",
    "FamilyCurve",
    "ContinuationPolicy",
    "displacement_scan",
    "find_cycles",
    "track_family",
    "count_cycles_around_origin",
    "winding_number",
]

# Stability classification threshold on d'(x*), and the |d| depth below
# which a tangential dip counts as a semi-stable cycle (displacement
# evaluation noise at the default integrator tolerances).
_MULTIPLIER_TOL = 1e-5
_SEMISTABLE_DIP = 1e-8

_FOCUS_KINDS = frozenset({SingularKind.STABLE_FOCUS, SingularKind.UNSTABLE_FOCUS,
                          SingularKind.LINEAR_CENTER})


class NoCyclesPossibleError(QlcError):
    """The origin is not a focus or center, so no cycles surround it."""


class RefineGridError(QlcError):
    """Two displacement zeros were too close to separate on this grid."""


class InconclusiveCountError(QlcError):
    """Cycle counts kept changing under grid refinement."""


class ContinuationError(QlcError):
    """Family tracking lost the cycle without a recognizable termination."""

    def __init__(self, message: str, last_good: "FamilyPoint | None"):
        super().__init__(message)
        self.last_good = last_good


class CycleStability(Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    SEMI_STABLE = "SemiStable"


@dataclass(frozen=True)
class DisplacementSample:
    """One section sample: x, return coordinate P(x), and d(x) = P(x) - x.

    Both values are None when the orbit through x never returns (escapes
    the domain box or hits the time bound).
    """

    x: float
    return_coordinate: float | None
    displacement: float | None

    @property
    def present(self) -> bool:
        return self.displacement is not None


@dataclass(frozen=True)
class DisplacementSamples:
    samples: tuple[DisplacementSample, ...]

    def __post_init__(self):
        xs = [s.x for s in self.samples]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("sample coordinates must strictly increase")


@dataclass
class LimitCycleRecord:
    """An isolated displacement zero with its orbit-level data.

    ``multiplier_proxy`` is d'(x*) by central differences; its sign gives
    the stability, with |d'| below tolerance marking a semi-stable
    (multiplicity-two) cycle.
    """

    section_coordinate: float
    period: float
    multiplier_proxy: float
    stability: CycleStability
    multiplicity: int
    orbit: Trajectory

    def summary_dict(self) -> dict:
        return {
            "section_coordinate": self.section_coordinate,
            "period": self.period,
            "multiplier_proxy": self.multiplier_proxy,
            "stability": self.stability.value,
            "multiplicity": self.multiplicity,
        }


@dataclass
class CycleSearchResult:
    records: list[LimitCycleRecord]
    annotation: str | None = None


def winding_number(points, center) -> int:
    """Winding number of a closed polygon around ``center``."""
    pts = np.asarray(points, dtype=float)
    angles = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
    steps = np.diff(angles)
    steps = (steps + math.pi) % (2.0 * math.pi) - math.pi
    closing = (angles[0] - angles[-1] + math.pi) % (2.0 * math.pi) - math.pi
    return int(round((steps.sum() + closing) / (2.0 * math.pi)))


def _origin_kind(system) -> SingularKind:
    kind, _ = kind_from_jacobian(jacobian(system, (0.0, 0.0)))
    return kind


class _DisplacementSampler:
    """Caches displacement evaluations on nested geometric grids.

    Grid coordinates are indexed by exact fractions of the log range, so a
    refined grid reuses every sample of the coarser one.
    """

    def __init__(self, p: CanonicalParamsII, section: Section,
                 config: IntegratorConfig):
        system = canonical_to_general(p)
        if _origin_kind(system) not in _FOCUS_KINDS:
            raise NoCyclesPossibleError("no surrounding cycles possible")
        self.system = system
        self.section = section
        self.config = config
        self.log_ratio = math.log(section.x_max / section.x_min)
        self._cache: dict[tuple[int, int], DisplacementSample] = {}
        self._coord_cache: dict[float, DisplacementSample] = {}

    def coordinate(self, num: int, den: int) -> float:
        return self.section.x_min * math.exp(self.log_ratio * (num / den))

    def at_fraction(self, num: int, den: int) -> DisplacementSample:
        g = math.gcd(num, den)
        key = (num // g, den // g)
        sample = self._cache.get(key)
        if sample is None:
            sample = self.at_coordinate(self.coordinate(*key))
            self._cache[key] = sample
        return sample

    def at_coordinate(self, x: float, collect: Trajectory | None = None) -> DisplacementSample:
        if collect is None:
            cached = self._coord_cache.get(x)
            if cached is not None:
                return cached
        try:
            point, _ = next_section_crossing(
                self.system, self.section.point_at(x), self.section, 1,
                self.config, collect=collect)
            ret = self.section.along(point)
            sample = DisplacementSample(x, ret, ret - x)
        except NoReturnError:
            sample = DisplacementSample(x, None, None)
        if collect is None:
            self._coord_cache[x] = sample
        return sample

    def displacement_and_time(self, x: float) -> tuple[float, float]:
        point, t = next_section_crossing(
            self.system, self.section.point_at(x), self.section, 1, self.config)
        return self.section.along(point) - x, t

    def grid(self, den: int) -> DisplacementSamples:
        return DisplacementSamples(tuple(self.at_fraction(k, den)
                                         for k in range(den + 1)))


def displacement_scan(p: CanonicalParamsII, section: Section = Section(),
                      n: int = 32,
                      config: IntegratorConfig = DEFAULT_CONFIG) -> DisplacementSamples:
    """Sample the displacement at ``n`` geometrically spaced coordinates.

    Requires the origin to be a focus or linear center; orbits that never
    return are recorded as absent samples rather than errors.
    """
    if n < 16:
        raise ValueError("displacement scans need at least 16 samples")
    sampler = _DisplacementSampler(p, section, config)
    return sampler.grid(n - 1)


def _sign_change_brackets(samples: DisplacementSamples):
    out = []
    pairs = zip(samples.samples, samples.samples[1:])
    for left, right in pairs:
        if left.present and right.present:
            if left.displacement * right.displacement < 0.0:
                out.append((left, right))
    return out


def _probe_edge(sampler: _DisplacementSampler, inner: DisplacementSample,
                outer_x: float, limit: float = 1e-8):
    """March from a present sample toward an absent one, catching sign flips.

    The returning band can end well inside a grid gap (the basin boundary
    of the surrounding structure), hiding cycles between the last present
    sample and the boundary.  Bisect the presence boundary, collecting a
    bracket each time the displacement sign flips on the way out.
    """
    brackets = []
    last = inner
    hi_x = outer_x
    while abs(hi_x - last.x) > limit:
        mid = sampler.at_coordinate(0.5 * (last.x + hi_x))
        if not mid.present:
            hi_x = mid.x
            continue
        if (mid.displacement > 0.0) != (last.displacement > 0.0):
            brackets.append((last, mid) if last.x < mid.x else (mid, last))
        last = mid
    return brackets


def _edge_brackets(sampler: _DisplacementSampler, samples: DisplacementSamples):
    out = []
    for left, right in zip(samples.samples, samples.samples[1:]):
        if left.present and not right.present:
            out.extend(_probe_edge(sampler, left, right.x))
        elif right.present and not left.present:
            out.extend(_probe_edge(sampler, right, left.x))
    return out


def _bisect_zero(sampler: _DisplacementSampler, lo: float, hi: float,
                 d_lo: float, xtol: float = 1e-10) -> tuple[float, float]:
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        sample = sampler.at_coordinate(mid)
        if not sample.present:
            raise QlcError(f"return lost inside a zero bracket at x={mid!r}")
        d_mid = sample.displacement
        if d_mid == 0.0:
            return mid, 0.0
        if (d_mid > 0.0) == (d_lo > 0.0):
            lo, d_lo = mid, d_mid
        else:
            hi = mid
    mid = 0.5 * (lo + hi)
    sample = sampler.at_coordinate(mid)
    if not sample.present:
        raise QlcError(f"return lost inside a zero bracket at x={mid!r}")
    return mid, sample.displacement


_GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


def _refine_dip(sampler: _DisplacementSampler, a: float, b: float,
                side: float, xtol: float = 1e-6) -> tuple[float, float]:
    """Golden-section minimum of side*d on [a, b]; side is the dip's sign.

    Absent samples evaluate to +inf so the search stays on the returning
    band.
    """

    def g(x):
        sample = sampler.at_coordinate(x)
        if not sample.present:
            return math.inf, math.inf
        return side * sample.displacement, sample.displacement

    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    g1, d1 = g(x1)
    g2, d2 = g(x2)
    while b - a > xtol:
        if g1 <= g2:
            b, x2, g2, d2 = x2, x1, g1, d1
            x1 = b - _GOLDEN * (b - a)
            g1, d1 = g(x1)
        else:
            a, x1, g1, d1 = x1, x2, g2, d2
            x2 = a + _GOLDEN * (b - a)
            g2, d2 = g(x2)
    return (x1, d1) if g1 <= g2 else (x2, d2)


def _dip_candidates(samples: DisplacementSamples, brackets):
    blocked = []
    for left, right in brackets:
        blocked.append((left.x, right.x))
    out = []
    triple = zip(samples.samples, samples.samples[1:], samples.samples[2:])
    for left, mid, right in triple:
        if not (left.present and mid.present and right.present):
            continue
        ds = (left.displacement, mid.displacement, right.displacement)
        if any(d == 0.0 for d in ds):
            continue
        if not (ds[0] > 0.0) == (ds[1] > 0.0) == (ds[2] > 0.0):
            continue
        if abs(ds[1]) > min(abs(ds[0]), abs(ds[2])) or abs(ds[1]) > 1e-5:
            continue
        if any(lo <= mid.x <= hi for lo, hi in blocked):
            continue
        out.append((left.x, right.x, 1.0 if ds[1] > 0.0 else -1.0))
    return out


def _displacement_value(sampler: _DisplacementSampler, x: float) -> float:
    sample = sampler.at_coordinate(x)
    if not sample.present:
        raise QlcError(f"return lost near a cycle at x={x!r}")
    return sample.displacement


def _displacement_curvature(sampler: _DisplacementSampler, x: float,
                            h: float) -> float:
    """Second difference of d at x, one-sided when a flank stops returning."""
    d_0 = _displacement_value(sampler, x)
    plus = sampler.at_coordinate(x + h)
    minus = sampler.at_coordinate(x - h)
    if plus.present and minus.present:
        return (plus.displacement - 2.0 * d_0 + minus.displacement) / (h * h)
    step = 0.5 * h
    sign = -1.0 if not plus.present else 1.0
    d_1 = _displacement_value(sampler, x + sign * step)
    d_2 = _displacement_value(sampler, x + 2.0 * sign * step)
    return (d_0 - 2.0 * d_1 + d_2) / (step * step)


def _build_record(sampler: _DisplacementSampler, x_star: float,
                  force_semistable: bool = False) -> LimitCycleRecord:
    orbit = Trajectory()
    sampler.at_coordinate(x_star, collect=orbit)
    if orbit.status is not TerminalStatus.EVENT_LIMIT_REACHED:
        raise QlcError(f"cycle orbit at x={x_star!r} failed to close")
    period = orbit.times[-1]
    if abs(winding_number(orbit.points, (0.0, 0.0))) != 1:
        raise QlcError(f"orbit at x={x_star!r} does not wind once around the origin")
    h = 1e-5 * x_star
    d_plus = _displacement_value(sampler, x_star + h)
    d_minus = _displacement_value(sampler, x_star - h)
    slope = (d_plus - d_minus) / (2.0 * h)
    if force_semistable or abs(slope) <= _MULTIPLIER_TOL:
        curvature = _displacement_curvature(sampler, x_star,
                                            max(0.02 * x_star, 2.0 * h))
        if abs(curvature) < 1e-3:
            raise QlcError("cycle multiplicity unresolved: flat displacement")
        stability = CycleStability.SEMI_STABLE
        multiplicity = 2
    else:
        stability = (CycleStability.STABLE if slope < 0.0
                     else CycleStability.UNSTABLE)
        multiplicity = 1
    return LimitCycleRecord(
        section_coordinate=x_star,
        period=period,
        multiplier_proxy=slope,
        stability=stability,
        multiplicity=multiplicity,
        orbit=orbit,
    )


def find_cycles(p: CanonicalParamsII, section: Section = Section(),
                config: IntegratorConfig = DEFAULT_CONFIG, n: int = 48,
                samples: DisplacementSamples | None = None,
                sampler: _DisplacementSampler | None = None) -> CycleSearchResult:
    """Locate all isolated displacement zeros on the section.

    Bracketed sign changes are bisected to 1e-10 in the section
    coordinate; tangential dips of |d| below 1e-8 without a sign change
    are reported as semi-stable cycles.  A zero-displacement annulus (the
    Hamiltonian member's period annulus) yields no records and the
    annotation "center annulus".
    """
    if sampler is None:
        sampler = _DisplacementSampler(p, section, config)
    if samples is None:
        samples = sampler.grid(n - 1)
    present = [abs(s.displacement) for s in samples.samples if s.present]
    if len(present) >= len(samples.samples) // 2 and present \
            and max(present) <= 1e-7:
        # Zero displacement across the section: a period annulus, whose
        # noise-level sign flips are not isolated zeros.
        return CycleSearchResult(records=[], annotation="center annulus")
    brackets = _sign_change_brackets(samples) + _edge_brackets(sampler, samples)
    brackets.sort(key=lambda pair: pair[0].x)
    zeros: list[tuple[float, bool]] = []
    for left, right in brackets:
        x_star, _ = _bisect_zero(sampler, left.x, right.x, left.displacement)
        zeros.append((x_star, False))
    for a, b, side in _dip_candidates(samples, brackets):
        x_dip, d_dip = _refine_dip(sampler, a, b, side)
        if abs(d_dip) < _SEMISTABLE_DIP:
            zeros.append((x_dip, True))
    zeros.sort()
    for (x1, _), (x2, _) in zip(zeros, zeros[1:]):
        if x2 - x1 < 1e-6:
            raise RefineGridError("refine grid")
    records = [_build_record(sampler, x, force_semistable=semi)
               for x, semi in zeros]
    return CycleSearchResult(records=records)


class FamilyTermination(Enum):
    RANGE_END = "RangeEnd"
    FOLD_DETECTED = "FoldDetected"
    SHRANK_TO_FOCUS = "ShrankToFocus"
    SEPARATRIX_LOOP = "SeparatrixLoop"


@dataclass(frozen=True)
class FamilyPoint:
    mu: float
    x_star: float
    stability: CycleStability
    period: float


@dataclass(frozen=True)
class ContinuationPolicy:
    initial_step: float = 0.02
    min_step: float = 1e-6
    max_refinements: int = 3
    mu_tol: float = 1e-6
    # Beyond this period the tracked cycle is treated as approaching a
    # separatrix loop (homoclinic periods diverge logarithmically).
    loop_period: float = 60.0


@dataclass
class FamilyCurve:
    param: RotationParam
    points: list[FamilyPoint]
    termination: FamilyTermination
    fold_mu: float | None = None
    fold_bracket: tuple[float, float] | None = None
    detail: str | None = None

    def branch(self, stability: CycleStability) -> list[FamilyPoint]:
        return [pt for pt in self.points if pt.stability is stability]


class _ZeroTracker:
    """Relocates a set of displacement zeros after a parameter step."""

    def __init__(self, p: CanonicalParamsII, param: RotationParam,
                 section: Section, config: IntegratorConfig):
        self.p = p
        self.param = param
        self.section = section
        self.config = config

    def sampler_at(self, mu: float) -> _DisplacementSampler:
        p_mu = replace(self.p, **{self.param.field_name: mu})
        return _DisplacementSampler(p_mu, self.section, self.config)

    def locate(self, mu: float, previous: list[FamilyPoint],
               widths: list[float]) -> list[FamilyPoint] | None:
        sampler = self.sampler_at(mu)
        located = []
        for prev, width in zip(previous, widths):
            found = self._locate_one(sampler, prev, width)
            if found is None:
                return None
            located.append(FamilyPoint(mu, found[0], found[2], found[1]))
        return located

    def _locate_one(self, sampler, prev: FamilyPoint, width: float):
        lo = max(self.section.x_min, prev.x_star - width)
        hi = min(self.section.x_max, prev.x_star + width)
        try:
            d_lo, _ = sampler.displacement_and_time(lo)
            d_hi, _ = sampler.displacement_and_time(hi)
        except NoReturnError:
            return None
        if d_lo == 0.0 or d_hi == 0.0 or (d_lo > 0.0) == (d_hi > 0.0):
            return None
        x_star, _ = _bisect_zero(sampler, lo, hi, d_lo)
        _, period = sampler.displacement_and_time(x_star)
        stability = (CycleStability.STABLE if d_lo > 0.0
                     else CycleStability.UNSTABLE)
        return x_star, period, stability


def _tracking_widths(points: list[FamilyPoint], fallback: float) -> list[float]:
    xs = sorted(pt.x_star for pt in points)
    widths = []
    for pt in points:
        w = max(fallback, 0.05 * pt.x_star)
        for other in xs:
            gap = abs(other - pt.x_star)
            if gap > 0.0:
                w = min(w, 0.4 * gap)
        widths.append(w)
    return widths


def track_family(p: CanonicalParamsII, param: RotationParam,
                 mu_range: tuple[float, float],
                 policy: ContinuationPolicy = ContinuationPolicy(),
                 section: Section = Section(),
                 config: IntegratorConfig = DEFAULT_CONFIG) -> FamilyCurve:
    """Continue the cycles of the range-start system across ``mu_range``.

    All cycles found at the start parameter are tracked together by
    warm-started bisection.  Termination records whether the range ended,
    the branches met at a fold (the fold parameter is then bisected to
    ``policy.mu_tol``), the cycle shrank into the focus, or its period
    blew up toward a separatrix loop.
    """
    mu_start, mu_end = mu_range
    direction = 1.0 if mu_end >= mu_start else -1.0
    tracker = _ZeroTracker(p, param, section, config)
    start = find_cycles(replace(p, **{param.field_name: mu_start}),
                        section, config)
    if not start.records:
        raise ContinuationError("no cycle at the start of the range", None)
    current = [FamilyPoint(mu_start, r.section_coordinate, r.stability, r.period)
               for r in start.records]
    curve_points = list(current)
    mu = mu_start
    step = policy.initial_step
    refinements = 0
    while True:
        verdict = _proactive_termination(current, section, policy)
        if verdict is not None:
            return FamilyCurve(param, curve_points, verdict)
        if direction * (mu_end - mu) <= 1e-12:
            return FamilyCurve(param, curve_points, FamilyTermination.RANGE_END)
        mu_next = mu + direction * min(step, abs(mu_end - mu))
        widths = _tracking_widths(current, max(4.0 * step, 1e-3))
        located = tracker.locate(mu_next, current, widths)
        if located is not None:
            current = located
            curve_points.extend(located)
            mu = mu_next
            refinements = 0
            continue
        if refinements < policy.max_refinements and step > policy.min_step:
            step = max(policy.min_step, 0.5 * step)
            refinements += 1
            continue
        return _classify_loss(tracker, param, curve_points, current,
                              mu, mu_next, policy, section)


def _proactive_termination(current: list[FamilyPoint], section: Section,
                           policy: ContinuationPolicy):
    if any(pt.x_star < 1.5 * section.x_min for pt in current):
        return FamilyTermination.SHRANK_TO_FOCUS
    if any(pt.period > policy.loop_period for pt in current):
        return FamilyTermination.SEPARATRIX_LOOP
    return None


def _classify_loss(tracker: _ZeroTracker, param: RotationParam,
                   curve_points: list[FamilyPoint],
                   current: list[FamilyPoint], mu_good: float, mu_bad: float,
                   policy: ContinuationPolicy, section: Section) -> FamilyCurve:
    stabilities = {pt.stability for pt in current}
    if len(current) >= 2 and CycleStability.STABLE in stabilities \
            and CycleStability.UNSTABLE in stabilities:
        # Opposite branches vanished together: fold.  Bisect the parameter.
        while abs(mu_bad - mu_good) > policy.mu_tol:
            mu_mid = 0.5 * (mu_good + mu_bad)
            widths = _tracking_widths(current, 1e-3)
            located = tracker.locate(mu_mid, current, widths)
            if located is None:
                mu_bad = mu_mid
            else:
                current = located
                curve_points.extend(located)
                mu_good = mu_mid
        return FamilyCurve(param, curve_points, FamilyTermination.FOLD_DETECTED,
                           fold_mu=0.5 * (mu_good + mu_bad),
                           fold_bracket=(mu_good, mu_bad))
    if any(pt.x_star < 3.0 * section.x_min for pt in current):
        return FamilyCurve(param, curve_points, FamilyTermination.SHRANK_TO_FOCUS)
    if any(pt.period > 25.0 for pt in current):
        return FamilyCurve(param, curve_points, FamilyTermination.SEPARATRIX_LOOP)
    last = curve_points[-1] if curve_points else None
    raise ContinuationError(
        f"lost the cycle between parameter {mu_good!r} and {mu_bad!r}", last)


def count_cycles_around_origin(p: CanonicalParamsII,
                               config: IntegratorConfig = DEFAULT_CONFIG,
                               section: Section = Section()) -> tuple[int, list[LimitCycleRecord]]:
    """Count isolated displacement zeros on the default section.

    The scan grid is refined (nested) until two successive refinements
    agree on the count of bracketed sign changes; the agreed grid then
    feeds full cycle records.  Requires exactly two finite singular
    points.
    """
    census = finite_singular_points(p)
    if len(census) != 2:
        raise PreconditionError(
            f"expected exactly two finite singular points, found {len(census)}")
    sampler = _DisplacementSampler(p, section, config)
    base = 23
    previous = None
    for level in range(5):
        den = base * (2 ** level)
        samples = sampler.grid(den)
        count = (len(_sign_change_brackets(samples))
                 + len(_edge_brackets(sampler, samples)))
        if previous is not None and count == previous:
            result = find_cycles(p, section, config, samples=samples,
                                 sampler=sampler)
            return len(result.records), result.records
        previous = count
    raise InconclusiveCountError("inconclusive")
