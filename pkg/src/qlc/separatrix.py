"""Saddle separatrices and separatrix-loop bifurcation values.

The loop bifurcation is located by outcome bisection: the unstable
separatrix leaving the saddle toward the origin either winds onto the
attracting structure around the focus or misses it and leaves (escaping
the domain or swinging back past the saddle).  The parameter value where
the outcome flips brackets the homoclinic loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .errors import QlcError
from .flow import (DEFAULT_CONFIG, IntegratorConfig, Section, TerminalStatus,
                   Trajectory, _CrossingDetector, _Stepper)
from .rotation import RotationParam
from .singular import SingularKind, finite_singular_points
from .vectorfield import (CanonicalParamsII, QuadraticCoefficients,
                          canonical_to_general, jacobian, rhs)

__all__ = [
    "NotASaddleError",
    "UndecidedError",
    "NoBracketError",
    "SaddleFrame",
    "SeparatrixTag",
    "SeparatrixOutcome",
    "LoopResult",
    "saddle_frame",
    "classify_unstable_separatrix",
    "find_loop_parameter",
]


class NotASaddleError(QlcError):
    """The supplied point is not a saddle."""


class UndecidedError(QlcError):
    """The separatrix could not be classified before the time bound."""


class NoBracketError(QlcError):
    """The bisection bracket does not straddle an outcome change."""


# Classification geometry: the separatrix counts as spiraling once this
# many successive section returns decrease monotonically; it counts as
# back near the saddle when it re-enters the re-entry ball after having
# left the departure ball.
_SPIRAL_RETURNS = 3
_REENTRY_RADIUS = 1e-3
_DEPARTURE_RADIUS = 0.05


@dataclass(frozen=True)
class SaddleFrame:
    """Saddle location with its eigenphysics and the seeding offset.

    Eigenvectors are unit length and oriented toward the half-plane
    containing the focus the loop is expected to surround.
    """

    saddle: tuple[float, float]
    unstable_value: float
    unstable_vector: tuple[float, float]
    stable_value: float
    stable_vector: tuple[float, float]
    epsilon: float = 1e-6

    def seed(self) -> tuple[float, float]:
        return (self.saddle[0] + self.epsilon * self.unstable_vector[0],
                self.saddle[1] + self.epsilon * self.unstable_vector[1])


class SeparatrixTag(Enum):
    SPIRALS_TO_FOCUS_REGION = "SpiralsToFocusRegion"
    ESCAPES_DOMAIN = "EscapesDomain"
    RETURNS_NEAR_SADDLE = "ReturnsNearSaddle"


@dataclass
class SeparatrixOutcome:
    """Classification tag plus the witnessing trajectory.

    Witness status mapping: EscapesDomain pairs with LeftDomain;
    SpiralsToFocusRegion with ConvergedToPoint or EventLimitReached (the
    monotone-return criterion fired); ReturnsNearSaddle with
    EventLimitReached plus saddle proximity of the final point.
    """

    tag: SeparatrixTag
    witness: Trajectory


def _eigenvector(j, eigenvalue: float) -> tuple[float, float]:
    (j11, j12), (j21, j22) = j
    v1 = (j12, eigenvalue - j11)
    v2 = (eigenvalue - j22, j21)
    v = v1 if math.hypot(*v1) >= math.hypot(*v2) else v2
    norm = math.hypot(*v)
    return (v[0] / norm, v[1] / norm)


def saddle_frame(system: QuadraticCoefficients, saddle,
                 focus=(0.0, 0.0)) -> SaddleFrame:
    """Eigendecomposition of the Jacobian at a saddle.

    Both eigenvectors are flipped, if needed, to point into the half-plane
    of ``focus`` (positive component along focus - saddle).
    """
    j = jacobian(system, saddle)
    tr = j[0][0] + j[1][1]
    det = j[0][0] * j[1][1] - j[0][1] * j[1][0]
    disc = tr * tr - 4.0 * det
    if det >= 0.0 or disc <= 0.0:
        raise NotASaddleError(f"point {saddle} is not a saddle (det={det:.3e})")
    root = math.sqrt(disc)
    lam_unstable = 0.5 * (tr + root)
    lam_stable = 0.5 * (tr - root)
    toward = (focus[0] - saddle[0], focus[1] - saddle[1])
    vectors = []
    for lam in (lam_unstable, lam_stable):
        v = _eigenvector(j, lam)
        if v[0] * toward[0] + v[1] * toward[1] < 0.0:
            v = (-v[0], -v[1])
        residual = math.hypot(j[0][0] * v[0] + j[0][1] * v[1] - lam * v[0],
                              j[1][0] * v[0] + j[1][1] * v[1] - lam * v[1])
        if residual > 1e-10:
            raise QlcError(f"eigenvector residual {residual:.3e} too large")
        vectors.append(v)
    return SaddleFrame(
        saddle=(float(saddle[0]), float(saddle[1])),
        unstable_value=lam_unstable,
        unstable_vector=vectors[0],
        stable_value=lam_stable,
        stable_vector=vectors[1],
    )


def classify_unstable_separatrix(p: CanonicalParamsII, frame: SaddleFrame,
                                 config: IntegratorConfig = DEFAULT_CONFIG,
                                 section: Section = Section()) -> SeparatrixOutcome:
    """Follow the origin-side unstable separatrix and classify its fate.

    Outcomes: SpiralsToFocusRegion when the trajectory converges to a
    point or produces three monotonically decreasing section returns
    (winding onto the focus or an enclosing cycle); EscapesDomain on
    domain-box exit; ReturnsNearSaddle when it re-enters a small ball
    around the saddle after having genuinely departed.
    """
    system = canonical_to_general(p)
    f = rhs(system)
    start = frame.seed()
    stepper = _Stepper(f, start, config, config.max_time)
    detector = _CrossingDetector(section, 1, f, start)
    witness = Trajectory(times=[0.0], points=[start])
    returns: list[float] = []
    departed = False
    streak = 0
    while stepper.step():
        crossing = detector.observe(stepper.last_step)
        if crossing is not None:
            point, t_cross = crossing
            coord = section.along(point)
            if returns and coord < returns[-1]:
                streak += 1
            else:
                streak = 0
            returns.append(coord)
            if streak >= _SPIRAL_RETURNS - 1:
                witness.times.append(t_cross)
                witness.points.append(point)
                witness.status = TerminalStatus.EVENT_LIMIT_REACHED
                return SeparatrixOutcome(SeparatrixTag.SPIRALS_TO_FOCUS_REGION,
                                         witness)
        witness.times.append(stepper.t)
        witness.points.append((stepper.x, stepper.y))
        dist = math.hypot(stepper.x - frame.saddle[0],
                          stepper.y - frame.saddle[1])
        if not departed:
            if dist > _DEPARTURE_RADIUS:
                departed = True
        elif dist < _REENTRY_RADIUS:
            witness.status = TerminalStatus.EVENT_LIMIT_REACHED
            return SeparatrixOutcome(SeparatrixTag.RETURNS_NEAR_SADDLE, witness)
    witness.status = stepper.status
    if stepper.status is TerminalStatus.LEFT_DOMAIN:
        return SeparatrixOutcome(SeparatrixTag.ESCAPES_DOMAIN, witness)
    if stepper.status is TerminalStatus.CONVERGED_TO_POINT:
        return SeparatrixOutcome(SeparatrixTag.SPIRALS_TO_FOCUS_REGION, witness)
    raise UndecidedError("undecided")


@dataclass(frozen=True)
class LoopResult:
    param: RotationParam
    value: float
    lo_outcome: SeparatrixTag
    hi_outcome: SeparatrixTag

    def to_json_dict(self) -> dict:
        return {
            "param": self.param.value,
            "value": self.value,
            "lo_outcome": self.lo_outcome.value,
            "hi_outcome": self.hi_outcome.value,
        }


def _saddle_of(p: CanonicalParamsII):
    saddles = [sp for sp in finite_singular_points(p)
               if sp.kind is SingularKind.SADDLE]
    if len(saddles) != 1:
        raise QlcError(f"expected one saddle, found {len(saddles)}")
    return saddles[0].location


def _outcome_at(p: CanonicalParamsII, param: RotationParam, mu: float,
                config: IntegratorConfig, section: Section) -> SeparatrixTag:
    p_mu = replace(p, **{param.field_name: mu})
    frame = saddle_frame(canonical_to_general(p_mu), _saddle_of(p_mu))
    return classify_unstable_separatrix(p_mu, frame, config, section).tag


def find_loop_parameter(p: CanonicalParamsII, param: RotationParam,
                        bracket: tuple[float, float], tol: float = 1e-8,
                        config: IntegratorConfig = DEFAULT_CONFIG,
                        section: Section = Section()) -> LoopResult:
    """Bisect the separatrix outcome change inside ``bracket``.

    The outcomes at the two bracket ends must differ; the returned value
    is the midpoint of the final bracket of width at most ``tol``, with
    the end outcomes attached.
    """
    lo, hi = bracket
    if lo == hi:
        raise NoBracketError("no bracket")
    tag_lo = _outcome_at(p, param, lo, config, section)
    tag_hi = _outcome_at(p, param, hi, config, section)
    if tag_lo == tag_hi:
        raise NoBracketError("no bracket")
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        tag_mid = _outcome_at(p, param, mid, config, section)
        if tag_mid == tag_lo:
            lo = mid
        else:
            hi, tag_hi = mid, tag_mid
    return LoopResult(param=param, value=0.5 * (lo + hi),
                      lo_outcome=tag_lo, hi_outcome=tag_hi)
