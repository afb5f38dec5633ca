"""Finite singular points of the class-II family and their classification.

The parallel-line structure makes the problem one-dimensional and exact:
the vertical isocline consists of the lines y = 0 and (for nu = 1)
y = -1, so singular points are roots of the second component restricted
to each line, found by the quadratic formula rather than 2-D Newton.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

from .errors import PreconditionError, QlcError
from . import flow
from .vectorfield import (CanonicalParamsII, QuadraticCoefficients,
                          canonical_to_general, divergence, evaluate, jacobian)

__all__ = [
    "SingularKind",
    "SingularPoint",
    "ContinuumOfSingularPointsError",
    "ConditionUndefinedError",
    "NotSingularError",
    "NotWeakFocusError",
    "finite_singular_points",
    "classify",
    "kind_from_jacobian",
    "gamma_window",
    "gamma_window_holds",
    "parameter_sum_window",
    "parameter_sum_window_holds",
    "first_lyapunov_sign",
]


class ContinuumOfSingularPointsError(QlcError):
    """An entire isocline line consists of singular points."""


class ConditionUndefinedError(QlcError):
    """A window condition was queried outside its domain of definition."""


class NotSingularError(QlcError):
    """Classification was requested at a point where the field is nonzero."""


class NotWeakFocusError(QlcError):
    """The origin is not a trace-zero focus candidate."""


class SingularKind(Enum):
    SADDLE = "Saddle"
    STABLE_FOCUS = "StableFocus"
    UNSTABLE_FOCUS = "UnstableFocus"
    STABLE_NODE = "StableNode"
    UNSTABLE_NODE = "UnstableNode"
    LINEAR_CENTER = "LinearCenter"
    DEGENERATE = "Degenerate"


# Linear-center classification only sees the linearization; the nonlinear
# character (center vs weak focus) is left to first_lyapunov_sign.
_LINEAR_CENTER_NOTE = "nonlinear character undetermined"

_TRACE_TOL = 1e-12


@dataclass(frozen=True)
class SingularPoint:
    """A finite singular point with its local linear data."""

    location: tuple[float, float]
    jacobian: tuple[tuple[float, float], tuple[float, float]]
    eigenvalues: tuple[complex, complex]
    kind: SingularKind
    divergence: float
    note: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "location": [self.location[0], self.location[1]],
            "jacobian": [list(row) for row in self.jacobian],
            "eigenvalues": [[ev.real, ev.imag] for ev in self.eigenvalues],
            "kind": self.kind.value,
            "divergence": self.divergence,
            "note": self.note,
        }


def kind_from_jacobian(j) -> tuple[SingularKind, tuple[complex, complex]]:
    """Classify a 2x2 Jacobian by determinant, trace, and discriminant."""
    (j11, j12), (j21, j22) = j
    det = j11 * j22 - j12 * j21
    tr = j11 + j22
    scale = max(1.0, abs(j11), abs(j12), abs(j21), abs(j22))
    root = cmath.sqrt(complex(tr * tr - 4.0 * det))
    eigs = (0.5 * (tr - root), 0.5 * (tr + root))
    eigs = tuple(sorted(eigs, key=lambda z: (z.real, z.imag)))
    det_tol = 1e-12 * scale * scale
    if det < -det_tol:
        return SingularKind.SADDLE, eigs
    if abs(det) <= det_tol:
        return SingularKind.DEGENERATE, eigs
    if abs(tr) <= _TRACE_TOL:
        return SingularKind.LINEAR_CENTER, eigs
    if tr * tr - 4.0 * det < 0.0:
        return (SingularKind.STABLE_FOCUS if tr < 0.0
                else SingularKind.UNSTABLE_FOCUS), eigs
    return (SingularKind.STABLE_NODE if tr < 0.0
            else SingularKind.UNSTABLE_NODE), eigs


def classify(system: QuadraticCoefficients, location) -> SingularKind:
    """Kind of the singular point at ``location``.

    ``location`` must actually be singular: the field there may not exceed
    1e-10 in either component.
    """
    vx, vy = evaluate(system, location)
    if max(abs(vx), abs(vy)) > 1e-10:
        raise NotSingularError(
            f"field at {location} is ({vx:.3e}, {vy:.3e}), not singular")
    kind, _ = kind_from_jacobian(jacobian(system, location))
    return kind


def _singular_point(system: QuadraticCoefficients, location) -> SingularPoint:
    j = jacobian(system, location)
    kind, eigs = kind_from_jacobian(j)
    return SingularPoint(
        location=location,
        jacobian=j,
        eigenvalues=eigs,
        kind=kind,
        divergence=j[0][0] + j[1][1],
        note=_LINEAR_CENTER_NOTE if kind is SingularKind.LINEAR_CENTER else None,
    )


def _real_roots(a: float, b: float, c: float) -> list[float]:
    """Real roots of a*x^2 + b*x + c, with the degenerate cases spelled out."""
    scale = max(abs(a), abs(b), abs(c))
    if scale == 0.0:
        raise ContinuumOfSingularPointsError("continuum of singular points")
    tiny = 1e-14 * scale
    if abs(a) <= tiny:
        if abs(b) <= tiny:
            if abs(c) <= tiny:
                raise ContinuumOfSingularPointsError("continuum of singular points")
            return []
        return [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    if disc == 0.0:
        return [-b / (2.0 * a)]
    root = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(root, b)) if b != 0.0 else 0.5 * root
    x1 = q / a
    x2 = c / q if q != 0.0 else -b / a - x1
    return sorted((x1, x2))


def _polish_root(a: float, b: float, c: float, x: float) -> float:
    slope = 2.0 * a * x + b
    if slope != 0.0:
        x -= (a * x * x + b * x + c) / slope
    return x + 0.0  # normalizes -0.0


def finite_singular_points(p: CanonicalParamsII) -> list[SingularPoint]:
    """All real finite singular points of the canonical system, sorted by (x, y).

    The second component restricted to y = 0 is x + a*x^2; restricted to
    y = -1 (present only for nu = 1) it is a quadratic whose coefficients
    follow from the parameter embedding.  An identically vanishing
    restricted quadratic raises, since then a whole line is singular.
    """
    system = canonical_to_general(p)
    points: list[SingularPoint] = []
    lines = [0.0] if p.nu == 0 else [0.0, -1.0]
    for y0 in lines:
        a = system.b20
        b = system.b10 + system.b11 * y0
        c = system.b00 + (system.b01 + system.b02 * y0) * y0
        for x0 in _real_roots(a, b, c):
            x0 = _polish_root(a, b, c, x0)
            points.append(_singular_point(system, (x0, y0)))
    points.sort(key=lambda sp: (sp.location[0], sp.location[1]))
    return points


def gamma_window(c: float) -> tuple[float, float]:
    """Endpoints of the gamma interval keeping the companion line root-free.

    Defined only for c*(c-1) >= 0.  Inside the open window the quadratic
    obtained by restricting the gamma-only system to the second isocline
    line has negative discriminant, so exactly two finite singular points
    remain: the saddle and the anti-saddle.
    """
    rad = c * (c - 1.0)
    if rad < 0.0:
        raise ConditionUndefinedError("condition undefined")
    root = math.sqrt(rad)
    return (-1.0 + 2.0 * (c - root), -1.0 + 2.0 * (c + root))


def gamma_window_holds(c: float, gamma: float) -> bool:
    """Whether gamma lies strictly inside :func:`gamma_window`."""
    lo, hi = gamma_window(c)
    return lo < gamma < hi


def parameter_sum_window(c: float, gamma: float) -> tuple[float, float]:
    """Window on beta + gamma + lambda keeping two finite singularities.

    Defined only for 4*c*gamma - 1 >= 0.  The window is sufficient (not
    necessary) for the two-singularity configuration whenever
    beta + gamma >= 0 and lambda >= 0.
    """
    rad = 4.0 * c * gamma - 1.0
    if rad < 0.0:
        raise ConditionUndefinedError("condition undefined")
    root = math.sqrt(rad)
    return (-1.0 - root, -1.0 + root)


def parameter_sum_window_holds(c: float, gamma: float, beta: float,
                               lam: float) -> bool:
    """Whether beta + gamma + lambda lies strictly inside :func:`parameter_sum_window`."""
    lo, hi = parameter_sum_window(c, gamma)
    return lo < beta + gamma + lam < hi


def _displacement_at_radii(system: QuadraticCoefficients, radii,
                           config: flow.IntegratorConfig) -> list[float]:
    section = flow.Section()
    out = []
    for r in radii:
        point, _ = flow.next_section_crossing(system, section.point_at(r),
                                              section, 1, config)
        out.append(section.along(point) - r)
    return out


def _sign_estimate(displacements) -> int:
    if max(abs(d) for d in displacements) < 1e-8:
        return 0
    signs = {1 if d > 0.0 else -1 for d in displacements if abs(d) > 1e-9}
    if len(signs) != 1:
        raise QlcError("focus quantity estimate has inconsistent signs")
    return signs.pop()


def first_lyapunov_sign(p: CanonicalParamsII,
                        config: flow.IntegratorConfig = flow.DEFAULT_CONFIG) -> int:
    """Sign of the leading displacement coefficient at a trace-zero origin.

    Estimates the cubic coefficient of the return-map displacement on the
    positive x-axis from radii (0.01, 0.02, 0.04) and confirms the sign is
    stable under halving the radii.  Returns -1 (stable weak focus), +1
    (unstable weak focus), or 0 when every displacement stays below the
    estimator noise floor, as for the zero-divergence member.
    """
    system = canonical_to_general(p)
    j = jacobian(system, (0.0, 0.0))
    tr = j[0][0] + j[1][1]
    det = j[0][0] * j[1][1] - j[0][1] * j[1][0]
    if abs(tr) > _TRACE_TOL or det <= 0.0:
        raise NotWeakFocusError("not a weak focus candidate")
    base = (0.01, 0.02, 0.04)
    coarse = _sign_estimate(_displacement_at_radii(system, base, config))
    fine = _sign_estimate(_displacement_at_radii(
        system, tuple(0.5 * r for r in base), config))
    if coarse != fine:
        raise QlcError("focus quantity estimate unstable under radius halving")
    return coarse
