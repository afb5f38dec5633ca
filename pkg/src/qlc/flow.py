"""Trajectory integration with section-crossing event location.

The integrator is an embedded Dormand-Prince 5(4) pair with adaptive step
control, cubic Hermite dense output, and FSAL stage reuse.  Quadratic
fields are smooth and non-stiff inside the domain of interest, so no
implicit machinery is needed.  Section crossings are bracketed per
accepted step, bisected on the dense output to ``|offset| <= 1e-11``, and
then polished with Newton iterations against single fifth-order steps so
the reported crossing is accurate at the integration tolerance, not merely
at the interpolant's.

Everything here is reentrant: no shared mutable state, and identical
inputs produce bitwise-identical outputs within one build.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import QlcError
from .vectorfield import QuadraticCoefficients, rhs

__all__ = [
    "FlowError",
    "NoReturnError",
    "TransversalityError",
    "TerminalStatus",
    "IntegratorConfig",
    "DEFAULT_CONFIG",
    "Section",
    "Trajectory",
    "integrate",
    "next_section_crossing",
]


class FlowError(QlcError):
    """Step-size underflow or another unrecoverable integration failure."""


class NoReturnError(QlcError):
    """No section crossing occurred before the trajectory terminated."""

    def __init__(self, message: str, status: "TerminalStatus"):
        super().__init__(message)
        self.status = status


class TransversalityError(QlcError):
    """The flow crossed a section at a near-tangency."""


class TerminalStatus(Enum):
    TIME_EXHAUSTED = "TimeExhausted"
    LEFT_DOMAIN = "LeftDomain"
    CONVERGED_TO_POINT = "ConvergedToPoint"
    EVENT_LIMIT_REACHED = "EventLimitReached"


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and guards for the adaptive integrator."""

    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = 0.1
    max_time: float = 500.0
    domain: tuple[tuple[float, float], tuple[float, float]] = ((-10.0, 10.0), (-10.0, 10.0))

    def __post_init__(self):
        if self.rtol <= 0.0 or self.atol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_time <= 0.0:
            raise ValueError("max_time must be positive")

    def tightened(self, factor: float) -> "IntegratorConfig":
        """A copy with both tolerances divided by ``factor``."""
        return IntegratorConfig(self.rtol / factor, self.atol / factor,
                                self.max_step, self.max_time, self.domain)


DEFAULT_CONFIG = IntegratorConfig()


@dataclass(frozen=True)
class Section:
    """Ray section: base point plus unit direction, with a sampling range.

    The signed event coordinate of a point is its component along the left
    normal of ``direction``; crossings with positive orientation pass from
    negative to positive offset.  The parameter range bounds where cycle
    scans place their samples; it does not clip crossing detection, which
    accepts any crossing on the positive side of the base point.
    """

    base: tuple[float, float] = (0.0, 0.0)
    direction: tuple[float, float] = (1.0, 0.0)
    x_min: float = 1e-3
    x_max: float = 0.95

    def __post_init__(self):
        norm = math.hypot(*self.direction)
        if norm == 0.0:
            raise ValueError("section direction must be nonzero")
        object.__setattr__(self, "direction",
                           (self.direction[0] / norm, self.direction[1] / norm))
        if not self.x_min > 0.0:
            raise ValueError("section range must start at positive coordinate")
        if not self.x_max > self.x_min:
            raise ValueError("section range must be nonempty")

    @property
    def normal(self) -> tuple[float, float]:
        return (-self.direction[1], self.direction[0])

    def along(self, point) -> float:
        return (self.direction[0] * (point[0] - self.base[0])
                + self.direction[1] * (point[1] - self.base[1]))

    def offset(self, point) -> float:
        return (-self.direction[1] * (point[0] - self.base[0])
                + self.direction[0] * (point[1] - self.base[1]))

    def point_at(self, coordinate: float) -> tuple[float, float]:
        return (self.base[0] + coordinate * self.direction[0],
                self.base[1] + coordinate * self.direction[1])


@dataclass
class Trajectory:
    """Integration output: elapsed times, points, and why stepping stopped.

    Times are elapsed integration time and strictly increase; for a
    negative requested duration the points follow the time-reversed flow.
    """

    times: list[float] = field(default_factory=list)
    points: list[tuple[float, float]] = field(default_factory=list)
    status: TerminalStatus = TerminalStatus.TIME_EXHAUSTED


# Dormand-Prince 5(4) tableau.
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


def _dopri_step(f, x, y, fx, fy, h):
    """One fifth-order step of size ``h``; returns (x1, y1, fx1, fy1, ex, ey).

    (ex, ey) is the embedded fourth-order error estimate; (fx1, fy1) is the
    FSAL derivative at the step end.
    """
    k2x, k2y = f(x + h * _A21 * fx, y + h * _A21 * fy)
    k3x, k3y = f(x + h * (_A31 * fx + _A32 * k2x),
                 y + h * (_A31 * fy + _A32 * k2y))
    k4x, k4y = f(x + h * (_A41 * fx + _A42 * k2x + _A43 * k3x),
                 y + h * (_A41 * fy + _A42 * k2y + _A43 * k3y))
    k5x, k5y = f(x + h * (_A51 * fx + _A52 * k2x + _A53 * k3x + _A54 * k4x),
                 y + h * (_A51 * fy + _A52 * k2y + _A53 * k3y + _A54 * k4y))
    k6x, k6y = f(x + h * (_A61 * fx + _A62 * k2x + _A63 * k3x + _A64 * k4x + _A65 * k5x),
                 y + h * (_A61 * fy + _A62 * k2y + _A63 * k3y + _A64 * k4y + _A65 * k5y))
    x1 = x + h * (_B1 * fx + _B3 * k3x + _B4 * k4x + _B5 * k5x + _B6 * k6x)
    y1 = y + h * (_B1 * fy + _B3 * k3y + _B4 * k4y + _B5 * k5y + _B6 * k6y)
    fx1, fy1 = f(x1, y1)
    ex = h * (_E1 * fx + _E3 * k3x + _E4 * k4x + _E5 * k5x + _E6 * k6x + _E7 * fx1)
    ey = h * (_E1 * fy + _E3 * k3y + _E4 * k4y + _E5 * k5y + _E6 * k6y + _E7 * fy1)
    return x1, y1, fx1, fy1, ex, ey


def _hermite(x0, y0, fx0, fy0, x1, y1, fx1, fy1, h, tau):
    """Cubic Hermite dense output at 0 <= tau <= h."""
    s = tau / h
    u = 1.0 - s
    h00 = (1.0 + 2.0 * s) * u * u
    h10 = s * u * u
    h01 = s * s * (3.0 - 2.0 * s)
    h11 = s * s * (s - 1.0)
    return (h00 * x0 + h10 * h * fx0 + h01 * x1 + h11 * h * fx1,
            h00 * y0 + h10 * h * fy0 + h01 * y1 + h11 * h * fy1)


class _Stepper:
    """Adaptive stepping loop over a bound time span.

    ``step()`` advances one accepted step and returns True, or returns
    False once a terminal condition holds (``status`` says which).  The
    last accepted step is kept as ``(t0, x0, y0, fx0, fy0, t1, x1, y1,
    fx1, fy1)`` for dense-output consumers.
    """

    def __init__(self, f, start, config: IntegratorConfig, t_bound: float):
        self.f = f
        self.config = config
        self.t_bound = t_bound
        self.t = 0.0
        self.x, self.y = float(start[0]), float(start[1])
        self.fx, self.fy = f(self.x, self.y)
        self.status: TerminalStatus | None = None
        self.last_step = None
        self._conv_speed = 10.0 * config.atol
        if not self._inside_domain(self.x, self.y):
            self.status = TerminalStatus.LEFT_DOMAIN
        elif math.hypot(self.fx, self.fy) < self._conv_speed:
            self.status = TerminalStatus.CONVERGED_TO_POINT
        self.h = self._initial_step()

    def _inside_domain(self, x, y) -> bool:
        (x_lo, x_hi), (y_lo, y_hi) = self.config.domain
        return x_lo <= x <= x_hi and y_lo <= y <= y_hi

    def _initial_step(self) -> float:
        sx = self.config.atol + self.config.rtol * abs(self.x)
        sy = self.config.atol + self.config.rtol * abs(self.y)
        d0 = math.sqrt(0.5 * ((self.x / sx) ** 2 + (self.y / sy) ** 2))
        d1 = math.sqrt(0.5 * ((self.fx / sx) ** 2 + (self.fy / sy) ** 2))
        if d0 < 1e-5 or d1 < 1e-5:
            h = 1e-6
        else:
            h = 0.01 * d0 / d1
        return min(h, self.config.max_step, self.t_bound if self.t_bound > 0 else h)

    def step(self) -> bool:
        if self.status is not None:
            return False
        remaining = self.t_bound - self.t
        if remaining <= 1e-14 * max(1.0, abs(self.t_bound)):
            self.status = TerminalStatus.TIME_EXHAUSTED
            return False
        cfg = self.config
        h = min(self.h, cfg.max_step, remaining)
        while True:
            if h < 1e-14 * max(1.0, abs(self.t)):
                raise FlowError(f"stiffness/underflow at t={self.t!r}")
            x1, y1, fx1, fy1, ex, ey = _dopri_step(self.f, self.x, self.y,
                                                   self.fx, self.fy, h)
            sx = cfg.atol + cfg.rtol * max(abs(self.x), abs(x1))
            sy = cfg.atol + cfg.rtol * max(abs(self.y), abs(y1))
            err = math.sqrt(0.5 * ((ex / sx) ** 2 + (ey / sy) ** 2))
            if err <= 1.0:
                break
            h *= max(_MIN_FACTOR, _SAFETY * err ** -0.2)
        factor = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR,
                                                    max(_MIN_FACTOR, _SAFETY * err ** -0.2))
        self.h = min(h * factor, cfg.max_step)
        self.last_step = (self.t, self.x, self.y, self.fx, self.fy,
                          self.t + h, x1, y1, fx1, fy1)
        self.t += h
        self.x, self.y, self.fx, self.fy = x1, y1, fx1, fy1
        if not self._inside_domain(x1, y1):
            self.status = TerminalStatus.LEFT_DOMAIN
        elif math.hypot(fx1, fy1) < self._conv_speed:
            self.status = TerminalStatus.CONVERGED_TO_POINT
        return True


class _CrossingDetector:
    """Per-step detector for oriented transversal crossings of a section ray.

    A start on the section is handled with a release collar: crossings only
    count once the trajectory has left ``|offset| > collar``.  Crossings on
    the negative side of the base point are ignored.
    """

    def __init__(self, section: Section, direction: int, f, start,
                 collar: float = 1e-8):
        self.section = section
        self.direction = direction
        self.f = f
        self.collar = collar
        self.released = abs(section.offset(start)) > collar

    def observe(self, step) -> tuple[tuple[float, float], float] | None:
        t0, x0, y0, fx0, fy0, t1, x1, y1, fx1, fy1 = step
        s0 = self.section.offset((x0, y0))
        s1 = self.section.offset((x1, y1))
        if not self.released:
            if abs(s1) > self.collar:
                self.released = True
            return None
        if self.direction >= 0 and s0 < 0.0 <= s1:
            pass
        elif self.direction <= 0 and s0 > 0.0 >= s1:
            pass
        else:
            return None
        point, tau = self._locate(step, s0, s1)
        if self.section.along(point) <= 0.0:
            return None
        fx, fy = self.f(point[0], point[1])
        speed = math.hypot(fx, fy)
        trans = abs(self.section.normal[0] * fx + self.section.normal[1] * fy)
        if speed > 0.0 and trans < math.sin(1e-3) * speed:
            raise TransversalityError("section crossing below transversality angle")
        return point, t0 + tau

    def _locate(self, step, s0, s1):
        t0, x0, y0, fx0, fy0, t1, x1, y1, fx1, fy1 = step
        h = t1 - t0
        sec = self.section
        # Bisection on the cubic Hermite interpolant.
        ta, tb, sa = 0.0, h, s0
        tau, point = 0.5 * h, (x0, y0)
        for _ in range(120):
            tau = 0.5 * (ta + tb)
            point = _hermite(x0, y0, fx0, fy0, x1, y1, fx1, fy1, h, tau)
            sm = sec.offset(point)
            if abs(sm) <= 1e-12 or (tb - ta) <= 1e-16 * h:
                break
            if (sm > 0.0) == (sa > 0.0):
                ta, sa = tau, sm
            else:
                tb = tau
        # Newton polish against full-accuracy single steps from the step start.
        nx, ny = sec.normal
        for _ in range(6):
            px, py, pfx, pfy, _, _ = _dopri_step(self.f, x0, y0, fx0, fy0, tau)
            g = sec.offset((px, py))
            point = (px, py)
            gp = nx * pfx + ny * pfy
            if abs(g) <= 1e-13 or gp == 0.0:
                break
            tau_new = tau - g / gp
            if not 0.0 <= tau_new <= h:
                break
            if tau_new == tau:
                break
            tau = tau_new
        return point, tau


def integrate(system: QuadraticCoefficients, start, duration: float,
              config: IntegratorConfig = DEFAULT_CONFIG) -> Trajectory:
    """Integrate from ``start`` for ``duration`` time units.

    Negative ``duration`` follows the time-reversed flow; reported times
    are elapsed and increase either way.  Terminal status records whether
    the span completed, the trajectory left the domain box, or it reached
    an equilibrium (speed below ten times the absolute tolerance).
    """
    f = rhs(system)
    if duration < 0.0:
        forward = f

        def f(x, y, _forward=forward):
            u, v = _forward(x, y)
            return (-u, -v)

    span = abs(float(duration))
    stepper = _Stepper(f, start, config, span)
    traj = Trajectory(times=[0.0], points=[(float(start[0]), float(start[1]))])
    while stepper.step():
        traj.times.append(stepper.t)
        traj.points.append((stepper.x, stepper.y))
    traj.status = stepper.status
    return traj


def next_section_crossing(system: QuadraticCoefficients, start, section: Section,
                          direction: int = 1,
                          config: IntegratorConfig = DEFAULT_CONFIG,
                          max_time: float | None = None,
                          collect: Trajectory | None = None) -> tuple[tuple[float, float], float]:
    """First oriented transversal crossing of the section ray after ``start``.

    ``direction=+1`` selects crossings from negative to positive section
    offset, ``-1`` the reverse.  A start on the section is released from a
    1e-8 collar before crossings count.  When ``collect`` is given, the
    accepted steps (ending with the crossing point) are appended to it.

    Raises :class:`NoReturnError` if the trajectory terminates or exceeds
    the time bound before crossing.
    """
    f = rhs(system)
    stepper = _Stepper(f, start, config,
                       config.max_time if max_time is None else max_time)
    detector = _CrossingDetector(section, direction, f, start)
    if collect is not None:
        collect.times.append(0.0)
        collect.points.append((float(start[0]), float(start[1])))
    while stepper.step():
        found = detector.observe(stepper.last_step)
        if found is not None:
            point, t_cross = found
            if collect is not None:
                collect.times.append(t_cross)
                collect.points.append(point)
                collect.status = TerminalStatus.EVENT_LIMIT_REACHED
            return point, t_cross
        if collect is not None:
            collect.times.append(stepper.t)
            collect.points.append((stepper.x, stepper.y))
    if collect is not None:
        collect.status = stepper.status
    raise NoReturnError("no return", stepper.status)
