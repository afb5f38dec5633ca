"""Nullcline conics and their degeneracy classification.

The defining geometry of the class-II family is that the vertical isocline
(xdot = 0) is a product of two parallel straight lines.  This module
extracts the nullcline conics of a quadratic system and factors degenerate
conics into lines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import QlcError
from .vectorfield import QuadraticCoefficients

__all__ = [
    "ConicCurve",
    "Line",
    "IsoclineTag",
    "IsoclineClass",
    "nullcline_conics",
    "classify_conic",
    "conic_from_lines",
]

# Degeneracy threshold relative to the largest coefficient magnitude.
# Inputs are exact canonical forms, so only representation noise is absorbed.
_DEGENERACY_TOL = 1e-10


class FactorizationError(QlcError):
    """A conic flagged as degenerate failed to split into real lines."""


@dataclass(frozen=True)
class Line:
    """Oriented line nx*x + ny*y + offset = 0 with unit normal (nx, ny).

    Normals are normalized so the first nonzero component is positive,
    which makes line comparison deterministic.
    """

    nx: float
    ny: float
    offset: float

    @classmethod
    def normalized(cls, nx: float, ny: float, offset: float) -> "Line":
        norm = math.hypot(nx, ny)
        if norm == 0.0:
            raise ValueError("line normal must be nonzero")
        nx, ny, offset = nx / norm, ny / norm, offset / norm
        lead = nx if abs(nx) > 1e-14 else ny
        if lead < 0.0:
            nx, ny, offset = -nx, -ny, -offset
        return cls(nx + 0.0, ny + 0.0, offset + 0.0)

    def evaluate(self, point) -> float:
        return self.nx * point[0] + self.ny * point[1] + self.offset


@dataclass(frozen=True)
class ConicCurve:
    """Bivariate quadratic c00 + c10*x + c01*y + c20*x^2 + c11*x*y + c02*y^2."""

    c00: float
    c10: float
    c01: float
    c20: float
    c11: float
    c02: float

    def evaluate(self, point) -> float:
        x, y = point
        return (self.c00 + self.c10 * x + self.c01 * y
                + self.c20 * x * x + self.c11 * x * y + self.c02 * y * y)

    def coefficients(self) -> tuple[float, ...]:
        return (self.c00, self.c10, self.c01, self.c20, self.c11, self.c02)


class IsoclineTag(Enum):
    TWO_PARALLEL_LINES = "TwoParallelLines"
    TWO_INTERSECTING_LINES = "TwoIntersectingLines"
    DOUBLE_LINE = "DoubleLine"
    SINGLE_LINE = "SingleLine"
    IRREDUCIBLE_CONIC = "IrreducibleConic"
    EMPTY_OR_WHOLE_PLANE = "EmptyOrWholePlane"


@dataclass(frozen=True)
class IsoclineClass:
    """Classification tag plus the extracted lines, when applicable."""

    tag: IsoclineTag
    lines: tuple[Line, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "tag": self.tag.value,
            "lines": [
                {"nx": ln.nx, "ny": ln.ny, "offset": ln.offset}
                for ln in self.lines
            ],
        }


def nullcline_conics(system: QuadraticCoefficients) -> tuple[ConicCurve, ConicCurve]:
    """The (vertical, horizontal) nullcline conics: loci xdot = 0 and ydot = 0."""
    vertical = ConicCurve(system.a00, system.a10, system.a01,
                          system.a20, system.a11, system.a02)
    horizontal = ConicCurve(system.b00, system.b10, system.b01,
                            system.b20, system.b11, system.b02)
    return vertical, horizontal


def conic_from_lines(first: Line, second: Line, scale: float = 1.0) -> ConicCurve:
    """Multiply two lines out into a conic (test oracle for the factorization)."""
    a1, b1, d1 = first.nx, first.ny, first.offset
    a2, b2, d2 = second.nx, second.ny, second.offset
    return ConicCurve(
        c00=scale * d1 * d2,
        c10=scale * (a1 * d2 + a2 * d1),
        c01=scale * (b1 * d2 + b2 * d1),
        c20=scale * a1 * a2,
        c11=scale * (a1 * b2 + a2 * b1),
        c02=scale * b1 * b2,
    )


def classify_conic(conic: ConicCurve) -> IsoclineClass:
    """Classify a conic and, when it degenerates, split it into real lines.

    A conic counts as degenerate when the determinant of its extended 3x3
    matrix falls below ``1e-10`` after scaling the coefficients to unit
    maximum magnitude.  Complex line pairs (no real points, or a single
    real point) land in the EmptyOrWholePlane bucket; genuinely irreducible
    conics in IrreducibleConic.
    """
    coeffs = conic.coefficients()
    scale = max(abs(v) for v in coeffs)
    if scale == 0.0:
        return IsoclineClass(IsoclineTag.EMPTY_OR_WHOLE_PLANE)
    c00, c10, c01, c20, c11, c02 = (v / scale for v in coeffs)
    tol = _DEGENERACY_TOL

    if abs(c20) <= tol and abs(c11) <= tol and abs(c02) <= tol:
        if abs(c10) <= tol and abs(c01) <= tol:
            return IsoclineClass(IsoclineTag.EMPTY_OR_WHOLE_PLANE)
        return IsoclineClass(IsoclineTag.SINGLE_LINE,
                             (Line.normalized(c10, c01, c00),))

    det_ext = (c20 * (c02 * c00 - 0.25 * c01 * c01)
               - 0.5 * c11 * (0.5 * c11 * c00 - 0.25 * c01 * c10)
               + 0.5 * c10 * (0.25 * c11 * c01 - 0.5 * c02 * c10))
    if abs(det_ext) > tol:
        return IsoclineClass(IsoclineTag.IRREDUCIBLE_CONIC)

    disc = c11 * c11 - 4.0 * c20 * c02
    klass = _split_degenerate(c00, c10, c01, c20, c11, c02, disc, tol)
    _check_reconstruction(conic, klass, scale)
    return klass


def _split_degenerate(c00, c10, c01, c20, c11, c02, disc, tol) -> IsoclineClass:
    if disc > tol:
        return _split_intersecting(c00, c10, c01, c20, c11, c02, tol)
    if disc < -tol:
        # Complex intersecting pair: the real locus is a single point.
        return IsoclineClass(IsoclineTag.EMPTY_OR_WHOLE_PLANE)
    return _split_parallel(c00, c10, c01, c20, c11, c02, tol)


def _split_intersecting(c00, c10, c01, c20, c11, c02, tol) -> IsoclineClass:
    if abs(c20) > tol:
        root = math.sqrt(c11 * c11 - 4.0 * c20 * c02)
        r1 = (-c11 + root) / (2.0 * c20)
        r2 = (-c11 - root) / (2.0 * c20)
        # c(x,y) = c20 * (x - r1*y + d1) * (x - r2*y + d2); match x and y terms.
        rhs1 = c10 / c20
        rhs2 = c01 / c20
        det = r2 - r1
        d1 = (-r1 * rhs1 - rhs2) / det
        d2 = (r2 * rhs1 + rhs2) / det
        lines = (Line.normalized(1.0, -r1, d1), Line.normalized(1.0, -r2, d2))
        return IsoclineClass(IsoclineTag.TWO_INTERSECTING_LINES, _ordered(lines))
    if abs(c02) > tol:
        flipped = _split_intersecting(c00, c01, c10, c02, c11, c20, tol)
        return IsoclineClass(flipped.tag, _swap_axes(flipped.lines))
    # Pure cross term: c11*x*y + c10*x + c01*y + c00.
    lines = (Line.normalized(1.0, 0.0, c01 / c11),
             Line.normalized(0.0, 1.0, c10 / c11))
    return IsoclineClass(IsoclineTag.TWO_INTERSECTING_LINES, _ordered(lines))


def _split_parallel(c00, c10, c01, c20, c11, c02, tol) -> IsoclineClass:
    if abs(c20) <= tol and abs(c02) > tol:
        flipped = _split_parallel(c00, c01, c10, c02, c11, c20, tol)
        return IsoclineClass(flipped.tag, _swap_axes(flipped.lines))
    if abs(c20) <= tol:
        raise FactorizationError("degenerate conic with vanishing quadratic part")
    # c(x,y) = c20 * (x - r*y + d1) * (x - r*y + d2) with a double direction.
    r = -c11 / (2.0 * c20)
    s = c10 / c20
    prod = c00 / c20
    gap = s * s - 4.0 * prod
    if gap > tol:
        root = math.sqrt(gap)
        lines = (Line.normalized(1.0, -r, 0.5 * (s + root)),
                 Line.normalized(1.0, -r, 0.5 * (s - root)))
        return IsoclineClass(IsoclineTag.TWO_PARALLEL_LINES, _ordered(lines))
    if gap < -tol:
        # Complex parallel pair: no real points.
        return IsoclineClass(IsoclineTag.EMPTY_OR_WHOLE_PLANE)
    return IsoclineClass(IsoclineTag.DOUBLE_LINE,
                         (Line.normalized(1.0, -r, 0.5 * s),))


def _swap_axes(lines) -> tuple[Line, ...]:
    return _ordered(tuple(Line.normalized(ln.ny, ln.nx, ln.offset) for ln in lines))


def _ordered(lines) -> tuple[Line, ...]:
    return tuple(sorted(lines, key=lambda ln: (ln.nx, ln.ny, ln.offset)))


def _check_reconstruction(conic: ConicCurve, klass: IsoclineClass, scale: float):
    """Verify the factored lines reproduce the conic coefficients."""
    if klass.tag in (IsoclineTag.EMPTY_OR_WHOLE_PLANE, IsoclineTag.SINGLE_LINE,
                     IsoclineTag.IRREDUCIBLE_CONIC):
        return
    if klass.tag is IsoclineTag.DOUBLE_LINE:
        first = second = klass.lines[0]
    else:
        first, second = klass.lines
    rebuilt = conic_from_lines(first, second)
    # Solve for the best scalar multiple, then compare slot by slot.
    num = sum(a * b for a, b in zip(rebuilt.coefficients(), conic.coefficients()))
    den = sum(a * a for a in rebuilt.coefficients())
    factor = num / den
    worst = max(abs(factor * a - b)
                for a, b in zip(rebuilt.coefficients(), conic.coefficients()))
    if worst > 1e-10 * scale:
        raise FactorizationError(
            f"line factorization residual {worst:.3e} exceeds tolerance")
