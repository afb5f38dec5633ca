"""Planar quadratic vector fields.

The universal exchange format is :class:`QuadraticCoefficients`: the twelve
real coefficients of

    xdot = a00 + a10*x + a01*y + a20*x**2 + a11*x*y + a02*y**2
    ydot = b00 + b10*x + b01*y + b20*x**2 + b11*x*y + b02*y**2

Canonical parameter sets for the two-isocline families are constructors for
this layout, not a separate runtime representation: every downstream
computation evaluates one and the same polynomial form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import QlcError

__all__ = [
    "InvalidSystemError",
    "QuadraticCoefficients",
    "CanonicalParamsI",
    "CanonicalParamsII",
    "canonical_to_general",
    "hamiltonian_case",
    "evaluate",
    "rhs",
    "jacobian",
    "divergence",
    "hamiltonian_energy",
]


class InvalidSystemError(QlcError):
    """The coefficient set is not a genuine quadratic system."""


_QUADRATIC_SLOTS = ("a20", "a11", "a02", "b20", "b11", "b02")


@dataclass(frozen=True)
class QuadraticCoefficients:
    """Coefficients of a planar quadratic system in the fixed 12-slot layout.

    Slots are indexed by monomial degree: ``aij`` multiplies ``x**i * y**j``
    in the first component, ``bij`` in the second.  At least one quadratic
    slot must be nonzero.
    """

    a00: float
    a10: float
    a01: float
    a20: float
    a11: float
    a02: float
    b00: float
    b10: float
    b01: float
    b20: float
    b11: float
    b02: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise InvalidSystemError(f"coefficient {f.name} is not finite")
        if all(getattr(self, name) == 0.0 for name in _QUADRATIC_SLOTS):
            raise InvalidSystemError("all quadratic coefficients vanish")

    def to_json_dict(self) -> dict:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_json_dict(cls, data: dict) -> "QuadraticCoefficients":
        return cls(**{f.name: float(data[f.name]) for f in fields(cls)})


@dataclass(frozen=True)
class CanonicalParamsII:
    """Parameters of the parallel-isocline canonical family (Ye's class II).

    The system is

        xdot = -y * (1 + nu*y)
        ydot = x + (lam + beta + gamma)*y + a*x**2 + (beta + gamma)*x*y
               + c*gamma*y**2

    with ``nu`` restricted to 0 or 1.  ``lam``, ``beta`` and ``gamma`` are
    the three field rotation parameters; ``a`` and ``c`` are fixed shape
    parameters.  Serialized with the JSON key ``"lambda"`` for ``lam``.
    """

    nu: int
    lam: float
    beta: float
    gamma: float
    a: float
    c: float

    def __post_init__(self):
        if self.nu not in (0, 1):
            raise InvalidSystemError("nu must be exactly 0 or 1")
        for name in ("lam", "beta", "gamma", "a", "c"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidSystemError(f"parameter {name} is not finite")

    def to_json_dict(self) -> dict:
        return {
            "nu": int(self.nu),
            "lambda": float(self.lam),
            "beta": float(self.beta),
            "gamma": float(self.gamma),
            "a": float(self.a),
            "c": float(self.c),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CanonicalParamsII":
        return cls(
            nu=int(data["nu"]),
            lam=float(data["lambda"]),
            beta=float(data["beta"]),
            gamma=float(data["gamma"]),
            a=float(data["a"]),
            c=float(data["c"]),
        )


@dataclass(frozen=True)
class CanonicalParamsI:
    """Parameters of the intersecting-isocline canonical family (Ye's class I).

    The system is

        xdot = -y * (1 + x + alpha*y)
        ydot = x + (lam + beta + gamma)*y + a*x**2
               + (alpha + beta + gamma)*x*y + c*gamma*y**2

    Held as a data type only; the four-parameter bifurcation analysis of
    this family is outside the scope of this package.
    """

    lam: float
    alpha: float
    beta: float
    gamma: float
    a: float
    c: float

    def to_json_dict(self) -> dict:
        return {
            "lambda": float(self.lam),
            "alpha": float(self.alpha),
            "beta": float(self.beta),
            "gamma": float(self.gamma),
            "a": float(self.a),
            "c": float(self.c),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CanonicalParamsI":
        return cls(
            lam=float(data["lambda"]),
            alpha=float(data["alpha"]),
            beta=float(data["beta"]),
            gamma=float(data["gamma"]),
            a=float(data["a"]),
            c=float(data["c"]),
        )


def canonical_to_general(p: CanonicalParamsII) -> QuadraticCoefficients:
    """Embed class-II canonical parameters into the 12-slot layout."""
    return QuadraticCoefficients(
        a00=0.0, a10=0.0, a01=-1.0, a20=0.0, a11=0.0, a02=-float(p.nu),
        b00=0.0, b10=1.0, b01=p.lam + p.beta + p.gamma,
        b20=p.a, b11=p.beta + p.gamma, b02=p.c * p.gamma,
    )


def hamiltonian_case(c: float = 2.0) -> CanonicalParamsII:
    """The zero-divergence member of the family (all rotation parameters off).

    ``c`` is immaterial here (it only enters through c*gamma) but is kept so
    staged constructions can switch rotation parameters on without changing
    the shape parameters.
    """
    return CanonicalParamsII(nu=1, lam=0.0, beta=0.0, gamma=0.0, a=1.0, c=c)


def evaluate(system: QuadraticCoefficients, point) -> tuple[float, float]:
    """Velocity (xdot, ydot) at ``point``. Exact polynomial evaluation."""
    x, y = point
    return (
        system.a00 + (system.a10 + system.a20 * x) * x
        + (system.a01 + system.a02 * y) * y + system.a11 * x * y,
        system.b00 + (system.b10 + system.b20 * x) * x
        + (system.b01 + system.b02 * y) * y + system.b11 * x * y,
    )


def rhs(system: QuadraticCoefficients):
    """Velocity callable ``f(x, y) -> (xdot, ydot)`` for hot loops.

    Coefficients are bound as defaults so the closure does no attribute
    lookups per call.
    """

    def f(x, y,
          a00=system.a00, a10=system.a10, a01=system.a01,
          a20=system.a20, a11=system.a11, a02=system.a02,
          b00=system.b00, b10=system.b10, b01=system.b01,
          b20=system.b20, b11=system.b11, b02=system.b02):
        return (a00 + (a10 + a20 * x) * x + (a01 + a02 * y) * y + a11 * x * y,
                b00 + (b10 + b20 * x) * x + (b01 + b02 * y) * y + b11 * x * y)

    return f


def jacobian(system: QuadraticCoefficients, point) -> tuple[tuple[float, float], tuple[float, float]]:
    """Exact Jacobian of the field at ``point`` as ((fxx, fxy), (fyx, fyy))."""
    x, y = point
    return (
        (system.a10 + 2.0 * system.a20 * x + system.a11 * y,
         system.a01 + system.a11 * x + 2.0 * system.a02 * y),
        (system.b10 + 2.0 * system.b20 * x + system.b11 * y,
         system.b01 + system.b11 * x + 2.0 * system.b02 * y),
    )


def divergence(system: QuadraticCoefficients, point) -> float:
    """Trace of the Jacobian at ``point``."""
    j = jacobian(system, point)
    return j[0][0] + j[1][1]


def hamiltonian_energy(point) -> float:
    """Energy of the zero-divergence member: H = x^2/2 + x^3/3 + y^2/2 + y^3/3.

    The field of :func:`hamiltonian_case` satisfies xdot = -dH/dy and
    ydot = dH/dx identically, so H is constant along its orbits.
    """
    x, y = point
    return 0.5 * x * x + x * x * x / 3.0 + 0.5 * y * y + y * y * y / 3.0
