"""Staged two-cycle constructions and the at-most-two sweep.

The construction switches the three rotation parameters on one at a time
from the zero-divergence member: gamma destabilizes the origin, lowering
beta through the loop value creates a stable cycle from the separatrix
loop, and raising lambda through its loop value adds a nested unstable
cycle.  Alternative insertion orders reach the same final state and are
available as scenario variants.  The sweep evaluates the cycle count over
a constrained parameter sample as desk-scale evidence that two is the
maximum.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cycles import (ContinuationPolicy, CycleSearchResult, CycleStability,
                     FamilyCurve, FamilyTermination, LimitCycleRecord,
                     count_cycles_around_origin, find_cycles, track_family,
                     winding_number)
from .errors import PreconditionError, QlcError
from .flow import DEFAULT_CONFIG, IntegratorConfig, Section
from .rotation import RotationParam
from .separatrix import find_loop_parameter
from .singular import (ConditionUndefinedError, SingularKind,
                       finite_singular_points, gamma_window,
                       gamma_window_holds, parameter_sum_window,
                       parameter_sum_window_holds)
from .vectorfield import CanonicalParamsII, hamiltonian_case

__all__ = [
    "StageError",
    "FoldNotFoundError",
    "StageReport",
    "ScenarioReport",
    "FoldExhibit",
    "SweepGrid",
    "SweepSummary",
    "run_two_cycle_construction",
    "fold_exhibit",
    "sweep_max_cycles",
    "SCENARIO_ORDERS",
]

SCENARIO_ORDERS = ("gamma-first", "beta-first", "gamma-lambda-first")

# Concrete choices for the construction's free scalars: how far beta sits
# above the Hopf value (beta + gamma), and how far lambda steps past the
# loop value (capped by half the remaining window slack).
_BETA_PLUS_GAMMA = 0.05
_LAMBDA_OFFSET = 0.01


class StageError(QlcError):
    """A staged construction aborted, with the measured values attached."""

    def __init__(self, stage: str, message: str, measured: dict):
        super().__init__(f"stage {stage}: {message} (measured: {measured})")
        self.stage = stage
        self.measured = measured


class FoldNotFoundError(QlcError):
    """Family tracking ended without a fold; the curve is attached."""

    def __init__(self, message: str, curve: FamilyCurve):
        super().__init__(message)
        self.curve = curve


@dataclass
class StageReport:
    stage: str
    params: CanonicalParamsII
    census: list[dict]
    origin_kind: str
    conditions: dict[str, bool] = field(default_factory=dict)
    loop_param: str | None = None
    loop_value: float | None = None
    cycle_count: int | None = None
    cycles: list[dict] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "stage": self.stage,
            "params": self.params.to_json_dict(),
            "census": self.census,
            "origin_kind": self.origin_kind,
            "conditions": self.conditions,
            "loop_param": self.loop_param,
            "loop_value": self.loop_value,
            "cycle_count": self.cycle_count,
            "cycles": self.cycles,
        }


@dataclass
class ScenarioReport:
    c: float
    order: str
    stages: list[StageReport]
    final_params: CanonicalParamsII
    final_cycle_count: int
    nesting_ok: bool

    def to_json_dict(self) -> dict:
        return {
            "c": self.c,
            "order": self.order,
            "stages": [s.to_json_dict() for s in self.stages],
            "final_params": self.final_params.to_json_dict(),
            "final_cycle_count": self.final_cycle_count,
            "nesting_ok": self.nesting_ok,
        }


def _census(p: CanonicalParamsII):
    points = finite_singular_points(p)
    summary = [{"location": [sp.location[0], sp.location[1]],
                "kind": sp.kind.value} for sp in points]
    origin = next((sp for sp in points
                   if math.hypot(*sp.location) < 1e-9), None)
    return points, summary, origin


def _cycles_nested(records: list[LimitCycleRecord]) -> bool:
    """Each cycle's orbit must lie strictly inside the next one's polygon."""
    for inner, outer in zip(records, records[1:]):
        pts = inner.orbit.points
        stride = max(1, len(pts) // 24)
        for pt in pts[::stride]:
            if abs(winding_number(outer.orbit.points, pt)) != 1:
                return False
    return True


def _stage_census(stage: str, p: CanonicalParamsII, expect_count: int,
                  expect_origin: SingularKind | None):
    points, summary, origin = _census(p)
    if len(points) != expect_count:
        raise StageError(stage, f"expected {expect_count} singular points",
                         {"census": summary})
    if origin is None:
        raise StageError(stage, "origin is not singular", {"census": summary})
    if expect_origin is not None and origin.kind is not expect_origin:
        raise StageError(stage, f"origin should be {expect_origin.value}",
                         {"origin_kind": origin.kind.value})
    return summary, origin


def _hamiltonian_stage(c: float) -> StageReport:
    p0 = hamiltonian_case(c)
    points, summary, origin = _census(p0)
    expected = [((-1.0, -1.0), SingularKind.LINEAR_CENTER),
                ((-1.0, 0.0), SingularKind.SADDLE),
                ((0.0, -1.0), SingularKind.SADDLE),
                ((0.0, 0.0), SingularKind.LINEAR_CENTER)]
    measured = {"census": summary}
    if len(points) != 4:
        raise StageError("hamiltonian", "expected two centers and two saddles",
                         measured)
    for sp, (loc, kind) in zip(points, expected):
        if math.hypot(sp.location[0] - loc[0], sp.location[1] - loc[1]) > 1e-9 \
                or sp.kind is not kind:
            raise StageError("hamiltonian",
                             "census does not match two centers and two saddles",
                             measured)
    return StageReport("hamiltonian", p0, summary, origin.kind.value)


def _cycle_stage_summary(result: CycleSearchResult) -> list[dict]:
    return [r.summary_dict() for r in result.records]


def _check_cycles(stage: str, result: CycleSearchResult,
                  expected: list[CycleStability]):
    got = [r.stability for r in result.records]
    if got != expected:
        raise StageError(stage, "cycle structure mismatch",
                         {"expected": [s.value for s in expected],
                          "found": [s.value for s in got]})


def _gamma_choice(c: float) -> float:
    if not c > 1.0:
        raise StageError("gamma-on", "gamma window is empty",
                         {"c": c, "window": list(gamma_window(c)) if c * (c - 1.0) >= 0.0 else None})
    lo, hi = gamma_window(c)
    return math.sqrt(lo * hi)


def run_two_cycle_construction(c: float,
                               config: IntegratorConfig = DEFAULT_CONFIG,
                               order: str = "gamma-first") -> ScenarioReport:
    """Replay the staged two-cycle construction at fixed a = 1, nu = 1.

    The default order switches on gamma, then beta (below its loop value),
    then lambda (above its loop value), verifying the singular-point
    census, the window conditions, and the cycle structure at every stage.
    The variant orders traverse the alternative insertion sequences to the
    same final parameter point and must reach the same final cycle count.
    """
    if order not in SCENARIO_ORDERS:
        raise ValueError(f"unknown order {order!r}; expected one of {SCENARIO_ORDERS}")
    stage0 = _hamiltonian_stage(c)
    p0 = stage0.params

    # The staged values are computed along the default path regardless of
    # the reported order; variants re-verify their own intermediate states.
    gamma_star = _gamma_choice(c)
    if not gamma_window_holds(c, gamma_star):
        raise StageError("gamma-on", "chosen gamma left its window",
                         {"gamma": gamma_star, "window": list(gamma_window(c))})
    p_gamma = replace(p0, gamma=gamma_star)
    summary_g, origin_g = _stage_census("gamma-on", p_gamma, 2,
                                        SingularKind.UNSTABLE_FOCUS)

    beta_loop = find_loop_parameter(p_gamma, RotationParam.BETA, (-3.0, 0.0),
                                    tol=1e-8, config=config)
    beta_star = -gamma_star + _BETA_PLUS_GAMMA
    if not beta_star < beta_loop.value:
        raise StageError("beta-on", "beta does not sit below the loop value",
                         {"beta": beta_star, "beta_loop": beta_loop.value})
    p_beta = replace(p_gamma, beta=beta_star)
    summary_b, origin_b = _stage_census("beta-on", p_beta, 2,
                                        SingularKind.UNSTABLE_FOCUS)
    cycles_b = find_cycles(p_beta, config=config)
    _check_cycles("beta-on", cycles_b, [CycleStability.STABLE])

    try:
        sum_ok_before = parameter_sum_window_holds(c, gamma_star, beta_star, 0.0)
    except ConditionUndefinedError:
        raise StageError("lambda-on", "parameter-sum window undefined",
                         {"c": c, "gamma": gamma_star})
    if not sum_ok_before:
        raise StageError("lambda-on", "parameter-sum window fails at lambda=0",
                         {"sum": beta_star + gamma_star})
    sum_hi = parameter_sum_window(c, gamma_star)[1]
    lambda_slack = sum_hi - (beta_star + gamma_star)
    lambda_loop = find_loop_parameter(p_beta, RotationParam.LAMBDA,
                                      (0.0, 0.98 * lambda_slack),
                                      tol=1e-8, config=config)
    delta = min(_LAMBDA_OFFSET, 0.5 * (lambda_slack - lambda_loop.value))
    lambda_star = lambda_loop.value + delta
    p_final = replace(p_beta, lam=lambda_star)
    if not parameter_sum_window_holds(c, gamma_star, beta_star, lambda_star):
        raise StageError("lambda-on", "parameter-sum window fails at final lambda",
                         {"lambda": lambda_star})
    summary_l, origin_l = _stage_census("lambda-on", p_final, 2,
                                        SingularKind.UNSTABLE_FOCUS)
    cycles_l = find_cycles(p_final, config=config)
    _check_cycles("lambda-on", cycles_l,
                  [CycleStability.STABLE, CycleStability.UNSTABLE])
    nested = _cycles_nested(cycles_l.records)
    if not nested:
        raise StageError("lambda-on", "final cycles are not nested",
                         {"coordinates": [r.section_coordinate
                                          for r in cycles_l.records]})

    if order == "gamma-first":
        stages = [
            stage0,
            StageReport("gamma-on", p_gamma, summary_g, origin_g.kind.value,
                        {"gamma_window": True}),
            StageReport("beta-on", p_beta, summary_b, origin_b.kind.value,
                        {"gamma_window": True},
                        loop_param="beta", loop_value=beta_loop.value,
                        cycle_count=len(cycles_b.records),
                        cycles=_cycle_stage_summary(cycles_b)),
            StageReport("lambda-on", p_final, summary_l, origin_l.kind.value,
                        {"gamma_window": True, "parameter_sum_window": True},
                        loop_param="lambda", loop_value=lambda_loop.value,
                        cycle_count=len(cycles_l.records),
                        cycles=_cycle_stage_summary(cycles_l)),
        ]
    elif order == "beta-first":
        p_b1 = replace(p0, beta=beta_star)
        summary_b1, origin_b1 = _stage_census("beta-first", p_b1, 4,
                                              SingularKind.STABLE_FOCUS)
        cycles_g2 = find_cycles(p_beta, config=config)
        _check_cycles("gamma-second", cycles_g2, [CycleStability.STABLE])
        stages = [
            stage0,
            StageReport("beta-first", p_b1, summary_b1, origin_b1.kind.value),
            StageReport("gamma-second", p_beta, summary_b, origin_b.kind.value,
                        {"gamma_window": True},
                        cycle_count=len(cycles_g2.records),
                        cycles=_cycle_stage_summary(cycles_g2)),
            StageReport("lambda-on", p_final, summary_l, origin_l.kind.value,
                        {"gamma_window": True, "parameter_sum_window": True},
                        cycle_count=len(cycles_l.records),
                        cycles=_cycle_stage_summary(cycles_l)),
        ]
    else:  # gamma-lambda-first
        p_gl = replace(p0, gamma=gamma_star, lam=lambda_star)
        summary_gl, origin_gl = _stage_census("gamma-lambda-on", p_gl, 2,
                                              SingularKind.UNSTABLE_FOCUS)
        cycles_gl = find_cycles(p_gl, config=config)
        _check_cycles("gamma-lambda-on", cycles_gl, [])
        stages = [
            stage0,
            StageReport("gamma-lambda-on", p_gl, summary_gl,
                        origin_gl.kind.value, {"gamma_window": True},
                        cycle_count=0),
            StageReport("beta-last", p_final, summary_l, origin_l.kind.value,
                        {"gamma_window": True, "parameter_sum_window": True},
                        cycle_count=len(cycles_l.records),
                        cycles=_cycle_stage_summary(cycles_l)),
        ]

    return ScenarioReport(
        c=c,
        order=order,
        stages=stages,
        final_params=p_final,
        final_cycle_count=len(cycles_l.records),
        nesting_ok=nested,
    )


@dataclass
class FoldExhibit:
    lambda_fold: float
    x_star_fold: float
    lambda_semistable: float
    semistable: dict
    curve: FamilyCurve

    def to_json_dict(self) -> dict:
        return {
            "lambda_fold": self.lambda_fold,
            "x_star_fold": self.x_star_fold,
            "lambda_semistable": self.lambda_semistable,
            "semistable": self.semistable,
            "branch_points": [
                {"mu": pt.mu, "x_star": pt.x_star,
                 "stability": pt.stability.value, "period": pt.period}
                for pt in self.curve.points
            ],
        }


def _min_displacement(p: CanonicalParamsII, lam: float, window,
                      config: IntegratorConfig) -> float:
    from .cycles import _DisplacementSampler, _refine_dip

    sampler = _DisplacementSampler(replace(p, lam=lam), Section(), config)
    _, d_min = _refine_dip(sampler, window[0], window[1], 1.0)
    return d_min


def fold_exhibit(p: CanonicalParamsII,
                 config: IntegratorConfig = DEFAULT_CONFIG,
                 policy: ContinuationPolicy = ContinuationPolicy()) -> FoldExhibit:
    """Track the two-cycle family in lambda to its fold and confirm it.

    Continues the pair from ``p`` until the branches merge, bisects the
    fold parameter, then locates a lambda within the final bracket where
    the displacement minimum sits in (0, 1e-8] so the cycle search
    certifies a semi-stable record.
    """
    start = find_cycles(p, config=config)
    if len(start.records) != 2:
        raise PreconditionError(
            f"fold exhibit needs two cycles at the start, found {len(start.records)}")
    sum_hi = parameter_sum_window(p.c, p.gamma)[1]
    lam_upper = sum_hi - (p.beta + p.gamma)
    curve = track_family(p, RotationParam.LAMBDA, (p.lam, lam_upper),
                         policy=policy, config=config)
    if curve.termination is not FamilyTermination.FOLD_DETECTED:
        raise FoldNotFoundError(
            f"no fold in range: family terminated {curve.termination.value}",
            curve)
    stable_tail = curve.branch(CycleStability.STABLE)
    unstable_tail = curve.branch(CycleStability.UNSTABLE)
    x_star_fold = 0.5 * (stable_tail[-1].x_star + unstable_tail[-1].x_star)
    window = (max(Section().x_min, x_star_fold - 0.1),
              min(Section().x_max, x_star_fold + 0.1))
    lam_lo, lam_hi = curve.fold_bracket
    lam_semi = None
    for _ in range(80):
        lam_mid = 0.5 * (lam_lo + lam_hi)
        d_min = _min_displacement(p, lam_mid, window, config)
        if d_min > 0.0:
            if d_min <= 5e-9:
                lam_semi = lam_mid
                break
            lam_hi = lam_mid
        else:
            lam_lo = lam_mid
    if lam_semi is None:
        lam_semi = lam_hi
    confirm = find_cycles(replace(p, lam=lam_semi), config=config)
    semis = [r for r in confirm.records
             if r.stability is CycleStability.SEMI_STABLE]
    if len(confirm.records) != 1 or not semis:
        raise QlcError(
            f"semi-stable confirmation failed at lambda={lam_semi!r}: "
            f"{[r.summary_dict() for r in confirm.records]}")
    return FoldExhibit(
        lambda_fold=curve.fold_mu,
        x_star_fold=x_star_fold,
        lambda_semistable=lam_semi,
        semistable=semis[0].summary_dict(),
        curve=curve,
    )


@dataclass(frozen=True)
class SweepGrid:
    """Latin-hypercube sample specification for the cycle-count sweep.

    gamma is placed inside its two-singularity window by fraction; beta is
    sampled through the offset beta + gamma (kept nonnegative so the
    window conditions imply the two-singularity census) unless
    ``beta_fixed`` pins it.  Candidates failing either window condition
    are dropped; the first ``n`` passing points are evaluated.
    """

    n: int = 500
    seed: int = 20260809
    c_range: tuple[float, float] = (1.1, 5.0)
    gamma_fraction_range: tuple[float, float] = (0.05, 0.95)
    beta_plus_gamma_range: tuple[float, float] = (0.01, 0.4)
    lambda_range: tuple[float, float] = (0.002, 0.8)
    beta_fixed: float | None = None
    oversample: int = 6

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "c_range": list(self.c_range),
            "gamma_fraction_range": list(self.gamma_fraction_range),
            "beta_plus_gamma_range": list(self.beta_plus_gamma_range),
            "lambda_range": list(self.lambda_range),
            "beta_fixed": self.beta_fixed,
            "oversample": self.oversample,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SweepGrid":
        kwargs = {}
        for name in ("n", "seed", "oversample"):
            if name in data:
                kwargs[name] = int(data[name])
        for name in ("c_range", "gamma_fraction_range",
                     "beta_plus_gamma_range", "lambda_range"):
            if name in data:
                kwargs[name] = tuple(float(v) for v in data[name])
        if data.get("beta_fixed") is not None:
            kwargs["beta_fixed"] = float(data["beta_fixed"])
        return cls(**kwargs)


def _lerp(rng_pair, u: float) -> float:
    return rng_pair[0] + (rng_pair[1] - rng_pair[0]) * u


def build_sweep_points(grid: SweepGrid) -> list[CanonicalParamsII]:
    """Materialize the constrained parameter sample of a grid spec."""
    if grid.n <= 0:
        return []
    m = grid.oversample * grid.n
    rng = np.random.default_rng(grid.seed)
    cube = np.empty((m, 4))
    for dim in range(4):
        cube[:, dim] = (rng.permutation(m) + rng.random(m)) / m
    points: list[CanonicalParamsII] = []
    for row in cube:
        c = _lerp(grid.c_range, row[0])
        if not c > 1.0:
            continue
        lo, hi = gamma_window(c)
        gamma = lo + (hi - lo) * _lerp(grid.gamma_fraction_range, row[1])
        if grid.beta_fixed is not None:
            beta = grid.beta_fixed
        else:
            beta = _lerp(grid.beta_plus_gamma_range, row[2]) - gamma
        lam = _lerp(grid.lambda_range, row[3])
        try:
            s_lo, s_hi = parameter_sum_window(c, gamma)
        except ConditionUndefinedError:
            continue
        s = beta + gamma + lam
        band = 1e-6
        if not (gamma_window_holds(c, gamma)
                and s_lo + band < s < s_hi - band):
            continue
        points.append(CanonicalParamsII(nu=1, lam=lam, beta=beta,
                                        gamma=gamma, a=1.0, c=c))
        if len(points) == grid.n:
            break
    return points


@dataclass
class SweepPointResult:
    index: int
    params: CanonicalParamsII
    count: int | None
    cycles: list[dict]
    error: str | None = None

    def to_json_dict(self) -> dict:
        out = {"index": self.index, "params": self.params.to_json_dict(),
               "count": self.count, "cycles": self.cycles}
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class SweepSummary:
    evaluated: int
    max_count: int
    argmax_params: CanonicalParamsII | None
    histogram: dict[int, int]
    inconclusive: list[tuple[int, str]]
    results: list[SweepPointResult]

    def to_json_dict(self) -> dict:
        return {
            "evaluated": self.evaluated,
            "max_count": self.max_count,
            "argmax_params": (None if self.argmax_params is None
                              else self.argmax_params.to_json_dict()),
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "inconclusive": [{"index": i, "error": msg}
                             for i, msg in self.inconclusive],
        }


def _sweep_worker(task) -> tuple[int, int | None, list[dict], str | None]:
    index, params, config = task
    try:
        count, records = count_cycles_around_origin(params, config)
        return index, count, [r.summary_dict() for r in records], None
    except QlcError as exc:
        return index, None, [], str(exc)


def _worker_count() -> int:
    env = os.environ.get("QLC_THREADS")
    if env is not None:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def sweep_max_cycles(grid: SweepGrid,
                     config: IntegratorConfig = DEFAULT_CONFIG) -> SweepSummary:
    """Cycle count per grid point, with per-point failures collected.

    Points parallelize across processes (capped by QLC_THREADS); results
    are merged in grid order, so the summary is independent of the worker
    count.
    """
    points = build_sweep_points(grid)
    tasks = [(i, p, config) for i, p in enumerate(points)]
    workers = _worker_count()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_sweep_worker, tasks, chunksize=4))
    else:
        raw = [_sweep_worker(t) for t in tasks]
    results = []
    histogram: dict[int, int] = {}
    inconclusive: list[tuple[int, str]] = []
    max_count = 0
    argmax = None
    for (index, count, cycles, error), params in zip(raw, points):
        results.append(SweepPointResult(index, params, count, cycles, error))
        if error is not None:
            inconclusive.append((index, error))
            continue
        histogram[count] = histogram.get(count, 0) + 1
        if count > max_count:
            max_count = count
            argmax = params
    return SweepSummary(
        evaluated=len(points),
        max_count=max_count,
        argmax_params=argmax,
        histogram=histogram,
        inconclusive=inconclusive,
        results=results,
    )
