"""Numerical laboratory for planar quadratic systems with two parallel
straight line-isoclines: singular-point census, field-rotation
determinants, trajectory flow with section events, limit cycle detection
and counting, separatrix-loop bisection, and the staged two-cycle
constructions.
"""

from .errors import PreconditionError, QlcError
from .vectorfield import (CanonicalParamsI, CanonicalParamsII,
                          InvalidSystemError, QuadraticCoefficients,
                          canonical_to_general, divergence, evaluate,
                          hamiltonian_case, hamiltonian_energy, jacobian)
from .isocline import (ConicCurve, IsoclineClass, IsoclineTag, Line,
                       classify_conic, conic_from_lines, nullcline_conics)
from .singular import (ConditionUndefinedError, ContinuumOfSingularPointsError,
                       NotSingularError, NotWeakFocusError, SingularKind,
                       SingularPoint, classify, finite_singular_points,
                       first_lyapunov_sign, gamma_window, gamma_window_holds,
                       parameter_sum_window, parameter_sum_window_holds)
from .rotation import (RotationParam, RotationSignReport, delta, delta_numeric,
                       rotation_sign_on_orbit)
from .flow import (DEFAULT_CONFIG, FlowError, IntegratorConfig, NoReturnError,
                   Section, TerminalStatus, Trajectory, TransversalityError,
                   integrate, next_section_crossing)
from .cycles import (ContinuationError, ContinuationPolicy, CycleSearchResult,
                     CycleStability, DisplacementSample, DisplacementSamples,
                     FamilyCurve, FamilyPoint, FamilyTermination,
                     InconclusiveCountError, LimitCycleRecord,
                     NoCyclesPossibleError, RefineGridError,
                     count_cycles_around_origin, displacement_scan,
                     find_cycles, track_family, winding_number)
from .separatrix import (LoopResult, NoBracketError, NotASaddleError,
                         SaddleFrame, SeparatrixOutcome, SeparatrixTag,
                         UndecidedError, classify_unstable_separatrix,
                         find_loop_parameter, saddle_frame)
from .scenario import (FoldExhibit, FoldNotFoundError, ScenarioReport,
                       StageError, StageReport, SweepGrid, SweepSummary,
                       fold_exhibit, run_two_cycle_construction,
                       sweep_max_cycles)

__version__ = "0.1.0"
