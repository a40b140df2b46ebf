"""saddle_escape: first-order methods with vanishing step sizes, and
Lyapunov-Perron stable-manifold certificates at strict saddles.

Layout:

- schedules: step-size sequences (power / constant / geometric / table)
  with divergent-sum classification.
- objectives: test objectives with gradients, Hessians, and critical-point
  classification.
- spectral: symmetric eigensplits into stable/unstable blocks and exact
  linear trajectory products.
- methods: gradient descent, mirror descent, proximal point, and the two
  manifold variants, plus the shared run() driver.
- lyapunov_perron: the sequence-space contraction machinery — K1/K2 bounds,
  the operator T, Picard fixed points, shooting cross-checks, and charts.
- harness_cli: JSON-configured experiments and the saddle-escape CLI.
"""

from .schedules import (CONVERGENT, DIVERGENT, ConstantSchedule,
                        GeometricSchedule, PowerSchedule, ScheduleError,
                        StepSchedule, TableSchedule, constant, from_config,
                        geometric, power, table)
from .objectives import (DEGENERATE, LOCAL_MIN_CANDIDATE, NOT_CRITICAL,
                         STRICT_SADDLE, CriticalPointClass, EigensolverError,
                         Objective, ObjectiveError, classify_critical_point,
                         cubic_perturbed_saddle, fig1, quadratic)
from .spectral import (SpectralError, SpectralSplit, SplitVector,
                       classify_coordinate_limit, quadratic_trajectory, split,
                       transition_product)
from .methods import (BUDGET_EXHAUSTED, CONVERGED_TO_POINT, ESCAPED_REGION,
                      METHOD_IDS, STEP_ERROR, EmbeddedManifold, ManifoldError,
                      MethodError, MirrorDomainError, MirrorMap,
                      RiemannianMetric, Terminal, TrajectoryRecord,
                      constant_metric, entropy_mirror_map,
                      euclidean_mirror_map, gd_step, identity_metric,
                      intrinsic_manifold_step, make_step, manifold_step,
                      mirror_step, proximal_step, run, unit_sphere)
from .lyapunov_perron import (CertificateError, ContractionCertificate,
                              LyapunovError, ManifoldChart, PerronProblem,
                              SequenceSpaceElement, StablePointResult,
                              apply_T, bound_K1, bound_K2, chart,
                              contraction_constant, iterate_raw,
                              remainder_from_objective,
                              self_consistency_error, shooting_oracle,
                              solve_stable_point, sup_distance)
from .harness_cli import (AvoidanceReport, ConfigError, ExperimentAssertionError,
                          ExperimentConfig, avoidance_experiment,
                          build_objective, chart_experiment, emit_plot_data,
                          fig1_experiment, main, single_run_experiment)

__version__ = "0.1.0"
