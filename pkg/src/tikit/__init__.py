"""tikit: generalized Tikhonov-Phillips regularization on pixel grids.

Minimizes |Tx - y|^2 + W(x) for matrix-free linear operators T and a family
of convex penalizers W (squared norms, seminorm powers, weighted sums,
smoothed total variation), with L-curve parameter selection, a numerical
stability laboratory, and an image-deblurring pipeline.
"""

from .grid import GridFunction, inner_product, norm_l2, norm_linf, read_pgm, write_pgm
from .operators import (OperatorHandle, StructuralField, apply, apply_adjoint,
                        assemble_dense, make_dense, make_gaussian_blur,
                        make_gradient, make_identity, make_structural)
from .penalizers import (PenaltyTerm, Penalizer, bv_norm, gradient,
                         make_weighted_sum, parse_penalizer, seminorm_power,
                         squared_norm, total_variation, value)
from .solvers import (Problem, SolveReport, SolverOptions,
                      limit_to_best_approximate, objective, solve_dense_oracle,
                      solve_general, solve_quadratic)
from .stability import (PerturbationSchedule, StabilityReport,
                        check_identity_n3, check_operator_bounds_q2_q3,
                        estimate_complementation_constant, geometric_schedule,
                        probe_uniqueness, run_stability_experiment)
from .lcurve import LCurve, corner, default_alpha_grid, sweep
from .pipeline import (PipelineConfig, RestorationMetrics, add_noise,
                       compute_metrics, make_phantom, run_pipeline)
from .estimator import TikhonovRestorer

__version__ = "0.1.0"
