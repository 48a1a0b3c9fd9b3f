"""Finite element toolkit for the double-phase variable-exponent eigenvalue problem.

Set ``DPEIG_NUMBA=0`` before import to force the pure numpy kernels.
"""
__version__ = "0.1.0"

from .errors import (ConfigError, ConvergenceError, DpeigError, ExponentDomainError,
                     ExpressionError, MeshError, MeshMismatchError, ValidationError)
from .mesh import (DiscreteFunction, Mesh, build_interval_mesh, build_rectangle_mesh,
                   interpolate, random_smooth_function)
from .exponents import (ExponentField, ValidationReport, exponent_from_spec,
                        parse_exponent_expression, validate_triple)
from .modular import ScalarField, holder_bound, luxemburg_norm, modular, sobolev_norm
from .functionals import (EnergyBreakdown, Problem, eval_energies, eval_T, grad_I, grad_J,
                          weak_residual)
from .solver import (CERTIFIED, INCONCLUSIVE, TRIVIAL, EigenEstimate, ScanReport, ScanRow,
                     SolverOptions, estimate_embedding_eigenvalue, minimize_rayleigh,
                     minimize_T, scan_lambda)
from .diagnostics import (CheckReport, check_gradients, check_holder,
                          check_inequality_chain, check_modular_norm_relations,
                          check_normalization, ray_limit_profile, run_diagnostics)
