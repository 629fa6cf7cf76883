"""Semilinear elliptic problems with generalized Wentzell boundary conditions.

Meshes and the product space (``geometry``), admissible nonlinearities
(``nonlinearity``), the discrete operator (``operator``), its ground state
(``spectral``), solvability certificates (``solvability``), the energy solver
(``solver``) and the half-space symbol verifier (``halfspace``).
"""

from .config import RunConfig, build_problem, load_config, load_preset, parse_config, preset_names
from .errors import (CoefficientDomainError, ConfigError, Delta2Error, EigenSolveError, GroundStateError,
                     NonlinearityError, ShapeMismatchError, UncoupledVectorError, WentzellError,
                     WrongCertificateError)
from .geometry import (Measure, Mesh, ProductVector, average_mu, build_interval_mesh, build_rectangle_mesh,
                       integrate_mu, load_vector, mesh_from_config, x2_inner_product, x2_norm)
from .halfspace import FrequencyProblem, boundary_symbol, estimate_constants, solve_frequency
from .nonlinearity import (RangeInterval, delta2_check, growth_check, make_nonlinearity, minkowski_combine,
                           range_of, young_gap)
from .operator import OperatorMatrices, WentzellProblem, assemble, bilinear_rho, weak_residual
from .solvability import (SolvabilityReport, certify, certify_ground_state, certify_mean_zero_c,
                          necessity_audit)
from .solver import SolveOptions, SolveOutcome, energy, gradient, solve
from .spectral import EigenResult, fredholm_project, null_space_dim, smallest_eigenpair

__version__ = "0.1.0"
