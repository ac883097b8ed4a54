"""Time-fractional diffusion with generalized Caputo kernels on the lattice hbar*Z^n."""

__version__ = "0.1.0"

from .errors import (AccuracyUnsupportedError, ArgumentError, ConfigError, InvalidCoefficientError,
                     InvalidPotentialError, LatfracError, NumericalError, ResourceError)
from .kernels import (Kernel, KernelKind, atangana_baleanu, caputo_dzhrbashyan, caputo_fabrizio,
                      check_admissibility, cumulative_integral, custom_kernel, laplace_transform)
from .l1 import L1Operator, graded_grid, uniform_grid
from .lattice import (LatticeSpec, Potential, apply_discrete_laplacian, assemble_hamiltonian,
                      enumerate_sites)
from .mittag_leffler import mittag_leffler
from .relaxation import (Method, RelaxationCurve, complete_monotonicity_probe, relaxation_closed_form,
                         relaxation_curve, relaxation_talbot)
from .semiclassical import HbarSweep, hamiltonian_defect, semiclassical_sweep, veryweak_semiclassical_sweep
from .solver import (CoefficientProfile, SolutionField, SourceTerm, apply_caputo, sign_comparison_check,
                     solve_full, solve_mode, verify_wellposedness)
from .spectral import (SpectralDecomposition, eigendecompose, forward_transform, inverse_transform,
                       sobolev_norm)
from .veryweak import (Atom, DistributionalCoefficient, EpsilonSchedule, Jump, Mollifier,
                       consistency_experiment, mollifier_constant, moderateness_fit, negligibility_check,
                       regularize, uniqueness_experiment, veryweak_solve)

__all__ = [name for name in dir() if not name.startswith("_")]
