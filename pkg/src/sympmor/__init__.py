"""Symplectic model reduction of Hamiltonian systems with weighted inner products.

Greedy construction of symplectic reduced bases that are orthonormal
with respect to an SPD weight, structure-preserving Galerkin reduction,
interpolation of nonlinear terms, and symplectic time integration, with
an experiment pipeline and CLI on top.
"""

from .config import default_config, load_config, validate_config
from .errors import (AssemblyError, ConfigError, ContractError,
                     FactorizationError, MeshError, NumericalFailure,
                     PackageFormatError, ParameterError, RankError,
                     SelectionError, SingularStructureError, StagnationError,
                     StepFailure, SvdConvergenceError, SympmorError,
                     WeightMismatchError)
from .greedy import (DeimOperator, GreedyReport, deim_select,
                     greedy_nonlinear_basis, greedy_symplectic_euclidean,
                     greedy_symplectic_weighted)
from .integrators import (IntegratorConfig, ModelMidpointSystem,
                          ModelVerletSystem, Trajectory,
                          implicit_midpoint_run, midpoint_step,
                          stormer_verlet_run)
from .linalg import SpdMatrix, spd_solve, spd_sqrt, svd, sym_eig
from .models import (FemWaveModel, HamiltonianModel, SineGordonModel,
                     build_fem_wave, build_sine_gordon, check_gradient,
                     soliton_exact, soliton_time_derivative)
from .package_io import OfflinePackage, load_package, save_package
from .rom import (ReducedModel, assemble_linear_rom, assemble_nonlinear_rom,
                  assemble_pod_rom, decode, reduced_hamiltonian, run_rom)
from .symplectic import (StandardSymplectic2n, SymplecticBasis,
                         SymplecticFactorization, WeightedStructure,
                         check_symplectic, factor_structure, j_apply,
                         j_matrix, jt_apply, paired_basis,
                         symplectic_gs_insert, symplectic_inverse)
from .weighted import (PodBasis, WeightMatrix, weighted_pod,
                       weighted_projection, weighted_symplectic_projection,
                       x_inner)
from .experiment import (OfflineResult, OnlineResult, offline_package,
                         restore_offline, run_full, run_offline, run_online)

__version__ = "0.1.0"
