"""Uniformly accurate two-scale exponential integrators for charged-particle
dynamics in strong magnetic fields, with baselines and an experiment harness.
"""

from .fields import (FieldModel, builtin_general_field,
                     builtin_maximal_ordering_field, fd_hessian, fd_jacobian,
                     hat, resolve_field, uniform_field)
from .rotations import Linearization, reduce_phase, s0, s1
from .transform import (FilteredState, ParticleState, from_filtered,
                        from_scaled, reconstruct_xv, to_filtered, to_scaled)
from .twoscale import (MeanState, TauGridFunction, big_F, f_tau, initial_data,
                       jac_f_tau, hess_f_tau, kappa, op_A, op_L, op_Pi,
                       tau_nodes)
from .spectral import (AssemblyContext, CoefVector, TransportGenerator,
                       assemble_F, assemble_coupling, build_M, from_grid,
                       load_coefs, project_initial, save_coefs, to_grid)
from .expint import (ExpTableau, CoupledTransportFlow, TransportFlow, phi,
                     psi_check, step, integrate, tableau_mo1, tableau_mo2,
                     tableau_mo3, tableau_mo4)
from .solver import (SolveConfig, Trajectory, error_metric, error_parts,
                     solve_cpd)
from .baselines import (ReferencePolicy, boris_step, cn_step, energy,
                        helix_state, integrate_baseline, reference_solution,
                        rk2_step, rk4_step)

__version__ = "0.1.0"
