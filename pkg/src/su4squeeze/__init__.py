"""Exact simulation of SU(4) twisting of atoms in a cavity and its metrology."""
from .fock_basis import FockBasis, FockState, dimension, dump_basis, enumerate_basis, index_of
from .su4_algebra import (ModelParams, OperatorMatrix, collective_operator, export_operator,
                          generators, hamiltonian, load_operator, verify_algebra)
from .dynamics import (Propagator, StateVector, apply_rotation, cached_hamiltonian, cached_operator,
                       evolve, initial_state, krylov_expm_multiply)
from .metrology import (GENERATOR_LABELS, cfi_marginal, cfi_matrix, entanglement_witness, expectation,
                        fidelity_bound_cfi, joint_outcome_distribution, k_top_probability, qfim)
from .analysis import (find_t_max, find_theta_opt, fit_gaussian_offset, fit_power_law,
                       polyfit_quadratic)
from .interferometry import (LikelihoodModel, SchemeConfig, auxiliary_scheme, bayesian_update,
                             encode_signal, posterior_stats, prepare_probe, sample_measurements,
                             two_parameter_scheme)

__version__ = "0.1.0"
