"""Lyapunov feedback control of quantum density matrices and stability analysis
of its stationary states."""

from .dynamics import (ControlModel, IntegratorOptions, Trajectory, build_model, classify_convergence,
                       control_field, extended_rhs, integrate, lasalle_membership, lyapunov_value,
                       reduced_bloch_rhs)
from .stability import (classify_stationary, enumerate_diagonal_stationary, hessian_signature,
                        invariant_set_probe, linearization, tangent_basis)
from .states import (SpectrumSignature, count_diagonal_stationary, flag_manifold_dim,
                     is_fully_connected, is_pseudo_pure_exceptional, is_strongly_regular,
                     sample_isospectral, spectrum_signature)
from .su_algebra import GeneratorBasis, bloch_of_density, build_basis, commutator, density_of_bloch

__version__ = "0.1.0"
