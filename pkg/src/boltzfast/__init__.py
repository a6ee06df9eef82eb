"""Fast spectral evaluation of the Boltzmann collision operator on a periodic velocity box."""
from ._backend import kernels as _active_kernels
from .collision import DirectKernelTable, build_direct_table, eval_direct, eval_fast
from .decomposition import (Decomposition, beta_matrix, beta_oracle_2d, decompose, load_decomposition,
                            reconstruct_beta, refine, save_decomposition)
from .errors import *  # noqa: F401,F403
from .grid import (S_MAX, DomainConfig, FourierField, from_fourier, make_config, read_field_dump, save_field,
                   to_fourier, truncated_convolution, velocity_grid)
from .kernels import KernelModel, hardsphere3d, maxwell2d, phi, psi, vhs
from .reference import bkw, bkw_config, bkw_field, rel_l1_error, verify_bkw_residual
from .solver import IntegratorConfig, MomentSet, integrate, moments, moments_to_maxwellian, step

__version__ = "0.1.0"

#: Name of the kernel backend picked at import ("compiled" or "python").
BACKEND = _active_kernels.NAME
