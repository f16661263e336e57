"""Numerical engine for minimal solutions of periodic variational problems.

Exact lattice geometry over Q(sqrt d), discrete energies on truncated
cylinders, monotone obstacle solvers for periodic, J1 and J2 minimizers,
lamination diagnostics and a verifier suite.
"""

import os

# cap BLAS/OpenMP threads before numpy is imported anywhere
if os.environ.get("MBLAB_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["MBLAB_THREADS"])

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .quadratic import QuadraticNumber, continued_fraction, convergents  # noqa: E402,F401
from .lattice_geometry import (  # noqa: E402,F401
    DirectionSystem,
    IntegerLattice,
    integer_orthogonal_lattice,
    is_admissible,
    make_direction_system,
    reduce_coordinates,
)
from .potential import PotentialSpec, Term, pendulum, pendulum_x_factor, zero  # noqa: E402,F401
from .grid import ConstraintPair, DomainSpec, Field, constant_field, linear_field  # noqa: E402,F401
from .solvers import SolverConfig, SolveResult, minimize_J1, minimize_J2, minimize_periodic, residual  # noqa: E402,F401
