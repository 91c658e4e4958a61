"""Lagrange inversion and the parametric Galton-Watson trees of a power series."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ApexPointError, BackendMismatchError, ConvergenceError, DomainError, GWError, NoApexError,
    OffLatticeError, SizeCapError, SlowConvergenceWarning, TailDominatesWarning, TailTooLargeError,
)
from .family import OffspringSpec, classify, mass_function, mean, solve_apex, variance  # noqa: E402
from .gw import (  # noqa: E402
    extinction, extinction_fixed_point, extinction_inversion, extinction_series, progeny_law,
    q_derivative, simulate_batch, simulate_tree,
)
from .lagrange import LagrangeSolution, g_eval, newton_solve, radius, solve  # noqa: E402
from .rng import SplitMix64  # noqa: E402
from .series import PowerSeries  # noqa: E402
from .trees import PlaneTree, enumerate_trees, parse_predicate, sum_weights  # noqa: E402
