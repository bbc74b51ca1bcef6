"""Expected visiting times, stationary distributions, and conditional
rewards for finite discrete- and continuous-time Markov chains, with
solvers ranging from fast unsound value iteration to certified interval
iteration and exact rational elimination."""

from .condrew import (
    CollapsedChain,
    collapse_bsccs,
    conditional_expected_reward,
    conditional_rewards,
    solve_y,
)
from .errors import EvtkitError, ModelError, QueryError, SolverError
from .evt import (
    AnalysisResult,
    EvtRequest,
    compute_evts,
    topological_evts_absolute,
    topological_evts_relative,
)
from .graph import (
    SccDecomposition,
    SccRestriction,
    build_restriction,
    decompose,
    escape_lower_bound,
    initial_ii_bounds,
)
from .model import (
    MarkovChain,
    embed,
    parse_model,
    serialize_model,
    transient_submatrix,
)
from .oracle import generate_fdr, generate_random_chain
from .scalars import FLOAT, INF, RATIONAL
from .solve import (
    Bounds,
    EvtSystem,
    apply_phi,
    diff,
    direct_solve,
    gauss_seidel_interval_iteration,
    gauss_seidel_value_iteration,
    interval_iteration,
    value_iteration,
)
from .stationary import (
    StationaryResult,
    bscc_reach_probabilities,
    redirect,
    stationary_classic_bscc,
    stationary_distribution,
    stationary_irreducible,
)

__version__ = "0.1.0"
