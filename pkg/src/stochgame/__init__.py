"""Solver for two-player stochastic games with total-reward and reachability objectives."""

from .numerics import INF, DomainError, ext_sum, ominus, oplus
from .model import (
    Game, GameError, Owner, ParseError, Vertex, induced_chain, load, load_file,
    normalize_rewards, reach_to_acc, save, save_file, validate,
)
from .bellman import (
    SolveReport, apply_L, choose_lambda, discounted_iterate, horizon_for_eps,
    nstep_values, value_iterate,
)
from .strategy import (
    HDStrategy, MDStrategy, MRStrategy, max_eps_hd, max_md_eps, min_eps_hd,
    min_md_optimal, mr_from_weights,
)
from .evaluation import (
    EvalResult, best_response_max, best_response_min, evaluate_md_pair,
    evaluate_reach, exhaustive_md_values,
)
from .sim import SimStats, simulate

__version__ = "0.1.0"
