"""Folding 2D HP lattice proteins with regularized UCT and a self-play policy-value network."""
from .lattice import (
    ContactScore,
    FoldState,
    HpSequence,
    Move,
    Status,
    apply_move,
    contact_bound,
    from_moves,
    hh_contacts,
    is_terminal,
    legal_moves,
    opening,
    parse_hp_string,
    translate_amino_acids,
    upper_bound,
)
from .oracle import OracleResult, RolloutConfig, compare_engines, oracle_solve, rollout_uct_fold
from .search import SearchConfig, SearchTree, choose_move, run_search

__version__ = "0.1.0"
