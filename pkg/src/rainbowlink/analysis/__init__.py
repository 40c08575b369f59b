"""Closed-form collision, selection and packet-loss analysis with MC oracles."""

from .collision import (
    collision_prob,
    collision_prob_mc,
    colliding_users_mc,
    expected_colliding_users,
    lambda_b,
    uniform_collision_fraction,
)
from .plr import (
    PlrParams,
    optimal_repetitions,
    plr,
    plr_curve,
    plr_oracle_mc,
    plr_transition_matrix,
    transition_matrix_enumerated,
)
from .selection import (
    pairwise_mischoice_mc,
    pairwise_mischoice_prob,
    selection_prob,
    selection_prob_from_gains,
    selection_prob_mc,
)

__all__ = [
    "PlrParams",
    "collision_prob",
    "collision_prob_mc",
    "colliding_users_mc",
    "expected_colliding_users",
    "lambda_b",
    "optimal_repetitions",
    "pairwise_mischoice_mc",
    "pairwise_mischoice_prob",
    "plr",
    "plr_curve",
    "plr_oracle_mc",
    "plr_transition_matrix",
    "selection_prob",
    "selection_prob_from_gains",
    "selection_prob_mc",
    "transition_matrix_enumerated",
    "uniform_collision_fraction",
]
