from ._syncflow import (
    Network,
    error_bounds,
    find_all_normal_states,
    improved_approximation,
    max_flow_feasible,
    resistance_distance,
    solve_base,
    solve_linear,
)

__all__ = [
    "Network",
    "error_bounds",
    "find_all_normal_states",
    "improved_approximation",
    "max_flow_feasible",
    "resistance_distance",
    "solve_base",
    "solve_linear",
]
