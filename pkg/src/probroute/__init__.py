"""Rate functionals, routing schemes and Monte Carlo checks for the k-TSP and power-latency TRP."""

from .density import (
    Density,
    LevelDecomposition,
    cell_average_from_function,
    g_alpha_integral,
    g_f_fraction,
    level_decomposition,
    make_density,
    refine,
    uniform,
)
from .experiments import ExperimentConfig, ExperimentReport, run_ktsp_rate, run_oracle_comparison, run_psitrp_rate
from .objectives import Tour, path_length, psi_objective, total_latency
from .sampling import CellCounts, SampleSet, cell_counts, sample_points
from .schemes import ktsp_densest_cell, ktsp_partition_resolution, optimal_block_order, psitrp_sweep
from .solvers import exact_k_tsp, exact_psi_trp, exact_tsp_path, heuristic_tsp_path

__all__ = [
    "CellCounts",
    "Density",
    "ExperimentConfig",
    "ExperimentReport",
    "LevelDecomposition",
    "SampleSet",
    "Tour",
    "cell_average_from_function",
    "cell_counts",
    "exact_k_tsp",
    "exact_psi_trp",
    "exact_tsp_path",
    "g_alpha_integral",
    "g_f_fraction",
    "heuristic_tsp_path",
    "ktsp_densest_cell",
    "ktsp_partition_resolution",
    "level_decomposition",
    "make_density",
    "optimal_block_order",
    "path_length",
    "psi_objective",
    "psitrp_sweep",
    "refine",
    "run_ktsp_rate",
    "run_oracle_comparison",
    "run_psitrp_rate",
    "sample_points",
    "total_latency",
    "uniform",
]
