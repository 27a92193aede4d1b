"""Fault-tolerant distributed averaging: MDFU, MDFU-LP and a Push-Synopses baseline."""

from .topology import Graph, generate_er, load_edge_list, pair_degree, save_edge_list
from .protocols import MDFU, MDFU_LP, PUSH_SYNOPSES, MdfuLpState, MdfuState, PushSynopsesState
from .simulator import (ExperimentConfig, LossModel, RoundMetrics, Scenario, counting_scenario,
                        dynamic_scenario, run, run_many)
from .analysis import (bias_band, build_transition_matrix, conductance_exact, convergence_bound,
                       loss_overhead_q, matrix_power_reference, particle_walk, second_eigenvalue)

__version__ = "0.1.0"
