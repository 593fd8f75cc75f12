"""Distributed hypothesis testing with min-rule and Byzantine-resilient belief updates."""

from .adversary import AdversaryConfig, AdversaryMessage, emit_message, make_strategy, validate_f_local
from .analysis import convergence_time, decay_rate, export_trace, load_trace
from .beliefs import (
    AgentState,
    BeliefVector,
    bayes_update,
    lfrhe_filter,
    lfrhe_update,
    min_rule_update,
)
from .engine import SimulationConfig, Trace, precondition_report, run, run_batch
from .estimator import SocialLearner
from .graph import (
    DirectedGraph,
    brute_force_strongly_r_robust,
    diameter,
    is_r_reachable,
    is_reachable,
    is_strongly_r_robust,
    neighbors,
    percolation_layers,
)
from .model import (
    HypothesisSet,
    ObservationModel,
    SignalStructure,
    check_identifiability,
    equivalence_set,
    kl_divergence,
    sample_signals,
    source_set,
)

__version__ = "0.1.0"
