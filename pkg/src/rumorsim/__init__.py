"""Rumor dissemination in the generalized random phone call model."""

from .core import (
    ConfigError,
    NetworkState,
    Protocol,
    ProtocolConfig,
    RumorId,
    SamplingMode,
    TrialRng,
    init_state,
    sample_peer_matrix,
    sample_peers,
    trial_seed,
)
from .failures import FailurePlan, PlanError, make_adversarial_plan
from .metrics import AggregateReport, TrialReport, aggregate, overhead
from .protocols import (
    RoundOutcome,
    StopRule,
    polite_pushpull_round,
    pull_round,
    push_round,
    run_trial,
    switch_round_for_overhead,
)

__version__ = "0.1.0"
