"""Average-cost analysis of countable-state MDPs.

Evaluate long-run average cost for group-server queues and banded
countable-state CTMDPs with certified truncation error, measure policy
distance in a prefix metric, bound how the average cost moves between
nearby policies, search prefix-enumerable policy classes for optima, and
cross-check everything against a discrete-event simulator.
"""

from .common import (
    AvgMdpError,
    Bounded,
    ConfigError,
    ErgodicityError,
    KCapExceededError,
    NonConvergedError,
    PolicyBindingError,
    SearchSpaceTooLargeError,
    SelfCheckError,
    SingularTruncationError,
    UndecidableTailError,
    UnstablePolicyError,
)
from .continuity import (
    ContinuityReport,
    ModulusRow,
    eta_diff_bound,
    modulus_scan,
    neighborhood_sampler,
    sigma,
)
from .ctmdp import (
    GenericCtmdpModel,
    NuSolution,
    average_cost_generic,
    build_truncated_system,
    ctmdp_from_queue,
    scaled_model,
    solve_nu,
)
from .evaluate import evaluate_eta
from .linechain import (
    GapReport,
    LineChainModel,
    approaching_reward_chain,
    diminishing_cost_chain,
    eta_line,
    history_block_averages,
    history_stream,
    history_stream_average,
    stationary_supremum_gap,
)
from .policies import (
    AllOnTail,
    ConstantTail,
    MetricParams,
    Policy,
    TailRule,
    distance,
    enumerate_prefixes,
    enumeration_count,
    extensionally_equal,
    format_policy,
    in_ball,
    parse_policy,
    prefix_agreement,
)
from .queueing import (
    GroupServerModel,
    PolynomialHolding,
    QueueSteadyState,
    ServerGroup,
    SignedLinearHolding,
    StabilityCertificate,
    all_on_policy,
    average_cost,
    delta,
    service_rate,
    stability_certificate,
    steady_state,
)
from .search import (
    CmuCheck,
    SearchResult,
    cmu_policy,
    cmu_priority,
    exhaustive_search,
    verify_cmu,
)
from .sim import SimConfig, SimEstimate, simulate_eta

__version__ = "0.1.0"
