"""Packet-drop analysis and ARQ budget allocation for CC-HARQ multi-hop chains."""

from .link import (
    LinkOutageParams,
    NetworkModel,
    db_to_linear,
    outage_prob,
    outage_prob_cc,
    outage_prob_cc_approx,
    outage_prob_type1,
)
from .optimizer import (
    SearchOutcome,
    SearchSpace,
    build_list,
    check_theorem3,
    enumerate_space,
    exhaustive_search,
    is_local_min,
    list_search,
    neighbors,
    solve_relaxation,
    uniform_distribution,
)
from .pdp import log10_pdp, pdp_approx, pdp_exact, pdp_type1
from .simulator import DelayParams, SimReport, derive_budget, estimate_pdp, simulate
from .special import ConvergenceError, marcum_q1_approx, marcum_q1_complement, marcum_q1_exact

__version__ = "0.1.0"
