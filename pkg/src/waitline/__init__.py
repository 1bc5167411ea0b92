"""Waiting-line auctions: a descending clock, a queue of k slots, and an
announcer who decides what the crowd hears about the queue.

Waiting is the only payment, so the game is a pay-as-bid auction in time
whose total surplus depends on what information policy is in force.
"""

from .dist import HazardClass, OrderStatSpec, Pareto, Uniform, ValueDistribution, Weibull, hazard_monotonicity
from .engine import BatchResult, Draws, GameConfig, History, Outcome, OutcomeSummary, run_batch, run_game, simulate
from .equilibria import Belief, beta_reserve, beta_trivial, beta_uncertain, t_ae
from .policies import (
    Composite,
    ContinuousBadNews,
    FixedTime,
    FixedTimeAndState,
    FullRevelation,
    QueueFull,
    ThresholdReached,
    Trivial,
)
from .strategies import CbnEq, Deviation, Lottery, ReserveEq, RushReactor, StrategyProfile, Truthful, TrivialEq
from .beliefs import Fosd, belief_trace, detect_sudden_bad_news, fosd_compare
from .welfare import is_assortatively_efficient, summarize, virtual_surplus, welfare_order_check
from .entrycost import corollary2_comparison, reserve_value, shift_transform

__version__ = "0.1.0"

__all__ = [
    "HazardClass",
    "OrderStatSpec",
    "Pareto",
    "Uniform",
    "ValueDistribution",
    "Weibull",
    "hazard_monotonicity",
    "BatchResult",
    "Draws",
    "GameConfig",
    "History",
    "Outcome",
    "OutcomeSummary",
    "run_batch",
    "run_game",
    "simulate",
    "Belief",
    "beta_reserve",
    "beta_trivial",
    "beta_uncertain",
    "t_ae",
    "Composite",
    "ContinuousBadNews",
    "FixedTime",
    "FixedTimeAndState",
    "FullRevelation",
    "QueueFull",
    "ThresholdReached",
    "Trivial",
    "CbnEq",
    "Deviation",
    "Lottery",
    "ReserveEq",
    "RushReactor",
    "StrategyProfile",
    "Truthful",
    "TrivialEq",
    "Fosd",
    "belief_trace",
    "detect_sudden_bad_news",
    "fosd_compare",
    "is_assortatively_efficient",
    "summarize",
    "virtual_surplus",
    "welfare_order_check",
    "corollary2_comparison",
    "reserve_value",
    "shift_transform",
]
