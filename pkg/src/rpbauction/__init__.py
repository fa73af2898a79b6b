"""Auction-based task allocation for mobile crowdsensing campaigns.

Implements the TSCM, 2SB and redundancy-penalizing (RPB) mechanisms in
reputation-aware (RA) and reputation-unaware (RU) modes, a seeded campaign
generator, and a Monte Carlo scenario runner.
"""

from rpbauction.errors import ConsistencyError, ContractError, GenerationError, ParameterError
from rpbauction.mechanism import AuctionOutcome, MechanismKind, PaymentTable, WinnerStageResult, run_mechanism
from rpbauction.model import Campaign, GeneratorParams, Participant, TaskSpec, generate_campaign
from rpbauction.simulator import AggregateRow, ResultRow, ScenarioConfig, aggregate, run_scenario

__all__ = [
    "AggregateRow",
    "AuctionOutcome",
    "Campaign",
    "ConsistencyError",
    "ContractError",
    "GenerationError",
    "GeneratorParams",
    "MechanismKind",
    "ParameterError",
    "Participant",
    "PaymentTable",
    "ResultRow",
    "ScenarioConfig",
    "TaskSpec",
    "WinnerStageResult",
    "aggregate",
    "generate_campaign",
    "run_mechanism",
    "run_scenario",
]
