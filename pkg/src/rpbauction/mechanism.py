"""Greedy reverse-auction stages and their composition into TSCM, 2SB and RPB.

Scores follow one pattern throughout: a candidate's marginal value (total
value of its tasks not yet covered) minus its bid divided by a weight. The
weight is the reputation in the primary and secondary stages and the
redundancy-reputation factor in the redundancy stage. In reputation-unaware
mode every reputation is taken to be 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from rpbauction.errors import ContractError
from rpbauction.model import Campaign, Participant


class Family(str, enum.Enum):
    TSCM = "TSCM"
    TWO_STAGE = "2SB"
    RPB = "RPB"


class ReputationMode(str, enum.Enum):
    RA = "RA"
    RU = "RU"


@dataclass(frozen=True)
class MechanismKind:
    family: Family
    reputation_mode: ReputationMode = ReputationMode.RA

    @property
    def tag(self) -> str:
        return f"{self.family.value}-{self.reputation_mode.value}"

    @property
    def runs_redundancy(self) -> bool:
        return self.family is Family.RPB

    @property
    def runs_secondary(self) -> bool:
        return self.family is not Family.TSCM

    @classmethod
    def parse(cls, tag: str) -> "MechanismKind":
        """Parse tags such as ``RPB-RA`` or ``2sb-ru``; the mode defaults to RA."""
        family, _, mode = tag.strip().upper().partition("-")
        try:
            return cls(Family(family), ReputationMode(mode or "RA"))
        except ValueError:
            raise ValueError(f"unknown mechanism tag {tag!r}") from None

    def __str__(self) -> str:
        return self.tag


@dataclass(frozen=True)
class WinnerStageResult:
    winners: tuple[int, ...] = ()
    covered_tasks: frozenset[int] = frozenset()
    # task sets handed to each winner; only populated by the secondary stage
    assignments: Mapping[int, tuple[int, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class PaymentTable:
    payments: Mapping[int, float]

    @property
    def total(self) -> float:
        return math.fsum(self.payments.values())

    def __getitem__(self, pid: int) -> float:
        return self.payments.get(pid, 0.0)

    def merged(self, other: "PaymentTable") -> "PaymentTable":
        out = dict(self.payments)
        for pid, amount in other.payments.items():
            out[pid] = out.get(pid, 0.0) + amount
        return PaymentTable(out)


@dataclass(frozen=True)
class TraceRecord:
    """One selection decision: the stage's argmax candidate and whether it was admitted."""

    stage: str
    participant: int
    score: float
    value: float
    bid_term: float
    admitted: bool
    budget: float | None = None

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "participant": self.participant,
            "score": self.score,
            "value": self.value,
            "bid_term": self.bid_term,
            "admitted": self.admitted,
            "budget": self.budget,
        }


@dataclass(frozen=True)
class AuctionOutcome:
    mechanism: MechanismKind
    primary: WinnerStageResult
    redundancy: WinnerStageResult
    secondary: WinnerStageResult
    payments: PaymentTable
    covered_tasks: frozenset[int]
    clearance_rate: float
    remaining_budget: float
    total_value: float
    stage_trace: tuple[TraceRecord, ...] = ()

    @property
    def winners(self) -> frozenset[int]:
        return frozenset(self.primary.winners) | frozenset(self.redundancy.winners) | frozenset(
            self.secondary.winners)

    def to_dict(self) -> dict:
        def stage(s: WinnerStageResult) -> dict:
            return {
                "winners": list(s.winners),
                "covered_tasks": sorted(s.covered_tasks),
                "assignments": {str(k): list(v) for k, v in s.assignments.items()},
            }

        return {
            "mechanism": self.mechanism.tag,
            "primary": stage(self.primary),
            "redundancy": stage(self.redundancy),
            "secondary": stage(self.secondary),
            "payments": {str(k): v for k, v in sorted(self.payments.payments.items())},
            "covered_tasks": sorted(self.covered_tasks),
            "clearance_rate": self.clearance_rate,
            "remaining_budget": self.remaining_budget,
            "total_value": self.total_value,
            "stage_trace": [r.to_dict() for r in self.stage_trace],
        }


# ---------------------------------------------------------------------------
# Formulas
# ---------------------------------------------------------------------------

def _mode(mode: ReputationMode | str) -> ReputationMode:
    return ReputationMode(mode)


def reputation_weight(p: Participant, mode: ReputationMode | str) -> float:
    return 1.0 if _mode(mode) is ReputationMode.RU else p.reputation


def _value_of(tasks: Iterable[int], values: Mapping[int, float], covered: frozenset[int] | set[int]) -> float:
    return math.fsum(values[t] for t in tasks if t not in covered)


def marginal_value(i: int, covered: Iterable[int], campaign: Campaign) -> float:
    """Total value of participant ``i``'s tasks that are not in ``covered``."""
    p = campaign.participant(i)
    return _value_of(p.interest_set, campaign.task_values(), frozenset(covered))


def redundancy_factor(i: int, campaign: Campaign) -> float:
    """One minus the reciprocal of the smallest bidder count over i's tasks."""
    p = campaign.participant(i)
    if not p.interest_set:
        raise ContractError(f"participant {i} has an empty interest set")
    counts = [campaign.bidder_counts[t] for t in p.interest_set]
    if min(counts) < 1:
        raise ContractError(f"participant {i} bids on a task with zero recorded bidders")
    return 1.0 - max(1.0 / c for c in counts)


def map_redundancy(d: float) -> float:
    """Affine map of the raw redundancy factor from [0, 1) onto [0.5, 1)."""
    if not 0.0 <= d < 1.0:
        raise ContractError(f"redundancy factor must lie in [0, 1), got {d}")
    return 0.5 + 0.5 * d


def redundancy_reputation_factor(r: float, d_mapped: float) -> float:
    if not 0.5 <= d_mapped <= 1.0:
        raise ContractError(f"mapped redundancy factor must lie in [0.5, 1], got {d_mapped}")
    if not 0.0 < r <= 1.0:
        raise ContractError(f"reputation must lie in (0, 1], got {r}")
    return r / d_mapped


def remaining_budget(total_value: float, payments: PaymentTable | Mapping[int, float]) -> float:
    """Budget left once ``payments`` are subtracted from the campaign value."""
    amounts = payments.payments if isinstance(payments, PaymentTable) else payments
    return total_value - math.fsum(amounts.values())


def redundancy_weights(campaign: Campaign, mode: ReputationMode | str) -> dict[int, float]:
    return {
        p.id: redundancy_reputation_factor(reputation_weight(p, mode),
                                           map_redundancy(redundancy_factor(p.id, campaign)))
        for p in campaign.participants
    }


def reputation_weights(campaign: Campaign, mode: ReputationMode | str) -> dict[int, float]:
    return {p.id: reputation_weight(p, mode) for p in campaign.participants}


# ---------------------------------------------------------------------------
# Collective-bid greedy stages
# ---------------------------------------------------------------------------

def _argmax(candidates: Iterable[int], score) -> tuple[int, float] | None:
    """Highest-scoring candidate; ties go to the lowest id."""
    best = None
    for pid in sorted(candidates):
        s = score(pid)
        if best is None or s > best[1]:
            best = (pid, s)
    return best


class _CollectiveScores:
    """Incrementally maintained collective-bid scores over a shrinking candidate pool.

    Only candidates sharing a task with a newly covered one are rescored, which
    keeps the payment reruns affordable at a few hundred participants.
    """

    def __init__(self, by_id: Mapping[int, Participant], pool: Iterable[int],
                 weights: Mapping[int, float], values: Mapping[int, float],
                 covered: Iterable[int] = ()):
        self.by_id = by_id
        self.weights = weights
        self.values = values
        self.covered = set(covered)
        self.scores: dict[int, float] = {}
        self.bidders: dict[int, list[int]] = {}
        for pid in pool:
            for t in by_id[pid].interest_set:
                self.bidders.setdefault(t, []).append(pid)
            self.scores[pid] = self._score(pid)

    def value(self, pid: int) -> float:
        return _value_of(self.by_id[pid].interest_set, self.values, self.covered)

    def bid_term(self, pid: int) -> float:
        return self.by_id[pid].collective_bid / self.weights[pid]

    def _score(self, pid: int) -> float:
        return self.value(pid) - self.bid_term(pid)

    def best(self) -> tuple[int, float] | None:
        if not self.scores:
            return None
        return max(self.scores.items(), key=lambda kv: (kv[1], -kv[0]))

    def take(self, pid: int) -> set[int]:
        """Remove ``pid`` from the pool, cover its tasks, and return the newly covered ones."""
        del self.scores[pid]
        fresh = set(self.by_id[pid].interest_set) - self.covered
        self.covered |= fresh
        stale = {q for t in fresh for q in self.bidders.get(t, ()) if q in self.scores}
        for q in stale:
            self.scores[q] = self._score(q)
        return fresh


def _collective_greedy(campaign: Campaign, weights: Mapping[int, float], covered: frozenset[int],
                       stage: str) -> tuple[list[int], set[int], list[TraceRecord]]:
    """Admit the best-scoring participant while its weighted bid is below its marginal value."""
    by_id = {p.id: p for p in campaign.participants}
    state = _CollectiveScores(by_id, by_id, weights, campaign.task_values(), covered)
    newly: set[int] = set()
    winners: list[int] = []
    trace: list[TraceRecord] = []
    while state.scores:
        h, s = state.best()
        value = state.value(h)
        bid_term = state.bid_term(h)
        admit = bid_term < value
        trace.append(TraceRecord(stage, h, s, value, bid_term, admit))
        if not admit:
            break
        winners.append(h)
        newly |= state.take(h)
    return winners, newly, trace


def select_primary_winners(campaign: Campaign, mode: ReputationMode | str = ReputationMode.RA,
                           _trace: list | None = None) -> WinnerStageResult:
    winners, newly, trace = _collective_greedy(campaign, reputation_weights(campaign, mode),
                                               frozenset(), "primary")
    if _trace is not None:
        _trace.extend(trace)
    return WinnerStageResult(tuple(winners), frozenset(newly))


def select_redundancy_winners(campaign: Campaign, primary: WinnerStageResult,
                              mode: ReputationMode | str = ReputationMode.RA,
                              _trace: list | None = None) -> WinnerStageResult:
    """Second collective-bid pass weighted by the redundancy-reputation factor.

    Marginal values are measured against everything covered so far, primary
    winners included. Primary winners the loop happens to admit are dropped
    afterwards, along with the coverage only they contributed.
    """
    weights = redundancy_weights(campaign, mode)
    winners, _, trace = _collective_greedy(campaign, weights, primary.covered_tasks, "redundancy")
    if _trace is not None:
        _trace.extend(trace)
    primary_set = set(primary.winners)
    kept = tuple(w for w in winners if w not in primary_set)
    by_id = {p.id: p for p in campaign.participants}
    covered = set().union(*(by_id[w].interest_set for w in kept)) - primary.covered_tasks
    return WinnerStageResult(kept, frozenset(covered))


# ---------------------------------------------------------------------------
# Payments
# ---------------------------------------------------------------------------

def _critical_payment(i: int, pool: Sequence[int], by_id: Mapping[int, Participant],
                      weights: Mapping[int, float], values: Mapping[int, float]) -> float:
    """Rerun the greedy without ``i`` and keep the best value ``i`` could still have bid."""
    payment = 0.0
    state = _CollectiveScores(by_id, pool, weights, values)
    tasks_i = by_id[i].interest_set
    while state.scores:
        q, _ = state.best()
        v_i = _value_of(tasks_i, values, state.covered)
        v_q = state.value(q)
        bid_q = state.bid_term(q)
        payment = max(payment, min(v_i - (v_q - bid_q), v_i))
        state.take(q)
        if bid_q >= v_q:
            break
    return max(payment, 0.0)


def compute_payments(campaign: Campaign, primary: WinnerStageResult, redundancy: WinnerStageResult,
                     mode: ReputationMode | str = ReputationMode.RA,
                     printed_pool: bool = False) -> PaymentTable:
    """Critical-value payments for primary and redundancy winners.

    The rerun for winner ``i`` draws from every other participant (for
    redundancy winners: every non-primary participant). ``printed_pool=True``
    restricts it to the other winners of the same stage instead.
    """
    by_id = {p.id: p for p in campaign.participants}
    values = campaign.task_values()
    payments = {p.id: 0.0 for p in campaign.participants}
    everyone = sorted(by_id)

    rweights = reputation_weights(campaign, mode)
    for i in primary.winners:
        pool = primary.winners if printed_pool else everyone
        payments[i] = _critical_payment(i, [q for q in pool if q != i], by_id, rweights, values)

    if redundancy.winners:
        uweights = redundancy_weights(campaign, mode)
        in_primary = set(primary.winners)
        for i in redundancy.winners:
            pool = redundancy.winners if printed_pool else [q for q in everyone if q not in in_primary]
            payments[i] = _critical_payment(i, [q for q in pool if q != i], by_id, uweights, values)
    return PaymentTable(payments)


# ---------------------------------------------------------------------------
# Descriptive-bid secondary stage
# ---------------------------------------------------------------------------

def select_secondary_winners(campaign: Campaign, covered: Iterable[int], excluded: Iterable[int],
                             budget: float, mode: ReputationMode | str = ReputationMode.RA,
                             _trace: list | None = None) -> tuple[WinnerStageResult, PaymentTable, float]:
    """Cover leftover tasks with descriptive bids, spending down the budget.

    Each candidate only keeps its uncovered tasks; an admitted winner takes all
    of them, is paid the sum of its per-task bids on them, and those tasks are
    removed from every other candidate. The budget shrinks multiplicatively by
    the winner's reputation and then by its weighted bid.
    """
    covered = set(covered)
    all_tasks = campaign.task_ids
    if covered >= all_tasks:
        return WinnerStageResult(), PaymentTable({}), budget

    values = campaign.task_values()
    excluded = set(excluded)
    weights = reputation_weights(campaign, mode)
    lists: dict[int, list[int]] = {}
    for p in campaign.participants:
        if p.id in excluded:
            continue
        pruned = [t for t in p.interest_set if t not in covered]
        if pruned:
            lists[p.id] = pruned
    by_id = {p.id: p for p in campaign.participants}

    def descriptive(pid: int) -> float:
        bids = by_id[pid].per_task_bids
        return math.fsum(bids[t] for t in lists[pid])

    def score(pid: int) -> float:
        return math.fsum(values[t] for t in lists[pid]) - descriptive(pid) / weights[pid]

    winners: list[int] = []
    assignments: dict[int, tuple[int, ...]] = {}
    paid: dict[int, float] = {}
    newly: set[int] = set()
    while lists and not covered >= all_tasks:
        h, s = _argmax(lists, score)
        b_h = descriptive(h)
        r_h = weights[h]
        admit = b_h / r_h + r_h * budget >= 0
        trace_rec = TraceRecord("secondary", h, s, math.fsum(values[t] for t in lists[h]), b_h / r_h,
                                admit, budget)
        if _trace is not None:
            _trace.append(trace_rec)
        if not admit:
            break
        taken = tuple(lists.pop(h))
        winners.append(h)
        assignments[h] = taken
        paid[h] = b_h
        covered.update(taken)
        newly.update(taken)
        for pid in list(lists):
            lists[pid] = [t for t in lists[pid] if t not in newly]
            if not lists[pid]:
                del lists[pid]
        budget = budget * r_h - b_h / r_h
    return WinnerStageResult(tuple(winners), frozenset(newly), assignments), PaymentTable(paid), budget


def outlier_detection(campaign: Campaign, outcome: AuctionOutcome) -> AuctionOutcome:
    """Extension hook for outlier filtering and reputation updates; identity for now."""
    return outcome


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------

def run_mechanism(campaign: Campaign, kind: MechanismKind | str,
                  printed_payment_pool: bool = False) -> AuctionOutcome:
    if isinstance(kind, str):
        kind = MechanismKind.parse(kind)
    mode = kind.reputation_mode
    trace: list[TraceRecord] = []

    primary = select_primary_winners(campaign, mode, _trace=trace)
    if kind.runs_redundancy:
        redundancy = select_redundancy_winners(campaign, primary, mode, _trace=trace)
    else:
        redundancy = WinnerStageResult()
    payments = compute_payments(campaign, primary, redundancy, mode, printed_pool=printed_payment_pool)

    total_value = campaign.total_value
    budget = remaining_budget(total_value, payments)
    covered = primary.covered_tasks | redundancy.covered_tasks
    secondary = WinnerStageResult()
    if kind.runs_secondary:
        secondary, extra, budget = select_secondary_winners(
            campaign, covered, set(primary.winners) | set(redundancy.winners), budget, mode, _trace=trace)
        payments = payments.merged(extra)
        covered = covered | secondary.covered_tasks

    outcome = AuctionOutcome(
        mechanism=kind,
        primary=primary,
        redundancy=redundancy,
        secondary=secondary,
        payments=payments,
        covered_tasks=frozenset(covered),
        clearance_rate=len(covered) / campaign.n_tasks,
        remaining_budget=budget,
        total_value=total_value,
        stage_trace=tuple(trace),
    )
    return outlier_detection(campaign, outcome)
