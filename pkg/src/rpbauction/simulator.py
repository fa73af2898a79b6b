"""Seeded Monte Carlo sweeps over campaign size and auction count."""

from __future__ import annotations

import dataclasses
import math
import statistics
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from rpbauction.errors import ContractError, GenerationError, ParameterError
from rpbauction.mechanism import AuctionOutcome, MechanismKind, run_mechanism
from rpbauction.model import GeneratorParams, generate_campaign

AXES = ("auctions", "tasks", "participants")
_AXIS_CODE = {axis: k for k, axis in enumerate(AXES)}

DEFAULT_MECHANISMS = ("TSCM-RA", "2SB-RA", "RPB-RA")

# reconstructed scenario defaults: (sweep values, participants, tasks)
SCENARIO_DEFAULTS = {
    "tasks": (tuple(range(40, 241, 20)), 100, 200),
    "participants": (tuple(range(100, 501, 100)), 100, 200),
    "auctions": (tuple(range(10, 101, 10)), 100, 200),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment.

    On the ``auctions`` axis a sweep value K means K independent campaigns at
    the fixed (N, M); the auction index is reported as the repetition and
    ``repetitions`` is not used.
    """

    sweep_axis: str
    sweep_values: tuple[int, ...]
    mechanisms: tuple[MechanismKind, ...] = tuple(MechanismKind.parse(t) for t in DEFAULT_MECHANISMS)
    fixed_n_participants: int = 100
    fixed_n_tasks: int = 200
    repetitions: int = 30
    master_seed: int = 0
    generator: GeneratorParams = field(default_factory=GeneratorParams)

    def __post_init__(self):
        if self.sweep_axis not in AXES:
            raise ParameterError(f"sweep_axis must be one of {AXES}, got {self.sweep_axis!r}")
        if not self.sweep_values:
            raise ParameterError("sweep_values must be non-empty")
        if any(b <= a for a, b in zip(self.sweep_values, self.sweep_values[1:])):
            raise ParameterError("sweep_values must be strictly increasing")
        if any(v < 1 for v in self.sweep_values):
            raise ParameterError("sweep_values must be positive")
        if self.repetitions < 1:
            raise ParameterError(f"repetitions must be >= 1, got {self.repetitions}")
        if not self.mechanisms:
            raise ParameterError("at least one mechanism is required")
        if not 0 <= self.master_seed < 2**64:
            raise ParameterError("master_seed must be an unsigned 64-bit integer")

    @classmethod
    def for_axis(cls, axis: str, **overrides) -> "ScenarioConfig":
        if axis not in SCENARIO_DEFAULTS:
            raise ParameterError(f"sweep_axis must be one of {AXES}, got {axis!r}")
        values, n, m = SCENARIO_DEFAULTS[axis]
        kwargs = dict(sweep_axis=axis, sweep_values=values, fixed_n_participants=n, fixed_n_tasks=m)
        kwargs.update(overrides)
        return cls(**kwargs)

    def cells(self) -> list[tuple[int, int]]:
        """(sweep value, repetition) pairs in emission order."""
        out = []
        for v in self.sweep_values:
            reps = v if self.sweep_axis == "auctions" else self.repetitions
            out.extend((v, r) for r in range(reps))
        return out

    def params_for(self, value: int, seed: int) -> GeneratorParams:
        n, m = self.fixed_n_participants, self.fixed_n_tasks
        if self.sweep_axis == "tasks":
            m = value
        elif self.sweep_axis == "participants":
            n = value
        return dataclasses.replace(self.generator, n_participants=n, n_tasks=m, seed=seed)


@dataclass(frozen=True)
class ResultRow:
    mechanism: str
    axis: str
    value: int
    rep: int
    seed: int
    clearance_rate: float
    n_primary: int
    n_redundancy: int
    n_secondary: int
    payments: float
    budget: float
    runtime_ms: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class AggregateRow:
    mechanism: str
    axis: str
    value: int
    cr_mean: float
    cr_std: float
    payments_mean: float
    budget_mean: float
    n: int = field(default=0, compare=False)


def run_seed(master_seed: int, axis: str, value: int, rep: int) -> int:
    """Stable 64-bit seed for one (sweep value, repetition) cell."""
    ss = np.random.SeedSequence([master_seed, _AXIS_CODE[axis], value, rep])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def clearance_rate(outcome: AuctionOutcome, n_tasks: int) -> float:
    if n_tasks < 1:
        raise ContractError(f"n_tasks must be >= 1, got {n_tasks}")
    return len(outcome.covered_tasks) / n_tasks


def _run_cell(config: ScenarioConfig, value: int, rep: int) -> list[ResultRow]:
    seed = run_seed(config.master_seed, config.sweep_axis, value, rep)
    params = config.params_for(value, seed)
    try:
        campaign = generate_campaign(params)
    except (GenerationError, ParameterError) as exc:
        raise type(exc)(f"{config.sweep_axis}={value} rep={rep} seed={seed}: {exc}") from exc
    rows = []
    for kind in config.mechanisms:
        start = time.perf_counter()
        outcome = run_mechanism(campaign, kind)
        elapsed = (time.perf_counter() - start) * 1000.0
        rows.append(ResultRow(
            mechanism=kind.tag,
            axis=config.sweep_axis,
            value=value,
            rep=rep,
            seed=seed,
            clearance_rate=clearance_rate(outcome, campaign.n_tasks),
            n_primary=len(outcome.primary.winners),
            n_redundancy=len(outcome.redundancy.winners),
            n_secondary=len(outcome.secondary.winners),
            payments=outcome.payments.total,
            budget=outcome.remaining_budget,
            runtime_ms=elapsed,
        ))
    return rows


def _run_cells(args) -> list[ResultRow]:
    config, cells = args
    return [row for value, rep in cells for row in _run_cell(config, value, rep)]


def sort_rows(rows: Iterable[ResultRow], mechanism_order: Sequence[str] | None = None) -> list[ResultRow]:
    """Order rows by mechanism, then sweep value, then repetition."""
    order = {m: k for k, m in enumerate(mechanism_order or ())}
    return sorted(rows, key=lambda r: (order.get(r.mechanism, len(order)), r.mechanism, r.value, r.rep))


def run_scenario(config: ScenarioConfig, jobs: int = 1) -> list[ResultRow]:
    """Run every mechanism on the same campaign for each cell of the sweep.

    Parallel and sequential runs return the same rows in the same order.
    """
    cells = config.cells()
    if jobs <= 1 or len(cells) < 2:
        rows = _run_cells((config, cells))
    else:
        chunks = [cells[k::jobs] for k in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = [r for part in pool.map(_run_cells, [(config, c) for c in chunks if c]) for r in part]
    return sort_rows(rows, [k.tag for k in config.mechanisms])


def aggregate(rows: Sequence[ResultRow]) -> list[AggregateRow]:
    """Mean and sample standard deviation of the clearance rate per (mechanism, sweep value)."""
    if not rows:
        raise ContractError("cannot aggregate an empty row set")
    groups: dict[tuple[str, str, int], list[ResultRow]] = defaultdict(list)
    for r in rows:
        groups[(r.mechanism, r.axis, r.value)].append(r)
    out = []
    for (mech, axis, value), group in sorted(groups.items()):
        # fixed summation order so the result does not depend on input order
        group = sorted(group, key=lambda r: (r.rep, r.seed))
        crs = [r.clearance_rate for r in group]
        out.append(AggregateRow(
            mechanism=mech,
            axis=axis,
            value=value,
            cr_mean=math.fsum(crs) / len(crs),
            cr_std=statistics.stdev(crs) if len(crs) > 1 else 0.0,
            payments_mean=math.fsum(r.payments for r in group) / len(group),
            budget_mean=math.fsum(r.budget for r in group) / len(group),
            n=len(group),
        ))
    return out


def mean_curve(aggregates: Iterable[AggregateRow], mechanism: str) -> dict[int, float]:
    """Sweep value -> mean clearance rate for one mechanism."""
    return {a.value: a.cr_mean for a in aggregates if a.mechanism == mechanism}
