"""Campaign domain types, seeded generation, and bid arithmetic."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from rpbauction.errors import ConsistencyError, GenerationError, ParameterError

MAX_PLACEMENT_RETRIES = 1000
MIN_TASK_BID = 0.1

# spawn_key prefixes for the per-entity random streams
_TASK_STREAM = 0
_PARTICIPANT_STREAM = 1


@dataclass(frozen=True)
class TaskSpec:
    id: int
    x: float
    y: float
    value: float

    @property
    def location(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Participant:
    """A bidder with a collective bid and one descriptive bid per task of interest.

    ``interest_set`` is sorted by task id and ``per_task_bids`` has exactly the
    same keys.
    """

    id: int
    x: float
    y: float
    interest_radius: float
    reputation: float
    interest_set: tuple[int, ...]
    collective_bid: float
    per_task_bids: Mapping[int, float] = field(default_factory=dict)

    @property
    def location(self) -> tuple[float, float]:
        return (self.x, self.y)

    def interested_in(self, task_id: int) -> bool:
        return task_id in self.per_task_bids


@dataclass(frozen=True)
class Campaign:
    width: float
    height: float
    tasks: tuple[TaskSpec, ...]
    participants: tuple[Participant, ...]
    bidder_counts: Mapping[int, int]

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_participants(self) -> int:
        return len(self.participants)

    @property
    def task_ids(self) -> frozenset[int]:
        return frozenset(t.id for t in self.tasks)

    @property
    def total_value(self) -> float:
        return math.fsum(t.value for t in self.tasks)

    def task_values(self) -> dict[int, float]:
        return {t.id: t.value for t in self.tasks}

    def participant(self, pid: int) -> Participant:
        for p in self.participants:
            if p.id == pid:
                return p
        raise KeyError(f"unknown participant id {pid}")

    def reachable_tasks(self) -> frozenset[int]:
        return frozenset(t for t, c in self.bidder_counts.items() if c >= 1)

    @classmethod
    def from_parts(cls, tasks: Sequence[TaskSpec], participants: Sequence[Participant],
                   width: float = 1000.0, height: float = 1000.0) -> "Campaign":
        """Build a campaign and derive its bidder counts."""
        tasks = tuple(sorted(tasks, key=lambda t: t.id))
        participants = tuple(participants)
        counts = bidder_counts(participants, [t.id for t in tasks])
        return cls(width, height, tasks, participants, counts)

    # -- JSON ---------------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "area": {"width": self.width, "height": self.height},
            "tasks": [{"id": t.id, "x": t.x, "y": t.y, "value": t.value} for t in self.tasks],
            "participants": [
                {
                    "id": p.id,
                    "x": p.x,
                    "y": p.y,
                    "interest_radius": p.interest_radius,
                    "reputation": p.reputation,
                    "interest_set": list(p.interest_set),
                    "collective_bid": p.collective_bid,
                    "per_task_bids": {str(k): v for k, v in p.per_task_bids.items()},
                }
                for p in self.participants
            ],
            "bidder_counts": {str(k): v for k, v in self.bidder_counts.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Campaign":
        tasks = [TaskSpec(int(t["id"]), float(t["x"]), float(t["y"]), float(t["value"]))
                 for t in doc["tasks"]]
        participants = [
            Participant(
                id=int(p["id"]),
                x=float(p["x"]),
                y=float(p["y"]),
                interest_radius=float(p["interest_radius"]),
                reputation=float(p["reputation"]),
                interest_set=tuple(int(t) for t in p["interest_set"]),
                collective_bid=float(p["collective_bid"]),
                per_task_bids={int(k): float(v) for k, v in p["per_task_bids"].items()},
            )
            for p in doc["participants"]
        ]
        area = doc.get("area", {})
        campaign = cls.from_parts(tasks, participants, float(area.get("width", 1000.0)),
                                  float(area.get("height", 1000.0)))
        stored = doc.get("bidder_counts")
        if stored is not None and {int(k): int(v) for k, v in stored.items()} != dict(campaign.bidder_counts):
            raise ConsistencyError("stored bidder_counts disagree with participant interest sets")
        return campaign

    @classmethod
    def from_json(cls, text: str) -> "Campaign":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class GeneratorParams:
    n_participants: int = 100
    n_tasks: int = 200
    area_width: float = 1000.0
    area_height: float = 1000.0
    interest_radius: float = 30.0
    task_value_range: tuple[float, float] = (1.0, 5.0)
    collective_bid_range: tuple[float, float] = (1.0, 10.0)
    alpha: float = 2.0
    reputation_range: tuple[float, float] = (0.6, 0.9)
    seed: int = 0

    def validate(self) -> None:
        if self.n_participants < 1:
            raise ParameterError(f"n_participants must be >= 1, got {self.n_participants}")
        if self.n_tasks < 1:
            raise ParameterError(f"n_tasks must be >= 1, got {self.n_tasks}")
        if not self.interest_radius > 0:
            raise ParameterError(f"interest_radius must be > 0, got {self.interest_radius}")
        if not (self.area_width > 0 and self.area_height > 0):
            raise ParameterError("area dimensions must be positive")
        if self.alpha < 0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")
        for name in ("task_value_range", "collective_bid_range", "reputation_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ParameterError(f"{name} has min > max: {lo} > {hi}")
        lo, hi = self.reputation_range
        if lo <= 0 or hi > 1:
            raise ParameterError(f"reputation_range must lie in (0, 1], got {self.reputation_range}")
        if self.collective_bid_range[0] <= 0:
            raise ParameterError("collective bids must be positive")
        if not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


def _distance(ax: float, ay: float, bx: float, by: float) -> float:
    return math.hypot(ax - bx, ay - by)


def interest_set(p_location: tuple[float, float], radius: float,
                 tasks: Iterable[TaskSpec]) -> tuple[int, ...]:
    """Ids of tasks within ``radius`` (inclusive) of ``p_location``, sorted."""
    if not radius > 0:
        raise ParameterError(f"radius must be > 0, got {radius}")
    px, py = p_location
    return tuple(sorted(t.id for t in tasks if _distance(px, py, t.x, t.y) <= radius))


def bidder_counts(participants: Iterable[Participant], task_ids: int | Iterable[int]) -> dict[int, int]:
    """Number of participants bidding on each task.

    ``task_ids`` is either the task count M (ids 1..M) or an explicit id list.
    """
    ids = range(1, task_ids + 1) if isinstance(task_ids, int) else task_ids
    counts = {t: 0 for t in ids}
    for p in participants:
        for t in p.interest_set:
            if t not in counts:
                raise ConsistencyError(f"participant {p.id} references unknown task {t}")
            counts[t] += 1
    return counts


def sum_descriptive_bids(p: Participant) -> float:
    """Total of the participant's per-task bids over its interest set."""
    return math.fsum(p.per_task_bids[t] for t in p.interest_set)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def generate_campaign(params: GeneratorParams) -> Campaign:
    """Draw a random campaign.

    Tasks come from one stream; participant ``i`` draws from its own stream
    keyed by ``i``, so changing N leaves tasks and earlier participants intact.
    A participant with no task in range is re-placed until it has one.
    """
    params.validate()
    w, h = params.area_width, params.area_height

    trng = _rng(params.seed, _TASK_STREAM)
    txy = trng.uniform((0.0, 0.0), (w, h), size=(params.n_tasks, 2))
    tvals = trng.uniform(*params.task_value_range, size=params.n_tasks)
    tasks = tuple(TaskSpec(j + 1, float(txy[j, 0]), float(txy[j, 1]), float(tvals[j]))
                  for j in range(params.n_tasks))
    task_xy = txy
    values = {t.id: t.value for t in tasks}
    r2 = params.interest_radius ** 2

    participants = []
    for i in range(params.n_participants):
        prng = _rng(params.seed, _PARTICIPANT_STREAM, i)
        for _ in range(MAX_PLACEMENT_RETRIES):
            x, y = prng.uniform((0.0, 0.0), (w, h))
            d2 = (task_xy[:, 0] - x) ** 2 + (task_xy[:, 1] - y) ** 2
            # loose vectorized prefilter; membership decided by the scalar rule
            near = np.flatnonzero(d2 <= r2 * (1 + 1e-9))
            interest = interest_set((float(x), float(y)), params.interest_radius,
                                    (tasks[j] for j in near))
            if interest:
                break
        else:
            raise GenerationError(
                f"participant {i + 1}: no task within {params.interest_radius} m after "
                f"{MAX_PLACEMENT_RETRIES} placements")
        reputation = float(prng.uniform(*params.reputation_range))
        collective = float(prng.uniform(*params.collective_bid_range))
        bids = {}
        for t in interest:
            lo = max(MIN_TASK_BID, values[t] - params.alpha)
            bids[t] = float(prng.uniform(lo, values[t] + params.alpha))
        participants.append(Participant(
            id=i + 1,
            x=float(x),
            y=float(y),
            interest_radius=params.interest_radius,
            reputation=reputation,
            interest_set=interest,
            collective_bid=collective,
            per_task_bids=bids,
        ))

    return Campaign(w, h, tasks, tuple(participants), bidder_counts(participants, params.n_tasks))
