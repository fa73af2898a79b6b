import random

import pytest

from rpbauction.model import Campaign, Participant, TaskSpec

ACCEPTANCE_LINES: list[str] = []


def make_participant(pid, tasks, bid, rep, per_task=None):
    tasks = tuple(sorted(tasks))
    per_task = per_task or {t: 1.0 for t in tasks}
    return Participant(pid, 0.0, 0.0, 30.0, rep, tasks, bid, per_task)


def make_campaign(values, people):
    """values: {task id: value}; people: Participant list."""
    tasks = [TaskSpec(t, 0.0, 0.0, v) for t, v in values.items()]
    return Campaign.from_parts(tasks, people)


@pytest.fixture
def two_bidder_campaign():
    # A wins at round one; B's residual value 2 never beats 5/0.6
    return make_campaign(
        {1: 3.0, 2: 4.0, 3: 2.0},
        [make_participant(1, [1, 2], 2.0, 0.8), make_participant(2, [2, 3], 5.0, 0.6)],
    )


@pytest.fixture
def lone_bidder_campaign():
    # participant 3 is the only bidder on task 4 and is rejected by the primary stage
    return make_campaign(
        {1: 3.0, 2: 4.0, 3: 2.0, 4: 1.5},
        [
            make_participant(1, [1, 2], 2.0, 0.8, {1: 3.5, 2: 4.0}),
            make_participant(2, [2, 3], 5.0, 0.6, {2: 4.5, 3: 1.8}),
            make_participant(3, [4], 1.5, 0.7, {4: 1.2}),
        ],
    )


def random_abstract_campaign(rng: random.Random, max_n=12, max_m=12, unit_reputation=False):
    m = rng.randint(1, max_m)
    n = rng.randint(1, max_n)
    values = {j: rng.uniform(1, 5) for j in range(1, m + 1)}
    people = []
    for i in range(1, n + 1):
        chosen = sorted(rng.sample(range(1, m + 1), rng.randint(1, min(m, 4))))
        bids = {t: rng.uniform(max(0.1, values[t] - 2), values[t] + 2) for t in chosen}
        rep = 1.0 if unit_reputation else rng.uniform(0.6, 0.9)
        people.append(make_participant(i, chosen, rng.uniform(1, 10), rep, bids))
    return make_campaign(values, people)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
