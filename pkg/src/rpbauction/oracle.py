"""Straight-line reference implementation of the four auction stages.

Deliberately shares no code with :mod:`rpbauction.mechanism`: every score is
recomputed from scratch on each step, participants are addressed by list
position, and nothing is cached. Only meant for small campaigns (N, M <= 6)
where it serves as an independent cross-check.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from rpbauction.model import Campaign, Participant, TaskSpec


@dataclass
class ReferenceResult:
    primary: list
    redundancy: list
    secondary: list
    assignments: dict
    payments: dict
    budget: float
    covered: set


def reference_run(campaign: Campaign, family: str, reputation_aware: bool = True) -> ReferenceResult:
    people = sorted(campaign.participants, key=lambda p: p.id)
    n = len(people)
    ids = [p.id for p in people]
    val = {}
    for t in campaign.tasks:
        val[t.id] = t.value
    every_task = set(val)
    rep = [p.reputation if reputation_aware else 1.0 for p in people]
    bc = [p.collective_bid for p in people]
    tasks = [list(p.interest_set) for p in people]

    def worth(k, done):
        return math.fsum(val[t] for t in tasks[k] if t not in done)

    # redundancy-reputation factor per participant
    u = []
    for k in range(n):
        smallest = None
        for t in tasks[k]:
            cnt = 0
            for other in range(n):
                if t in tasks[other]:
                    cnt += 1
            if smallest is None or cnt < smallest:
                smallest = cnt
        d = 1.0 - 1.0 / smallest
        u.append(rep[k] / (0.5 + 0.5 * d))

    # stage 1
    S = []
    done = set()
    while len(S) < n:
        h = -1
        hs = 0.0
        for k in range(n):
            if k in S:
                continue
            sc = worth(k, done) - bc[k] / rep[k]
            if h < 0 or sc > hs:
                h, hs = k, sc
        if not bc[h] / rep[h] < worth(h, done):
            break
        S.append(h)
        for t in tasks[h]:
            done.add(t)

    # stage 2
    SR = []
    if family == "RPB":
        picked = []
        while len(picked) < n:
            h = -1
            hs = 0.0
            for k in range(n):
                if k in picked:
                    continue
                sc = worth(k, done) - bc[k] / u[k]
                if h < 0 or sc > hs:
                    h, hs = k, sc
            if not bc[h] / u[h] < worth(h, done):
                break
            picked.append(h)
            for t in tasks[h]:
                done.add(t)
        SR = [k for k in picked if k not in S]
        # drop anything only a removed primary duplicate would have covered
        done = set()
        for k in S + SR:
            done.update(tasks[k])

    # stage 3
    pay = [0.0] * n

    def rerun(i, pool, w):
        best = 0.0
        theta_done = set()
        left = list(pool)
        while left:
            q = -1
            qs = 0.0
            for k in left:
                sc = worth(k, theta_done) - bc[k] / w[k]
                if q < 0 or sc > qs:
                    q, qs = k, sc
            vi = worth(i, theta_done)
            vq = worth(q, theta_done)
            best = max(best, min(vi - (vq - bc[q] / w[q]), vi))
            left.remove(q)
            for t in tasks[q]:
                theta_done.add(t)
            if bc[q] / w[q] >= vq:
                break
        return max(best, 0.0)

    for i in S:
        pay[i] = rerun(i, [k for k in range(n) if k != i], rep)
    for i in SR:
        pay[i] = rerun(i, [k for k in range(n) if k != i and k not in S], u)

    budget = math.fsum(val.values()) - math.fsum(pay)

    # stage 4
    Ss = []
    assigned = {}
    if family in ("2SB", "RPB") and done != every_task:
        lists = {}
        for k in range(n):
            if k in S or k in SR:
                continue
            keep = [t for t in tasks[k] if t not in done]
            if keep:
                lists[k] = keep
        while lists and done != every_task:
            h = -1
            hs = 0.0
            for k in sorted(lists):
                sc = math.fsum(val[t] for t in lists[k]) - math.fsum(
                    people[k].per_task_bids[t] for t in lists[k]) / rep[k]
                if h < 0 or sc > hs:
                    h, hs = k, sc
            bh = math.fsum(people[h].per_task_bids[t] for t in lists[h])
            if not bh / rep[h] + rep[h] * budget >= 0:
                break
            got = lists.pop(h)
            Ss.append(h)
            assigned[h] = got
            pay[h] += bh
            done.update(got)
            for k in list(lists):
                lists[k] = [t for t in lists[k] if t not in got]
                if not lists[k]:
                    del lists[k]
            budget = budget * rep[h] - bh / rep[h]

    return ReferenceResult(
        primary=[ids[k] for k in S],
        redundancy=[ids[k] for k in SR],
        secondary=[ids[k] for k in Ss],
        assignments={ids[k]: tuple(v) for k, v in assigned.items()},
        payments={ids[k]: pay[k] for k in range(n)},
        budget=budget,
        covered=done,
    )


def random_small_campaign(rng: random.Random, max_participants: int = 6, max_tasks: int = 6) -> Campaign:
    """Abstract campaign with random interest sets; geometry is irrelevant to the mechanisms."""
    m = rng.randint(1, max_tasks)
    n = rng.randint(1, max_participants)
    tasks = [TaskSpec(j, 0.0, 0.0, rng.uniform(1, 5)) for j in range(1, m + 1)]
    people = []
    for i in range(1, n + 1):
        chosen = sorted(rng.sample(range(1, m + 1), rng.randint(1, m)))
        bids = {t: rng.uniform(max(0.1, tasks[t - 1].value - 2), tasks[t - 1].value + 2) for t in chosen}
        people.append(Participant(i, 0.0, 0.0, 30.0, rng.uniform(0.6, 0.9), tuple(chosen),
                                  rng.uniform(1, 10), bids))
    return Campaign.from_parts(tasks, people)


def compare(campaign: Campaign, tag: str) -> list[str]:
    """Mismatches between the mechanism module and the reference run for one tag."""
    from rpbauction.mechanism import MechanismKind, run_mechanism

    kind = MechanismKind.parse(tag)
    got = run_mechanism(campaign, kind)
    ref = reference_run(campaign, kind.family.value, kind.reputation_mode.value == "RA")
    problems = []
    if list(got.primary.winners) != ref.primary:
        problems.append(f"primary {got.primary.winners} != {ref.primary}")
    if list(got.redundancy.winners) != ref.redundancy:
        problems.append(f"redundancy {got.redundancy.winners} != {ref.redundancy}")
    if list(got.secondary.winners) != ref.secondary:
        problems.append(f"secondary {got.secondary.winners} != {ref.secondary}")
    if dict(got.secondary.assignments) != ref.assignments:
        problems.append("secondary assignments differ")
    for pid, amount in ref.payments.items():
        if got.payments[pid] != amount:
            problems.append(f"payment[{pid}] {got.payments[pid]!r} != {amount!r}")
    if set(got.covered_tasks) != ref.covered:
        problems.append("covered tasks differ")
    if not np.isclose(got.remaining_budget, ref.budget, rtol=0, atol=1e-9):
        problems.append(f"budget {got.remaining_budget!r} != {ref.budget!r}")
    return problems


def run_suite(n_campaigns: int = 200, seed: int = 0,
              tags=("TSCM-RA", "2SB-RA", "RPB-RA", "TSCM-RU", "2SB-RU", "RPB-RU")) -> list[str]:
    """Cross-check every tag on ``n_campaigns`` random small campaigns; returns all mismatches."""
    rng = random.Random(seed)
    failures = []
    for c in range(n_campaigns):
        campaign = random_small_campaign(rng)
        for tag in tags:
            for problem in compare(campaign, tag):
                failures.append(f"campaign {c} {tag}: {problem}")
    return failures
