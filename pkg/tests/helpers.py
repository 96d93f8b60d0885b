"""Independent oracles and generators shared by the test modules.

Everything here deliberately avoids the code paths it is used to check:
the path-cover oracle enumerates covers directly, and the barrier oracle
computes makespans from wave arithmetic instead of event simulation.
"""
from __future__ import annotations

import math
import random
from collections import deque

from wlasim.graph import DependencyGraph, TaskSet, rank_group_stages
from wlasim.resources import Demand, Dimension, ResourcePool


def topological_order(ids: list[str], edges: set[tuple[str, str]]) -> list[str]:
    indegree = {i: 0 for i in ids}
    succs: dict[str, list[str]] = {i: [] for i in ids}
    for u, v in edges:
        succs[u].append(v)
        indegree[v] += 1
    frontier = deque(sorted(i for i in ids if indegree[i] == 0))
    order = []
    while frontier:
        node = frontier.popleft()
        order.append(node)
        for succ in sorted(succs[node]):
            indegree[succ] -= 1
            if indegree[succ] == 0:
                frontier.append(succ)
    assert len(order) == len(ids), "graph must be acyclic"
    return order


def brute_force_min_path_cover(ids: list[str], edges: set[tuple[str, str]]) -> int:
    """Minimum vertex-disjoint path cover size by direct enumeration.

    Scans nodes in topological order; each node either extends one open path
    tail along a direct edge or starts a new path. Covers built this way
    enumerate every vertex-disjoint edge-path cover.
    """
    order = topological_order(ids, edges)
    best = len(ids)

    def explore(index: int, tails: tuple[str, ...], count: int) -> None:
        nonlocal best
        if count >= best:
            return
        if index == len(order):
            best = count
            return
        node = order[index]
        for i, tail in enumerate(tails):
            if (tail, node) in edges:
                explore(index + 1, tails[:i] + (node,) + tails[i + 1 :], count)
        explore(index + 1, tails + (node,), count + 1)

    explore(0, (), 0)
    return best


def barrier_wave_oracle(dg: DependencyGraph, pool: ResourcePool) -> float:
    """Expected sequential-barrier makespan at cv = 0 from wave arithmetic.

    Sums per-stage spans; a set needing w waves contributes w * tx. Only
    valid when sets sharing a stage do not contend for hard capacity, which
    is asserted.
    """
    total = 0.0
    for stage in rank_group_stages(dg):
        span = 0.0
        first_wave_use = {d.name: 0 for d in pool.hard_dimensions()}
        for ts in stage.sets:
            limit: int | None = None
            for dim in pool.hard_dimensions():
                per_task = ts.demand.get(dim.name)
                if per_task > 0:
                    assert per_task <= dim.capacity, "oracle: task does not fit"
                    fit = dim.capacity // per_task
                    limit = fit if limit is None else min(limit, fit)
            waves = 1 if limit is None else math.ceil(ts.count / limit)
            concurrent = ts.count if limit is None else min(ts.count, limit)
            for dim in first_wave_use:
                first_wave_use[dim] += concurrent * ts.demand.get(dim)
            span = max(span, waves * ts.tx_mean)
        for dim in pool.hard_dimensions():
            assert first_wave_use[dim.name] <= dim.capacity, (
                "oracle inapplicable: sets contend within a stage"
            )
        total += span
    return total


def small_pool() -> ResourcePool:
    return ResourcePool(
        (Dimension("cpu_cores", 64, hard=True), Dimension("gpus", 8, hard=True))
    )


def random_workflow(
    rng: random.Random, max_sets: int = 20, edge_probability: float = 0.25
) -> DependencyGraph:
    """A random valid DAG whose per-task demands fit small_pool()."""
    n = rng.randint(1, max_sets)
    sets = [
        TaskSet(
            id=f"S{i:02d}",
            count=rng.randint(1, 12),
            demand=Demand(
                {"cpu_cores": rng.randint(1, 8), "gpus": rng.randint(0, 2)}
            ),
            tx_mean=float(rng.randint(1, 50)),
            tx_cv=0.0,
        )
        for i in range(n)
    ]
    edges = [
        (sets[i].id, sets[j].id)
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < edge_probability
    ]
    return DependencyGraph.of(sets, edges)
