"""Deterministic discrete-event simulation of workflow execution on a
bounded resource pool.

Two scheduling policies are supported. sequential-barrier emulates a staged
pipeline: stage nodes (rank/group collapsed) execute one after another with
a global barrier in between. dependency-driven releases a task set as soon
as all of its predecessor sets have finished and packs the eligible
frontier greedily. Both are event driven over task completions, with
continuous double-precision time, and are fully reproducible: the same
graph and config always yield the same trace.
"""
from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .graph import (
    DependencyGraph,
    StageNode,
    TaskSet,
    effective_ranks,
    rank_group_stages,
    require_valid,
)
from .resources import Demand, ResourcePool, concurrency_limit

POLICY_SEQUENTIAL = "sequential-barrier"
POLICY_DEPENDENCY = "dependency-driven"
POLICIES = (POLICY_SEQUENTIAL, POLICY_DEPENDENCY)

TRACE_CSV_HEADER = "set_id,task_index,start_s,end_s,cpu_cores,gpus"
TIMELINE_CSV_HEADER = "time_s,dimension,in_use,capacity"

# Replay comparisons tolerate accumulated float noise up to this slack.
_EPS = 1e-9


class SimulationError(RuntimeError):
    """The simulation cannot run or produced an inconsistent state."""


@dataclass(frozen=True)
class SimConfig:
    pool: ResourcePool
    policy: str = POLICY_DEPENDENCY
    seed: int = 0
    tx_cv_override: float | None = None
    dispatch_overhead: float = 0.0

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise SimulationError(f"unknown policy {self.policy!r}")
        if self.dispatch_overhead < 0:
            raise SimulationError("dispatch_overhead must be >= 0")


@dataclass(frozen=True)
class TaskRecord:
    set_id: str
    task_index: int
    start: float
    end: float
    demand: Demand


@dataclass(frozen=True)
class Trace:
    policy: str
    seed: int
    records: tuple[TaskRecord, ...]
    makespan: float
    utilization: dict[str, float]


def sample_tx(
    ts: TaskSet, seed: int, task_index: int, cv_override: float | None = None
) -> float:
    """Draw one task duration from Normal(tx_mean, cv * tx_mean).

    The substream is keyed by (seed, set id, task index) through a hash, so a
    task's duration does not depend on scheduling order. Draws are clamped
    below at 1% of the mean; cv = 0 returns the mean exactly.
    """
    cv = ts.tx_cv if cv_override is None else cv_override
    if cv < 0:
        raise SimulationError("tx coefficient of variation must be >= 0")
    if cv == 0.0:
        return ts.tx_mean
    digest = hashlib.sha256(f"{seed}:{ts.id}:{task_index}".encode()).digest()
    rng = np.random.Generator(np.random.PCG64(int.from_bytes(digest[:16], "little")))
    draw = float(rng.normal(ts.tx_mean, cv * ts.tx_mean))
    return max(draw, 0.01 * ts.tx_mean)


# Event kinds; completions sort before activations at equal times.
_COMPLETE = 0
_ACTIVATE = 1


def run(dg: DependencyGraph, cfg: SimConfig) -> Trace:
    """Execute the workflow under the configured policy and return its trace."""
    require_valid(dg)
    if not dg.task_sets:
        raise SimulationError("no task sets")
    for ts in dg.task_sets:
        concurrency_limit(ts, cfg.pool)  # raises when a single task cannot fit

    by_id = dg.by_id()
    ranks = effective_ranks(dg)
    durations = {
        (ts.id, i): sample_tx(ts, cfg.seed, i, cfg.tx_cv_override)
        for ts in dg.task_sets
        for i in range(ts.count)
    }

    hard_free = {d.name: d.capacity for d in cfg.pool.hard_dimensions()}
    next_index = {ts.id: 0 for ts in dg.task_sets}
    done_count = {ts.id: 0 for ts in dg.task_sets}
    active: set[str] = set()
    records: list[TaskRecord] = []

    events: list[tuple[float, int, int, str, int]] = []
    seq = 0

    def push(time: float, kind: int, set_id: str, index: int = -1) -> None:
        nonlocal seq
        heapq.heappush(events, (time, kind, seq, set_id, index))
        seq += 1

    stages: list[StageNode] = []
    stage_idx = 0
    if cfg.policy == POLICY_SEQUENTIAL:
        stages = rank_group_stages(dg)
        for ts in stages[0].sets:
            push(cfg.dispatch_overhead, _ACTIVATE, ts.id)
    else:
        preds_left = {ts.id: len(dg.predecessors(ts.id)) for ts in dg.task_sets}
        for ts in dg.task_sets:
            if preds_left[ts.id] == 0:
                push(cfg.dispatch_overhead, _ACTIVATE, ts.id)

    def on_set_done(set_id: str, now: float) -> None:
        nonlocal stage_idx
        if cfg.policy == POLICY_DEPENDENCY:
            for succ in dg.successors(set_id):
                preds_left[succ] -= 1
                if preds_left[succ] == 0:
                    push(now + cfg.dispatch_overhead, _ACTIVATE, succ)
        else:
            current = stages[stage_idx]
            if all(done_count[ts.id] == ts.count for ts in current.sets):
                stage_idx += 1
                if stage_idx < len(stages):
                    for ts in stages[stage_idx].sets:
                        push(now + cfg.dispatch_overhead, _ACTIVATE, ts.id)

    def priority(set_id: str) -> tuple:
        demand = by_id[set_id].demand
        return (ranks[set_id], -demand.get("gpus"), -demand.get("cpu_cores"), set_id)

    def place_frontier(now: float) -> None:
        frontier = sorted(
            (s for s in active if next_index[s] < by_id[s].count), key=priority
        )
        for set_id in frontier:
            ts = by_id[set_id]
            while next_index[set_id] < ts.count:
                if any(
                    ts.demand.get(dim) > free for dim, free in hard_free.items()
                ):
                    break
                index = next_index[set_id]
                next_index[set_id] = index + 1
                for dim in hard_free:
                    hard_free[dim] -= ts.demand.get(dim)
                end = now + durations[(set_id, index)]
                records.append(TaskRecord(set_id, index, now, end, ts.demand))
                push(end, _COMPLETE, set_id, index)

    while events:
        now = events[0][0]
        while events and events[0][0] == now:
            _, kind, _, set_id, index = heapq.heappop(events)
            if kind == _COMPLETE:
                ts = by_id[set_id]
                for dim in hard_free:
                    hard_free[dim] += ts.demand.get(dim)
                done_count[set_id] += 1
                if done_count[set_id] == ts.count:
                    on_set_done(set_id, now)
            else:
                active.add(set_id)
        place_frontier(now)

    if any(done_count[ts.id] != ts.count for ts in dg.task_sets):
        raise SimulationError("simulation stalled with unfinished task sets")

    records.sort(key=lambda r: (r.start, r.set_id, r.task_index))
    trace_records = tuple(records)
    makespan = max(r.end for r in trace_records)
    util = _utilization(trace_records, makespan, cfg.pool)
    return Trace(cfg.policy, cfg.seed, trace_records, makespan, util)


def _utilization(
    records: Iterable[TaskRecord], makespan: float, pool: ResourcePool
) -> dict[str, float]:
    busy = {d.name: 0.0 for d in pool.dimensions}
    for rec in records:
        for dim in busy:
            busy[dim] += rec.demand.get(dim) * (rec.end - rec.start)
    return {
        d.name: busy[d.name] / (d.capacity * makespan) for d in pool.dimensions
    }


def utilization(trace: Trace, pool: ResourcePool) -> dict[str, float]:
    """Busy resource-time over allocated resource-time, per dimension.

    Soft dimensions may legitimately exceed 1.0; values are reported as-is.
    """
    if not trace.records:
        raise SimulationError("empty trace has no defined utilization")
    return _utilization(trace.records, trace.makespan, pool)


def verify_trace(
    trace: Trace, dg: DependencyGraph, pool: ResourcePool
) -> list[str]:
    """Independently replay a trace and report every violated constraint."""
    violations: list[str] = []
    by_id = dg.by_id()
    per_set: dict[str, list[TaskRecord]] = {ts.id: [] for ts in dg.task_sets}
    for rec in trace.records:
        if rec.set_id not in per_set:
            violations.append(f"record for unknown set {rec.set_id!r}")
            continue
        per_set[rec.set_id].append(rec)
        if rec.end <= rec.start:
            violations.append(
                f"task {rec.set_id}[{rec.task_index}]: end {rec.end} <= start {rec.start}"
            )

    for set_id, recs in per_set.items():
        expected = by_id[set_id].count
        if len(recs) != expected:
            violations.append(
                f"set {set_id!r}: {len(recs)} records, expected {expected}"
            )
        indices = sorted(r.task_index for r in recs)
        if indices != list(range(len(recs))):
            violations.append(f"set {set_id!r}: task indices are not 0..{len(recs) - 1}")

    violations.extend(_capacity_violations(trace.records, pool))

    def span(set_ids: Iterable[str]) -> tuple[float, float] | None:
        recs = [r for sid in set_ids for r in per_set.get(sid, [])]
        if not recs:
            return None
        return min(r.start for r in recs), max(r.end for r in recs)

    if trace.policy == POLICY_DEPENDENCY:
        for u, v in dg.edges:
            pred, succ = span([u]), span([v])
            if pred and succ and succ[0] < pred[1] - _EPS:
                violations.append(
                    f"dependency violated: {v} starts at {succ[0]:.3f} "
                    f"before {u} ends at {pred[1]:.3f}"
                )
    elif trace.policy == POLICY_SEQUENTIAL:
        stages = rank_group_stages(dg)
        previous_end = 0.0
        for stage in stages:
            window = span(stage.set_ids)
            if window is None:
                continue
            if window[0] < previous_end - _EPS:
                violations.append(
                    f"barrier violated: stage {stage.set_ids} starts at "
                    f"{window[0]:.3f} before {previous_end:.3f}"
                )
            previous_end = max(previous_end, window[1])
    return violations


def _capacity_violations(
    records: Iterable[TaskRecord], pool: ResourcePool
) -> list[str]:
    violations = []
    for dim in pool.hard_dimensions():
        deltas: dict[float, int] = {}
        for rec in records:
            need = rec.demand.get(dim.name)
            if need == 0:
                continue
            deltas[rec.start] = deltas.get(rec.start, 0) + need
            deltas[rec.end] = deltas.get(rec.end, 0) - need
        in_use = 0
        for time in sorted(deltas):
            in_use += deltas[time]
            if in_use > dim.capacity:
                violations.append(
                    f"hard capacity exceeded: {dim.name} in use {in_use} > "
                    f"{dim.capacity} at t={time:.3f}"
                )
                break
    return violations


def trace_csv(trace: Trace) -> str:
    """Per-task records as CSV, stable order, 3-decimal seconds."""
    lines = [TRACE_CSV_HEADER]
    for rec in trace.records:
        lines.append(
            f"{rec.set_id},{rec.task_index},{rec.start:.3f},{rec.end:.3f},"
            f"{rec.demand.get('cpu_cores')},{rec.demand.get('gpus')}"
        )
    return "\n".join(lines) + "\n"


def timeline_csv(trace: Trace, pool: ResourcePool) -> str:
    """Per-dimension usage levels at every event boundary as CSV.

    A row's level includes the boundary's own transitions: tasks ending at t
    have released their share, tasks starting at t already hold theirs.
    """
    deltas: dict[str, dict[float, int]] = {d.name: {} for d in pool.dimensions}
    for rec in trace.records:
        for dim, steps in deltas.items():
            need = rec.demand.get(dim)
            if need == 0:
                continue
            steps[rec.start] = steps.get(rec.start, 0) + need
            steps[rec.end] = steps.get(rec.end, 0) - need
    times = sorted({0.0} | {r.start for r in trace.records} | {r.end for r in trace.records})
    in_use = {d.name: 0 for d in pool.dimensions}
    lines = [TIMELINE_CSV_HEADER]
    for time in times:
        for dim in pool.dimensions:
            in_use[dim.name] += deltas[dim.name].get(time, 0)
            lines.append(f"{time:.3f},{dim.name},{in_use[dim.name]},{dim.capacity}")
    return "\n".join(lines) + "\n"


def write_trace_csv(trace: Trace, path: str) -> None:
    with open(path, "w", newline="\n") as handle:
        handle.write(trace_csv(trace))


def write_timeline_csv(trace: Trace, pool: ResourcePool, path: str) -> None:
    with open(path, "w", newline="\n") as handle:
        handle.write(timeline_csv(trace, pool))
