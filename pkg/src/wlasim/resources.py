"""Resource pool modeling: demands, wave counts, and the resource-permitted
degree of asynchronicity."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping

if TYPE_CHECKING:  # pragma: no cover - annotations only, avoids an import cycle
    from .graph import Branch, DependencyGraph, TaskSet

# doa_res enumerates one choice per branch; instances are tiny but keep an
# explicit guard so a pathological graph cannot blow up the exact search.
MAX_BRANCHES_FOR_EXACT_SEARCH = 20


class ResourceError(ValueError):
    """A demand cannot be satisfied or a resource query is malformed."""


@dataclass(frozen=True)
class Demand:
    """Per-task resource requirement, dimension name -> non-negative quantity.

    Missing dimensions are treated as zero.
    """

    entries: Mapping[str, int] = field(default_factory=dict)

    def get(self, dimension: str) -> int:
        return self.entries.get(dimension, 0)

    def scaled(self, factor: int) -> Demand:
        return Demand({k: v * factor for k, v in self.entries.items()})

    def plus(self, other: Demand) -> Demand:
        keys = set(self.entries) | set(other.entries)
        return Demand({k: self.get(k) + other.get(k) for k in keys})

    def negative_entries(self) -> list[str]:
        return sorted(k for k, v in self.entries.items() if v < 0)


@dataclass(frozen=True)
class Dimension:
    name: str
    capacity: int
    hard: bool = True

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ResourceError(f"dimension {self.name!r}: capacity must be >= 1")


@dataclass(frozen=True)
class ResourcePool:
    """Allocated capacities per resource dimension.

    Hard dimensions block task placement when exhausted; soft dimensions are
    tracked for accounting only and never block.
    """

    dimensions: tuple[Dimension, ...]

    def __post_init__(self) -> None:
        names = [d.name for d in self.dimensions]
        if len(names) != len(set(names)):
            raise ResourceError("dimension names must be unique")

    @staticmethod
    def of(dimensions: Iterable[Dimension]) -> ResourcePool:
        return ResourcePool(tuple(dimensions))

    def hard_dimensions(self) -> tuple[Dimension, ...]:
        return tuple(d for d in self.dimensions if d.hard)

    def capacity(self, name: str) -> int:
        for d in self.dimensions:
            if d.name == name:
                return d.capacity
        raise ResourceError(f"unknown dimension {name!r}")

    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dimensions)


def set_demand(ts: TaskSet) -> Demand:
    """Full-set demand: per-task demand scaled by the number of tasks."""
    return ts.demand.scaled(ts.count)


def concurrency_limit(ts: TaskSet, pool: ResourcePool) -> int | None:
    """Max tasks of the set that fit hard capacities at once, None if unbounded.

    Raises ResourceError when a single task exceeds a hard capacity.
    """
    limit: int | None = None
    for dim in pool.hard_dimensions():
        per_task = ts.demand.get(dim.name)
        if per_task <= 0:
            continue
        if per_task > dim.capacity:
            raise ResourceError(
                f"task cannot fit pool: set {ts.id!r} needs {per_task} "
                f"{dim.name} per task, capacity is {dim.capacity}"
            )
        fit = dim.capacity // per_task
        limit = fit if limit is None else min(limit, fit)
    return limit


def wave_count(ts: TaskSet, pool: ResourcePool) -> int:
    """Number of placement rounds the set needs under hard capacity limits."""
    limit = concurrency_limit(ts, pool)
    if limit is None:
        return 1
    return math.ceil(ts.count / limit)


def doa_res(
    dg: DependencyGraph,
    branches: list[Branch],
    pool: ResourcePool,
    model: str = "full-set",
) -> int:
    """Resource-permitted degree of asynchronicity.

    Finds the largest k such that one task set can be chosen from each of k
    distinct branches with the summed demands fitting every hard dimension.
    Under "full-set" each choice weighs in at its whole-set demand, under
    "single-task" at one task's demand. Sets instantiated from the same
    pipeline template (staggered iterations of one stage) are time-shifted
    copies that never co-execute, so at most one of them may be chosen.
    Returns k_max - 1; k_max is floored at 1 even when nothing fits.
    """
    if model not in ("full-set", "single-task"):
        raise ResourceError(f"unknown demand model {model!r}")
    if len(branches) > MAX_BRANCHES_FOR_EXACT_SEARCH:
        raise ResourceError(
            f"too many branches for exact search ({len(branches)} > "
            f"{MAX_BRANCHES_FOR_EXACT_SEARCH})"
        )
    by_id = dg.by_id()
    hard = pool.hard_dimensions()

    def weight(set_id: str) -> tuple[tuple[int, ...], str | None]:
        ts = by_id[set_id]
        demand = set_demand(ts) if model == "full-set" else ts.demand
        return tuple(demand.get(d.name) for d in hard), ts.template

    branch_choices = [[weight(sid) for sid in br.set_ids] for br in branches]
    caps = tuple(d.capacity for d in hard)

    best = 0

    def search(idx: int, used: tuple[int, ...], templates: frozenset[str], picks: int) -> None:
        nonlocal best
        if picks > best:
            best = picks
        if idx == len(branch_choices) or picks + (len(branch_choices) - idx) <= best:
            return
        for vec, template in branch_choices[idx]:
            if template is not None and template in templates:
                continue
            summed = tuple(u + v for u, v in zip(used, vec))
            if all(s <= c for s, c in zip(summed, caps)):
                next_templates = templates if template is None else templates | {template}
                search(idx + 1, summed, next_templates, picks + 1)
        search(idx + 1, used, templates, picks)  # skip this branch

    search(0, tuple(0 for _ in hard), frozenset(), 0)
    return max(best, 1) - 1


def wla(doa_dep: int, doa_res: int) -> int:
    """Workload-level asynchronicity: the binding of the two conditions."""
    if doa_dep < 0 or doa_res < 0:
        raise ResourceError("degrees of asynchronicity must be non-negative")
    return min(doa_dep, doa_res)
