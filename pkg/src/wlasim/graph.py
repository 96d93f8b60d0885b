"""Workflow dependency graphs over task sets and dependency-permitted
asynchronicity.

Nodes are task sets (groups of identical tasks); edges are data
dependencies. Independent execution branches are discovered as a minimum
vertex-disjoint path cover along direct edges, computed with maximum
bipartite matching (cover size = node count - matching size).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

from .predict import Parallel, Stage, StagePlan
from .resources import Demand


class GraphValidationError(ValueError):
    """The dependency graph violates a structural invariant."""


class PlanDerivationError(ValueError):
    """The graph cannot be decomposed into a series-parallel stage plan."""


@dataclass(frozen=True)
class TaskSet:
    """A named group of identical tasks.

    rank is the pipeline stage index the set executes at; sets sharing a rank
    and a group label form one concurrent stage. template names the stage
    blueprint a set was instantiated from when a pipeline is repeated over
    iterations; same-template sets are time-shifted copies of one another.
    """

    id: str
    count: int
    demand: Demand
    tx_mean: float
    tx_cv: float = 0.05
    rank: int | None = None
    group: str | None = None
    template: str | None = None


@dataclass(frozen=True)
class Branch:
    """A chain of task sets connected by direct edges."""

    set_ids: tuple[str, ...]


@dataclass(frozen=True)
class DependencyGraph:
    task_sets: tuple[TaskSet, ...]
    edges: tuple[tuple[str, str], ...]

    @staticmethod
    def of(
        task_sets: Iterable[TaskSet],
        edges: Iterable[tuple[str, str]] = (),
    ) -> DependencyGraph:
        return DependencyGraph(tuple(task_sets), tuple((u, v) for u, v in edges))

    def by_id(self) -> dict[str, TaskSet]:
        return self._by_id

    @cached_property
    def _by_id(self) -> dict[str, TaskSet]:
        return {ts.id: ts for ts in self.task_sets}

    def successors(self, set_id: str) -> list[str]:
        return sorted(v for u, v in self.edges if u == set_id)

    def predecessors(self, set_id: str) -> list[str]:
        return sorted(u for u, v in self.edges if v == set_id)


def validate(dg: DependencyGraph) -> list[str]:
    """Collect every invariant violation; an empty list means the graph is usable."""
    violations: list[str] = []
    seen: set[str] = set()
    for ts in dg.task_sets:
        if ts.id in seen:
            violations.append(f"duplicate task set id {ts.id!r}")
        seen.add(ts.id)
        if ts.count < 1:
            violations.append(f"task set {ts.id!r}: count must be >= 1")
        if ts.tx_mean <= 0:
            violations.append(f"task set {ts.id!r}: tx_mean must be positive")
        if ts.tx_cv < 0:
            violations.append(f"task set {ts.id!r}: tx_cv must be >= 0")
        if ts.rank is not None and ts.rank < 0:
            violations.append(f"task set {ts.id!r}: rank must be >= 0")
        for dim in ts.demand.negative_entries():
            violations.append(f"task set {ts.id!r}: negative demand for {dim!r}")

    known = {ts.id for ts in dg.task_sets}
    by_id = {ts.id: ts for ts in dg.task_sets}
    seen_edges: set[tuple[str, str]] = set()
    clean_edges: list[tuple[str, str]] = []
    for u, v in dg.edges:
        ok = True
        for endpoint in (u, v):
            if endpoint not in known:
                violations.append(f"edge ({u}, {v}): unknown endpoint {endpoint!r}")
                ok = False
        if u == v:
            violations.append(f"edge ({u}, {v}): self-loop")
            ok = False
        if (u, v) in seen_edges:
            violations.append(f"duplicate edge ({u}, {v})")
            ok = False
        seen_edges.add((u, v))
        if ok:
            clean_edges.append((u, v))
            pred, succ = by_id[u], by_id[v]
            if pred.rank is not None and succ.rank is not None and succ.rank <= pred.rank:
                violations.append(
                    f"edge ({u}, {v}): rank does not increase ({pred.rank} -> {succ.rank})"
                )

    cyclic = _cycle_members(known, clean_edges)
    if cyclic:
        violations.append("cycle detected among task sets: " + ", ".join(sorted(cyclic)))
    return violations


def _cycle_members(nodes: set[str], edges: list[tuple[str, str]]) -> set[str]:
    indegree = {n: 0 for n in nodes}
    succs: dict[str, list[str]] = {n: [] for n in nodes}
    for u, v in edges:
        succs[u].append(v)
        indegree[v] += 1
    frontier = [n for n in nodes if indegree[n] == 0]
    removed = 0
    while frontier:
        n = frontier.pop()
        removed += 1
        for m in succs[n]:
            indegree[m] -= 1
            if indegree[m] == 0:
                frontier.append(m)
    return {n for n in nodes if indegree[n] > 0} if removed != len(nodes) else set()


def require_valid(dg: DependencyGraph) -> None:
    violations = validate(dg)
    if violations:
        raise GraphValidationError("; ".join(violations))


def _min_path_cover(
    nodes: Sequence[str], edges: set[tuple[str, str]]
) -> list[list[str]]:
    """Minimum vertex-disjoint path cover of a DAG along direct edges.

    Each node is split into an out-side (left) and in-side (right) vertex; a
    maximum matching pairs consecutive path nodes, so the cover has
    len(nodes) - len(matching) paths. Left vertices are processed and their
    candidates tried in ascending id order, which makes the result
    deterministic. Paths come back sorted by their smallest contained id.
    """
    order = sorted(nodes)
    adjacency = {u: sorted(v for (a, v) in edges if a == u) for u in order}
    match_to_left: dict[str, str] = {}

    def try_augment(u: str, visited: set[str]) -> bool:
        for v in adjacency[u]:
            if v in visited:
                continue
            visited.add(v)
            if v not in match_to_left or try_augment(match_to_left[v], visited):
                match_to_left[v] = u
                return True
        return False

    for u in order:
        try_augment(u, set())

    successor = {left: right for right, left in match_to_left.items()}
    heads = [n for n in order if n not in match_to_left]
    paths: list[list[str]] = []
    for head in heads:
        path = [head]
        while path[-1] in successor:
            path.append(successor[path[-1]])
        paths.append(path)
    paths.sort(key=min)
    return paths


def path_cover(dg: DependencyGraph) -> list[Branch]:
    """Decompose the graph into its minimum set of independent branches."""
    require_valid(dg)
    ids = [ts.id for ts in dg.task_sets]
    paths = _min_path_cover(ids, set(dg.edges))
    return [Branch(tuple(p)) for p in paths]


def doa_dep(dg: DependencyGraph) -> int:
    """Dependency-permitted degree of asynchronicity: branch count minus one."""
    require_valid(dg)
    if not dg.task_sets:
        raise GraphValidationError("no task sets")
    return len(path_cover(dg)) - 1


def effective_ranks(dg: DependencyGraph) -> dict[str, int]:
    """Explicit ranks when every set carries one, else longest-path depth."""
    if all(ts.rank is not None for ts in dg.task_sets):
        return {ts.id: ts.rank for ts in dg.task_sets}  # type: ignore[misc]
    indegree = {ts.id: 0 for ts in dg.task_sets}
    succs: dict[str, list[str]] = {ts.id: [] for ts in dg.task_sets}
    for u, v in dg.edges:
        succs[u].append(v)
        indegree[v] += 1
    ranks = {n: 0 for n, d in indegree.items() if d == 0}
    frontier = list(ranks)
    while frontier:
        node = frontier.pop()
        for succ in succs[node]:
            ranks[succ] = max(ranks.get(succ, 0), ranks[node] + 1)
            indegree[succ] -= 1
            if indegree[succ] == 0:
                frontier.append(succ)
    return ranks


@dataclass(frozen=True)
class StageNode:
    """Sets that occupy one stage slot: a shared (rank, group) or a lone set."""

    rank: int
    sets: tuple[TaskSet, ...]

    @property
    def min_id(self) -> str:
        return self.sets[0].id

    @property
    def set_ids(self) -> tuple[str, ...]:
        return tuple(ts.id for ts in self.sets)

    def to_stage(self) -> Stage:
        return Stage(self.set_ids, max(ts.tx_mean for ts in self.sets))


def rank_group_stages(dg: DependencyGraph) -> list[StageNode]:
    """Collapse same-(rank, group) sets into stage nodes, ordered for execution."""
    ranks = effective_ranks(dg)
    buckets: dict[tuple[int, str], list[TaskSet]] = {}
    for ts in dg.task_sets:
        rank = ranks[ts.id]
        key = (rank, f"group:{ts.group}") if ts.group is not None else (rank, f"set:{ts.id}")
        buckets.setdefault(key, []).append(ts)
    nodes = [
        StageNode(rank, tuple(sorted(sets, key=lambda t: t.id)))
        for (rank, _), sets in buckets.items()
    ]
    nodes.sort(key=lambda n: (n.rank, n.min_id))
    return nodes


def _node_edge_exists(
    src: StageNode, dst: StageNode, edges: set[tuple[str, str]]
) -> bool:
    return any((u, v) in edges for u in src.set_ids for v in dst.set_ids)


def derive_plan(dg: DependencyGraph) -> StagePlan:
    """Decompose the graph into common stages and parallel branch regions.

    Stage nodes are swept in rank order. Leading ranks occupied by a single
    node become common stages; the first rank with two or more nodes opens a
    parallel region, which later single-node ranks join unless every open
    branch tail feeds that node (a join), in which case the region closes and
    the join becomes a common stage again. Region branches come from the
    minimum path cover of the region subgraph; branches must not be linked by
    edges, otherwise the graph admits no series-parallel reading.
    """
    require_valid(dg)
    if not dg.task_sets:
        raise GraphValidationError("no task sets")
    nodes = rank_group_stages(dg)
    edges = set(dg.edges)
    by_level: dict[int, list[StageNode]] = {}
    for node in nodes:
        by_level.setdefault(node.rank, []).append(node)

    elements: list[Stage | Parallel] = []
    region: list[StageNode] = []

    def region_closes_at(candidate: StageNode) -> bool:
        tails = [
            n
            for n in region
            if not any(_node_edge_exists(n, m, edges) for m in region if m is not n)
        ]
        return bool(tails) and all(
            _node_edge_exists(t, candidate, edges) for t in tails
        )

    def flush_region() -> None:
        if region:
            elements.append(_region_to_parallel(region, edges))
            region.clear()

    for level in sorted(by_level):
        level_nodes = by_level[level]
        if not region:
            if len(level_nodes) == 1:
                elements.append(level_nodes[0].to_stage())
            else:
                region.extend(level_nodes)
        elif len(level_nodes) == 1 and region_closes_at(level_nodes[0]):
            flush_region()
            elements.append(level_nodes[0].to_stage())
        else:
            region.extend(level_nodes)
    flush_region()
    return StagePlan(tuple(elements))


def _region_to_parallel(region: list[StageNode], edges: set[tuple[str, str]]) -> Parallel:
    by_key = {node.min_id: node for node in region}
    node_edges = {
        (a.min_id, b.min_id)
        for a in region
        for b in region
        if a is not b and _node_edge_exists(a, b, edges)
    }
    paths = _min_path_cover(sorted(by_key), node_edges)
    membership = {key: i for i, path in enumerate(paths) for key in path}
    for a, b in node_edges:
        if membership[a] != membership[b]:
            raise PlanDerivationError(
                "not series-parallel; supply explicit plan "
                f"(edge between branches: {a} -> {b})"
            )
    branches = tuple(
        tuple(by_key[key].to_stage() for key in path) for path in paths
    )
    return Parallel(branches)


def build_staggered_pipeline(
    stages: Sequence[TaskSet], iterations: int
) -> DependencyGraph:
    """Instantiate a pipeline `iterations` times as disjoint, staggered chains.

    Iteration i's copy of stage s gets rank i + s, so successive iterations
    trail one stage behind and their differing stages can overlap. Copies are
    suffixed with the iteration index and remember their template.
    """
    if iterations < 1:
        raise GraphValidationError("iterations must be >= 1")
    if not stages:
        raise GraphValidationError("no stage templates")
    task_sets: list[TaskSet] = []
    edges: list[tuple[str, str]] = []
    for i in range(iterations):
        prev_id: str | None = None
        for s, template in enumerate(stages):
            instance = TaskSet(
                id=f"{template.id}{i}",
                count=template.count,
                demand=template.demand,
                tx_mean=template.tx_mean,
                tx_cv=template.tx_cv,
                rank=i + s,
                group=template.group,
                template=template.id,
            )
            task_sets.append(instance)
            if prev_id is not None:
                edges.append((prev_id, instance.id))
            prev_id = instance.id
    dg = DependencyGraph.of(task_sets, edges)
    require_valid(dg)
    return dg
