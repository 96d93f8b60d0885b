"""Builtin reference workloads and the workflow-file loader.

A workflow file is a single JSON document describing the pool, the task
sets, their dependencies, and optional prediction inputs. When
`iterations` is set, the listed task sets are treated as a pipeline's
stage templates and expanded into that many staggered chains.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import jsonschema

from .graph import (
    DependencyGraph,
    GraphValidationError,
    TaskSet,
    build_staggered_pipeline,
    derive_plan,
    validate,
)
from .predict import Parallel, Stage, StagePlan
from .resources import Demand, Dimension, ResourcePool


class WorkflowError(Exception):
    """Base error for workflow definitions."""


class WorkflowParseError(WorkflowError):
    """The workflow document is not well-formed JSON."""


class WorkflowSchemaError(WorkflowError):
    """The workflow document does not match the expected schema."""


BUILTIN_NAMES = ("ddmd", "cdg1", "cdg2")

DEFAULT_CORRECTION_FACTORS = (0.04, 0.02)


@dataclass(frozen=True)
class AsyncComposition:
    """Explicit asynchronous decomposition for prediction.

    Lists the set ids that remain serialized and the branch chains that run
    concurrently with them. Used when resource contention makes the derived
    graph decomposition a poor model of the realized overlap.
    """

    sequential: tuple[str, ...]
    branches: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class WorkflowSpec:
    name: str
    pool: ResourcePool
    task_sets: tuple[TaskSet, ...]
    edges: tuple[tuple[str, str], ...] = ()
    iterations: int | None = None
    correction_factors: tuple[float, ...] = DEFAULT_CORRECTION_FACTORS
    plan: StagePlan | None = None
    t_seq_budget: float | None = None
    async_composition: AsyncComposition | None = None

    def graph(self) -> DependencyGraph:
        """The executable dependency graph, expanding staged iterations."""
        if self.iterations is not None:
            return build_staggered_pipeline(self.task_sets, self.iterations)
        return DependencyGraph.of(self.task_sets, self.edges)

    def stage_plan(self, dg: DependencyGraph | None = None) -> StagePlan:
        """The explicit plan when present, otherwise the derived one."""
        if self.plan is not None:
            return self.plan
        return derive_plan(dg if dg is not None else self.graph())


def builtin(name: str) -> WorkflowSpec:
    """One of the shipped reference workloads: ddmd, cdg1 or cdg2."""
    if name == "ddmd":
        return _builtin_ddmd()
    if name == "cdg1":
        return _builtin_cdg1()
    if name == "cdg2":
        return _builtin_cdg2()
    raise WorkflowError(
        f"unknown builtin workload {name!r}; available: {', '.join(BUILTIN_NAMES)}"
    )


def _reference_pool() -> ResourcePool:
    # 16-node reference allocation: CPU cores tracked for accounting only,
    # GPUs gate placement. Per-set core demands may exceed the usable cores.
    return ResourcePool(
        (
            Dimension("cpu_cores", 706, hard=False),
            Dimension("gpus", 96, hard=True),
        )
    )


def _builtin_ddmd() -> WorkflowSpec:
    """ML-driven molecular-dynamics pipeline, three staggered iterations.

    Simulation feeds aggregation, then training, then inference; each
    iteration is one chain. Simulation and inference saturate the GPU pool,
    so in the asynchronous run they serialize across iterations and only one
    full chain contributes its whole span.
    """
    stages = (
        TaskSet("Sim", 96, Demand({"cpu_cores": 4, "gpus": 1}), 340.0),
        TaskSet("Aggr", 16, Demand({"cpu_cores": 32, "gpus": 0}), 85.0),
        TaskSet("Train", 1, Demand({"cpu_cores": 4, "gpus": 1}), 63.0),
        TaskSet("Infer", 96, Demand({"cpu_cores": 16, "gpus": 1}), 38.0),
    )
    return WorkflowSpec(
        name="ddmd",
        pool=_reference_pool(),
        task_sets=stages,
        iterations=3,
        async_composition=AsyncComposition(
            sequential=("Sim0", "Sim1", "Infer0", "Infer1", "Infer2"),
            branches=(("Sim2", "Aggr2", "Train2", "Infer2"),),
        ),
    )


_CDG_EDGES = (
    ("T0", "T1"),
    ("T0", "T2"),
    ("T0", "T3"),
    ("T1", "T4"),
    ("T2", "T5"),
    ("T3", "T6"),
    ("T4", "T7"),
    ("T5", "T7"),
)


def _builtin_cdg1() -> WorkflowSpec:
    """Synthetic fork DAG where the concurrent branches are too short to pay off."""
    sets = (
        TaskSet("T0", 96, Demand({"cpu_cores": 16, "gpus": 1}), 760.0, rank=0),
        TaskSet("T1", 32, Demand({"cpu_cores": 40, "gpus": 0}), 220.0, rank=1, group="T1-T2"),
        TaskSet("T2", 32, Demand({"cpu_cores": 40, "gpus": 0}), 220.0, rank=1, group="T1-T2"),
        TaskSet("T3", 16, Demand({"cpu_cores": 4, "gpus": 0}), 60.0, rank=2, group="T3-T6"),
        TaskSet("T4", 16, Demand({"cpu_cores": 32, "gpus": 1}), 160.0, rank=2, group="T4-T5"),
        TaskSet("T5", 16, Demand({"cpu_cores": 32, "gpus": 1}), 160.0, rank=2, group="T4-T5"),
        TaskSet("T6", 16, Demand({"cpu_cores": 4, "gpus": 0}), 60.0, rank=3, group="T3-T6"),
        TaskSet("T7", 96, Demand({"cpu_cores": 4, "gpus": 1}), 720.0, rank=3),
    )
    return WorkflowSpec(
        name="cdg1",
        pool=_reference_pool(),
        task_sets=sets,
        edges=_CDG_EDGES,
        t_seq_budget=2000.0,
    )


def _builtin_cdg2() -> WorkflowSpec:
    """Synthetic fork DAG with branch spans balanced so masking pays off."""
    sets = (
        TaskSet("T0", 96, Demand({"cpu_cores": 16, "gpus": 1}), 380.0, rank=0),
        TaskSet("T1", 32, Demand({"cpu_cores": 40, "gpus": 0}), 160.0, rank=1, group="T1-T2"),
        TaskSet("T2", 32, Demand({"cpu_cores": 40, "gpus": 0}), 160.0, rank=1, group="T1-T2"),
        TaskSet("T3", 96, Demand({"cpu_cores": 4, "gpus": 1}), 380.0, rank=2, group="T3-T6"),
        TaskSet("T4", 16, Demand({"cpu_cores": 32, "gpus": 1}), 240.0, rank=2, group="T4-T5"),
        TaskSet("T5", 16, Demand({"cpu_cores": 32, "gpus": 1}), 240.0, rank=2, group="T4-T5"),
        TaskSet("T6", 96, Demand({"cpu_cores": 4, "gpus": 1}), 380.0, rank=3, group="T3-T6"),
        TaskSet("T7", 16, Demand({"cpu_cores": 4, "gpus": 0}), 460.0, rank=3),
    )
    return WorkflowSpec(
        name="cdg2",
        pool=_reference_pool(),
        task_sets=sets,
        edges=_CDG_EDGES,
        t_seq_budget=2000.0,
    )


_WORKFLOW_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["name", "pool", "task_sets"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "pool": {
            "type": "object",
            "required": ["dimensions"],
            "additionalProperties": False,
            "properties": {
                "dimensions": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["name", "capacity"],
                        "additionalProperties": False,
                        "properties": {
                            "name": {"type": "string", "minLength": 1},
                            "capacity": {"type": "integer", "minimum": 1},
                            "hard": {"type": "boolean"},
                        },
                    },
                }
            },
        },
        "task_sets": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "count", "demand", "tx_mean_s"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "count": {"type": "integer", "minimum": 1},
                    "demand": {
                        "type": "object",
                        "additionalProperties": {"type": "integer", "minimum": 0},
                    },
                    "tx_mean_s": {"type": "number", "exclusiveMinimum": 0},
                    "tx_cv": {"type": "number", "minimum": 0},
                    "rank": {"type": ["integer", "null"], "minimum": 0},
                    "group": {"type": ["string", "null"]},
                    "template": {"type": ["string", "null"]},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "string"},
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "iterations": {"type": ["integer", "null"], "minimum": 1},
        "correction_factors": {
            "type": "array",
            "items": {"type": "number", "minimum": 0},
        },
        "t_seq_budget_s": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "async_composition": {
            "type": ["object", "null"],
            "required": ["sequential", "branches"],
            "additionalProperties": False,
            "properties": {
                "sequential": {"type": "array", "items": {"type": "string"}},
                "branches": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "array",
                        "minItems": 1,
                        "items": {"type": "string"},
                    },
                },
            },
        },
        "plan": {
            "type": ["array", "null"],
            "minItems": 1,
            "items": {
                "type": "object",
                "minProperties": 1,
                "maxProperties": 1,
                "additionalProperties": False,
                "properties": {
                    "stage": {
                        "type": "array",
                        "minItems": 1,
                        "items": {"type": "string"},
                    },
                    "parallel": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "array",
                                "minItems": 1,
                                "items": {"type": "string"},
                            },
                        },
                    },
                },
            },
        },
    },
}


def load_workflow(path: str | Path) -> WorkflowSpec:
    """Parse, schema-check and graph-validate a workflow document."""
    text = Path(path).read_text()
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise WorkflowParseError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    try:
        jsonschema.validate(document, _WORKFLOW_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise WorkflowSchemaError(f"{path}: {exc.json_path}: {exc.message}") from exc

    spec = _spec_from_document(document)
    dg = spec.graph()
    violations = validate(dg)
    if violations:
        raise GraphValidationError(f"{path}: " + "; ".join(violations))
    _check_semantics(spec, dg, str(path))
    return spec


def _spec_from_document(document: dict[str, Any]) -> WorkflowSpec:
    pool = ResourcePool(
        tuple(
            Dimension(d["name"], d["capacity"], d.get("hard", True))
            for d in document["pool"]["dimensions"]
        )
    )
    task_sets = tuple(
        TaskSet(
            id=entry["id"],
            count=entry["count"],
            demand=Demand(dict(entry["demand"])),
            tx_mean=float(entry["tx_mean_s"]),
            tx_cv=float(entry.get("tx_cv", 0.05)),
            rank=entry.get("rank"),
            group=entry.get("group"),
            template=entry.get("template"),
        )
        for entry in document["task_sets"]
    )
    composition = document.get("async_composition")
    spec = WorkflowSpec(
        name=document["name"],
        pool=pool,
        task_sets=task_sets,
        edges=tuple((u, v) for u, v in document.get("edges", [])),
        iterations=document.get("iterations"),
        correction_factors=tuple(
            document.get("correction_factors", DEFAULT_CORRECTION_FACTORS)
        ),
        t_seq_budget=document.get("t_seq_budget_s"),
        async_composition=AsyncComposition(
            tuple(composition["sequential"]),
            tuple(tuple(branch) for branch in composition["branches"]),
        )
        if composition
        else None,
    )
    plan_doc = document.get("plan")
    if plan_doc is not None:
        spec = replace(spec, plan=_plan_from_document(plan_doc, spec))
    return spec


def _plan_from_document(plan_doc: list[dict], spec: WorkflowSpec) -> StagePlan:
    tx_of = {ts.id: ts.tx_mean for ts in spec.graph().task_sets}

    def stage(ids: list[str]) -> Stage:
        missing = [i for i in ids if i not in tx_of]
        if missing:
            raise WorkflowSchemaError(f"plan names unknown task sets: {missing}")
        return Stage(tuple(sorted(ids)), max(tx_of[i] for i in ids))

    elements: list[Stage | Parallel] = []
    for element in plan_doc:
        if "stage" in element:
            elements.append(stage(element["stage"]))
        else:
            elements.append(
                Parallel(
                    tuple(
                        tuple(stage(ids) for ids in branch)
                        for branch in element["parallel"]
                    )
                )
            )
    return StagePlan(tuple(elements))


def _check_semantics(spec: WorkflowSpec, dg: DependencyGraph, origin: str) -> None:
    known = {ts.id for ts in dg.task_sets}
    if spec.iterations is not None and spec.edges:
        raise WorkflowSchemaError(
            f"{origin}: edges must be empty when iterations is set; "
            "stage templates chain in listed order"
        )
    if spec.async_composition is not None:
        referenced = set(spec.async_composition.sequential) | {
            sid for branch in spec.async_composition.branches for sid in branch
        }
        unknown = sorted(referenced - known)
        if unknown:
            raise WorkflowSchemaError(
                f"{origin}: async_composition names unknown task sets: {unknown}"
            )
    if spec.plan is not None:
        planned = spec.plan.set_ids()
        if sorted(planned) != sorted(known):
            raise WorkflowSchemaError(
                f"{origin}: plan must cover every task set exactly once"
            )


def workflow_document(spec: WorkflowSpec) -> dict[str, Any]:
    """The JSON-serializable form of a workflow spec."""
    document: dict[str, Any] = {
        "name": spec.name,
        "pool": {
            "dimensions": [
                {"name": d.name, "capacity": d.capacity, "hard": d.hard}
                for d in spec.pool.dimensions
            ]
        },
        "task_sets": [
            {
                "id": ts.id,
                "count": ts.count,
                "demand": dict(ts.demand.entries),
                "tx_mean_s": ts.tx_mean,
                "tx_cv": ts.tx_cv,
                "rank": ts.rank,
                "group": ts.group,
                "template": ts.template,
            }
            for ts in spec.task_sets
        ],
        "edges": [list(edge) for edge in spec.edges],
        "iterations": spec.iterations,
        "correction_factors": list(spec.correction_factors),
        "t_seq_budget_s": spec.t_seq_budget,
        "async_composition": {
            "sequential": list(spec.async_composition.sequential),
            "branches": [list(b) for b in spec.async_composition.branches],
        }
        if spec.async_composition
        else None,
        "plan": _plan_to_document(spec.plan) if spec.plan else None,
    }
    return document


def _plan_to_document(plan: StagePlan) -> list[dict]:
    out: list[dict] = []
    for element in plan.elements:
        if isinstance(element, Stage):
            out.append({"stage": list(element.set_ids)})
        else:
            out.append(
                {
                    "parallel": [
                        [list(stage.set_ids) for stage in branch]
                        for branch in element.branches
                    ]
                }
            )
    return out


def save_workflow(spec: WorkflowSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(workflow_document(spec), indent=2) + "\n")
