"""Analytic makespan predictors for staged workflows.

A StagePlan is a series-parallel arrangement: an ordered mix of single
stages (task sets that run concurrently at one rank) and parallel regions
(independent branches, each an ordered list of stages).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union


class PredictionError(ValueError):
    """A predictor was given inputs outside its domain."""


@dataclass(frozen=True)
class Stage:
    """One pipeline stage: member sets run concurrently, tx is the stage span."""

    set_ids: tuple[str, ...]
    tx: float

    def __post_init__(self) -> None:
        if not self.set_ids:
            raise PredictionError("stage must contain at least one task set")
        if self.tx <= 0:
            raise PredictionError(f"stage {self.set_ids}: tx must be positive")


@dataclass(frozen=True)
class Parallel:
    """A region of independent branches; each branch is an ordered stage chain."""

    branches: tuple[tuple[Stage, ...], ...]

    def __post_init__(self) -> None:
        if not self.branches or any(not b for b in self.branches):
            raise PredictionError("parallel region needs non-empty branches")


PlanElement = Union[Stage, Parallel]


@dataclass(frozen=True)
class StagePlan:
    elements: tuple[PlanElement, ...]

    def __post_init__(self) -> None:
        if not self.elements:
            raise PredictionError("plan must contain at least one element")

    def sequential_stages(self) -> list[Stage]:
        return [e for e in self.elements if isinstance(e, Stage)]

    def parallel_regions(self) -> list[Parallel]:
        return [e for e in self.elements if isinstance(e, Parallel)]

    def all_stages(self) -> list[Stage]:
        """Every stage in plan order, branch stages serialized in place."""
        out: list[Stage] = []
        for element in self.elements:
            if isinstance(element, Stage):
                out.append(element)
            else:
                for branch in element.branches:
                    out.extend(branch)
        return out

    def set_ids(self) -> list[str]:
        out: list[str] = []
        for stage in self.all_stages():
            out.extend(stage.set_ids)
        return out


@dataclass(frozen=True)
class Prediction:
    """Makespan predictions for one workflow.

    The relative improvement is always derived from the stored times, never
    stored on its own.
    """

    t_seq: float
    t_async: float
    t_async_masked: float | None = None
    overhead_constant: float = 0.0
    correction_factors: tuple[float, ...] = (0.04, 0.02)

    def __post_init__(self) -> None:
        if self.t_seq <= 0:
            raise PredictionError("t_seq must be positive")

    @property
    def improvement(self) -> float:
        return relative_improvement(self.t_seq, self.t_async)


def predict_tseq(plan: StagePlan, overhead_constant: float = 0.0) -> float:
    """Fully serialized makespan: every stage in the plan runs back to back."""
    if overhead_constant < 0:
        raise PredictionError("overhead constant must be >= 0")
    return sum(stage.tx for stage in plan.all_stages()) + overhead_constant


def branch_ttx(branch: Sequence[Stage] | Sequence[float]) -> float:
    """Total execution time of one branch: the sum of its stage spans."""
    if not branch:
        raise PredictionError("branch must contain at least one stage")
    return sum(s.tx if isinstance(s, Stage) else float(s) for s in branch)


def predict_tasync(
    sequential_stage_txs: Iterable[float],
    branch_ttxs: Sequence[float],
    overhead_constant: float = 0.0,
) -> float:
    """Asynchronous makespan: serialized stages plus the slowest branch.

    Branches run concurrently, so only the largest branch total contributes.
    """
    branch_ttxs = list(branch_ttxs)
    if not branch_ttxs:
        raise PredictionError("at least one branch is required")
    seq = list(sequential_stage_txs)
    if any(v < 0 for v in seq) or any(v < 0 for v in branch_ttxs):
        raise PredictionError("stage times must be >= 0")
    return sum(seq) + max(branch_ttxs) + overhead_constant


@dataclass(frozen=True)
class MaskedStage:
    """A stage whose repetitions can hide behind a longer-running ancestor."""

    stage_tx: float
    masked_count: int


def masked_stages(stage_txs: Sequence[float], iterations: int) -> list[MaskedStage]:
    """Default masking schedule for an n-iteration staggered pipeline.

    Stage j (j >= 1) overlaps earlier iterations' long stages n - j times;
    the head stage (j = 0) is never masked.
    """
    return [
        MaskedStage(tx, max(iterations - j, 0))
        for j, tx in enumerate(stage_txs)
        if j >= 1
    ]


def predict_tasync_masked(
    t_seq_iter: float,
    iterations: int,
    masked: Sequence[MaskedStage],
) -> float:
    """Masked asynchronous makespan for a pipeline repeated `iterations` times.

    Each masked stage repetition is hidden by a longer concurrent stage and is
    subtracted from the serial total.
    """
    if iterations < 1:
        raise PredictionError("iterations must be >= 1")
    if any(m.masked_count > iterations for m in masked):
        raise PredictionError("masked count cannot exceed the iteration count")
    total = iterations * t_seq_iter - sum(m.masked_count * m.stage_tx for m in masked)
    if total <= 0:
        raise PredictionError("masking exceeds makespan")
    return total


def masking_feasible(anchor_tx: float, masked_txs: Iterable[float]) -> bool:
    """True iff the anchor stage is long enough to hide the given stages."""
    masked_txs = list(masked_txs)
    if anchor_tx < 0 or any(v < 0 for v in masked_txs):
        raise PredictionError("stage times must be >= 0")
    return anchor_tx >= sum(masked_txs)


def predict_tasync_by_position(stage_txs: Sequence[float], iterations: int) -> float:
    """Masked-makespan variant that discounts stages by pipeline position.

    Stage k contributes max(0, n - k) repetitions, i.e. deeper stages are
    assumed masked once per position. Provided for coverage; for typical
    staggered pipelines it disagrees with predict_tasync_masked, whose
    explicit per-stage counts should be preferred.
    """
    if not stage_txs:
        raise PredictionError("at least one stage is required")
    if iterations < 1:
        raise PredictionError("iterations must be >= 1")
    return sum(tx * max(iterations - k, 0) for k, tx in enumerate(stage_txs))


def apply_overheads(base: float, factors: Iterable[float]) -> float:
    """Inflate a prediction by additive overhead fractions: base * (1 + sum)."""
    factors = list(factors)
    if base <= 0:
        raise PredictionError("base must be positive")
    if any(f < 0 for f in factors):
        raise PredictionError("overhead factors must be >= 0")
    return base * (1.0 + sum(factors))


def relative_improvement(t_seq: float, t_async: float) -> float:
    """Fraction of the sequential makespan saved; negative when async loses."""
    if t_seq <= 0:
        raise PredictionError("t_seq must be positive")
    return 1.0 - t_async / t_seq
