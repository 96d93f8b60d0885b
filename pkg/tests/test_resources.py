"""Demand arithmetic, wave counts and the resource-permitted degree."""
from __future__ import annotations

import random

import pytest

from helpers import random_workflow
from wlasim.graph import DependencyGraph, TaskSet, path_cover
from wlasim.resources import (
    Demand,
    Dimension,
    ResourceError,
    ResourcePool,
    doa_res,
    set_demand,
    wave_count,
    wla,
)
from wlasim.workloads import builtin


def pool(cores=706, gpus=96, cores_hard=False, gpus_hard=True) -> ResourcePool:
    return ResourcePool(
        (
            Dimension("cpu_cores", cores, hard=cores_hard),
            Dimension("gpus", gpus, hard=gpus_hard),
        )
    )


class TestSetDemand:
    def test_gpu_heavy_set(self):
        ts = TaskSet("Sim", 96, Demand({"cpu_cores": 4, "gpus": 1}), 340.0)
        assert set_demand(ts).entries == {"cpu_cores": 384, "gpus": 96}

    def test_cpu_only_set(self):
        ts = TaskSet("Aggr", 16, Demand({"cpu_cores": 32, "gpus": 0}), 85.0)
        assert set_demand(ts).entries == {"cpu_cores": 512, "gpus": 0}

    def test_zero_demand(self):
        ts = TaskSet("Z", 1, Demand({}), 1.0)
        assert set_demand(ts).get("cpu_cores") == 0
        assert set_demand(ts).get("gpus") == 0


class TestWaveCount:
    def test_core_bound_set_needs_three_waves(self):
        ts = TaskSet("Infer", 96, Demand({"cpu_cores": 16, "gpus": 1}), 38.0)
        assert wave_count(ts, pool(cores_hard=True)) == 3  # floor(706/16)=44

    def test_soft_cores_leave_one_wave(self):
        ts = TaskSet("Sim", 96, Demand({"cpu_cores": 4, "gpus": 1}), 340.0)
        assert wave_count(ts, pool()) == 1  # 96 GPUs fit 96 single-GPU tasks

    def test_small_set_is_one_wave(self):
        ts = TaskSet("T", 5, Demand({"gpus": 1}), 1.0)
        assert wave_count(ts, pool()) == 1

    def test_unbounded_when_no_hard_demand(self):
        ts = TaskSet("T", 1000, Demand({"cpu_cores": 32}), 1.0)
        assert wave_count(ts, pool()) == 1

    def test_oversized_task_is_an_error(self):
        ts = TaskSet("T", 1, Demand({"gpus": 97}), 1.0)
        with pytest.raises(ResourceError, match="task cannot fit pool"):
            wave_count(ts, pool())

    def test_one_wave_whenever_full_set_fits(self):
        rng = random.Random(3)
        for _ in range(50):
            count = rng.randint(1, 20)
            per_task = rng.randint(1, 4)
            capacity = count * per_task + rng.randint(0, 10)
            ts = TaskSet("T", count, Demand({"gpus": per_task}), 1.0)
            p = ResourcePool((Dimension("gpus", capacity, hard=True),))
            assert wave_count(ts, p) == 1


class TestDoaRes:
    def test_ddmd_pool_hosts_two_branches(self):
        spec = builtin("ddmd")
        dg = spec.graph()
        assert doa_res(dg, path_cover(dg), spec.pool) == 1

    def test_cdg1_pool_hosts_three_branches(self):
        spec = builtin("cdg1")
        dg = spec.graph()
        assert doa_res(dg, path_cover(dg), spec.pool) == 2

    def test_cdg2_pool_hosts_three_branches(self):
        spec = builtin("cdg2")
        dg = spec.graph()
        assert doa_res(dg, path_cover(dg), spec.pool) == 2

    def test_edgeless_zero_demand_fits_everything(self):
        sets = [TaskSet(f"T{i}", 1, Demand({}), 1.0) for i in range(6)]
        dg = DependencyGraph.of(sets)
        assert doa_res(dg, path_cover(dg), pool()) == 5

    def test_single_task_model_is_at_least_full_set(self):
        for name in ("ddmd", "cdg1", "cdg2"):
            spec = builtin(name)
            dg = spec.graph()
            branches = path_cover(dg)
            full = doa_res(dg, branches, spec.pool, "full-set")
            single = doa_res(dg, branches, spec.pool, "single-task")
            assert single >= full

    def test_monotone_in_hard_capacity(self):
        rng = random.Random(17)
        for _ in range(40):
            dg = random_workflow(rng, max_sets=8)
            branches = path_cover(dg)
            low_gpus = rng.randint(2, 6)
            small = ResourcePool(
                (
                    Dimension("cpu_cores", 64, hard=True),
                    Dimension("gpus", low_gpus, hard=True),
                )
            )
            grown = ResourcePool(
                (
                    Dimension("cpu_cores", 64 + rng.randint(0, 200), hard=True),
                    Dimension("gpus", low_gpus + rng.randint(0, 20), hard=True),
                )
            )

            def degree(p):
                try:
                    return doa_res(dg, branches, p, "single-task")
                except ResourceError:
                    return -1  # a task does not fit the small pool

            if degree(small) >= 0:
                assert degree(grown) >= degree(small)

    def test_branch_guard(self):
        sets = [TaskSet(f"T{i:02d}", 1, Demand({}), 1.0) for i in range(21)]
        dg = DependencyGraph.of(sets)
        with pytest.raises(ResourceError, match="too many branches"):
            doa_res(dg, path_cover(dg), pool())

    def test_unknown_model(self):
        dg = DependencyGraph.of([TaskSet("A", 1, Demand({}), 1.0)])
        with pytest.raises(ResourceError, match="unknown demand model"):
            doa_res(dg, path_cover(dg), pool(), "bogus")


class TestWla:
    @pytest.mark.parametrize(
        "dep,res,expected", [(2, 1, 1), (2, 2, 2), (0, 5, 0), (3, 0, 0)]
    )
    def test_min_of_both(self, dep, res, expected):
        assert wla(dep, res) == expected

    def test_never_exceeds_either(self):
        rng = random.Random(1)
        for _ in range(100):
            dep, res = rng.randint(0, 10), rng.randint(0, 10)
            value = wla(dep, res)
            assert value <= dep and value <= res

    def test_negative_rejected(self):
        with pytest.raises(ResourceError):
            wla(-1, 2)
