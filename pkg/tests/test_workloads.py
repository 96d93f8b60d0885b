"""Builtin workloads and workflow-file round-trips."""
from __future__ import annotations

import json

import pytest

from wlasim.graph import GraphValidationError, derive_plan, doa_dep, validate
from wlasim.predict import branch_ttx, predict_tseq
from wlasim.workloads import (
    BUILTIN_NAMES,
    WorkflowError,
    WorkflowParseError,
    WorkflowSchemaError,
    builtin,
    load_workflow,
    save_workflow,
    workflow_document,
)


class TestBuiltins:
    def test_staggered_builtin_expands(self):
        dg = builtin("ddmd").graph()
        assert len(dg.task_sets) == 12
        assert doa_dep(dg) == 2

    def test_balanced_fork_async_base(self):
        spec = builtin("cdg2")
        plan = derive_plan(spec.graph())
        seq = sum(s.tx for s in plan.sequential_stages())
        branch_totals = [
            branch_ttx(b) for region in plan.parallel_regions() for b in region.branches
        ]
        assert seq + max(branch_totals) == pytest.approx(1300.0)

    def test_short_fork_sequential_plan_total(self):
        spec = builtin("cdg1")
        assert predict_tseq(derive_plan(spec.graph())) == pytest.approx(1980.0)
        assert spec.t_seq_budget == 2000.0  # workload was sized to this target

    @pytest.mark.parametrize("name", BUILTIN_NAMES)
    def test_every_builtin_validates_and_derives_a_plan(self, name):
        dg = builtin(name).graph()
        assert validate(dg) == []
        derive_plan(dg)

    def test_unknown_name(self):
        with pytest.raises(WorkflowError, match="unknown builtin"):
            builtin("nope")

    def test_default_tx_cv(self):
        assert all(ts.tx_cv == 0.05 for ts in builtin("ddmd").task_sets)


class TestRoundTrip:
    @pytest.mark.parametrize("name", BUILTIN_NAMES)
    def test_save_then_load_is_identity(self, name, tmp_path):
        spec = builtin(name)
        path = tmp_path / f"{name}.json"
        save_workflow(spec, path)
        assert load_workflow(path) == spec

    def test_explicit_plan_round_trips(self, tmp_path):
        document = workflow_document(builtin("cdg2"))
        document["plan"] = [
            {"stage": ["T0"]},
            {"stage": ["T1", "T2"]},
            {"parallel": [[["T3"], ["T6"]], [["T4", "T5"], ["T7"]]]},
        ]
        path = tmp_path / "planned.json"
        path.write_text(json.dumps(document))
        spec = load_workflow(path)
        assert spec.plan is not None
        assert spec.stage_plan() is spec.plan
        save_workflow(spec, path)
        assert load_workflow(path) == spec


class TestLoaderErrors:
    def write(self, tmp_path, document) -> str:
        path = tmp_path / "wf.json"
        path.write_text(json.dumps(document))
        return str(path)

    def base_document(self) -> dict:
        return workflow_document(builtin("cdg1"))

    def test_invalid_json_is_a_parse_error(self, tmp_path):
        path = tmp_path / "wf.json"
        path.write_text("{ not json")
        with pytest.raises(WorkflowParseError, match="line 1"):
            load_workflow(path)

    def test_negative_tx_mean_is_a_schema_error_naming_the_field(self, tmp_path):
        document = self.base_document()
        document["task_sets"][0]["tx_mean_s"] = -340.0
        with pytest.raises(WorkflowSchemaError, match="tx_mean_s"):
            load_workflow(self.write(tmp_path, document))

    def test_cycle_is_a_graph_invariant_error(self, tmp_path):
        document = self.base_document()
        document["edges"].append(["T7", "T0"])
        with pytest.raises(GraphValidationError, match="cycle"):
            load_workflow(self.write(tmp_path, document))

    def test_dangling_edge_is_a_graph_invariant_error(self, tmp_path):
        document = self.base_document()
        document["edges"].append(["T7", "T9"])
        with pytest.raises(GraphValidationError, match="unknown endpoint"):
            load_workflow(self.write(tmp_path, document))

    def test_error_classes_are_distinct(self):
        assert not issubclass(WorkflowSchemaError, WorkflowParseError)
        assert not issubclass(WorkflowParseError, WorkflowSchemaError)
        assert not issubclass(GraphValidationError, WorkflowError)

    def test_missing_required_key(self, tmp_path):
        document = self.base_document()
        del document["pool"]
        with pytest.raises(WorkflowSchemaError, match="pool"):
            load_workflow(self.write(tmp_path, document))

    def test_iterations_forbid_explicit_edges(self, tmp_path):
        document = workflow_document(builtin("ddmd"))
        document["edges"] = [["Sim", "Aggr"]]
        with pytest.raises(WorkflowSchemaError, match="edges must be empty"):
            load_workflow(self.write(tmp_path, document))

    def test_plan_must_cover_every_set(self, tmp_path):
        document = self.base_document()
        document["plan"] = [{"stage": ["T0"]}]
        with pytest.raises(WorkflowSchemaError, match="cover every task set"):
            load_workflow(self.write(tmp_path, document))

    def test_composition_must_name_known_sets(self, tmp_path):
        document = self.base_document()
        document["async_composition"] = {
            "sequential": ["T0"],
            "branches": [["T99"]],
        }
        with pytest.raises(WorkflowSchemaError, match="unknown task sets"):
            load_workflow(self.write(tmp_path, document))

    def test_missing_file_is_oserror(self, tmp_path):
        with pytest.raises(OSError):
            load_workflow(tmp_path / "absent.json")
