import pytest
import yaml

from rlscale.errors import ParseError, ValidationError
from rlscale.ingest import (
    LearningCurve,
    RunKey,
    RunSet,
    TaskMeta,
    parse_run_log,
    strip_reset_markers,
    validate_manifest,
    write_run_log,
)
from rlscale.reference import manifest_dict

META = TaskMeta("walker-run", optimal_return=1000, j_min=350, j_max=730, delta=1e11)

HEADER = "task,utd,model_size,batch_size,seed,env_step,return\n"


def rows(*items):
    return HEADER + "".join(
        f"walker-run,{u},{n},{b},{s},{t},{r}\n" for (u, n, b, s, t, r) in items)


class TestParseRunLog:
    def test_basic_parse_groups_and_sorts(self):
        text = rows((1, 1e6, 128, 0, 2000, 5.0), (1, 1e6, 128, 0, 1000, 3.0),
                    (2, 1e6, 128, 0, 1000, 4.0))
        runset = parse_run_log(text, META)
        assert len(runset.curves) == 2
        by_key = {c.key: c for c in runset.curves}
        c = by_key[RunKey("walker-run", 1.0, 1e6, 128, 0)]
        assert c.points == ((1000, 3.0), (2000, 5.0))

    def test_round_trip(self):
        text = rows((1, 1e6, 128, 0, 1000, 3.25), (4, 2.5e5, 64, 1, 500, -1.5))
        runset = parse_run_log(text, META)
        assert parse_run_log(write_run_log(runset), META) == runset

    def test_bad_header(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_run_log("task,utd\n", META)

    def test_missing_column(self):
        with pytest.raises(ParseError, match="line 2.*columns"):
            parse_run_log(HEADER + "walker-run,1,1e6,128,0,1000\n", META)

    def test_non_numeric_value(self):
        with pytest.raises(ParseError, match="line 3.*env_step"):
            parse_run_log(rows((1, 1e6, 128, 0, 1000, 3.0))
                          + "walker-run,1,1e6,128,0,oops,3.0\n", META)

    def test_duplicate_step_same_run(self):
        with pytest.raises(ParseError, match="duplicate env_step"):
            parse_run_log(rows((1, 1e6, 128, 0, 1000, 3.0),
                               (1, 1e6, 128, 0, 1000, 4.0)), META)

    def test_wrong_task(self):
        with pytest.raises(ParseError, match="expected 'walker-run'"):
            parse_run_log(HEADER + "dog-run,1,1e6,128,0,1000,3.0\n", META)

    def test_empty_inputs(self):
        with pytest.raises(ParseError, match="missing header"):
            parse_run_log("", META)
        with pytest.raises(ParseError, match="no data rows"):
            parse_run_log(HEADER, META)

    def test_reset_markers_attached_per_seed(self):
        text = rows((1, 1e6, 128, 0, 1000, 3.0), (1, 1e6, 128, 1, 1000, 3.0))
        runset = parse_run_log(text, META, reset_steps={0: (500,)})
        by_seed = {c.key.seed: c for c in runset.curves}
        assert by_seed[0].reset_steps == (500,)
        assert by_seed[1].reset_steps is None
        stripped = strip_reset_markers(runset)
        assert all(c.reset_steps is None for c in stripped.curves)


class TestModelInvariants:
    def test_task_meta_bounds(self):
        with pytest.raises(ValidationError):
            TaskMeta("t", 1000, j_min=500, j_max=400, delta=1e10)
        with pytest.raises(ValidationError):
            TaskMeta("t", 1000, j_min=0, j_max=1001, delta=1e10)
        with pytest.raises(ValidationError):
            TaskMeta("t", -1, j_min=0, j_max=100, delta=1e10)
        with pytest.raises(ValidationError):
            TaskMeta("t", 1000, j_min=0, j_max=100, delta=0)
        with pytest.raises(ValidationError):
            TaskMeta("t", 1000, j_min=0, j_max=100, delta=1e10, reset_period=0)

    def test_run_key_positivity(self):
        with pytest.raises(ValidationError):
            RunKey("t", 0, 1e6, 128, 0)
        with pytest.raises(ValidationError):
            RunKey("t", 1, -1, 128, 0)
        with pytest.raises(ValidationError):
            RunKey("t", 1, 1e6, 0, 0)
        assert RunKey("t", 2.0, 1e6, 128, 3).config() == (2.0, 1e6, 128)

    def test_curve_steps_strictly_increasing(self):
        key = RunKey("t", 1, 1e6, 128, 0)
        with pytest.raises(ValidationError):
            LearningCurve(key, ((10, 1.0), (10, 2.0)))
        with pytest.raises(ValidationError):
            LearningCurve(key, ())
        with pytest.raises(ValidationError):
            LearningCurve(key, ((-1, 1.0),))

    def test_runset_rejects_duplicates_and_foreign_curves(self):
        key = RunKey("walker-run", 1, 1e6, 128, 0)
        curve = LearningCurve(key, ((1, 1.0),))
        with pytest.raises(ValidationError, match="duplicate"):
            RunSet(META, (curve, curve))
        other = LearningCurve(RunKey("dog-run", 1, 1e6, 128, 0), ((1, 1.0),))
        with pytest.raises(ValidationError, match="does not belong"):
            RunSet(META, (other,))

    def test_by_config_groups_seeds(self):
        curves = tuple(
            LearningCurve(RunKey("walker-run", 1, 1e6, 128, s), ((1, 1.0),))
            for s in range(3))
        groups = RunSet(META, curves).by_config()
        assert set(groups) == {(1.0, 1e6, 128)}
        assert len(groups[(1.0, 1e6, 128)]) == 3


class TestManifest:
    def test_accepts_dict_yaml_and_wrapper(self):
        block = {"optimal_return": 1000, "j_min": 100, "j_max": 900, "delta": 1e10}
        for doc in ({"t": block}, {"tasks": {"t": block}},
                    yaml.safe_dump({"t": block})):
            (meta,) = validate_manifest(doc)
            assert meta == TaskMeta("t", 1000, 100, 900, 1e10)

    def test_optional_reset_period(self):
        (meta,) = validate_manifest({"t": {
            "optimal_return": 1000, "j_min": 100, "j_max": 900,
            "delta": 1e10, "reset_period": 50000}})
        assert meta.reset_period == 50000

    def test_missing_and_unknown_fields(self):
        with pytest.raises(ValidationError, match="missing fields"):
            validate_manifest({"t": {"optimal_return": 1000}})
        with pytest.raises(ValidationError, match="unknown fields"):
            validate_manifest({"t": {"optimal_return": 1000, "j_min": 0,
                                     "j_max": 900, "delta": 1e10, "bogus": 1}})
        with pytest.raises(ValidationError):
            validate_manifest({})
        with pytest.raises(ValidationError):
            validate_manifest({"t": "not a mapping"})

    def test_reference_manifest_round_trips(self):
        metas = validate_manifest(manifest_dict())
        assert {m.task_id for m in metas} >= {"h1-crawl", "walker-run", "dog-run"}
        h1 = next(m for m in metas if m.task_id == "h1-crawl")
        assert (h1.optimal_return, h1.j_min, h1.j_max, h1.delta) == (700, 450, 780, 2e12)
