import json
import math

import pytest

from app.core.errors import StorageError
from app.core.storage import RunStore, canonical_json, format_cell, run_store, to_plain
from app.repositories.environment_repository import EnvironmentRepository
from app.repositories.report_repository import ReportRepository
from app.repositories.trajectory_repository import OUTCOME_COLUMNS, TrajectoryRepository
from app.schemas.limits import KSResult, ReplicateOutcome
from app.schemas.regularity import Verdict


def _outcome(replicate, **overrides):
    values = dict(
        replicate=replicate,
        seed=42,
        final_n=7,
        mode="log_approx",
        Y=0.1 + replicate / 10.0,
        T=-math.log(0.1 + replicate / 10.0),
        normalized=1.0 / 3.0,
        exp_transform=0.123456789012345678,
        H_of_T=None,
        stabilized=True,
        truncated=False,
        mode_switch_index=4,
    )
    values.update(overrides)
    return ReplicateOutcome(**values)


def test_to_plain_handles_models_enums_and_non_finite():
    ks = KSResult(D=0.1, n=10, critical_95=0.43, p_value=0.99, passed=True)
    plain = to_plain({"ks": ks, "verdict": Verdict.REGULAR, "x": math.inf, "y": -math.inf, "z": math.nan})
    assert plain["ks"]["D"] == 0.1
    assert plain["verdict"] == "Regular"
    assert (plain["x"], plain["y"], plain["z"]) == ("inf", "-inf", "nan")


def test_canonical_json_is_order_independent():
    a = canonical_json({"b": 1, "a": [1.5, 2]})
    b = canonical_json({"a": [1.5, 2], "b": 1})
    assert a == b
    assert a.endswith("\n")
    assert json.loads(a) == {"a": [1.5, 2], "b": 1}


def test_canonical_json_floats_round_trip():
    value = 0.1 + 0.2
    assert json.loads(canonical_json({"v": value}))["v"] == value


def test_canonical_json_writes_seventeen_digits():
    text = canonical_json({"a": 0.1, "b": 2.0, "c": [], "d": {}, "e": 1e-300})
    assert '"a": 0.10000000000000001' in text
    assert '"b": 2.0' in text
    assert '"c": []' in text and '"d": {}' in text
    assert json.loads(text)["e"] == 1e-300


def test_format_cell():
    assert format_cell(None) == ""
    assert format_cell(True) == "true"
    assert format_cell(-math.inf) == "-inf"
    assert float(format_cell(1.0 / 3.0)) == 1.0 / 3.0
    assert format_cell(Verdict.IRREGULAR) == "Irregular"


def test_unconfigured_store_raises():
    with pytest.raises(StorageError):
        RunStore().write_text("report.json", "{}")


def test_missing_artifact_raises(tmp_path):
    store = RunStore().configure(str(tmp_path))
    with pytest.raises(StorageError) as info:
        store.read_json("missing.json")
    assert "missing.json" in info.value.path


def test_write_leaves_no_temporary_file(tmp_path):
    store = RunStore().configure(str(tmp_path / "a" / "b"))
    store.write_json("report.json", {"k": 1})
    assert sorted(p.name for p in (tmp_path / "a" / "b").iterdir()) == ["report.json"]


def test_outcomes_round_trip_exactly(run_dir):
    outcomes = [_outcome(1), _outcome(0, H_of_T=0.75, mode_switch_index=None, stabilized=False)]
    TrajectoryRepository.save_outcomes(outcomes)
    header = (run_dir / "samples.csv").read_text().splitlines()[0]
    assert header.split(",") == OUTCOME_COLUMNS
    loaded = TrajectoryRepository.load_outcomes()
    assert loaded == sorted(outcomes, key=lambda o: o.replicate)


def test_load_outcomes_rejects_trajectory_dump(run_dir):
    run_store.write_csv("samples.csv", ["replicate", "n", "mode"], [[0, 0, "exact"]])
    with pytest.raises(StorageError):
        TrajectoryRepository.load_outcomes()


def test_trajectory_dump(run_dir, population, square_env):
    traj = population.simulate_until_stable(square_env, tolerance=0.0, n_max=3, n_min=1)
    paths = {1.0: population.compute_martingale_path(square_env, traj, 1.0)}
    TrajectoryRepository.save_trajectories([traj], [paths], [1.0])
    rows = run_store.read_csv("samples.csv")
    assert [row["count_or_log_count"] for row in rows] == ["1", "2", "4", "8"]
    assert "log_X_n[s=1.0]" in rows[0]
    assert float(rows[2]["log_X_n[s=1.0]"]) == pytest.approx(-1.0, rel=1e-9)


def test_environment_records_round_trip(run_dir, environment_service, example_model):
    records = [environment_service.to_record(environment_service.sample_environment(example_model, r), 4) for r in (1, 0)]
    EnvironmentRepository.save(records)
    loaded = EnvironmentRepository.load()
    assert [r.replicate_index for r in loaded] == [0, 1]
    replayed = environment_service.replay_record(loaded[1])
    assert replayed.alphas(4) == environment_service.sample_environment(example_model, 1).alphas(4)


def test_report_repository(run_dir):
    ReportRepository.save_report({"command": "verify", "result": {"passed": True}})
    ReportRepository.save_run_record({"status": 0})
    assert ReportRepository.load_report()["result"]["passed"] is True
    assert ReportRepository.load_run_record(RunStore(str(run_dir)))["status"] == 0


def test_report_run_keeps_source_record(run_dir):
    ReportRepository.save_run_record({"command": "limits", "status": 0})
    ReportRepository.save_run_record({"command": "report", "status": 3})
    assert ReportRepository.load_run_record()["command"] == "limits"
    assert (run_dir / "report_record.json").exists()
