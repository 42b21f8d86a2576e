import json

import pytest

from app.cli.router import EXIT_CONFIG, EXIT_OK, build_parser, main


def _read(path):
    return json.loads(path.read_text())


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_parser_reads_comma_separated_lists():
    args = build_parser().parse_args(["verify", "--criteria", "AC1, AC4", "--s-grid", "0.5,2"])
    assert args.criteria == ["AC1", "AC4"]
    assert args.s_grid == [0.5, 2.0]


def test_simulate_writes_artifacts(tmp_path):
    out = tmp_path / "sim"
    status = main(
        [
            "simulate",
            "--out", str(out),
            "--replicates", "2",
            "--generations", "4",
            "--s-grid", "1.0",
            "--set", "probe.replicates=1",
        ]
    )
    assert status == EXIT_OK
    for name in ("report.json", "run_record.json", "samples.csv", "environments.json", "run_config.txt"):
        assert (out / name).exists()

    report = _read(out / "report.json")
    assert report["command"] == "simulate"
    assert report["complete"] is True
    assert "workers" not in report["config"]
    assert report["result"]["modes"]["trajectories"] == 2
    assert report["result"]["annealed_log_mean"]["mean_log_m"] == "inf"

    record = _read(out / "run_record.json")
    assert record["status"] == EXIT_OK
    assert record["streams"]["tags"] == {"environment": 0, "population": 1, "auxiliary": 2}

    header = (out / "samples.csv").read_text().splitlines()[0]
    assert header == "replicate,n,mode,count_or_log_count,Y_n,log_X_n[s=1.0]"


def test_invalid_config_exits_before_running(tmp_path):
    out = tmp_path / "bad"
    assert main(["simulate", "--out", str(out), "--alpha-max", "1.0"]) == EXIT_CONFIG
    assert not out.exists()


def test_rejected_model_writes_partial_report(tmp_path):
    out = tmp_path / "p0"
    status = main(
        [
            "simulate",
            "--out", str(out),
            "--model", "finite_mixture",
            "--set", 'model.laws=[{"family": "finite", "weights": [0.5, 0.5]}]',
        ]
    )
    assert status == EXIT_CONFIG
    report = _read(out / "report.json")
    assert report["complete"] is False
    assert "A1 violated" in report["result"]["error"]
    assert _read(out / "run_record.json")["status"] == EXIT_CONFIG


def test_classify_sibuya_points_are_regular(tmp_path):
    out = tmp_path / "cls"
    status = main(
        ["classify", "--out", str(out), "--replicates", "2", "--n-max", "100", "--s-grid", "0.5,1.0"]
    )
    assert status == EXIT_OK
    result = _read(out / "report.json")["result"]
    assert result["counts"] == {"Regular": 4, "Irregular": 0, "Inconclusive": 0}
    assert result["sufficient_criterion"]["holds"] is True
    assert result["regular_point_search"]["found"] is True
    assert result["shift_consistency"]["consistent"] is True


def test_verify_subset(tmp_path):
    out = tmp_path / "verify"
    status = main(
        [
            "verify",
            "--out", str(out),
            "--criteria", "AC4,AC8",
            "--set", 'acceptance={"environments": 3}',
        ]
    )
    assert status == EXIT_OK
    result = _read(out / "report.json")["result"]
    assert result["passed"] is True
    assert [c["name"] for c in result["criteria"]] == ["AC4", "AC8"]


class TestLimitsAndReport:
    """A short limits run, repeated with eight workers and re-derived by `report`."""

    ARGS = [
        "--replicates", "100",
        "--s-grid", "1.0",
        "--profile-n", "30",
        "--set", "simulation.n_max=8",
        "--set", "simulation.y_tolerance=0.001",
    ]

    @pytest.fixture(scope="class")
    def runs(self, tmp_path_factory):
        root = tmp_path_factory.mktemp("limits")
        serial, parallel, derived = root / "serial", root / "parallel", root / "derived"
        statuses = [
            main(["limits", "--out", str(serial), "--workers", "1"] + self.ARGS),
            main(["limits", "--out", str(parallel), "--workers", "8"] + self.ARGS),
            main(["report", "--out", str(derived), "--source", str(serial)]),
        ]
        return statuses, serial, parallel, derived

    def test_exit_codes(self, runs):
        statuses, *_ = runs
        assert statuses == [EXIT_OK, EXIT_OK, EXIT_OK]

    def test_report_bytes_do_not_depend_on_workers(self, runs):
        _, serial, parallel, _ = runs
        assert (serial / "report.json").read_bytes() == (parallel / "report.json").read_bytes()
        assert (serial / "samples.csv").read_bytes() == (parallel / "samples.csv").read_bytes()

    def test_report_command_reproduces_result(self, runs):
        _, serial, _, derived = runs
        original = _read(serial / "report.json")
        rederived = _read(derived / "report.json")
        assert rederived["command"] == "report"
        assert rederived["result"] == original["result"]
        assert rederived["complete"] == original["complete"]

    def test_samples_dump_has_one_row_per_replicate(self, runs):
        _, serial, _, _ = runs
        lines = (serial / "samples.csv").read_text().splitlines()
        assert len(lines) == 101


def test_report_rejects_non_limits_source(tmp_path):
    source = tmp_path / "sim"
    main(["simulate", "--out", str(source), "--replicates", "1", "--generations", "2", "--set", "probe.replicates=1"])
    assert main(["report", "--out", str(tmp_path / "rep"), "--source", str(source)]) == EXIT_CONFIG


def test_report_in_place_can_repeat(tmp_path):
    run = tmp_path / "lim"
    assert main(["limits", "--out", str(run)] + TestLimitsAndReport.ARGS) == EXIT_OK
    original = _read(run / "report.json")["result"]
    for _ in range(2):
        assert main(["report", "--out", str(run), "--source", str(run)]) == EXIT_OK
    assert _read(run / "run_record.json")["command"] == "limits"
    assert _read(run / "report_record.json")["command"] == "report"
    assert (run / "report_config.txt").exists()
    assert _read(run / "report.json")["result"] == original
