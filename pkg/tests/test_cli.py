import csv
import json
import math
from pathlib import Path

import pytest
from click.testing import CliRunner

from freerg.cli import CLT_HEADER, DENSITY_HEADER, RESIDUAL_HEADER, ExperimentConfig, InputError, main

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def runner():
    return CliRunner()


def _rows(text):
    return list(csv.reader(text.splitlines()))


def _assert_csv_close(text, golden_path, tol=1e-12):
    got, want = _rows(text), _rows(golden_path.read_text())
    assert got[0] == want[0]
    assert len(got) == len(want)
    for g, w in zip(got[1:], want[1:]):
        for a, b in zip(g, w):
            if b == "":
                assert a == ""
            else:
                assert float(a) == pytest.approx(float(b), rel=tol, abs=tol)


def test_clt_run_golden(runner):
    res = runner.invoke(main, ["clt-run", "--seed", "rademacher", "--n-max", "3"])
    assert res.exit_code == 0, res.output
    _assert_csv_close(res.output, GOLDEN / "clt_rademacher_n3.csv")
    assert _rows(res.output)[0] == list(CLT_HEADER)


def test_clt_run_rademacher_n1(runner):
    res = runner.invoke(main, ["clt-run", "--seed", "rademacher", "--n-max", "1"])
    rows = _rows(res.output)
    assert float(rows[1][1]) == pytest.approx(0.28719, abs=1e-5)
    assert float(rows[2][1]) == pytest.approx(0.13348, abs=1e-5)
    assert float(rows[2][2]) == pytest.approx(0.4648, abs=1e-4)


def test_clt_run_semicircle_is_fixed(runner):
    res = runner.invoke(main, ["clt-run", "--seed", "semicircle", "--n-max", "3"])
    assert res.exit_code == 0
    for row in _rows(res.output)[1:]:
        assert float(row[1]) <= 1e-9


def test_clt_run_bernoulli(runner, tmp_path):
    seed = json.dumps({"type": "bernoulli_std", "p": "1/4"})
    res = runner.invoke(main, ["clt-run", "--seed", seed, "--n-max", "10", "--output-dir", str(tmp_path)])
    assert res.exit_code == 0
    rows = _rows((tmp_path / "clt_run.csv").read_text())[1:]
    ds = [float(r[1]) for r in rows]
    assert all(b < a for a, b in zip(ds, ds[1:]))
    assert all(float(r[2]) <= 0.7171 for r in rows[1:])


def test_clt_run_rejects_non_q3_seed(runner):
    res = runner.invoke(main, ["clt-run", "--seed", "arcsine", "--n-max", "1"])
    assert res.exit_code == 2
    assert "certificate" in res.output


def test_config_file_with_flag_override(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed_measure": "semicircle", "n_max": 4, "grid": {"points": 50}}))
    res = runner.invoke(main, ["clt-run", "--config", str(cfg)])
    assert res.exit_code == 0
    assert len(_rows(res.output)) == 6
    res = runner.invoke(main, ["clt-run", "--config", str(cfg), "--seed", "rademacher", "--n-max", "1"])
    rows = _rows(res.output)
    assert len(rows) == 3 and float(rows[1][1]) == pytest.approx(0.28719, abs=1e-5)


def test_config_validation():
    with pytest.raises(InputError):
        ExperimentConfig(n_max=0)
    with pytest.raises(InputError):
        ExperimentConfig(eps_schedule=(1e-3, 1e-2))
    with pytest.raises(InputError):
        ExperimentConfig.from_sources(None, ymax=0.5)


def test_bad_config_file_exits_2(runner, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{not json")
    assert runner.invoke(main, ["clt-run", "--config", str(cfg)]).exit_code == 2


def test_density_run_rademacher(runner, tmp_path, monkeypatch):
    monkeypatch.setenv("FREERG_THREADS", "3")
    res = runner.invoke(main, [
        "density-run", "--seed", "rademacher", "--n-max", "6",
        "--xmin", "-3", "--xmax", "3", "--xpoints", "601", "--output-dir", str(tmp_path),
    ])
    assert res.exit_code == 0, res.output
    summary = json.loads((tmp_path / "density_summary.json").read_text())
    gaps = {int(k): v for k, v in summary["sup_gaps"].items()}
    assert gaps[1] > 0.5
    assert gaps[6] < 0.05
    assert summary["gaps_decreasing_from_n2"]
    rows = _rows((tmp_path / "density_n1.csv").read_text())
    assert rows[0] == list(DENSITY_HEADER)
    at_zero = min(rows[1:], key=lambda r: abs(float(r[0])))
    assert float(at_zero[1]) == pytest.approx(math.sqrt(2) / (2 * math.pi), abs=1e-3)


def test_density_run_semicircle(runner, tmp_path):
    res = runner.invoke(main, [
        "density-run", "--seed", "semicircle", "--n-max", "3", "--xpoints", "301", "--output-dir", str(tmp_path),
    ])
    assert res.exit_code == 0
    gaps = json.loads((tmp_path / "density_summary.json").read_text())["sup_gaps"]
    assert all(g <= 2e-3 for g in gaps.values())


def test_density_run_thread_count_does_not_change_output(runner, tmp_path, monkeypatch):
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("FREERG_THREADS", threads)
        d = tmp_path / threads
        runner.invoke(main, ["density-run", "--seed", "rademacher", "--n-max", "2", "--xpoints", "101",
                             "--output-dir", str(d)])
        outs.append((d / "density_n2.csv").read_text())
    assert outs[0] == outs[1]


def test_density_run_needs_output_dir(runner):
    assert runner.invoke(main, ["density-run", "--seed", "rademacher"]).exit_code == 2


def test_distance_examples(runner, tmp_path):
    res = runner.invoke(main, ["distance", "semicircle", "semicircle"])
    assert res.exit_code == 0 and json.loads(res.output)["value"] == 0
    spec = tmp_path / "rademacher.json"
    spec.write_text(json.dumps({"type": "atomic", "atoms": [[-1, "1/2"], [1, "1/2"]]}))
    res = runner.invoke(main, ["distance", str(spec), "semicircle"])
    assert json.loads(res.output)["value"] == pytest.approx(0.28719, abs=1e-5)


def test_distance_golden(runner, tmp_path):
    out = tmp_path / "res.csv"
    res = runner.invoke(main, ["distance", "rademacher", "semicircle", "--points", "20", "--residuals-csv", str(out)])
    want = json.loads((GOLDEN / "distance_rademacher.json").read_text())
    got = json.loads(res.output)
    assert got["grid"] == want["grid"]
    assert got["value"] == pytest.approx(want["value"], rel=1e-12)
    _assert_csv_close(out.read_text(), GOLDEN / "residuals_rademacher_p20.csv")
    assert _rows(out.read_text())[0] == list(RESIDUAL_HEADER)


def test_distance_input_errors(runner):
    res = runner.invoke(main, ["distance", "{bad json", "semicircle"])
    assert res.exit_code == 2
    assert "malformed JSON" in res.output
    assert runner.invoke(main, ["distance", '{"type": "nope"}', "semicircle"]).exit_code == 2
    assert runner.invoke(main, ["distance", "arcsine", "semicircle"]).exit_code == 2
    assert runner.invoke(main, ["distance", "arcsine", "semicircle", "--extended"]).exit_code == 0


@pytest.mark.parametrize("spec,order,golden", [
    ("rademacher", "6", "cumulants_rademacher_k6.json"),
    ('{"type":"bernoulli_std","p":"1/4"}', "3", "cumulants_bernoulli_k3.json"),
])
def test_cumulants_golden(runner, spec, order, golden):
    res = runner.invoke(main, ["cumulants", spec, "--order", order])
    assert res.exit_code == 0
    assert json.loads(res.output) == json.loads((GOLDEN / golden).read_text())


def test_cumulants_examples(runner):
    res = json.loads(runner.invoke(main, ["cumulants", "semicircle", "--order", "6"]).output)
    assert res["cumulants"] == ["0", "1", "0", "0", "0", "0"]
    res = json.loads(runner.invoke(main, ["cumulants", '{"type":"bernoulli_std","p":"1/4"}', "--order", "3"]).output)
    assert float(res["cumulants"][2]) == pytest.approx(2 / math.sqrt(3), abs=1e-6)
    assert runner.invoke(main, ["cumulants", "rademacher", "--order", "0"]).exit_code == 2


def test_convolve_rademacher_gives_arcsine(runner):
    res = runner.invoke(main, ["convolve", "rademacher", "--xmin", "-1", "--xmax", "1", "--xpoints", "3"])
    assert res.exit_code == 0
    rows = _rows(res.output)
    assert rows[0] == ["x", "density"]
    assert float(rows[2][1]) == pytest.approx(1 / (2 * math.pi), abs=1e-3)
    assert runner.invoke(main, ["convolve", "rademacher", "--power", "0.5"]).exit_code == 2


def test_commands_are_deterministic(runner):
    a = runner.invoke(main, ["clt-run", "--seed", "rademacher", "--n-max", "2"]).output
    b = runner.invoke(main, ["clt-run", "--seed", "rademacher", "--n-max", "2"]).output
    assert a == b
