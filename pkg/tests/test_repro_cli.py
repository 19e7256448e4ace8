import csv
import json

import pytest

from nonclass.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from nonclass.repro import CSV_COLUMNS, DEFAULT_GRIDS, TARGETS, ReproJob, parse_grid_value, run

SMALL = [
    "--grid", "fock_n=1",
    "--grid", "squeezed_r=0.5",
    "--grid", "cat_beta=1",
    "--grid", "nbar=0.5",
    "--grid", "gaussian_r=0.35",
    "--grid", "displacement=0.5",
    "--grid", "superposition_c=0.3",
]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_targets_are_the_reproducible_artifacts():
    assert set(TARGETS) == {
        "table1", "table2", "table3", "table4", "fig4", "fig5", "fig6",
        "verify_multicopy", "verify_circuits", "verify_properties",
    }


def test_parse_grid_value():
    assert parse_grid_value("1,2") == [1, 2]
    assert parse_grid_value("0.5, 1+0.5i") == [0.5, 1 + 0.5j]
    with pytest.raises(ValueError):
        parse_grid_value(" , ")


def test_job_validation():
    with pytest.raises(ValueError):
        ReproJob("table9")
    with pytest.raises(ValueError):
        ReproJob("table1", grids={"nope": [1]})
    with pytest.raises(ValueError):
        ReproJob("table1", tail_tol=0.1)
    with pytest.raises(ValueError):
        ReproJob("table1", tol=0)
    assert ReproJob("table1").grid("fock_n") == DEFAULT_GRIDS["fock_n"]


def test_table1_passes_and_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["table1", "--out", str(a), *SMALL]) == EXIT_OK
    assert main(["--target", "table1", "--out", str(b), *SMALL]) == EXIT_OK
    assert (a / "table1.csv").read_bytes() == (b / "table1.csv").read_bytes()
    rows = read_csv(a / "table1.csv")
    assert rows[0] == CSV_COLUMNS
    # fock, squeezed and both cat parities times every tabulated subset
    assert len(rows) - 1 == 4 * 39
    summary = json.loads((a / "table1.summary.json").read_text())
    assert summary["passed"] and summary["failed"] == 0
    out = capsys.readouterr().out
    assert "PASS table1:" in out


def test_config_file(tmp_path):
    cfg = tmp_path / "job.json"
    cfg.write_text(json.dumps({"target": "table2", "out": str(tmp_path / "o"), "grids": {"fock_n": "2", "squeezed_r": [0.35], "cat_beta": [1.5], "nbar": [1.0], "gaussian_r": [0.7]}}))
    assert main(["--config", str(cfg)]) == EXIT_OK
    rows = read_csv(tmp_path / "o" / "table2.csv")
    assert any("squeezed_thermal(nbar=1,r=0.7" in r[1] for r in rows[1:])


def test_tolerance_override_can_fail(tmp_path):
    assert main(["table2", "--out", str(tmp_path), "--tol", "1e-300", *SMALL]) == EXIT_FAIL


def test_printed_even_cat_row_fails(tmp_path):
    assert main(["table4", "--out", str(tmp_path), *SMALL]) == EXIT_FAIL
    summary = json.loads((tmp_path / "table4.summary.json").read_text())
    assert summary["checks"]["table4"]["passed"]
    assert not summary["checks"]["table4_printed_even_cat"]["passed"]


def test_fig6_small_grid(tmp_path):
    assert main(["fig6", "--out", str(tmp_path), "--grid", "fig6_points=24"]) == EXIT_OK


def test_verify_multicopy_dumps_polynomials(tmp_path):
    assert main(["verify_multicopy", "--out", str(tmp_path), *SMALL]) == EXIT_OK
    polys = json.loads((tmp_path / "verify_multicopy.polynomials.json").read_text())
    assert set(polys) >= {"B12", "B23", "B123", "B1235"}
    assert polys["B23"]["compact_form_tag"] == "two_Lysq_normal"


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["table1", "--grid", "nope=1"],
        ["table1", "--grid", "fock_n"],
        ["table1", "--tail-tol", "0.5"],
        ["table1", "--target", "table2"],
        ["table1", "--config", "/nonexistent/job.json"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"target": "table1", "colour": "blue"}))
    assert main(["--config", str(cfg)]) == EXIT_USAGE
    cfg.write_text("[1, 2]")
    assert main(["--config", str(cfg)]) == EXIT_USAGE
    cfg.write_text("{not json")
    assert main(["--config", str(cfg)]) == EXIT_USAGE


def test_unknown_target_is_rejected_by_parser():
    with pytest.raises(SystemExit) as exc:
        main(["table9"])
    assert exc.value.code == EXIT_USAGE


def test_run_returns_summary(tmp_path):
    summary = run(ReproJob("fig5", out=tmp_path, grids={"fig5_points": [101]}))
    assert summary["passed"]
    assert (tmp_path / "fig5.csv").exists()
