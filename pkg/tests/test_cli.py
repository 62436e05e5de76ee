import json
from fractions import Fraction

import pytest

from cubeforms import CubeSubset, ModPForm, subset_from_constraints
from cubeforms.cli import main
from cubeforms.serialize import dump_json, load_json, subset_json


@pytest.fixture
def subset_files(tmp_path):
    A = subset_from_constraints([(ModPForm.coordinate(5, 2, 0), 0)], 5, 2)
    B = CubeSubset.full(5)
    pa = tmp_path / "a.json"
    pb = tmp_path / "b.json"
    dump_json(subset_json(A, 2), pa)
    dump_json(subset_json(B, 2), pb)
    return str(pa), str(pb)


def test_fixtures_pass_exit_zero(tmp_path):
    out = tmp_path / "fx.json"
    code = main(["fixtures", "negative-correlation", "--p", "3", "--n", "6", "--out", str(out)])
    assert code == 0
    payload = load_json(out)
    assert payload["report"]["ok"] is True
    value = payload["fixture"]["expected"]["correlation"]
    assert (value["num"], value["den"]) == (-1, 12)


def test_fixtures_refusal_exit_three(capsys):
    assert main(["fixtures", "negative-correlation", "--p", "2", "--n", "8"]) == 3


def test_fixtures_unknown_name_exit_two():
    assert main(["fixtures", "not-a-fixture", "--p", "3"]) == 2


def test_fixtures_missing_n_refused():
    assert main(["fixtures", "no-close-distributions", "--p", "2"]) == 3


def test_verify_subcommands_exit_zero(tmp_path):
    assert main(["verify", "hierarchy", "--trials", "50"]) == 0
    assert main(["verify", "nonzero-probability", "--p", "5", "--k", "2", "--n", "6", "--trials", "50"]) == 0
    assert main(["verify", "equidistribution", "--p", "2", "--n", "6", "--k", "1"]) == 0
    out = tmp_path / "v.json"
    assert main(["verify", "low-negentropy", "--trials", "50", "--out", str(out)]) == 0
    assert load_json(out)["ok"] is True


def test_cover_command(subset_files, tmp_path):
    pa, _ = subset_files
    out = tmp_path / "cover.json"
    code = main(["cover", "--subset", pa, "--alpha", "1/2", "--radius", "1", "--out", str(out)])
    assert code == 0
    payload = load_json(out)
    assert payload["cover"]["certified"] is True


def test_metrics_command(subset_files, tmp_path, capsys):
    pa, pb = subset_files
    out = tmp_path / "m.json"
    code = main(["metrics", "--subset", pa, "--subset", pb, "--form", "1,0,0,0,0", "--out", str(out)])
    assert code == 0
    payload = load_json(out)
    assert payload["metrics"]["diameter"]["num"] == 1
    assert payload["metrics"]["correlation"]["num"] == 0


def test_metrics_single_subset_refused(subset_files):
    pa, _ = subset_files
    assert main(["metrics", "--subset", pa, "--form", "1,0,0,0,0"]) == 3


def test_pipeline_command_and_reports(tmp_path, capsys):
    outdir = tmp_path / "run"
    code = main(
        [
            "pipeline", "--mode", "R", "--generate", "random-dense",
            "--s", "25", "--n", "6", "--p", "2", "--seed", "9",
            "--out", str(outdir), "--save-family",
        ]
    )
    assert code == 0
    report = load_json(outdir / "report.json")
    assert report["schema"] == "cubeforms/1"
    assert report["ok"] is True
    assert report["theorem"]["passed"] is True
    assert report["independent_check"]["ok"] is True
    csv_text = (outdir / "tuples.csv").read_text().splitlines()
    assert csv_text[0].startswith("tuple,")
    assert len(csv_text) == 1 + report["theorem"]["total_tuples"]


def test_pipeline_from_family_file(tmp_path):
    outdir = tmp_path / "runq"
    code = main(
        [
            "pipeline", "--mode", "R", "--generate", "random-dense",
            "--s", "10", "--n", "5", "--p", "2", "--seed", "4",
            "--out", str(outdir), "--save-family", "--no-recheck",
        ]
    )
    assert code == 0
    outdir2 = tmp_path / "runq2"
    code2 = main(
        [
            "pipeline", "--mode", "Q", "--family", str(outdir / "family.json"),
            "--seed", "4", "--out", str(outdir2),
        ]
    )
    assert code2 == 0
    assert load_json(outdir2 / "report.json")["mode"] == "Q"


def test_pipeline_malformed_family_exit_two(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": "cubeforms/1", ')
    assert main(["pipeline", "--mode", "R", "--family", str(bad)]) == 2


def test_pipeline_single_subset_warns_exit_zero(tmp_path, capsys):
    outdir = tmp_path / "one"
    code = main(
        [
            "pipeline", "--mode", "R", "--generate", "random-dense",
            "--s", "1", "--n", "5", "--p", "2", "--seed", "4", "--out", str(outdir),
        ]
    )
    assert code == 0
    assert "single subset" in capsys.readouterr().err


def test_budget_exit_four(tmp_path):
    # n = 14 at p = 3 wants 3^14 ~ 4.8M forms, above the default budget
    code = main(
        [
            "pipeline", "--mode", "R", "--generate", "random-dense",
            "--s", "2", "--n", "14", "--p", "3", "--seed", "1",
            "--out", str(tmp_path / "big"),
        ]
    )
    assert code == 4
