import csv
import json

import pytest

from refuelplan.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def tiny_file(tmp_path, capsys):
    path = tmp_path / "tiny.json"
    code, _, _ = run(capsys, "generate", "--seed", 3, "--t2", 2, "--t1", 1, "--cycles", 2, "--weeks", 20,
                     "--tw-width", 2, "--resources", 1, "--out", path)
    assert code == 0
    return path


def test_generate_is_deterministic(tmp_path, capsys, tiny_file):
    again = tmp_path / "again.json"
    run(capsys, "generate", "--seed", 3, "--t2", 2, "--t1", 1, "--cycles", 2, "--weeks", 20,
        "--tw-width", 2, "--resources", 1, "--out", again)
    assert again.read_text() == tiny_file.read_text()


def test_oracle_then_evaluate_is_clean(tmp_path, capsys, tiny_file):
    sol = tmp_path / "oracle.json"
    code, out, _ = run(capsys, "oracle", "--in", tiny_file, "--out", sol)
    assert code == 0 and json.loads(out)["n_feasible"] >= 1
    code, out, _ = run(capsys, "evaluate", "--solution", sol, "--in", tiny_file)
    assert code == 0 and json.loads(out)["violations"] == []


@pytest.mark.parametrize("method", ["milp", "simplified", "rrf", "cmsa", "vnd", "pipeline"])
def test_solve_methods(tmp_path, capsys, tiny_file, method):
    out_file, trace = tmp_path / "sol.json", tmp_path / "trace.csv"
    code, _, err = run(capsys, "solve", "--method", method, "--time-limit", 30, "--in", tiny_file,
                       "--out", out_file, "--trace", trace)
    assert code == 0, err
    doc = json.loads(out_file.read_text())
    assert doc["violations"] == [] and doc["run"]["method"] == method
    if method in ("vnd", "pipeline"):
        assert trace.read_text().startswith("iteration,neighborhood")


def test_solve_is_deterministic(tmp_path, capsys, tiny_file):
    docs = []
    for n in range(2):
        path = tmp_path / f"s{n}.json"
        run(capsys, "solve", "--method", "milp", "--seed", 1, "--in", tiny_file, "--out", path)
        doc = json.loads(path.read_text())
        doc["run"].pop("runtime")
        docs.append(doc)
    assert docs[0] == docs[1]


def test_report_with_identical_costs(tmp_path, capsys, tiny_file):
    runs = tmp_path / "runs"
    for seed in (0, 1):
        run(capsys, "solve", "--method", "milp", "--seed", seed, "--in", tiny_file, "--out", runs / f"r{seed}.json")
    bks = tmp_path / "bks.csv"
    code, text, _ = run(capsys, "report", "--runs", runs, "--bks", bks)
    assert code == 0 and "N_F" in text
    stats = list(csv.DictReader((runs / "stats.csv").open()))
    assert float(stats[0]["mean_gap"]) == pytest.approx(0.0, abs=1e-12)
    assert stats[0]["N_F"] == "0"
    assert bks.read_text().splitlines()[0] == "instance,cost"


def test_report_separates_restricted_runs(tmp_path, capsys, tiny_file):
    reduced = tmp_path / "reduced.json"
    code, _, _ = run(capsys, "preprocess", "--max-cycle-len", 7, "--in", tiny_file, "--out", reduced,
                     "--report", tmp_path / "red.csv")
    assert code == 0
    runs = tmp_path / "runs"
    run(capsys, "solve", "--method", "milp", "--in", tiny_file, "--out", runs / "a.json")
    run(capsys, "solve", "--method", "milp", "--in", reduced, "--out", runs / "b.json")
    if not json.loads(reduced.read_text()).get("meta", {}).get("restricted"):
        pytest.skip("heuristic reduction changed nothing")
    run(capsys, "report", "--runs", runs)
    flags = sorted(r["restricted"] for r in csv.DictReader((runs / "stats.csv").open()))
    assert flags == ["no", "yes"]


def test_pareto_and_derive(tmp_path, capsys, tiny_file):
    front = tmp_path / "front.csv"
    code, _, _ = run(capsys, "pareto", "--nmax", 2, "--in", tiny_file, "--out", front)
    assert code == 0 and front.read_text().startswith("n_modifications,financial_cost")
    code, _, _ = run(capsys, "derive", "--ext", 1, "--in", tiny_file, "--out", tmp_path / "ext.json")
    assert code == 0
    code, _, _ = run(capsys, "derive", "--truncate", "1,15", "--in", tiny_file, "--out", tmp_path / "tr.json")
    assert code == 0


def test_errors_are_machine_readable(tmp_path, capsys):
    code, _, err = run(capsys, "solve", "--in", tmp_path / "missing.json")
    assert code == 2 and json.loads(err)["kind"] == "io"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    code, _, err = run(capsys, "evaluate", "--solution", bad, "--in", bad)
    assert code == 2 and "line" in json.loads(err)["error"]
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--method", "nope", "--in", "x"])
    assert exc.value.code == 2
    assert json.loads(capsys.readouterr().err)["kind"] == "usage"


def test_infeasible_instance_exit_code(tmp_path, capsys):
    import sys
    sys.path.insert(0, str(__import__("pathlib").Path(__file__).parent))
    from batches import hand_instance
    from refuelplan.instance_io import write_instance

    path = tmp_path / "inf.json"
    path.write_text(write_instance(hand_instance(earliest=1, latest=1, stock_max_before_outage=0.0)))
    code, _, err = run(capsys, "preprocess", "--exact", "--in", path, "--out", tmp_path / "o.json")
    assert code == 1 and json.loads(err)["kind"] == "infeasible"
    code, _, err = run(capsys, "solve", "--method", "milp", "--in", path)
    assert code == 1


@pytest.mark.slow
def test_pipeline_on_medium_instance(tmp_path, capsys):
    inst = tmp_path / "medium.json"
    run(capsys, "generate", "--seed", 11, "--t2", 10, "--cycles", 3, "--weeks", 60, "--out", inst)
    out = tmp_path / "sol.json"
    code, _, err = run(capsys, "solve", "--method", "pipeline", "--time-limit", 120, "--in", inst, "--out", out)
    assert code == 0, err
    code, _, _ = run(capsys, "evaluate", "--solution", out, "--in", inst)
    assert code == 0
