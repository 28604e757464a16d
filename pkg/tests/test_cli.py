import csv
import json

import numpy as np
import pytest

from conftest import t4_certificate, t4_points
from tnlab import cli
from tnlab.errors import ConsistencyError


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out.strip() else None), out.err


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_solve_system_appendix(capsys, tmp_path):
    pq = tmp_path / "pq.csv"
    code, rep, _ = run(["solve-system", "--model", "appendix", "--k", "1e8", "--l1", "-0.5", "--l2", "0.1",
                        "--emit-pq", str(pq)], capsys)
    assert code == 0
    assert rep["results"]["count"] >= 6
    assert rep["results"]["structure"]["passed"]
    rows = [tuple(map(float, r)) for r in list(csv.reader(pq.open()))[1:]]
    v = np.array([r[0] for r in rows])
    for k in np.argsort(np.abs(v + 1.0))[:2]:
        assert rows[k][1] < rows[k][2]


def test_solve_system_degenerate(capsys):
    code, rep, _ = run(["solve-system", "--model", "exp", "--l1", "0", "--l2", "1"], capsys)
    assert code == 0
    assert rep["results"]["route"] == "degenerate"
    assert rep["results"]["count"] <= 4


def test_solve_system_no_solutions_is_success(capsys):
    code, rep, _ = run(["solve-system", "--model", "exp", "--l1", "0.5", "--l2", "0.5", "--bracket", "2,3"], capsys)
    assert code == 0 and rep["results"]["solutions"] == []


@pytest.mark.parametrize("text", ["[system]\nlambda1 = oops\nlambda2 = 1\n", "no section header\n",
                                  "[model]\nkind = table\n[system]\nlambda1 = 1\nlambda2 = 1\n"])
def test_malformed_config_exit_2(capsys, tmp_path, text):
    code, _, err = run(["solve-system", "--config", write(tmp_path, "bad.cfg", text)], capsys)
    assert code == 2 and "error" in err


def test_table_model_config(capsys, tmp_path):
    t = np.r_[np.linspace(-6, 0, 61), np.linspace(0, 2, 21)[1:]]
    cfg = ("[model]\nkind = table\n"
           f"t = {', '.join(map(str, t.tolist()))}\na = {', '.join(map(str, np.expm1(t).tolist()))}\n"
           "[system]\nlambda1 = 0.5\nlambda2 = -0.3\nbrackets = -5.5,1.9\ngrid = 20000\n")
    code, rep, _ = run(["solve-system", "--config", write(tmp_path, "t.cfg", cfg)], capsys)
    assert code == 0 and rep["results"]["count"] >= 1


def test_check_ka_from_solver_config(capsys, tmp_path):
    cfg = ("[model]\nkind = appendix\nk = 1e8\n[system]\nlambda1 = -0.5\nlambda2 = 0.1\n"
           "brackets = -40,1\n[points]\nsource = from-solver\n")
    md = tmp_path / "table.md"
    code, rep, _ = run(["check-ka", "--config", write(tmp_path, "a.cfg", cfg), "--report-md", str(md)], capsys)
    assert code == 0
    res = rep["results"]
    assert res["rank"]["rank"] == 2
    assert res["verdict"] == "no T_6 ordering"
    assert len(res["sign_table"]["constant_sign_rows"]) >= 1
    assert md.read_text().startswith("| D |")


def test_check_ka_chained_file(capsys, tmp_path):
    out = tmp_path / "sol.json"
    assert cli.main(["solve-system", "--model", "appendix", "--l1", "-0.5", "--l2", "0.1", "-o", str(out)]) == 0
    code, rep, _ = run(["check-ka", "--model", "appendix", "--points-file", str(out)], capsys)
    assert code == 0 and rep["results"]["N"] == 6


def test_check_ka_two_points(capsys):
    code, rep, _ = run(["check-ka", "--model", "exp", "--points", "0,0; 1,0.5"], capsys)
    assert code == 2
    assert rep["results"]["rank"]["rank"] == 2


def test_check_ka_dedup(capsys, caplog):
    code, rep, _ = run(["check-ka", "--model", "exp", "--points", "0,0; 1,0.5; 0,0; -1,1; 2,-1"], capsys)
    assert code == 0
    assert "duplicate" in caplog.text
    assert rep["results"]["N"] == 4 and rep["results"]["dropped_duplicates"] == [2]


def test_consistency_failure_exit_3(capsys, monkeypatch):
    def boom(*a, **k):
        raise ConsistencyError("identity residual too large")
    monkeypatch.setattr(cli, "analyse_config", boom)
    code, _, err = run(["check-ka", "--model", "exp", "--points", "0,0; 1,0.5; -1,1; 2,-1"], capsys)
    assert code == 3 and "consistency" in err


def t4_json(tmp_path, with_cert=True):
    data = {"matrices": t4_points().tolist(), "labels": ["A", "B", "C", "D"]}
    if with_cert:
        data["certificate"] = t4_certificate().as_dict()
    return write(tmp_path, "t4.json", json.dumps(data))


def test_tn_actions(capsys, tmp_path):
    path = t4_json(tmp_path)
    code, rep, _ = run(["tn", "verify", path], capsys)
    assert code == 0 and rep["results"]["passed"]
    code, rep, _ = run(["tn", "filter", path, "--rows", "12"], capsys)
    assert [p["summary"] for p in rep["results"]["per_index"]] == ["mixed"] * 4
    code, rep, _ = run(["tn", "search", path, "--seed", "1"], capsys)
    assert rep["results"]["found"] and rep["results"]["ordering_labels"][0] == "A"


def test_tn_errors(capsys, tmp_path):
    assert run(["tn", "verify", t4_json(tmp_path, with_cert=False)], capsys)[0] == 2
    assert run(["tn", "filter", write(tmp_path, "m.json", '{"matrices": [[1, 2]]}')], capsys)[0] == 2
    assert run(["tn", "filter", write(tmp_path, "n.json", "{not json")], capsys)[0] == 2
    assert run(["tn", "filter", t4_json(tmp_path), "--rows", "31"], capsys)[0] == 2


def test_tn_search_appendix_exhaustive(capsys, tmp_path, appendix_config):
    path = write(tmp_path, "app.json", json.dumps({"matrices": appendix_config.points.tolist()}))
    code, rep, _ = run(["tn", "search", path, "--exhaustive"], capsys)
    assert code == 0
    assert not rep["results"]["found"] and rep["results"]["orderings_tried"] == 120


def test_results_payload_deterministic(capsys, tmp_path):
    argv = ["appendix", "--no-search", "--seed", "4"]
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert json.dumps(a["results"], sort_keys=True) == json.dumps(b["results"], sort_keys=True)
    assert a["config_hash"] == b["config_hash"] and a["seed"] == 4
    assert "timing" not in a["results"]


def test_bad_arguments_exit_2(capsys):
    assert cli.main(["solve-system", "--model", "nope"]) == 2
    assert cli.main(["solve-system", "--model", "exp"]) == 2
    assert cli.main([]) == 2


def test_rank_one_is_consistency_failure(capsys, monkeypatch):
    # distinct K_a points never give rank one, so the report is forced
    from tnlab.linalg import RankReport
    monkeypatch.setattr(cli, "rank_condition", lambda *a, **k: RankReport(1, np.array([1.0, 0.0]), 1e-8))
    code, rep, err = run(["check-ka", "--model", "exp", "--points", "0,0; 1,0.5; -1,1; 2,-1"], capsys)
    assert code == 3 and "consistency" in err
    assert rep["results"]["rank"]["rank"] == 1
