import json
import subprocess
import sys

import pytest

from permlab.cli import SCHEMA, build_parser, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    doc = json.loads(out)
    assert doc["schema"] == SCHEMA
    return doc


def test_count_example(capsys):
    doc = run_json(capsys, "count", "--pattern", "2,1", "--in", "3,1,2")
    assert (doc["occ"], doc["mon"], doc["hom"]) == (2, 2, 2)


def test_compress_example(capsys):
    doc = run_json(capsys, "compress", "--tau", "4,5,1,2,3")
    found = {json.dumps(p["blocks"]): p["quotient"] for p in doc["partitions"]}
    assert found["[[1, 2], [3], [4, 5]]"] == "3,1,2"


def test_stats_example(capsys):
    doc = run_json(capsys, "stats", "--n", "1", "--samples", "10", "--seed", "7")
    assert doc["fraction_indecomposable"] == 1.0


def test_density_and_vector(capsys):
    assert run_json(capsys, "density", "--pattern", "2,1", "--in", "3,1,2")["value"] == "2/3"
    doc = run_json(capsys, "vector", "--q", "3", "--permuton", "uniform", "--transform", "occ->mon")
    assert doc["values"] == ["1/2", "1/6", "1/6", "1/6"]
    assert doc["transformed"]["kind"] == "monomorphism"


def test_permuton_inputs(capsys, tmp_path):
    phi_doc = {"type": "stepup", "sigma": "2,1", "weights": ["1/2", "1/2"]}
    path = tmp_path / "phi.json"
    path.write_text(json.dumps(phi_doc))
    inline = run_json(capsys, "mc-density", "--tau", "2,1", "--permuton", json.dumps(phi_doc), "--samples", "20000")
    from_file = run_json(capsys, "mc-density", "--tau", "2,1", "--permuton", f"@{path}", "--samples", "20000")
    assert inline == from_file
    assert inline["exact"] == "1/2"
    doc = run_json(capsys, "stepup-density", "--tau", "2,1", "--sigma", "2,1", "--weights", "1/2,1/2")
    assert doc["value"] == "1/2"
    doc = run_json(capsys, "dsum-density", "--tau", "2,1", "--permuton",
                   json.dumps({"type": "dsum", "parts": [{"weight": "1/2", "permuton": phi_doc}]}))
    assert doc["value"] == "1/8"


def test_search_commands(capsys):
    assert run_json(capsys, "matrix", "--q", "3")["unit_upper_triangular"] is True
    span = run_json(capsys, "span", "--q", "3")
    assert span["det"] != "0"
    wit = run_json(capsys, "certify", "--q", "2")
    assert wit["det_jacobian"] != "0"
    jac = run_json(capsys, "jacobian", "--q", "2", "--x", "1/4")
    assert jac["finite_difference_max_rel_error"] < 1e-5
    pair = run_json(capsys, "borsuk", "--targets", "2,1", "--n", "4")
    assert pair["converged"] is True
    enum = run_json(capsys, "enumerate", "--order", "3")
    assert enum["patterns"] == ["2,1", "2,3,1", "3,1,2", "3,2,1"]
    sample = run_json(capsys, "sample", "--permuton", "reverse", "--n", "4")
    assert sample["permutations"] == ["4,3,2,1"]


def test_fbullet_tester_forcing(capsys, tmp_path):
    doc = run_json(capsys, "fbullet", "--in", "3,1,2")
    path = tmp_path / "param.json"
    path.write_text(json.dumps(doc["param"]))
    again = run_json(capsys, "fbullet", "--param", str(path), "--in", "3,1,2")
    assert again["value"] == doc["value"]
    whole = tmp_path / "whole.json"
    whole.write_text(json.dumps(doc))
    assert run_json(capsys, "fbullet", "--param", str(whole), "--in", "3,1,2")["value"] == doc["value"]
    tester = run_json(capsys, "tester", "--param", str(path), "--in", "3,1,4,2,5", "--n0", "5", "--samples", "3")
    assert tester["error_rate"] == 0
    code, out, err = run(capsys, "forcing", "--param", str(path), "--orders", "30,60", "--reps", "2")
    assert code in (0, 2)
    assert json.loads(out)["schema"] == SCHEMA
    assert "forcing experiment" in err


@pytest.mark.parametrize("argv, fragment", [
    (["count", "--pattern", "2,x", "--in", "3,1,2"], "--pattern"),
    (["count", "--pattern", "2,1"], "--in"),
    (["bogus"], "invalid choice"),
    (["stepup-density", "--tau", "2,1", "--sigma", "2,1", "--weights", "3/4,1/2"], "sum"),
    (["sample", "--permuton", '{"type":"stepup","sigma":"2,1","weights":["1/2"]}', "--n", "3"], "$.weights"),
    (["enumerate", "--order", "9"], "cap"),
    (["vector", "--q", "3"], "exactly one"),
])
def test_usage_errors_exit_one(capsys, argv, fragment):
    code, out, err = run(capsys, *argv)
    assert code == 1
    assert out == ""
    assert fragment in err


def test_search_failure_exits_two(capsys):
    code, out, err = run(capsys, "span", "--q", "3", "--max-attempts", "0")
    assert code == 2
    assert json.loads(out)["error"]


@pytest.mark.parametrize("fmt", ["tsv", "human"])
def test_other_formats(capsys, fmt):
    code, out, _ = run(capsys, "compress", "--tau", "4,5,1,2,3", "--format", fmt)
    assert code == 0
    assert "3,1,2" in out and "permuton-lab/1" in out


def test_every_subcommand_has_help():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    assert set(sub.choices) == {
        "count", "density", "enumerate", "compress", "sample", "stepup-density", "dsum-density",
        "mc-density", "matrix", "vector", "span", "jacobian", "certify", "borsuk", "fbullet",
        "tester", "forcing", "stats"}
    for name, p in sub.choices.items():
        assert p.description and len(p.format_help()) > 100, name


def test_byte_identical_output_and_thread_independence():
    cmd = [sys.executable, "-m", "permlab.cli", "stats", "--n", "20", "--samples", "30000"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    c = subprocess.run(cmd + ["--threads", "3"], capture_output=True, check=True).stdout
    assert a == b == c
