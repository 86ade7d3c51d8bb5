import csv
import json

import numpy as np
import pytest

from dfmkit import claims
from dfmkit.bloch import PAPER_16, build_bilinear
from dfmkit.cli import main
from dfmkit.presets import two_qubit_dephasing
from dfmkit.reachability import CONSTANT, STOCHASTIC, reachability_distribution

PRESET = ["--preset", "two-qubit-dephasing"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _json(out):
    doc = json.loads(out)
    doc.pop("elapsed_s")
    return doc


def test_dfm_dim_table(capsys):
    code, out, _ = run(capsys, "dfm-dim", "--n", "4")
    assert code == 0
    dims = [int(line.split()[-1]) for line in out.splitlines()[3:-1]]
    assert dims == [14, 12, 8, 13, 11, 11, 9, 12, 10, 8, 6, 0]


@pytest.mark.parametrize("args, expected", [(["--k", "2", "--kbar", "2"], 9), (["--k", "4"], 0),
                                            (["--k", "1,1", "--kbar", "1", "--kbar", "1"], 13)])
def test_dfm_dim_single(capsys, args, expected):
    code, out, _ = run(capsys, "dfm-dim", "--n", "4", *args, "--json")
    assert code == 0 and _json(out)["results"]["dimension"] == expected


def test_dfm_dim_reports_both_counts_when_they_differ(capsys):
    code, out, _ = run(capsys, "dfm-dim", "--n", "4", "--k", "1", "--kbar", "3")
    assert code == 0 and "\n8\n" in out and "gives 6" in out


@pytest.mark.parametrize("args", [["--k", "1", "--kbar", "2"], ["--k", "0,4"], ["--kbar", "2"], ["--k", "x"]])
def test_dfm_dim_input_errors(capsys, args):
    code, _, _ = run(capsys, "dfm-dim", "--n", "4", *args)
    assert code == 2


def test_reach_prints_library_dimension(capsys):
    bm = build_bilinear(two_qubit_dephasing(), PAPER_16)
    for variant, extra in ((STOCHASTIC, []), (CONSTANT, ["--equal-rates"])):
        expected = reachability_distribution(bm, variant, rates=(1, 1)).dimension
        code, out, _ = run(capsys, "reach", *PRESET, "--variant", variant, *extra)
        assert code == 0 and f"dim V = {expected}\n" in out


def test_reach_zero_dissipation(tmp_path, capsys):
    path = tmp_path / "closed.json"
    path.write_text(json.dumps({"n": 2, "H0": "Z", "controls": [{"label": "x", "op": "X"}]}))
    code, out, _ = run(capsys, "reach", "--model", str(path))
    assert code == 0 and "dim V = 0" in out


def test_reach_constant_needs_rates_for_stochastic_file(tmp_path, capsys):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"n": 2, "jumps": [{"label": "z", "op": "Z", "rate": "stochastic"}]}))
    code, _, err = run(capsys, "reach", "--model", str(path), "--variant", "constant")
    assert code == 2 and "--rates" in err
    code, out, _ = run(capsys, "reach", "--model", str(path), "--variant", "constant", "--rates", "2")
    assert code == 0


def test_simulate_fixed_point_and_csv(tmp_path, capsys):
    out_csv = tmp_path / "traj.csv"
    code, out, _ = run(capsys, "simulate", *PRESET, "--t-final", "1", "--steps", "20",
                       "--keep", "0,1", "--output", str(out_csv))
    assert code == 0 and "verdict: DF-compatible" in out
    rows = list(csv.reader(out_csv.open()))
    assert rows[0] == ["t", "lambda_1", "lambda_2", "lambda_3", "lambda_4", "dev_block_0", "dev_block_1"]
    assert len(rows) == 22


def test_simulate_closed_model_preserves_all(tmp_path, capsys):
    path = tmp_path / "closed.json"
    path.write_text(json.dumps({"n": 2, "H0": "X + 0.3*Z", "initial_state": {"diag": [0.8, 0.2]}}))
    code, out, _ = run(capsys, "simulate", "--model", str(path), "--t-final", "1", "--keep", "0,1", "--json")
    doc = _json(out)
    assert code == 0 and doc["results"]["df_compatible"]
    assert float(doc["results"]["max_deviation"]) <= 1e-9


def test_simulate_dephasing_from_plus_is_flagged(capsys):
    code, out, _ = run(capsys, "simulate", "--preset", "single-qubit-dephasing", "--t-final", "0.5", "--json")
    assert code == 0 and not _json(out)["results"]["df_compatible"]


def test_simulate_bad_token(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"n": 4, "H0": "QX + XI"}')
    code, _, err = run(capsys, "simulate", "--model", str(path), "--t-final", "1")
    assert code == 2 and "'QX'" in err


def test_missing_model_file(capsys):
    code, _, err = run(capsys, "reach", "--model", "/nonexistent/model.json")
    assert code == 2 and "error" in err


def test_json_reports_are_deterministic(capsys):
    _, first, _ = run(capsys, "reach", *PRESET, "--json")
    _, second, _ = run(capsys, "reach", *PRESET, "--json")
    assert _json(first) == _json(second)
    assert len(_json(first)["config_digest"]) == 16


def test_bloch_build_writes_matrices(tmp_path, capsys):
    path = tmp_path / "bm.json"
    code, out, _ = run(capsys, "bloch-build", *PRESET, "--mode", "paper_16", "--output", str(path))
    assert code == 0 and "N = 16" in out
    doc = json.loads(path.read_text())
    assert len(doc["coordinates"]) == 16
    g = np.array(doc["matrices"]["G[Z1]"])
    assert np.count_nonzero(g - np.diag(np.diag(g))) == 0


def test_verify_json_and_exit_code(capsys):
    code, out, _ = run(capsys, "verify", "two-qubit-dephasing", "--json")
    listed = _json(out)["results"]["claims"]
    names = [c["name"] for c in listed]
    assert names == [c.name for c in claims.run_claims()]
    assert code == (0 if all(c["passed"] for c in listed) else 1)


def test_verify_unknown_preset(capsys):
    code, _, err = run(capsys, "verify", "unknown")
    assert code == 2 and "unknown preset" in err


def test_no_command_is_input_error(capsys):
    assert run(capsys)[0] == 2
