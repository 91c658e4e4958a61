import csv
import io
import json
import math

import pytest

from gwlagrange.cli import main, parse_grid

from oracles import COEFFS_EXP_6


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def table(text):
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


class TestGrid:
    def test_range_excludes_stop(self):
        assert parse_grid("0.25:1.0:0.25") == [0.25, 0.5, 0.75]

    def test_list_and_single(self):
        assert parse_grid("1,2.5") == [1.0, 2.5]
        assert parse_grid("3") == [3.0]

    @pytest.mark.parametrize("bad", ["1:2", "1:2:0", "5:1:1", "a,b"])
    def test_bad(self, bad, capsys):
        code, _, err = run(capsys, "extinction", "--preset", "exp", "--t", bad)
        assert code == 2 and err.count("\n") == 1


def test_coeffs_example(capsys):
    code, out, _ = run(capsys, "coeffs", "--preset", "exp", "-N", "6")
    rows = table(out)
    assert code == 0 and len(rows) == 6
    for (n, a), row in zip(COEFFS_EXP_6, rows):
        assert int(row["n"]) == n and float(row["A_n"]) == pytest.approx(a, abs=5e-5)


def test_coeffs_exact(capsys):
    _, out, _ = run(capsys, "coeffs", "--preset", "exp", "-N", "5", "--exact")
    assert [r["A_n"] for r in table(out)] == ["1", "1", "3/2", "8/3", "125/24"]


def test_extinction_example(capsys):
    code, out, _ = run(capsys, "extinction", "--preset", "exp", "--t", "0.25:4.0:0.25")
    rows = table(out)
    assert code == 0 and len(rows) == 15
    qs = [float(r["q"]) for r in rows]
    ts = [float(r["t"]) for r in rows]
    assert all(q == 1.0 for t, q in zip(ts, qs) if t <= 1)
    tail = [q for t, q in zip(ts, qs) if t > 1]
    assert all(a > b for a, b in zip(tail, tail[1:]))
    for r in rows:
        if r["q_fixed_point"]:
            assert float(r["q"]) == pytest.approx(float(r["q_fixed_point"]), abs=1e-10)


def test_apex_point_is_nudged(capsys):
    _, out, _ = run(capsys, "extinction", "--preset", "exp", "--t", "1.0")
    row = table(out)[0]
    assert row["nudged"] == "true" and float(row["t"]) < 1.0


def test_enumerate_example(capsys):
    code, out, _ = run(capsys, "enumerate", "-n", "3", "--preset", "planetree", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and len(doc["rows"]) == 2 and doc["summary"]["weight_sum"] == "2"


def test_json_report_shape(capsys):
    _, out, _ = run(capsys, "apex", "--preset", "exp", "--format", "json")
    doc = json.loads(out)
    assert doc["schema"] == "v1" and doc["version"]
    assert doc["config"]["spec"]["kind"] == "preset-exp"
    row = dict(zip(doc["columns"], doc["rows"][0]))
    assert row["tau"] == pytest.approx(1.0) and row["rho"] == pytest.approx(math.exp(-1))


def test_simulate_report_fields(capsys):
    _, out, _ = run(capsys, "simulate", "--preset", "exp", "--t", "2", "--trees", "2000",
                    "--budget", "500", "--seed", "4")
    row = table(out)[0]
    for key in ("q_mc", "ci3_lo", "ci3_hi", "q_reference", "censoring_bound"):
        assert row[key] != ""
    assert float(row["ci3_lo"]) <= float(row["q_reference"]) <= float(row["ci3_hi"])


def test_progeny_and_asymptotics(capsys):
    _, out, _ = run(capsys, "progeny", "--preset", "exp", "--t", "1", "-N", "3")
    assert [r["n"] for r in table(out)] == ["1", "2", "3"]
    _, out, _ = run(capsys, "asymptotics", "--preset", "exp", "-N", "300")
    assert float(table(out)[-1]["ratio"]) == pytest.approx(1.0, abs=0.01)


def test_conditional(capsys):
    _, out, _ = run(capsys, "conditional", "--preset", "planetree", "-n", "3",
                    "--pred", "root_outdegree=1", "--format", "json")
    assert json.loads(out)["summary"]["exact"] == "1/2"


def test_coeff_file_and_config(tmp_path, capsys):
    (tmp_path / "psi.txt").write_text("1 2 1\n")
    (tmp_path / "run.cfg").write_text(f"# binomial square\ncoeffs = {tmp_path / 'psi.txt'}\nN = 4\n")
    _, out, _ = run(capsys, "coeffs", "--config", str(tmp_path / "run.cfg"), "--exact")
    assert [r["A_n"] for r in table(out)] == ["1", "2", "5", "14"]
    spec = {"kind": "explicit-coeffs", "coeffs": ["1", "1", "1"], "radius": 3}
    (tmp_path / "psi.json").write_text(json.dumps(spec))
    code, out, _ = run(capsys, "apex", "--coeffs", str(tmp_path / "psi.json"))
    assert code == 0 and table(out)[0]["class"] == "K_star"


def test_out_file(tmp_path, capsys):
    target = tmp_path / "a.csv"
    code, out, _ = run(capsys, "coeffs", "--preset", "planetree", "-N", "3", "--out", str(target))
    assert code == 0 and out == "" and target.read_text().startswith("# gwlagrange")


class TestExitCodes:
    def test_validation(self, capsys):
        assert run(capsys, "extinction", "--preset", "planetree", "--t", "1.5")[0] == 2
        assert run(capsys, "coeffs")[0] == 2
        assert run(capsys, "coeffs", "--preset", "exp", "-N", "0")[0] == 2
        assert run(capsys, "enumerate", "--preset", "exp", "-n", "13")[0] == 2
        assert run(capsys, "nope")[0] == 2

    def test_numerical(self, tmp_path, capsys):
        (tmp_path / "lin.txt").write_text("1 1")
        code, _, err = run(capsys, "asymptotics", "--coeffs", str(tmp_path / "lin.txt"))
        assert code == 1 and "no apex" in err


def test_byte_identical_reruns(tmp_path):
    args = ["simulate", "--preset", "exp", "--t", "1.5,2", "--trees", "3000", "--seed", "42",
            "--budget", "800", "--format", "json"]
    outs = []
    for workers in ("1", "4", "1"):
        path = tmp_path / f"r{len(outs)}.json"
        assert main(args + ["--workers", workers, "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]
