import csv
import io
import json
import subprocess
import sys

import pytest

from hoa.cli import main
from hoa.dsl import builtin, render_system


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def six_file(tmp_path):
    path = tmp_path / "six.hdsl"
    path.write_text(render_system(builtin("six_wave")))
    return path


class TestDerive:
    def test_six_wave_contains_first_order_term(self):
        code, out, _ = run("derive", "--system", "six_wave", "--order", "2")
        assert code == 0
        assert "- 2i g t A†B³C" in out

    def test_four_wave_first_order_has_two_terms(self):
        code, out, _ = run("derive", "--system", "four_wave", "--order", "1", "--format", "json")
        assert code == 0
        assert len(json.loads(out)["series"]) == 2

    def test_file_matches_builtin(self, six_file):
        _, a, _ = run("derive", "--system", "six_wave", "--order", "2")
        _, b, _ = run("derive", "--system", f"@{six_file}", "--order", "2")
        assert a == b
        _, a, _ = run("derive", "--system", "six_wave", "--format", "json")
        _, b, _ = run("derive", "--system", f"@{six_file}", "--format", "json")
        assert a == b

    def test_latex(self):
        code, out, _ = run("derive", "--system", "six_wave", "--latex")
        assert code == 0
        assert out.startswith("A(t) = A-2igtA^{\\dagger}B^{3}C+g^{2}t^{2}\\left[")

    def test_other_operator(self):
        code, out, _ = run("derive", "--system", "shg", "--operator", "A2", "--order", "1")
        assert code == 0 and out.startswith("A2(t) = A2")

    def test_missing_file(self, tmp_path):
        code, _, err = run("derive", "--system", f"@{tmp_path / 'nope.hdsl'}")
        assert code == 1 and "cannot read" in err

    def test_unknown_system(self):
        assert run("derive", "--system", "seven_wave")[0] == 1

    def test_bad_order(self):
        assert run("derive", "--system", "shg", "--order", "0")[0] == 1

    def test_parse_error_in_file(self, tmp_path):
        path = tmp_path / "bad.hdsl"
        path.write_text("mode A coherent(alpha); H = g*A*A;")
        code, _, err = run("derive", "--system", str(path))
        assert code == 1 and "parse error" in err

    def test_term_ceiling(self, monkeypatch):
        monkeypatch.setenv("HOA_TERM_CEILING", "5")
        assert run("derive", "--system", "six_wave", "--order", "3")[0] == 3


class TestHoa:
    def test_symbolic_block(self):
        code, out, _ = run("hoa", "--system", "six_wave", "--l", "2")
        assert code == 0
        assert "d(2) = -36 g² t² |α|⁶" in out
        assert "d(1) = -12 g² t² |α|⁴" in out

    def test_zero_coupling(self):
        code, out, _ = run("hoa", "--system", "shg", "--l", "1", "--g", "0", "--t", "1", "--alpha", "1", "--format", "csv")
        assert code == 0
        row = next(csv.DictReader(io.StringIO(out)))
        assert float(row["d_l"]) == 0.0

    def test_four_wave_value(self):
        code, out, _ = run(
            "hoa", "--system", "four_wave", "--l", "2", "--g", "1e-3", "--t", "1", "--alpha", "1", "--format", "csv"
        )
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert float(rows[1]["d_l"]) == pytest.approx(-6e-6, rel=1e-12)
        assert float(rows[1]["A_l"]) < 0

    def test_summary_line(self):
        _, out, _ = run("hoa", "--system", "six_wave", "--g", "1e-3", "--t", "1", "--alpha-re", "1", "2")
        assert "summary: d(l) < 0 at 4 of 4 grid rows" in out

    def test_json(self):
        _, out, _ = run("hoa", "--system", "shg", "--format", "json")
        data = json.loads(out)
        assert data[0]["d_text"]["d(2)"] == "-6 g² t² |α|⁶"


class TestVerify:
    def test_zero_coupling_passes(self):
        code, out, _ = run("verify", "--system", "shg", "--g", "0", "--t", "1", "--alpha-re", "1")
        assert code == 0
        assert "overall: PASS" in out

    def test_four_wave_passes_with_slope(self):
        code, out, _ = run(
            "verify", "--system", "four_wave", "--l", "1", "--g", "5e-4", "1e-3", "2e-3", "--t", "1", "--alpha-re", "1"
        )
        assert code == 0, out
        assert "convergence slope" in out

    def test_tight_tolerance_fails(self):
        code, out, _ = run(
            "verify", "--system", "shg", "--l", "1", "--g", "1e-2", "--t", "1", "--alpha-re", "1", "--tolerance", "1e-12"
        )
        assert code == 2 and "overall: FAIL" in out

    def test_csv_provenance(self):
        code, out, _ = run(
            "verify", "--system", "shg", "--l", "1", "--g", "1e-3", "--t", "1", "--alpha-re", "1", "--format", "csv",
            "--cutoffs", "18,8",
        )
        row = next(csv.DictReader(io.StringIO(out)))
        assert (row["cutoff_A"], row["cutoff_B"], row["cutoff_C"]) == ("18", "8", "")
        assert float(row["norm_drift"]) < 1e-9

    def test_empty_grid(self):
        assert run("verify", "--system", "shg")[0] == 1

    def test_dimension_ceiling(self):
        code, _, err = run("verify", "--system", "six_wave", "--g", "1e-3", "--t", "1", "--alpha-re", "1",
                           "--cutoffs", "200,200,200")
        assert code == 3 and "resource limit" in err

    def test_tail_loss_is_resource_error(self):
        code, _, _ = run("verify", "--system", "shg", "--g", "1e-3", "--t", "1", "--alpha-re", "3", "--cutoffs", "5,5")
        assert code == 3


class TestSweep:
    def test_monotone_in_photon_number(self):
        alphas = [str(n**0.5) for n in range(1, 11)]
        code, out, _ = run("sweep", "--system", "six_wave", "--l", "2", "--g", "1e-3", "--t", "1", "--alpha-re", *alphas)
        assert code == 0
        rows = [r for r in csv.DictReader(io.StringIO(out)) if r["l"] == "2"]
        depth = [abs(float(r["d_l"])) for r in rows]
        assert len(depth) == 10
        assert all(b > a for a, b in zip(depth, depth[1:]))

    def test_ratio_six_to_four(self):
        args = ["--l", "2", "--g", "1e-3", "2e-3", "--t", "1", "--alpha-re", "1", "1.5"]
        _, six, _ = run("sweep", "--system", "six_wave", *args)
        _, four, _ = run("sweep", "--system", "four_wave", *args)
        for a, b in zip(csv.DictReader(io.StringIO(six)), csv.DictReader(io.StringIO(four))):
            assert (a["l"], a["g"], a["alpha_re"]) == (b["l"], b["g"], b["alpha_re"])
            assert float(a["d_l"]) / float(b["d_l"]) == pytest.approx(6, rel=1e-12)

    def test_empty_grid(self):
        code, _, err = run("sweep", "--system", "six_wave")
        assert code == 1 and "empty" in err

    def test_grid_file(self, tmp_path):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"g": [1e-3], "t": [1.0], "alpha_re": [1.0]}))
        code, out, _ = run("sweep", "--system", "shg", "--grid-file", str(grid))
        assert code == 0 and len(out.strip().splitlines()) == 3

    def test_empty_grid_file(self, tmp_path):
        grid = tmp_path / "grid.json"
        grid.write_text(json.dumps({"g": [], "t": [1.0], "alpha_re": [1.0]}))
        assert run("sweep", "--system", "shg", "--grid-file", str(grid))[0] == 1

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"system": "four_wave", "l_max": 1, "g": [1e-3], "t": [1.0], "alpha_re": [1.0]}))
        code, out, _ = run("sweep", "--config", str(cfg))
        assert code == 0
        assert next(csv.DictReader(io.StringIO(out)))["system"] == "four_wave"

    def test_deterministic_with_workers(self):
        args = ["sweep", "--system", "six_wave", "--system", "shg", "--g", "1e-3", "2e-3", "--t", "1", "2",
                "--alpha-re", "0.5", "1", "--alpha-im", "0", "0.3"]
        first = run(*args, "--workers", "1")[1]
        assert first == run(*args, "--workers", "4")[1]
        assert run(*args, "--format", "json")[1] == run(*args, "--format", "json")[1]

    def test_phase_invariance(self):
        _, out, _ = run("sweep", "--system", "six_wave", "--l", "2", "--g", "1e-3", "--t", "1",
                        "--alpha-re", "1", "0.6", "0", "--alpha-im", "0", "0.8", "1")
        rows = list(csv.DictReader(io.StringIO(out)))
        unit = [float(r["d_l"]) for r in rows
                if r["l"] == "2" and abs(complex(float(r["alpha_re"]), float(r["alpha_im"]))) == pytest.approx(1)]
        assert len(unit) == 3
        assert max(unit) - min(unit) <= 1e-12 * abs(unit[0])


class TestParseCheck:
    def test_pretty(self, six_file):
        code, out, _ = run("parse-check", str(six_file))
        assert code == 0 and out == render_system(builtin("six_wave"))

    def test_json(self, six_file):
        code, out, _ = run("parse-check", str(six_file), "--format", "json")
        assert code == 0 and json.loads(out)["name"] == "six_wave"

    def test_error(self, tmp_path):
        path = tmp_path / "bad.hdsl"
        path.write_text("mode A coherent(alpha);\nH = g*(Ad^2 + hc;")
        code, _, err = run("parse-check", str(path))
        assert code == 1 and "line 2" in err


def test_usage_errors():
    assert run()[0] == 1
    assert run("frobnicate")[0] == 1
    assert run("hoa", "--l", "x")[0] == 1


def test_module_entry_point(tmp_path):
    out = tmp_path / "d.txt"
    proc = subprocess.run(
        [sys.executable, "-m", "hoa", "derive", "--system", "four_wave", "--order", "1", "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert out.read_text() == "A(t) = A - 2i g t A†BC\n"
