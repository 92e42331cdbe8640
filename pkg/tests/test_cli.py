import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

import oracles
from qreadout import ConfigError
from qreadout.cli import Range, main, parse_modes, parse_value_or_range


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


NARROW = ["--tau0", "0.972", "--tau1", "0.982", "--sigma0", "0.001", "--sigma1", "0.001"]


class TestParsing:
    def test_scalar(self):
        assert parse_value_or_range("1e4", "mu", True) == 1e4

    def test_log_default_for_mu(self):
        r = parse_value_or_range("100:100000:4", "mu", True)
        np.testing.assert_allclose(r.values(), [1e2, 1e3, 1e4, 1e5])

    def test_linear_override(self):
        r = parse_value_or_range("0:1:3:lin", "mu", True)
        assert r == Range(0.0, 1.0, 3, False)

    @pytest.mark.parametrize("text", ["a", "1:2", "1:2:0", "0:10:3:log", "1:2:3:cubic", "inf"])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_value_or_range(text, "mu", True)

    def test_modes(self):
        assert parse_modes("inf") == float("inf")
        assert parse_modes("12") == 12
        with pytest.raises(ConfigError):
            parse_modes("0")


class TestEval:
    def test_narrow_ordering(self, capsys):
        code, out, _ = run(capsys, "eval", *NARROW, "--mu", "1e4", "--jobs", "1")
        assert code == 0
        (r,) = rows(out)
        q, chi, hb, pc = (float(r[c]) for c in ("info_QUANTUM", "info_CHI", "info_CHB", "info_CPC"))
        assert q > chi > hb > pc

    def test_identical_levels_carry_no_information(self, capsys):
        code, out, _ = run(capsys, "eval", "--tau0", "0.95", "--tau1", "0.95", "--sigma0", "0",
                           "--sigma1", "0", "--mu", "1e3", "--jobs", "1")
        (r,) = rows(out)
        assert code == 0
        for col in [c for c in r if c.startswith("info_") or c.startswith("gain_")]:
            assert float(r[col]) == 0.0

    def test_perfect_levels_helstrom_column(self, capsys):
        _, out, _ = run(capsys, "eval", "--tau0", "0.972", "--tau1", "0.982", "--sigma0", "0",
                        "--sigma1", "0", "--mu", "1e4", "--strategies", "CHB")
        (r,) = rows(out)
        assert float(r["p_err_CHB"]) == pytest.approx(oracles.helstrom_pair(1e4, 0.972, 0.982), rel=1e-8)

    def test_rows_echo_parameters(self, capsys):
        _, out, _ = run(capsys, "eval", *NARROW, "--mu", "500", "--modes", "50", "--k", "41",
                        "--n-sigma", "4", "--strategies", "QUANTUM,CPC")
        (r,) = rows(out)
        assert (r["k"], r["n_sigma"], r["modes"]) == ("41", "4", "50")
        assert "q_mass_deficit" in r and "c_mass_deficit" in r

    def test_rejects_ranges(self, capsys):
        code, _, err = run(capsys, "eval", "--mu", "1:10:3")
        assert code == 1 and "sweep" in err


class TestSweep:
    def test_mu_sweep_quantum_saturates_first(self, capsys):
        _, out, _ = run(capsys, "sweep", *NARROW, "--mu", "1000:100000:9", "--jobs", "1")
        table = rows(out)
        assert [float(r["mu"]) for r in table] == sorted(float(r["mu"]) for r in table)

        def first_crossing(col):
            hits = [i for i, r in enumerate(table) if float(r[col]) >= 0.99]
            return hits[0] if hits else len(table)

        q = first_crossing("info_QUANTUM")
        assert q < len(table)
        for col in ("info_CHI", "info_CHB", "info_CPC", "info_CMV"):
            assert q < first_crossing(col)
            assert np.all(np.diff([float(r[col]) for r in table]) >= -1e-9)

    def test_tau0_sweep_dips_at_tau1(self, capsys):
        _, out, _ = run(capsys, "sweep", "--tau0", "0.95:1.0:21", "--tau1", "0.982", "--mu", "1e4",
                        "--strategies", "CHB,CPC,QUANTUM", "--jobs", "1")
        table = rows(out)
        taus = np.array([float(r["tau0"]) for r in table])
        for col in ("info_CHB", "info_CPC", "info_QUANTUM"):
            info = np.array([float(r[col]) for r in table])
            i = int(np.argmin(info))
            assert abs(taus[i] - 0.982) <= 0.0025 + 1e-12
            assert np.all(np.diff(info[: i + 1]) <= 1e-12)
            assert np.all(np.diff(info[i:]) >= -1e-12)

    def test_empty_strategy_set(self, capsys):
        code, _, err = run(capsys, "sweep", "--mu", "1:10:3", "--strategies", ",")
        assert code == 1 and "empty" in err

    def test_needs_one_range(self, capsys):
        assert run(capsys, "sweep", "--mu", "10")[0] == 1
        assert run(capsys, "sweep", "--mu", "1:10:2", "--tau0", "0.9:0.95:2")[0] == 1


class TestGainmap:
    def test_degenerate_line(self, capsys):
        code, out, _ = run(capsys, "gainmap", "--tau0", "0.96:0.98:3", "--tau1", "0.97", "--sigma0", "0",
                           "--sigma1", "0", "--mu", "10:1000:3", "--benchmark", "HB", "--jobs", "1")
        assert code == 0
        table = rows(out)
        assert list(table[0])[:3] == ["mu", "tau0", "gain_HB"]
        line = [r for r in table if float(r["tau0"]) == 0.97]
        assert len(line) == 3
        assert all(float(r["gain_HB"]) == 0.0 for r in line)
        assert any(float(r["gain_HB"]) > 0 for r in table)

    def test_needs_two_ranges(self, capsys):
        assert run(capsys, "gainmap", "--mu", "10:100:2")[0] == 1


class TestCapacity:
    def test_columns(self, capsys):
        code, out, _ = run(capsys, "capacity", *NARROW, "--mu", "100:10000:3")
        table = rows(out)
        assert code == 0
        assert all(r["converged"] == "true" and r["concave_on_grid"] == "true" for r in table)

    def test_nonconvergence_exit_code(self, capsys):
        code, _, err = run(capsys, "capacity", *NARROW, "--mu", "1e4", "--tol", "1e-300")
        assert code == 3 and "converge" in err


class TestOutput:
    def test_nine_significant_digits(self, capsys):
        _, out, _ = run(capsys, "eval", *NARROW, "--mu", "1e3", "--strategies", "CHB")
        (r,) = rows(out)
        assert r["p_err_CHB"] == format(float(r["p_err_CHB"]), ".9g")
        assert len(r["p_err_CHB"].replace("0.", "", 1).lstrip("0")) <= 9

    def test_json_mirrors_csv(self, capsys):
        args = ["sweep", *NARROW, "--mu", "100:1000:3", "--strategies", "CPC,CHB", "--jobs", "1"]
        _, text_csv, _ = run(capsys, *args)
        _, text_json, _ = run(capsys, *args, "--format", "json")
        table, records = rows(text_csv), json.loads(text_json)
        assert [list(r) for r in records] == [list(r) for r in table]
        for r, rec in zip(table, records):
            assert float(r["info_CPC"]) == rec["info_CPC"]

    def test_out_file(self, capsys, tmp_path):
        path = tmp_path / "o.csv"
        _, out, _ = run(capsys, "eval", "--mu", "100", "--strategies", "CHB", "--out", str(path))
        assert out == ""
        assert path.read_text().startswith("mu,tau0,")

    def test_parallel_matches_serial(self, capsys):
        args = ["sweep", *NARROW, "--mu", "100:10000:4", "--strategies", "CHB,CPC,QUANTUM,CHI"]
        _, serial, _ = run(capsys, *args, "--jobs", "1")
        _, parallel, _ = run(capsys, *args, "--jobs", "3")
        assert serial == parallel

    def test_rerun_byte_identical(self, tmp_path):
        outs = []
        for name in ("a.csv", "b.csv"):
            path = tmp_path / name
            subprocess.run(
                [sys.executable, "-m", "qreadout", "sweep", *NARROW, "--mu", "100:3000:3", "--out", str(path)],
                check=True,
            )
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]


class TestConfig:
    def test_flags_override_file(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# narrow levels point\nmu = 1000\ntau0 = 0.972\nstrategies = CHB\nk = 21\n")
        _, out, _ = run(capsys, "eval", "--config", str(cfg), "--k", "31")
        (r,) = rows(out)
        assert (r["mu"], r["tau0"], r["k"]) == ("1000", "0.972", "31")

    def test_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("colour = blue\n")
        code, _, err = run(capsys, "eval", "--config", str(cfg))
        assert code == 1 and "colour" in err

    @pytest.mark.parametrize("argv", [["--tau0", "1.2"], ["--sigma0", "-1"], ["--eta", "0"], ["--k", "0"],
                                      ["--format", "xml"], ["--benchmark", "XX"], ["--modes", "two"]])
    def test_invalid_config_exit_code(self, capsys, argv):
        assert run(capsys, "eval", *argv)[0] == 1

    def test_budget_exit_code(self, capsys):
        code, _, err = run(capsys, "eval", "--tau0", "0.5", "--tau1", "0.6", "--sigma0", "0.3",
                           "--sigma1", "0.3", "--mu", "1e5", "--eta", "0.5", "--strategies", "QUANTUM")
        assert code == 2 and "budget" in err


class TestSelftest:
    def test_passes(self, capsys):
        code, out, _ = run(capsys, "selftest")
        assert code == 0
        assert "FAIL" not in out
