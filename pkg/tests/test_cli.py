"""Command-line front end: config validation, exit codes and reproducible output."""

import csv
import json

import pytest

from hallmhd.cli import ConfigError, main, parse_config

SMALL = """
[system]
kind = emhd
alpha = 1.25
[grid]
n = 16
[data]
s = 0.5
amplitude = {amp}
seed = 2
[exponents]
p = 11
[time]
t = 0.02
nodes = 9
first_node = 1e-3
etd_dt = 1e-3
"""

ENSEMBLE = """
[system]
kind = emhd
alpha = 1.25
[grid]
n = 8
[data]
s = 0.5
amplitude = 1.0
seed = 4
[exponents]
p = 11
[ensemble]
n_draws = {n}
nodes = 9
r_list = 2, 4
"""


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestParseConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("[grid]\nn = 16\nsize = 3\n", "verify-kernels")

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("[solver]\nx = 1\n", "verify-kernels")

    def test_missing_ensemble_section(self):
        with pytest.raises(ConfigError, match=r"missing \[ensemble\]"):
            parse_config(SMALL.format(amp=0.01), "ensemble")

    def test_beta_pair_must_sum_to_one(self):
        with pytest.raises(ConfigError, match="r \\+ s"):
            parse_config("[beta]\npairs = 0.3:0.5\n", "verify-kernels")

    def test_bad_value(self):
        with pytest.raises(ConfigError):
            parse_config(SMALL.format(amp=0.01).replace("n = 16", "n = 15"), "simulate")

    def test_auto_exponent_and_defaults(self):
        cfg = parse_config("[system]\nkind = emhd\n[grid]\nn = 16\n[data]\ns = 0.5\n", "simulate")
        assert cfg["exponents"]["p"] == "auto" and cfg["time"]["nodes"] == 65


class TestCommands:
    def test_verify_kernels_defaults(self, tmp_path, capsys):
        assert main(["verify-kernels", "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "kernel_a1.25_m1_p2.csv")
        assert rows[0] == ["t", "kernel_norm", "predicted"]
        assert (tmp_path / "beta_integrals.csv").exists()

    def test_simulate_zero_data(self, tmp_path):
        cfg = write(tmp_path, SMALL.format(amp=0.0))
        assert main(["simulate", cfg, "--out", str(tmp_path / "o")]) == 0
        for name in ("H.strj", "contraction.csv", "comparison.csv", "energy.csv", "manifest.json"):
            assert (tmp_path / "o" / name).exists()

    def test_simulate_small_data(self, tmp_path):
        cfg = write(tmp_path, SMALL.format(amp=0.01))
        assert main(["simulate", cfg, "--out", str(tmp_path / "o")]) == 0
        rows = read_csv(tmp_path / "o" / "comparison.csv")[1:]
        worst = max(float(r[3]) / float(r[2]) for r in rows if float(r[2]) > 0)
        assert worst < 1e-3

    def test_unit_order_is_infeasible(self, tmp_path, capsys):
        text = SMALL.format(amp=0.01).replace("alpha = 1.25", "alpha = 1.0").replace("p = 11", "p = auto")
        assert main(["simulate", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 3
        assert "1/alpha + 3/(2 p alpha) + 2 beta = 1" in capsys.readouterr().err

    def test_large_data_writes_residuals(self, tmp_path):
        text = SMALL.format(amp=50.0).replace("[time]", "[picard]\nmax_iter = 8\n[time]")
        assert main(["simulate", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 3
        rows = read_csv(tmp_path / "o" / "picard_residuals.csv")
        assert rows[0][:2] == ["iter", "residual_Y"] and len(rows) > 1

    def test_config_error_exit_code(self, tmp_path):
        cfg = write(tmp_path, SMALL.format(amp=0.01) + "colour = red\n")
        assert main(["simulate", cfg]) == 2
        assert main(["ensemble", write(tmp_path, SMALL.format(amp=0.01), "b.ini")]) == 2
        assert main(["simulate", str(tmp_path / "missing.ini")]) == 2

    def test_ensemble_single_draw(self, tmp_path):
        cfg = write(tmp_path, ENSEMBLE.format(n=1))
        assert main(["ensemble", cfg, "--out", str(tmp_path / "o")]) == 0
        rows = read_csv(tmp_path / "o" / "draws.csv")
        assert rows[0] == ["draw", "seed", "E1", "E2", "E3"] and len(rows) == 2

    def test_ensemble_reproducible(self, tmp_path):
        cfg = write(tmp_path, ENSEMBLE.format(n=150))
        assert main(["ensemble", cfg, "--out", str(tmp_path / "a")]) == 0
        assert main(["ensemble", cfg, "--out", str(tmp_path / "b")]) == 0
        for name in ("draws.csv", "tail.csv", "moments.csv", "manifest.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_override(self, tmp_path):
        cfg = write(tmp_path, ENSEMBLE.format(n=3))
        assert main(["ensemble", cfg, "--seed", "99", "--out", str(tmp_path / "o")]) == 0
        doc = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert doc["seeds"] == {"base_seed": 99}
        assert set(doc) == {"command", "version", "config", "seeds"}

    def test_contraction_skips_identical_pair(self, tmp_path):
        text = SMALL.format(amp=0.0) + "[contraction]\nn_pairs = 3\ninclude_identical = true\n"
        assert main(["contraction", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 0
        summary = (tmp_path / "o" / "summary.txt").read_text()
        assert "skipped identical pairs: 1" in summary
        assert len(read_csv(tmp_path / "o" / "contraction.csv")) == 4
