"""Tests for the command-line interface."""

import csv
import io
import json

import numpy as np
import pytest

from kappafit.cli import main, read_dataset
from kappafit.distribution import K4Params, quantile, sample


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_sample(tmp_path, name="data.csv", k=-0.2, h=-0.2, n=60, seed=3):
    path = tmp_path / name
    code = main([
        "sample", "--k", str(k), "--h", str(h), "-n", str(n),
        "--seed", str(seed), "-o", str(path),
    ])
    assert code == 0
    return path


class TestReadDataset:
    def test_header_autodetected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("measurement\n1.5\n2.5\n3.5\n4.5\n5.5\n")
        np.testing.assert_allclose(read_dataset(str(path), 5), [1.5, 2.5, 3.5, 4.5, 5.5])

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("# provenance line\n\n1.0\n2.0\n\n3.0\n4.0\n5.0\n")
        assert read_dataset(str(path), 5).size == 5

    def test_crlf(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_bytes(b"1.0\r\n2.0\r\n3.0\r\n4.0\r\n5.0\r\n")
        assert read_dataset(str(path), 5).size == 5

    def test_non_numeric_rows_listed_with_line_numbers(self, tmp_path, capsys):
        path = tmp_path / "d.csv"
        path.write_text("value\n1.0\nabc\n2.0\nx,y\n3.0\n4.0\n5.0\n")
        code, _, err = run(capsys, "fit", str(path), "--method", "mle")
        assert code == 2
        assert "line 3" in err and "line 5" in err

    def test_too_few_values(self, tmp_path, capsys):
        path = tmp_path / "d.csv"
        path.write_text("1.0\n2.0\n3.0\n")
        code, _, err = run(capsys, "fit", str(path), "--method", "mle")
        assert code == 2 and "at least 5" in err


class TestSample:
    def test_deterministic_files(self, tmp_path):
        a = write_sample(tmp_path, "a.csv", n=3, seed=1)
        b = write_sample(tmp_path, "b.csv", n=3, seed=1)
        assert a.read_text() == b.read_text()

    def test_uniform_member_support(self, tmp_path):
        path = write_sample(tmp_path, k=1.0, h=1.0, n=200, seed=2)
        values = read_dataset(str(path), 5)
        assert np.all((values > 0.0) & (values < 1.0))

    def test_gumbel_mean(self, tmp_path):
        path = write_sample(tmp_path, k=0.0, h=0.0, n=100_000, seed=5)
        values = read_dataset(str(path), 5)
        assert np.mean(values) == pytest.approx(0.5772, abs=0.02)

    def test_seventeen_digit_round_trip(self, tmp_path):
        path = write_sample(tmp_path, n=50, seed=9)
        parsed = read_dataset(str(path), 5)
        direct = sample(K4Params(0.0, 1.0, -0.2, -0.2), 50, np.random.default_rng(9))
        np.testing.assert_array_equal(parsed, direct)

    def test_provenance_stamp(self, tmp_path):
        path = write_sample(tmp_path, n=5, seed=7)
        first = path.read_text().splitlines()[0]
        assert first.startswith("# seed=7 config=")

    def test_unwritable_path(self, capsys):
        code, _, err = run(
            capsys, "sample", "-n", "3", "-o", "/no/such/dir/out.csv"
        )
        assert code == 2 and "cannot write" in err


class TestFit:
    def test_round_trip_uniform(self, tmp_path, capsys):
        path = write_sample(tmp_path, k=1.0, h=1.0, n=200, seed=1)
        code, out, _ = run(capsys, "fit", str(path), "--method", "mle", "--json")
        assert code == 0
        entry = json.loads(out)["results"][0]
        assert entry["converged"]
        assert entry["params"]["k"] == pytest.approx(1.0, abs=0.25)
        assert entry["params"]["h"] == pytest.approx(1.0, abs=0.35)

    def test_unknown_combo_lists_vocabulary(self, tmp_path, capsys):
        path = write_sample(tmp_path)
        code, _, err = run(capsys, "fit", str(path), "--method", "MPLE.XX(k)")
        assert code == 2
        assert "MPLE.MSo(k)MSo(h)" in err and "MPLE.Pa(k)CDa(h)" not in err
        assert err.count("MPLE.") >= 18

    def test_json_deterministic(self, tmp_path, capsys):
        path = write_sample(tmp_path)
        _, out_a, _ = run(capsys, "fit", str(path), "--method", "mle", "--json", "--seed", "4")
        _, out_b, _ = run(capsys, "fit", str(path), "--method", "mle", "--json", "--seed", "4")
        assert out_a == out_b

    def test_json_csv_numeric_identity(self, tmp_path, capsys):
        path = write_sample(tmp_path)
        _, out_json, _ = run(capsys, "fit", str(path), "--method", "mle", "--json")
        _, out_csv, _ = run(capsys, "fit", str(path), "--method", "mle", "--csv")
        entry = json.loads(out_json)["results"][0]
        body = "\n".join(out_csv.splitlines()[1:])
        row = next(csv.DictReader(io.StringIO(body)))
        for field in ("mu", "sigma", "k", "h"):
            assert float(row[field]) == entry["params"][field]
            assert float(row[f"se_{field}"]) == entry["se"][field]
        assert float(row["nll"]) == entry["nll"]
        for field in ("mpae", "ad", "ks"):
            assert float(row[field]) == entry["gof"][field]

    def test_all_methods_single_table(self, tmp_path, capsys):
        path = write_sample(tmp_path, n=40, seed=11)
        code, out, _ = run(capsys, "fit", str(path), "--json")
        assert code == 0
        names = [e["method"] for e in json.loads(out)["results"]]
        assert names[0] == "MLE" and names[1] == "LME"
        assert len(names) == 20

    def test_lme_failure_not_fatal(self, tmp_path, capsys):
        path = tmp_path / "hard.csv"
        path.write_text("0.0\n0.05\n0.1\n1.0\n50.0\n50.1\n50.2\n")
        code, out, _ = run(capsys, "fit", str(path), "--method", "lme")
        assert code == 3
        code, out, _ = run(capsys, "fit", str(path), "--method", "mle", "--json")
        assert code == 0
        assert json.loads(out)["results"][0]["converged"]

    def test_all_failed_exit_code(self, tmp_path, capsys):
        path = tmp_path / "flat.csv"
        path.write_text("1.0\n1.0\n1.0\n1.0\n1.0\n")
        code, _, _ = run(capsys, "fit", str(path), "--method", "mle")
        assert code == 3

    def test_bootstrap_pvalues_present(self, tmp_path, capsys):
        path = write_sample(tmp_path, n=40, seed=13)
        code, out, _ = run(
            capsys, "fit", str(path), "--method", "mle", "--bootstrap", "99", "--json"
        )
        assert code == 0
        gof = json.loads(out)["results"][0]["gof"]
        assert gof["bootstrap_reps"] == 99
        assert 0.0 < gof["ad_pvalue"] <= 1.0
        assert 0.0 < gof["ks_pvalue"] <= 1.0


class TestSimulate:
    def write_config(self, tmp_path, text):
        path = tmp_path / "run.cfg"
        path.write_text(text)
        return path

    def test_smoke_single_rep(self, tmp_path, capsys):
        cfg = self.write_config(
            tmp_path, "k=-0.2\nh=-0.2\nn=20\nreps=1\nmethods=mle\nseed=5\n"
        )
        out_dir = tmp_path / "out"
        code, _, _ = run(capsys, "simulate", str(cfg), "-o", str(out_dir))
        assert code == 0
        for name in ("results.csv", "tables.txt", "manifest.json"):
            assert (out_dir / name).exists()
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["seed"] == 5 and manifest["reps"] == 1
        assert manifest["converged"]["MLE"] + manifest["failures"]["MLE"] == 1
        assert "config_digest" in manifest

    def test_rerun_identical(self, tmp_path, capsys):
        cfg = self.write_config(
            tmp_path, "k=-0.2\nh=-0.2\nn=20\nreps=2\nmethods=mle,lme\nseed=6\n"
        )
        run(capsys, "simulate", str(cfg), "-o", str(tmp_path / "a"))
        run(capsys, "simulate", str(cfg), "-o", str(tmp_path / "b"))
        for name in ("results.csv", "tables.txt", "manifest.json"):
            assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()

    def test_five_level_default_columns(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path, "n=20\nreps=1\nmethods=mle\nseed=1\n")
        out_dir = tmp_path / "cols"
        run(capsys, "simulate", str(cfg), "-o", str(out_dir))
        tables = (out_dir / "tables.txt").read_text()
        for level in ("F=0.9", "F=0.95", "F=0.99", "F=0.995", "F=0.999"):
            assert level in tables

    def test_unknown_keys_rejected_with_lines(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path, "n=20\nbogus=1\nreps=1\nwhat=2\n")
        code, _, err = run(capsys, "simulate", str(cfg), "-o", str(tmp_path / "x"))
        assert code == 2
        assert "line 2" in err and "line 4" in err

    def test_bad_value_rejected(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path, "n=twenty\nreps=1\n")
        code, _, err = run(capsys, "simulate", str(cfg), "-o", str(tmp_path / "x"))
        assert code == 2 and "line 1" in err


class TestReturnLevel:
    def test_gumbel_point_estimate(self, tmp_path, capsys):
        path = write_sample(tmp_path, k=0.0, h=0.0, n=10_000, seed=21)
        code, out, _ = run(
            capsys, "return-level", str(path), "-T", "20", "--method", "mle", "--json"
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["return_level"] == pytest.approx(2.970, abs=0.05)
        assert payload["se"] is not None and payload["se"] > 0

    def test_profile_ci_contains_point(self, tmp_path, capsys):
        path = write_sample(tmp_path, n=200, seed=8)
        code, out, _ = run(
            capsys, "return-level", str(path), "-T", "20",
            "--method", "MPLE.MSo(k)MSo(h)", "--profile-ci", "0.95", "--json",
        )
        assert code == 0
        payload = json.loads(out)
        ci = payload["ci"]
        assert ci["lower"] <= payload["return_level"] <= ci["upper"]
        assert len(ci["grid"]) == len(ci["deviance"]) >= 5
        assert min(ci["deviance"]) >= 0.0

    def test_small_period_rejected(self, tmp_path, capsys):
        path = write_sample(tmp_path)
        code, _, err = run(capsys, "return-level", str(path), "-T", "1")
        assert code == 2 and "exceed 1" in err

    def test_bootstrap_se(self, tmp_path, capsys):
        path = write_sample(tmp_path, n=40, seed=22)
        code, out, _ = run(
            capsys, "return-level", str(path), "-T", "10",
            "--method", "mle", "--bootstrap", "30", "--json",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["bootstrap_se"] is None or payload["bootstrap_se"] > 0
        assert "bootstrap_failures" in payload


class TestPlotdata:
    def test_density_integrates_to_window_mass(self, tmp_path, capsys):
        path = write_sample(tmp_path, n=200, seed=30)
        out_dir = tmp_path / "plots"
        code, _, _ = run(capsys, "plotdata", str(path), "--method", "mle", "-o", str(out_dir))
        assert code == 0
        rows = (out_dir / "density.csv").read_text().splitlines()[2:]
        assert len(rows) == 512
        grid = np.array([[float(c) for c in r.split(",")] for r in rows])
        integral = np.trapezoid(grid[:, 1], grid[:, 0])
        assert integral == pytest.approx(0.998, abs=0.01)

    def test_qq_columns_match_on_exact_quantiles(self, tmp_path, capsys):
        n = 100
        params = K4Params(0.0, 1.0, -0.2, -0.2)
        values = quantile(params, (np.arange(1, n + 1) - 0.35) / n)
        path = tmp_path / "exact.csv"
        path.write_text("\n".join(f"{float(v)!r}" for v in values) + "\n")
        out_dir = tmp_path / "plots"
        code, _, _ = run(capsys, "plotdata", str(path), "--method", "mle", "-o", str(out_dir))
        assert code == 0
        rows = (out_dir / "qq.csv").read_text().splitlines()[2:]
        pairs = np.array([[float(c) for c in r.split(",")] for r in rows])
        # the two columns coincide up to fit error, which concentrates in
        # the far tail where quantile differences amplify
        gaps = np.abs(pairs[:, 0] - pairs[:, 1])
        assert np.median(gaps) < 0.02
        assert np.max(gaps) < 0.5

    def test_histogram_sturges(self, tmp_path, capsys):
        path = write_sample(tmp_path, n=64, seed=31)
        out_dir = tmp_path / "plots"
        run(capsys, "plotdata", str(path), "--method", "mle", "-o", str(out_dir))
        rows = (out_dir / "histogram.csv").read_text().splitlines()[2:]
        assert len(rows) == int(np.ceil(np.log2(64))) + 1
        counts = sum(int(r.split(",")[2]) for r in rows)
        assert counts == 64

    def test_deterministic_bytes(self, tmp_path, capsys):
        path = write_sample(tmp_path, n=50, seed=32)
        run(capsys, "plotdata", str(path), "--method", "mle", "-o", str(tmp_path / "a"))
        run(capsys, "plotdata", str(path), "--method", "mle", "-o", str(tmp_path / "b"))
        for name in ("density.csv", "qq.csv", "histogram.csv"):
            assert (tmp_path / "a" / name).read_text() == (tmp_path / "b" / name).read_text()
