"""Command-line interface and CSV data layer, exercised through main(argv)."""

import json
import math

import numpy as np
import pytest

from qlbs.cli import main
from qlbs.data import Dataset, load_csv, write_csv
from qlbs.distribution import LbsParams, QlbsParams, lbs_cdf, lbs_moments, theta_from_q
from qlbs.model import ModelSpec, fit
from qlbs.numerics import RngStream
from qlbs.study import simulate_dataset

from conftest import TRUE_DELTA


class TestLoadCsv:
    def test_happy_path(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a, b\n1.0,2.5\n-3,4e-2\n\n")
        ds = load_csv(f)
        assert ds.columns == ("a", "b")
        assert ds.n == 2
        assert ds.column("b").tolist() == [2.5, 0.04]

    def test_matrix_selection(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,b,c\n1,2,3\n4,5,6\n")
        ds = load_csv(f)
        assert ds.matrix(["c", "a"]).tolist() == [[3.0, 1.0], [6.0, 4.0]]
        assert ds.matrix([]).shape == (2, 0)

    def test_missing_column_names_available(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,b\n1,2\n")
        with pytest.raises(KeyError, match="available: a, b"):
            load_csv(f).column("z")

    def test_ragged_row(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,b\n1,2\n3\n")
        with pytest.raises(ValueError, match="row 2"):
            load_csv(f)

    def test_non_numeric_cell_is_located(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,b\n1,2\n3,oops\n")
        with pytest.raises(ValueError, match="row 2, column 'b'"):
            load_csv(f)

    def test_missing_value(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("a,b\n1,\n")
        with pytest.raises(ValueError, match="missing value"):
            load_csv(f)

    def test_empty_and_headless(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("")
        with pytest.raises(ValueError, match="empty file"):
            load_csv(f)
        f.write_text("a,b\n")
        with pytest.raises(ValueError, match="no data rows"):
            load_csv(f)

    def test_duplicate_columns(self):
        with pytest.raises(ValueError, match="duplicate"):
            Dataset(columns=("a", "a"), rows=np.ones((2, 2)))

    def test_write_round_trips_exactly(self, tmp_path):
        f = tmp_path / "d.csv"
        rows = np.array([[1.0 / 3.0, math.pi], [1e-17, -2.5]])
        write_csv(f, ["u", "v"], rows)
        back = load_csv(f)
        assert np.array_equal(back.rows, rows)


@pytest.fixture()
def sim_csv(tmp_path):
    """A simulated dataset written through the CLI itself."""
    path = tmp_path / "sim.csv"
    rc = main([
        "simulate", "--n", "120", "--tau", "0.5",
        "--beta", "1.0,-1.0", "--rho=-1.3862943611198906,0.5",
        "--seed", "42", "--out", str(path),
    ])
    assert rc == 0
    return path


class TestSimulateCommand:
    def test_output_matches_library(self, sim_csv):
        ds = load_csv(sim_csv)
        assert ds.columns == ("t", "x1", "w1")
        assert ds.n == 120
        spec, t = simulate_dataset(120, 0.5, TRUE_DELTA, RngStream(42, stream_id=0))
        assert np.array_equal(ds.column("t"), t)
        assert np.array_equal(ds.column("x1"), spec.X[:, 1])

    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["simulate", "--n", "30", "--beta", "1", "--rho=-1",
                "--seed", "7", "--stream", "3"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_streams_differ(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        base = ["simulate", "--n", "30", "--beta", "1", "--rho=-1", "--seed", "7"]
        assert main(base + ["--stream", "0", "--out", str(a)]) == 0
        assert main(base + ["--stream", "1", "--out", str(b)]) == 0
        assert a.read_bytes() != b.read_bytes()


class TestFitCommand:
    def test_fit_report_and_artifacts(self, sim_csv, tmp_path, capsys):
        out = tmp_path / "report"
        rc = main([
            "fit", "--data", str(sim_csv), "--q-cols", "x1", "--alpha-cols", "w1",
            "--tau", "0.5", "--out", str(out),
        ])
        captured = capsys.readouterr().out
        assert rc == 0
        assert "converged" in captured
        assert "quantile-scale component" in captured

        report = json.loads(out.with_suffix(".json").read_text())
        assert report["converged"] is True
        assert [c["name"] for c in report["coefficients"]] == [
            "q:intercept", "q:x1", "alpha:intercept", "alpha:w1"
        ]
        # the JSON carries full precision: re-fitting in-process gives the
        # identical floats
        ds = load_csv(sim_csv)
        spec = ModelSpec(
            X=np.column_stack([np.ones(ds.n), ds.column("x1")]),
            W=np.column_stack([np.ones(ds.n), ds.column("w1")]),
            tau=0.5,
        )
        res = fit(spec, ds.column("t"))
        flat = res.delta_hat.concat()
        for j, c in enumerate(report["coefficients"]):
            assert c["estimate"] == flat[j]
            assert c["ci_lower"] < flat[j] < c["ci_upper"]
        assert out.with_suffix(".txt").read_text() == captured

    def test_bootstrap_block(self, sim_csv, tmp_path):
        out = tmp_path / "boot"
        rc = main([
            "fit", "--data", str(sim_csv), "--q-cols", "x1", "--alpha-cols", "w1",
            "--bootstrap", "100", "--seed", "5", "--out", str(out),
        ])
        assert rc == 0
        report = json.loads(out.with_suffix(".json").read_text())
        assert report["bootstrap"]["replicates"] == 100
        for c in report["coefficients"]:
            assert c["bootstrap_lower"] <= c["estimate"] <= c["bootstrap_upper"]

    def test_rank_deficient_design_errors(self, sim_csv, capsys):
        rc = main([
            "fit", "--data", str(sim_csv), "--q-cols", "x1,x1",
        ])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_missing_file_errors(self, capsys):
        rc = main(["fit", "--data", "/nonexistent/nope.csv"])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_unknown_response_column(self, sim_csv, capsys):
        rc = main(["fit", "--data", str(sim_csv), "--response", "y"])
        assert rc == 1
        assert "available" in capsys.readouterr().err


class TestResidualsCommand:
    def test_outputs(self, sim_csv, tmp_path):
        out = tmp_path / "resid"
        rc = main([
            "residuals", "--data", str(sim_csv), "--q-cols", "x1",
            "--alpha-cols", "w1", "--out", str(out),
        ])
        assert rc == 0
        lines = out.with_suffix(".csv").read_text().strip().split("\n")
        assert lines[0] == "index,gcs,rq"
        assert len(lines) == 121
        meta = json.loads(out.with_suffix(".meta.json").read_text())
        assert meta["rq"]["sign_convention"] == (
            "argument is the survival probability, not the CDF"
        )
        assert meta["gcs"]["flagged_rows"] == []


class TestEnvelopeCommand:
    def test_both_kinds_written(self, sim_csv, tmp_path, capsys):
        out = tmp_path / "env"
        rc = main([
            "envelope", "--data", str(sim_csv), "--q-cols", "x1", "--alpha-cols", "w1",
            "--kind", "both", "--reps", "25", "--seed", "3", "--out", str(out),
        ])
        assert rc == 0
        stdout = capsys.readouterr().out
        for kind in ("gcs", "rq"):
            assert (tmp_path / f"env_{kind}.csv").exists()
            svg = (tmp_path / f"env_{kind}.svg").read_text()
            assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
            assert f"{kind}:" in stdout
        assert "% of points inside" in stdout
        csv_lines = (tmp_path / "env_gcs.csv").read_text().strip().split("\n")
        assert csv_lines[0] == "index,theoretical,observed,lower,median,upper"
        assert len(csv_lines) == 121

    def test_too_few_reps_errors(self, sim_csv, tmp_path, capsys):
        rc = main([
            "envelope", "--data", str(sim_csv), "--q-cols", "x1",
            "--reps", "5", "--out", str(tmp_path / "env"),
        ])
        assert rc == 1
        assert "R >= 19" in capsys.readouterr().err


class TestStudyCommand:
    CONFIG = {
        "n_grid": [50],
        "tau_grid": [0.5],
        "replications": 3,
        "beta": [1.0, -1.0],
        "rho": [-1.3862943611198906, 0.5],
        "seed": 11,
    }

    def _run(self, tmp_path, name, extra=()):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(self.CONFIG))
        prefix = tmp_path / name
        rc = main(["study", "--config", str(cfg), "--out", str(prefix), *extra])
        assert rc == 0
        return {
            suffix: (tmp_path / f"{name}_{suffix}").read_bytes()
            for suffix in ("params.csv", "residuals.csv", "tables.txt")
        }

    def test_outputs_and_determinism(self, tmp_path, capsys):
        first = self._run(tmp_path, "s1")
        capsys.readouterr()
        second = self._run(tmp_path, "s2")
        assert first == second
        text = first["tables.txt"].decode()
        assert "tau = 0.5" in text and "q:x1" in text

    def test_worker_env_does_not_change_bytes(self, tmp_path, monkeypatch, capsys):
        serial = self._run(tmp_path, "w1")
        monkeypatch.setenv("QLBS_WORKERS", "2")
        parallel = self._run(tmp_path, "w2")
        assert serial == parallel

    def test_bad_config_errors(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({**self.CONFIG, "typo_key": 1}))
        rc = main(["study", "--config", str(cfg), "--out", str(tmp_path / "x")])
        assert rc == 1
        assert "unknown study config keys" in capsys.readouterr().err


class TestDistCommand:
    def _lines(self, capsys):
        return [float(v) for v in capsys.readouterr().out.strip().split("\n")]

    def test_pdf_cdf_sf_exact(self, capsys):
        params = LbsParams(alpha=0.5, theta=2.0)
        for op, fn in (("cdf", lbs_cdf),):
            rc = main(["dist", "--alpha", "0.5", "--theta", "2.0",
                       "--op", op, "--at", "1.0,2.0,3.0"])
            assert rc == 0
            vals = self._lines(capsys)
            assert vals == [fn(v, params) for v in (1.0, 2.0, 3.0)]

    def test_sf_complements_cdf(self, capsys):
        main(["dist", "--alpha", "1.0", "--theta", "1.0", "--op", "cdf", "--at", "1.5"])
        c = self._lines(capsys)[0]
        main(["dist", "--alpha", "1.0", "--theta", "1.0", "--op", "sf", "--at", "1.5"])
        s = self._lines(capsys)[0]
        assert c + s == pytest.approx(1.0, abs=1e-12)

    def test_quantile_inverts_cdf(self, capsys):
        main(["dist", "--alpha", "0.8", "--theta", "3.0", "--op", "quantile", "--at", "0.3"])
        q = self._lines(capsys)[0]
        main(["dist", "--alpha", "0.8", "--theta", "3.0", "--op", "cdf", "--at", str(q)])
        assert self._lines(capsys)[0] == pytest.approx(0.3, abs=1e-10)

    def test_q_parameterization_route(self, capsys):
        # --q/--tau resolves theta through the kappa mapping
        params = theta_from_q(QlbsParams(alpha=0.5, q_tau=2.0, tau=0.25))
        rc = main(["dist", "--alpha", "0.5", "--q", "2.0", "--tau", "0.25",
                   "--op", "cdf", "--at", "2.0"])
        assert rc == 0
        assert self._lines(capsys)[0] == lbs_cdf(2.0, params)

    def test_moments(self, capsys):
        mean, var = lbs_moments(LbsParams(alpha=0.5, theta=2.0))
        main(["dist", "--alpha", "0.5", "--theta", "2.0", "--op", "mean"])
        assert self._lines(capsys)[0] == mean
        main(["dist", "--alpha", "0.5", "--theta", "2.0", "--op", "variance"])
        assert self._lines(capsys)[0] == var

    def test_quantile_gap_positive(self, capsys):
        rc = main(["dist", "--alpha", "1.0", "--tau", "0.5", "--op", "quantile-gap"])
        assert rc == 0
        assert self._lines(capsys)[0] > 0.0

    @pytest.mark.parametrize(
        "argv",
        [
            ["dist", "--alpha", "0.5", "--theta", "1.0", "--op", "pdf"],  # no --at
            ["dist", "--q", "2.0", "--op", "cdf", "--at", "1.0"],  # --q without --alpha
            ["dist", "--op", "quantile-gap"],  # no --alpha
            ["dist", "--alpha", "0.5", "--op", "cdf", "--at", "1.0"],  # no --theta
        ],
    )
    def test_argument_errors(self, argv, capsys):
        assert main(argv) == 1
        assert "error:" in capsys.readouterr().err


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "qlbs" in capsys.readouterr().out
