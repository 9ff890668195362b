"""Monte Carlo study harness: config parsing, simulation protocol, reports."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qlbs.diagnostics import gcs_residuals, residual_moments, rq_residuals
from qlbs.distribution import LbsParams, kappa, lbs_cdf
from qlbs.model import ParamVector, fit
from qlbs.numerics import RngStream
from qlbs.study import (
    StudyConfig,
    report_params_csv,
    report_residuals_csv,
    report_text,
    run_study,
    simulate_dataset,
)

from conftest import TRUE_DELTA

CFG_KW = dict(
    n_grid=(50,),
    tau_grid=(0.5,),
    replications=4,
    beta=(1.0, -1.0),
    rho=(np.log(0.25), 0.5),
    seed=20240517,
)


class TestStudyConfig:
    def test_grid_coercion(self):
        cfg = StudyConfig(**CFG_KW)
        assert cfg.n_grid == (50,) and isinstance(cfg.n_grid[0], int)
        assert cfg.tau_grid == (0.5,)

    @pytest.mark.parametrize(
        "bad",
        [
            dict(n_grid=()),
            dict(tau_grid=(0.5, 1.0)),
            dict(n_grid=(4,)),  # <= p + q
            dict(replications=0),
            dict(beta=()),
            dict(covariate_law="gaussian"),
        ],
    )
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            StudyConfig(**{**CFG_KW, **bad})

    def test_from_json_round_trip(self):
        text = json.dumps(
            {
                "n_grid": [50, 100],
                "tau_grid": [0.25, 0.75],
                "replications": 10,
                "beta": [1.0, -1.0],
                "rho": [-1.3862943611198906, 0.5],
                "seed": 7,
            }
        )
        cfg = StudyConfig.from_json(text)
        assert cfg.n_grid == (50, 100)
        assert cfg.tau_grid == (0.25, 0.75)
        assert cfg.seed == 7

    def test_from_json_unknown_key(self):
        with pytest.raises(ValueError, match="unknown"):
            StudyConfig.from_json('{"n_grid": [50], "tau_grid": [0.5], "replications": 1, "beta": [1], "rho": [0], "seed": 1, "workers": 4}')

    def test_from_json_missing_key(self):
        with pytest.raises(ValueError, match="missing"):
            StudyConfig.from_json('{"n_grid": [50]}')


class TestSimulateDataset:
    def test_design_shapes_and_ranges(self):
        spec, t = simulate_dataset(120, 0.5, TRUE_DELTA, RngStream(3))
        assert spec.X.shape == (120, 2) and spec.W.shape == (120, 2)
        assert np.all(spec.X[:, 0] == 1.0) and np.all(spec.W[:, 0] == 1.0)
        assert np.all(np.abs(spec.X[:, 1]) < 1.0)
        assert np.all(np.abs(spec.W[:, 1]) < 1.0)
        assert np.all(t > 0.0) and np.all(np.isfinite(t))
        assert spec.q_names == ("intercept", "x1")
        assert spec.alpha_names == ("intercept", "w1")

    def test_reproducible_from_stream(self):
        s1, t1 = simulate_dataset(60, 0.25, TRUE_DELTA, RngStream(11, stream_id=2))
        s2, t2 = simulate_dataset(60, 0.25, TRUE_DELTA, RngStream(11, stream_id=2))
        assert np.array_equal(s1.X, s2.X)
        assert np.array_equal(t1, t2)
        _, t3 = simulate_dataset(60, 0.25, TRUE_DELTA, RngStream(11, stream_id=3))
        assert not np.array_equal(t1, t3)

    @pytest.mark.parametrize("tau", [0.25, 0.5, 0.75])
    def test_fraction_below_q_matches_cdf_route(self, tau):
        # Q_tau is the tau-quantile of the underlying law, and sampling is
        # length-biased, so P(T <= Q_i) = F(Q_i) = tau + gap(tau, alpha_i)
        # with a strictly positive gap. Check the empirical fraction against
        # the CDF route, and that it sits above tau.
        spec, t = simulate_dataset(20000, tau, TRUE_DELTA, RngStream(29))
        Q = np.exp(spec.X @ TRUE_DELTA.beta)
        alpha = np.exp(spec.W @ TRUE_DELTA.rho)
        expected = float(np.mean([
            lbs_cdf(q, LbsParams(a, 4.0 * q / kappa(tau, a)))
            for q, a in zip(Q[:500], alpha[:500])
        ]))
        frac = float(np.mean(t <= Q))
        assert expected > tau
        assert frac == pytest.approx(expected, abs=0.02)

    def test_sample_size_guard(self):
        with pytest.raises(ValueError):
            simulate_dataset(4, 0.5, TRUE_DELTA, RngStream(1))


@pytest.fixture(scope="module")
def tiny_report():
    return run_study(StudyConfig(**CFG_KW), workers=1)


class TestRunStudy:
    def test_cell_layout(self):
        cfg = StudyConfig(**{**CFG_KW, "n_grid": (50, 80), "tau_grid": (0.25, 0.75), "replications": 2})
        report = run_study(cfg)
        assert [(c.tau, c.n) for c in report.cells] == [
            (0.25, 50), (0.25, 80), (0.75, 50), (0.75, 80)
        ]

    def test_single_replication_degenerates(self):
        cfg = StudyConfig(**{**CFG_KW, "replications": 1})
        report = run_study(cfg)
        cell = report.cells[0]
        assert cell.replications == 1 and cell.failures == 0

        # with B=1 the summaries collapse onto the single fit
        spec, t = simulate_dataset(50, 0.5, ParamVector(beta=cfg.beta, rho=cfg.rho), RngStream(cfg.seed, stream_id=0))
        single = fit(spec, t)
        est = single.delta_hat.concat()
        for j, p in enumerate(cell.params):
            assert p.mean == pytest.approx(est[j], rel=1e-12)
            assert p.bias == pytest.approx(est[j] - p.true_value, rel=1e-9, abs=1e-12)
            assert p.mse == pytest.approx((est[j] - p.true_value) ** 2, rel=1e-9)
            assert p.cp in (0.0, 100.0)

    def test_pooled_moments_match_concatenated_residuals(self):
        # dual route: the harness pools via power sums; recompute by refitting
        # each replication and concatenating its residual vectors
        cfg = StudyConfig(**{**CFG_KW, "replications": 2})
        report = run_study(cfg)
        delta_star = ParamVector(beta=cfg.beta, rho=cfg.rho)
        collected = {"gcs": [], "rq": []}
        for b in range(2):
            spec, t = simulate_dataset(50, 0.5, delta_star, RngStream(cfg.seed, stream_id=b))
            res = fit(spec, t)
            collected["gcs"].append(gcs_residuals(res, spec, t).values)
            collected["rq"].append(rq_residuals(res, spec, t).values)
        for stats in report.cells[0].residuals:
            direct = residual_moments(np.concatenate(collected[stats.kind]))
            assert stats.pooled_mean == pytest.approx(direct[0], rel=1e-10)
            assert stats.pooled_sd == pytest.approx(direct[1], rel=1e-10)
            assert stats.pooled_cs == pytest.approx(direct[2], rel=1e-8, abs=1e-10)
            assert stats.pooled_ck == pytest.approx(direct[3], rel=1e-8)

    def test_worker_count_does_not_change_bytes(self, tiny_report):
        parallel = run_study(StudyConfig(**CFG_KW), workers=2)
        assert report_params_csv(parallel) == report_params_csv(tiny_report)
        assert report_residuals_csv(parallel) == report_residuals_csv(tiny_report)
        assert report_text(parallel) == report_text(tiny_report)

    def test_workers_env_default(self, tiny_report, monkeypatch):
        monkeypatch.setenv("QLBS_WORKERS", "2")
        report = run_study(StudyConfig(**CFG_KW))
        assert report_params_csv(report) == report_params_csv(tiny_report)

    def test_workers_validation(self):
        with pytest.raises(ValueError):
            run_study(StudyConfig(**CFG_KW), workers=0)

    def test_estimator_improves_with_sample_size(self):
        cfg = StudyConfig(**{**CFG_KW, "n_grid": (50, 400), "replications": 30})
        report = run_study(cfg)
        small, large = report.cells
        assert small.n == 50 and large.n == 400
        bias_small = sum(abs(p.bias) for p in small.params)
        bias_large = sum(abs(p.bias) for p in large.params)
        mse_small = sum(p.mse for p in small.params)
        mse_large = sum(p.mse for p in large.params)
        assert mse_large < mse_small
        assert bias_large < bias_small

    def test_coverage_is_near_nominal(self):
        cfg = StudyConfig(**{**CFG_KW, "n_grid": (200,), "replications": 60})
        report = run_study(cfg)
        for p in report.cells[0].params:
            assert 80.0 <= p.cp <= 100.0, f"{p.name}: cp={p.cp}"


class TestReports:
    def test_params_csv_parses(self, tiny_report):
        text = report_params_csv(tiny_report)
        lines = text.strip().split("\n")
        assert lines[0] == "n,tau,parameter,true,mean,bias,mse,cp,failures,flagged"
        assert len(lines) == 1 + 4  # one row per parameter
        row = lines[1].split(",")
        assert row[0] == "50" and row[2] == "q:intercept"
        assert float(row[4]) == tiny_report.cells[0].params[0].mean

    def test_residuals_csv_has_both_aggregations(self, tiny_report):
        lines = report_residuals_csv(tiny_report).strip().split("\n")
        assert lines[0] == "n,tau,kind,aggregation,mean,sd,cs,ck"
        assert len(lines) == 1 + 4  # 2 kinds x 2 aggregations
        aggs = {ln.split(",")[3] for ln in lines[1:]}
        assert aggs == {"per_replication", "pooled"}

    def test_text_report_structure(self, tiny_report):
        text = report_text(tiny_report)
        assert "tau = 0.5" in text
        assert "q:intercept" in text and "alpha:w1" in text
        assert "fraction t <= Q_tau" in text
        assert "residual moments" in text

    def test_q_fraction_sits_above_tau(self, tiny_report):
        # the reported fraction documents the quantile gap; under length-
        # biased sampling it exceeds the nominal tau
        assert 0.5 < tiny_report.cells[0].q_fraction < 0.85
