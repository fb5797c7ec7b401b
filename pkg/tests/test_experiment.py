import csv
import json
import math
import warnings

import numpy as np
import pytest

from bussgang import experiment
from bussgang.errors import DegenerateDiagonal, IoError, ValidationError
from bussgang.experiment import CdfSeries, ExperimentConfig, emit_cdf_csv, emit_summary_json, run_fig3

SMALL = dict(M_rx=3, M_tx=2, bits_list=(1, 4), realizations=4, samples_per_realization=20_000)


def series_of(bits, values):
    v = np.sort(np.asarray(values, dtype=float))
    return CdfSeries(bits, v, experiment._summary(v))


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert (cfg.M_rx, cfg.M_tx, cfg.realizations, cfg.samples_per_realization, cfg.seed) == (4, 4, 200, 100_000, 42)
        assert cfg.bits_list == (1, 2, 3, 4, 5, 6)
        assert cfg.quantizer_step_policy == "three_sigma"

    def test_inf_bits(self):
        cfg = ExperimentConfig(bits_list=(1, "inf", math.inf))
        assert cfg.bits_list == (1, math.inf, math.inf)
        assert cfg.to_record()["bits_list"] == [1, "inf", "inf"]

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"M_rx": 0},
            {"bits_list": ()},
            {"bits_list": (0,)},
            {"bits_list": (13,)},
            {"bits_list": (2.5,)},
            {"samples_per_realization": 100},
            {"quantizer_step_policy": "mse"},
            {"quantizer_step_policy": "fixed"},
            {"fixed_step": 0.1},
            {"seed": -1},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValidationError):
            ExperimentConfig(**kwargs)

    def test_steps(self):
        assert ExperimentConfig().step(2, 4.0) == pytest.approx(6 * math.sqrt(2.0) / 4)
        fixed = ExperimentConfig(quantizer_step_policy="fixed", fixed_step=0.25)
        assert fixed.step(3, 100.0) == 0.25


class TestCdfSeries:
    def test_two_point_cdf(self):
        s = series_of(3, [0.3, 0.1])
        np.testing.assert_allclose(s.cdf([0.05, 0.1, 0.2, 0.3, 1.0]), [0.0, 0.5, 0.5, 1.0, 1.0])
        assert s.summary["median"] == pytest.approx(0.2)
        assert s.summary["max"] == 0.3


class TestCsv:
    def test_rows_and_header(self, tmp_path):
        path = tmp_path / "cdf.csv"
        n = emit_cdf_csv([series_of(1, [0.3, 0.1]), series_of(2, [0.05])], path)
        rows = list(csv.reader(path.open()))
        assert n == 3
        assert rows == [
            ["bits", "abs_rho", "cdf"],
            ["1", "0.1", "0.5"],
            ["1", "0.3", "1.0"],
            ["2", "0.05", "1.0"],
        ]

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            emit_cdf_csv([series_of(1, [])], tmp_path / "x.csv")

    def test_unwritable(self, tmp_path):
        with pytest.raises(IoError):
            emit_cdf_csv([series_of(1, [0.2])], tmp_path / "missing" / "x.csv")

    def test_summary_json(self, tmp_path):
        cfg = ExperimentConfig(**SMALL)
        rec = emit_summary_json([series_of(1, [0.2, 0.4]), series_of(4, [0.1])], cfg, tmp_path / "s.json")
        assert json.loads((tmp_path / "s.json").read_text()) == rec
        assert rec["series"][0]["count"] == 2


class TestRun:
    def test_small_run(self):
        cfg = ExperimentConfig(**SMALL)
        series = run_fig3(cfg)
        assert [s.bits for s in series] == [1, 4]
        for s in series:
            assert s.count == cfg.realizations * 3  # three antenna pairs
            assert np.all(np.diff(s.sorted_values) >= 0)
            assert s.sorted_values[-1] <= 1 + 4 * s.eps_mc

    def test_channel_is_reproducible(self):
        cfg = ExperimentConfig(**SMALL)
        np.testing.assert_array_equal(experiment.channel(cfg, 2), experiment.channel(cfg, 2))
        assert not np.array_equal(experiment.channel(cfg, 2), experiment.channel(cfg, 3))

    def test_inf_is_degenerate(self):
        series = run_fig3(ExperimentConfig(**{**SMALL, "bits_list": (2, "inf")}))
        assert series[1].degenerate and series[1].count == 0
        assert series[1].summary["median"] is None

    def test_single_antenna_has_no_pairs(self):
        (s,) = run_fig3(ExperimentConfig(**{**SMALL, "M_rx": 1, "bits_list": (2,)}))
        assert s.count == 0 and s.degenerate

    def test_quantizer_steps_follow_power(self):
        cfg = ExperimentConfig(**SMALL)
        C = np.diag([1.0, 4.0, 9.0]).astype(complex)
        steps = [U.step for U in experiment.quantizers(cfg, C, 3).per_antenna]
        np.testing.assert_allclose(steps, [cfg.step(3, p) for p in (1.0, 4.0, 9.0)])


class TestDegenerateDiagonal:
    def test_pairs_skipped_with_warning(self):
        C = np.diag([1.0, 0.0, 2.0]).astype(complex)
        C[0, 2] = C[2, 0] = 0.5
        with pytest.warns(DegenerateDiagonal):
            rho, se = experiment._pairs(C, np.full((3, 3), 0.01), 1.0)
        np.testing.assert_allclose(rho, [0.5 / math.sqrt(2)])
        assert se.shape == (1,)

    def test_no_warning_when_healthy(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            rho, _ = experiment._pairs(np.eye(3, dtype=complex), np.zeros((3, 3)), 1.0)
        assert rho.shape == (3,)
