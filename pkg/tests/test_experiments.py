import json

import numpy as np
import pytest

from modfield import (
    BoxDomain,
    ContinuityConfig,
    ExperimentReport,
    FieldSample,
    Grid,
    SeriesSpec,
    SmoothConfig,
    power_modulus,
    read_report,
    reconstruct_antiderivative,
    run_continuity,
    run_smooth,
    write_report,
)


def hat_spec(n_max=31, holder=0.5):
    return SeriesSpec(
        basis="faber_schauder",
        law="gaussian",
        n_max=n_max,
        domain=BoxDomain.unit_interval(),
        holder=holder,
    )


def trig_spec(n_max=64, p=5.0, m=1):
    return SeriesSpec(
        basis="trig_smooth",
        law="gaussian",
        n_max=n_max,
        domain=BoxDomain.unit_interval(),
        p=p,
        smooth_order=m,
    )


def tiny_continuity(**overrides) -> ContinuityConfig:
    base = dict(
        spec=hat_spec(),
        modulus=power_modulus(0.4),
        anchor_points=17,
        verify_points=65,
        checkpoints=(1, 3, 7, 31),
        trials=5,
        seed=11,
    )
    base.update(overrides)
    return ContinuityConfig(**base)


def tiny_smooth(**overrides) -> SmoothConfig:
    base = dict(
        spec=trig_spec(),
        order=1,
        modulus=power_modulus(1.0),
        grid_points=129,
        quadrature_points=513,
        checkpoints=(2, 8, 32),
        trials=4,
        seed=3,
    )
    base.update(overrides)
    return SmoothConfig(**base)


class TestContinuityConfig:
    def test_checkpoint_guards(self):
        with pytest.raises(ValueError, match="at least one"):
            tiny_continuity(checkpoints=())
        with pytest.raises(ValueError, match="strictly increasing"):
            tiny_continuity(checkpoints=(4, 4, 8))
        with pytest.raises(ValueError, match="1..31"):
            tiny_continuity(checkpoints=(1, 64))

    def test_grid_guards(self):
        with pytest.raises(ValueError, match="anchor"):
            tiny_continuity(anchor_points=1)
        with pytest.raises(ValueError, match="finer"):
            tiny_continuity(verify_points=17)

    def test_constant_policy_guards(self):
        with pytest.raises(ValueError, match="m_inflation"):
            tiny_continuity(m_inflation=0.5)
        with pytest.raises(ValueError, match="m_source"):
            tiny_continuity(m_source="guess")
        with pytest.raises(ValueError, match="verify_tol_factor"):
            tiny_continuity(verify_tol_factor=1.0)
        with pytest.raises(ValueError, match="trials"):
            tiny_continuity(trials=0)

    def test_dict_round_trip(self):
        cfg = tiny_continuity(m_inflation=2.0, m_source="fit_constant",
                              verify_pair_budget=111)
        assert ContinuityConfig.from_dict(cfg.to_dict()) == cfg
        # defaults fill in when the optional keys are absent
        slim = {k: v for k, v in tiny_continuity().to_dict().items()
                if k in ("spec", "modulus", "anchor_points", "verify_points",
                         "checkpoints", "trials", "seed")}
        assert ContinuityConfig.from_dict(slim) == tiny_continuity()


class TestSmoothConfig:
    def test_basis_and_order_guards(self):
        with pytest.raises(ValueError, match="trig"):
            tiny_smooth(spec=hat_spec())
        with pytest.raises(ValueError, match="smooth_order"):
            tiny_smooth(order=2)

    def test_grid_guards(self):
        with pytest.raises(ValueError, match="grid points"):
            tiny_smooth(grid_points=1)
        with pytest.raises(ValueError, match="quadrature_points"):
            tiny_smooth(quadrature_points=64)
        with pytest.raises(ValueError, match="reconstruction_tol"):
            tiny_smooth(reconstruction_tol=0.0)

    def test_dict_round_trip(self):
        cfg = tiny_smooth()
        assert SmoothConfig.from_dict(cfg.to_dict()) == cfg


@pytest.fixture(scope="module")
def continuity_report():
    return run_continuity(tiny_continuity())


@pytest.fixture(scope="module")
def smooth_report():
    return run_smooth(tiny_smooth())


class TestContinuityPipeline:
    @pytest.fixture
    def report(self, continuity_report):
        return continuity_report

    def test_structure(self, report):
        cfg = tiny_continuity()
        assert report.kind == "continuity"
        assert report.config == cfg.to_dict()
        assert len(report.trial_rows) == cfg.trials
        row = report.trial_rows[0]
        n_ck = len(cfg.checkpoints)
        for name in ("sup_error", "extension_gap", "mn", "increment_sup"):
            assert len(row[name]) == n_ck
        assert len(row["increment_ratios"]) == n_ck - 1
        assert row["seed"] == cfg.seed + row["trial"]

    def test_all_verifications_pass(self, report):
        assert report.all_pass
        for key in ("restriction_pass_rate", "sandwich_pass_rate", "modulus_pass_rate"):
            assert report.aggregates[key] == 1.0

    def test_error_vanishes_at_the_deepest_checkpoint(self, report):
        # the last checkpoint IS the limit proxy
        assert report.aggregates["sup_error_median"][-1] == 0.0

    def test_sup_error_decreases(self, report):
        med = report.aggregates["sup_error_median"]
        assert all(b < a for a, b in zip(med, med[1:]))

    def test_extension_constant_dominates_fit(self, report):
        for row in report.trial_rows:
            assert row["extension_constant"] >= row["fit_constant"]

    def test_fitted_constant_saturates_the_increment_bound(self):
        # with the fitted pairwise constant and no inflation, the extension's
        # increment ratio over probe pairs sits at (not above) one
        rep = run_continuity(tiny_continuity(m_source="fit_constant", trials=3))
        assert rep.all_pass
        for row in rep.trial_rows:
            assert row["modulus_max_ratio"] <= 1.0 + 1e-9

    def test_parallel_matches_serial(self, report):
        rep2 = run_continuity(tiny_continuity(), parallel=2)
        assert rep2 == report
        assert json.dumps(rep2.to_dict(), sort_keys=True) == json.dumps(
            report.to_dict(), sort_keys=True
        )


class TestFieldHook:
    @staticmethod
    def linear_hook(trial, n, grid):
        return grid.points[:, 0].copy()

    def test_linear_field_is_extended_exactly(self):
        cfg = tiny_continuity(
            modulus=power_modulus(1.0), m_source="fit_constant", trials=2
        )
        rep = run_continuity(cfg, field_hook=self.linear_hook)
        assert rep.all_pass
        for row in rep.trial_rows:
            # every checkpoint sees the same field, so errors collapse
            assert max(row["sup_error"]) == 0.0
            assert max(row["extension_gap"]) < 1e-12
            assert row["fit_constant"] == pytest.approx(1.0, abs=1e-12)
            assert row["increment_sup"][0] == pytest.approx(1.0, abs=1e-12)
            assert row["increment_ratios"][0] == 0.0
            assert all(np.isnan(r) for r in row["increment_ratios"][1:])
        assert rep.aggregates["increment_ratio_median"] == 0.0

    def test_hook_is_single_process_only(self):
        with pytest.raises(ValueError, match="single-process"):
            run_continuity(tiny_continuity(), parallel=2, field_hook=self.linear_hook)


class TestSmoothPipeline:
    @pytest.fixture
    def report(self, smooth_report):
        return smooth_report

    def test_structure(self, report):
        cfg = tiny_smooth()
        assert report.kind == "smooth"
        assert report.config == cfg.to_dict()
        assert len(report.trial_rows) == cfg.trials
        row = report.trial_rows[0]
        for name in ("cm_error", "top_seminorm", "mn", "tail_bound", "tail_observed"):
            assert len(row[name]) == len(cfg.checkpoints)

    def test_convergence_and_certificates(self, report):
        assert report.all_pass
        med = report.aggregates["cm_error_median"]
        assert all(b < a for a, b in zip(med, med[1:]))
        assert report.aggregates["tail_all_ok"]
        assert report.aggregates["tail_margin_min"] >= 0.0
        assert report.aggregates["reconstruction_max"] <= tiny_smooth().reconstruction_tol

    def test_tail_bound_dominates_pointwise(self, report):
        for row in report.trial_rows:
            for obs, bnd in zip(row["tail_observed"], row["tail_bound"]):
                assert obs <= bnd

    def test_parallel_matches_serial(self, report):
        assert run_smooth(tiny_smooth(), parallel=2) == report


class TestReconstruction:
    def test_cubic_is_reproduced_to_roundoff(self):
        # a cubic spline interpolates cubics exactly and Simpson integrates
        # them exactly, so only roundoff remains
        grid = Grid.regular(BoxDomain.unit_interval(), 41)
        x = grid.points[:, 0]
        derivative = FieldSample(grid=grid, values=3.0 * x**2)
        recon = reconstruct_antiderivative(derivative, 0.0, 161)
        np.testing.assert_allclose(recon.values, x**3, atol=1e-14)

    def test_start_value_is_exact(self):
        grid = Grid.regular(BoxDomain.unit_interval(), 17)
        derivative = FieldSample(grid=grid, values=np.sin(grid.points[:, 0]))
        start = 0.123456789
        recon = reconstruct_antiderivative(derivative, start, 17)
        assert recon.values[0] == start

    def test_trig_oracle(self):
        dom = BoxDomain(intervals=((0.0, np.pi / 2),))
        grid = Grid.regular(dom, 1001)
        x = grid.points[:, 0]
        derivative = FieldSample(grid=grid, values=np.cos(x))
        recon = reconstruct_antiderivative(derivative, 0.0, 1001)
        assert abs(recon.values[-1] - 1.0) <= 1e-8
        assert np.max(np.abs(recon.values - np.sin(x))) <= 1e-8

    def test_guards(self):
        grid = Grid.regular(BoxDomain.unit_interval(), 9)
        derivative = FieldSample(grid=grid, values=np.zeros(9))
        with pytest.raises(ValueError, match="quadrature_points"):
            reconstruct_antiderivative(derivative, 0.0, 5)
        grid2 = Grid(domain=BoxDomain(intervals=((0, 1), (0, 1))), shape=(4, 4))
        flat = FieldSample(grid=grid2, values=np.zeros(16))
        with pytest.raises(ValueError, match="one-dimensional"):
            reconstruct_antiderivative(flat, 0.0, 32)


class TestReportIO:
    def test_json_round_trip(self, tmp_path):
        report = run_continuity(tiny_continuity(trials=2))
        path = tmp_path / "report.json"
        write_report(report, path, fmt="json")
        assert read_report(path) == report

    def test_json_is_deterministic(self, tmp_path):
        report = run_smooth(tiny_smooth(trials=2))
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_report(report, a)
        write_report(report, b)
        assert a.read_bytes() == b.read_bytes()

    def test_csv_shape_and_determinism(self, tmp_path):
        cfg = tiny_continuity(trials=3)
        report = run_continuity(cfg)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_report(report, a, fmt="csv")
        write_report(report, b, fmt="csv")
        assert a.read_bytes() == b.read_bytes()
        lines = a.read_text().splitlines()
        n_ck = len(cfg.checkpoints)
        expected = 3 + cfg.trials * (4 * n_ck + (n_ck - 1) + 9)
        assert len(lines) == expected
        assert lines[0] == "# kind: continuity"
        assert lines[2] == "trial,checkpoint,metric,value"
        # config echo parses back to the exact configuration
        echoed = json.loads(lines[1].removeprefix("# config: "))
        assert echoed == cfg.to_dict()

    def test_smooth_csv_shape(self, tmp_path):
        cfg = tiny_smooth(trials=2)
        report = run_smooth(cfg)
        path = tmp_path / "s.csv"
        write_report(report, path, fmt="csv")
        lines = path.read_text().splitlines()
        n_ck = len(cfg.checkpoints)
        assert len(lines) == 3 + cfg.trials * (5 * n_ck + 2)

    def test_unknown_format_rejected(self, tmp_path):
        report = ExperimentReport(kind="continuity", config={}, trial_rows=(), aggregates={})
        with pytest.raises(ValueError):
            write_report(report, tmp_path / "x.bin", fmt="parquet")

    def test_all_pass_defaults_false(self):
        report = ExperimentReport(kind="smooth", config={}, trial_rows=(), aggregates={})
        assert report.all_pass is False
