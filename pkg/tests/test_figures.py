import numpy as np

from modfield import (
    BoxDomain,
    ContinuityConfig,
    FieldSample,
    Grid,
    SeriesSpec,
    SmoothConfig,
    power_modulus,
    run_continuity,
    run_smooth,
)
from modfield.figures import render_field_figure, render_report_figures


def test_smooth_report_figures(tmp_path):
    cfg = SmoothConfig(
        spec=SeriesSpec(basis="trig_smooth", law="gaussian", n_max=32,
                        domain=BoxDomain.unit_interval(), p=5.0, smooth_order=1),
        order=1,
        modulus=power_modulus(1.0),
        grid_points=65,
        quadrature_points=257,
        checkpoints=(2, 8, 32),
        trials=2,
        seed=7,
    )
    written = render_report_figures(run_smooth(cfg), tmp_path, "study")
    names = {p.name for p in written}
    assert names == {"study_cm_error.png", "study_top_seminorm.png", "study_tail_bound.png"}
    assert all(p.stat().st_size > 0 for p in written)


def test_single_checkpoint_skips_ratio_figure(tmp_path):
    cfg = ContinuityConfig(
        spec=SeriesSpec(basis="faber_schauder", law="gaussian", n_max=15,
                        domain=BoxDomain.unit_interval(), holder=0.5),
        modulus=power_modulus(0.4),
        anchor_points=9,
        verify_points=33,
        checkpoints=(15,),
        trials=2,
        seed=1,
    )
    written = render_report_figures(run_continuity(cfg), tmp_path, "one")
    names = {p.name for p in written}
    assert names == {"one_sup_error.png", "one_functional.png"}


def test_field_figure(tmp_path):
    grid = Grid.regular(BoxDomain.unit_interval(), 65)
    fields = [
        FieldSample(grid=grid, values=np.sin(k * grid.points[:, 0]), label=f"n={k}")
        for k in (1, 3)
    ]
    out = render_field_figure(fields, tmp_path / "paths.png")
    assert out.exists() and out.stat().st_size > 0
