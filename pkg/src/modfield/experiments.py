"""End-to-end convergence experiments with built-in verification.

Two pipelines, both organized the same way: simulate partial-sum paths at a
ladder of checkpoint orders, measure convergence toward the deepest partial
sum (the limit proxy), run deterministic verifications per trial, and
aggregate medians across trials.  Trials are independent — trial ``t`` uses
seed ``base_seed + t`` — so results are reproducible coefficient-for-
coefficient regardless of execution order or parallelism.

* :func:`run_continuity` — rough-path pipeline.  Samples the limit proxy on
  a coarse anchor grid, extends it off the grid by inf-convolution with a
  constant from the Hoelder functional (or the fitted pairwise constant),
  then verifies the extension's defining inequalities on a finer grid:
  restriction, the anchor sandwich, and the increment bound.
* :func:`run_smooth` — smooth-path pipeline.  Tracks C^m convergence and
  the top-derivative seminorm, checks every path against its deterministic
  coefficient-tail bound at zero tolerance, and reconstructs the path from
  its sampled derivative by spline-assisted quadrature as an independent
  consistency probe.

Reports serialize to JSON (full fidelity, round-trips through
:func:`read_report`) or long-format CSV ``(trial, checkpoint, metric,
value)`` with the configuration echoed in comment lines.
"""

from __future__ import annotations

import functools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .extension import AnchorSet, build, fit_constant, verify_modulus, verify_restriction, verify_sandwich
from .field_core import (
    FieldSample,
    Grid,
    SmoothFieldSample,
    _stratified_pairs,
    cm_norm,
    holder_norm,
    modulus_seminorm,
    smooth_holder_norm,
)
from .martingale_sim import (
    SeriesSpec,
    draw_path,
    partial_sum,
    partial_sum_jets,
    term_bound_smooth,
)
from .modulus import Modulus, modulus_from_dict

__all__ = [
    "ContinuityConfig",
    "SmoothConfig",
    "ExperimentReport",
    "run_continuity",
    "run_smooth",
    "reconstruct_antiderivative",
    "write_report",
    "read_report",
]


def _checked_checkpoints(checkpoints, n_max: int) -> tuple[int, ...]:
    cps = tuple(int(c) for c in checkpoints)
    if not cps:
        raise ValueError("need at least one checkpoint")
    if any(c2 <= c1 for c1, c2 in zip(cps, cps[1:])):
        raise ValueError(f"checkpoints must be strictly increasing, got {cps}")
    if cps[0] < 1 or cps[-1] > n_max:
        raise ValueError(f"checkpoints {cps} must lie in 1..{n_max}")
    return cps


@dataclass(frozen=True)
class ContinuityConfig:
    """Configuration of the rough-path extension pipeline.

    ``m_source`` selects the extension constant: ``"holder_norm"`` uses the
    full Hoelder functional of the limit proxy on the anchor grid (sup plus
    seminorm — always at least the fitted pairwise constant, so the build
    never rejects), ``"fit_constant"`` uses the fitted constant itself.
    ``m_inflation`` multiplies whichever source is chosen.
    """

    spec: SeriesSpec
    modulus: Modulus
    anchor_points: int
    verify_points: int
    checkpoints: tuple[int, ...]
    trials: int
    seed: int
    m_inflation: float = 1.0
    m_source: str = "holder_norm"
    verify_tol_factor: float = 1e-9
    verify_pair_budget: int | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "checkpoints", _checked_checkpoints(self.checkpoints, self.spec.n_max)
        )
        if self.anchor_points < 2:
            raise ValueError(f"need at least 2 anchor points, got {self.anchor_points}")
        if self.verify_points <= self.anchor_points:
            raise ValueError(
                f"verification grid ({self.verify_points}) must be finer than "
                f"the anchor grid ({self.anchor_points})"
            )
        if self.trials < 1:
            raise ValueError(f"trials must be positive, got {self.trials}")
        if not (self.m_inflation >= 1.0 and math.isfinite(self.m_inflation)):
            raise ValueError(f"m_inflation must be >= 1, got {self.m_inflation}")
        if self.m_source not in ("holder_norm", "fit_constant"):
            raise ValueError(
                f"m_source must be 'holder_norm' or 'fit_constant', got {self.m_source!r}"
            )
        if not (0.0 < self.verify_tol_factor < 1.0):
            raise ValueError(
                f"verify_tol_factor must lie in (0, 1), got {self.verify_tol_factor}"
            )

    def to_dict(self) -> dict:
        return {
            "kind": "continuity",
            "spec": self.spec.to_dict(),
            "modulus": self.modulus.to_dict(),
            "anchor_points": self.anchor_points,
            "verify_points": self.verify_points,
            "checkpoints": list(self.checkpoints),
            "trials": self.trials,
            "seed": self.seed,
            "m_inflation": self.m_inflation,
            "m_source": self.m_source,
            "verify_tol_factor": self.verify_tol_factor,
            "verify_pair_budget": self.verify_pair_budget,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ContinuityConfig":
        return cls(
            spec=SeriesSpec.from_dict(data["spec"]),
            modulus=modulus_from_dict(data["modulus"]),
            anchor_points=int(data["anchor_points"]),
            verify_points=int(data["verify_points"]),
            checkpoints=tuple(data["checkpoints"]),
            trials=int(data["trials"]),
            seed=int(data["seed"]),
            m_inflation=float(data.get("m_inflation", 1.0)),
            m_source=data.get("m_source", "holder_norm"),
            verify_tol_factor=float(data.get("verify_tol_factor", 1e-9)),
            verify_pair_budget=data.get("verify_pair_budget"),
        )


@dataclass(frozen=True)
class SmoothConfig:
    """Configuration of the smooth-path pipeline (trig basis only)."""

    spec: SeriesSpec
    order: int
    modulus: Modulus
    grid_points: int
    quadrature_points: int
    checkpoints: tuple[int, ...]
    trials: int
    seed: int
    reconstruction_tol: float = 1e-7

    def __post_init__(self):
        if self.spec.basis != "trig_smooth":
            raise ValueError("the smooth pipeline needs the trig basis")
        if not 0 <= self.order <= self.spec.smooth_order:
            raise ValueError(
                f"order {self.order} exceeds the series smooth_order "
                f"{self.spec.smooth_order}"
            )
        object.__setattr__(
            self, "checkpoints", _checked_checkpoints(self.checkpoints, self.spec.n_max)
        )
        if self.grid_points < 2:
            raise ValueError(f"need at least 2 grid points, got {self.grid_points}")
        if self.quadrature_points < self.grid_points:
            raise ValueError(
                f"quadrature_points ({self.quadrature_points}) must be at least "
                f"the grid size ({self.grid_points})"
            )
        if self.trials < 1:
            raise ValueError(f"trials must be positive, got {self.trials}")
        if not (self.reconstruction_tol > 0.0):
            raise ValueError(
                f"reconstruction_tol must be positive, got {self.reconstruction_tol}"
            )

    def to_dict(self) -> dict:
        return {
            "kind": "smooth",
            "spec": self.spec.to_dict(),
            "order": self.order,
            "modulus": self.modulus.to_dict(),
            "grid_points": self.grid_points,
            "quadrature_points": self.quadrature_points,
            "checkpoints": list(self.checkpoints),
            "trials": self.trials,
            "seed": self.seed,
            "reconstruction_tol": self.reconstruction_tol,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SmoothConfig":
        return cls(
            spec=SeriesSpec.from_dict(data["spec"]),
            order=int(data["order"]),
            modulus=modulus_from_dict(data["modulus"]),
            grid_points=int(data["grid_points"]),
            quadrature_points=int(data["quadrature_points"]),
            checkpoints=tuple(data["checkpoints"]),
            trials=int(data["trials"]),
            seed=int(data["seed"]),
            reconstruction_tol=float(data.get("reconstruction_tol", 1e-7)),
        )


@dataclass(frozen=True)
class ExperimentReport:
    """Full experiment output: config echo, per-trial rows, aggregates.

    Everything inside is plain JSON-serializable data, so reports written
    with :func:`write_report` and re-read with :func:`read_report` compare
    equal.
    """

    kind: str
    config: dict
    trial_rows: tuple
    aggregates: dict

    @property
    def all_pass(self) -> bool:
        return bool(self.aggregates.get("all_pass", False))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "config": self.config,
            "trial_rows": list(self.trial_rows),
            "aggregates": self.aggregates,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        return cls(
            kind=data["kind"],
            config=data["config"],
            trial_rows=tuple(data["trial_rows"]),
            aggregates=data["aggregates"],
        )


# --------------------------------------------------------------------------
# Rough-path pipeline


def _continuity_trial(cfg: ContinuityConfig, trial: int, field_hook=None) -> dict:
    spec = cfg.spec
    anchor_grid = Grid.regular(spec.domain, cfg.anchor_points)
    verify_grid = Grid.regular(spec.domain, cfg.verify_points)
    seed = cfg.seed + trial
    path = None if field_hook else draw_path(spec, seed)

    def sample(n: int, grid: Grid) -> FieldSample:
        if field_hook is not None:
            return FieldSample(grid=grid, values=field_hook(trial, n, grid), label=f"n={n}")
        return partial_sum(path, n, grid)

    limit_anchor = sample(spec.n_max, anchor_grid)
    limit_verify = sample(spec.n_max, verify_grid)

    anchors = AnchorSet(
        points=anchor_grid.points, values=limit_anchor.values, domain=spec.domain
    )
    fitted = fit_constant(anchors, cfg.modulus)
    if cfg.m_source == "holder_norm":
        base = holder_norm(limit_anchor, cfg.modulus).total
    else:
        base = fitted
    constant = cfg.m_inflation * base
    model = build(anchors, cfg.modulus, constant=constant)

    ext_verify = model(verify_grid.points)

    sup_error, ext_gap, mn_trace, inc_sup = [], [], [], []
    prev_values = np.zeros(verify_grid.n_points)
    for n in cfg.checkpoints:
        s_verify = sample(n, verify_grid)
        s_anchor = sample(n, anchor_grid)
        sup_error.append(float(np.max(np.abs(s_verify.values - limit_verify.values))))
        ext_gap.append(float(np.max(np.abs(s_verify.values - ext_verify))))
        mn_trace.append(holder_norm(s_anchor, cfg.modulus).total)
        inc_sup.append(float(np.max(np.abs(s_verify.values - prev_values))))
        prev_values = s_verify.values
    ratios = [
        inc_sup[i + 1] / inc_sup[i] if inc_sup[i] > 0.0 else float("nan")
        for i in range(len(inc_sup) - 1)
    ]

    diam = min(spec.domain.diameter, cfg.modulus.domain_cap)
    ver_tol = cfg.verify_tol_factor * constant * float(cfg.modulus(diam))
    rep_restriction = verify_restriction(model, tol=1e-12)
    rep_sandwich = verify_sandwich(model, verify_grid.points, tol=ver_tol)
    budget = cfg.verify_pair_budget or 4 * cfg.verify_points
    i_idx, j_idx = _stratified_pairs(verify_grid, budget)
    rep_modulus = verify_modulus(
        model, verify_grid.points[i_idx], verify_grid.points[j_idx], tol=ver_tol
    )

    return {
        "trial": trial,
        "seed": seed,
        "fit_constant": float(fitted),
        "extension_constant": float(constant),
        "sup_error": sup_error,
        "extension_gap": ext_gap,
        "mn": mn_trace,
        "increment_sup": inc_sup,
        "increment_ratios": ratios,
        "restriction_pass": bool(rep_restriction.passed),
        "restriction_worst": float(rep_restriction.worst_violation),
        "sandwich_pass": bool(rep_sandwich.passed),
        "sandwich_worst": float(rep_sandwich.worst_violation),
        "modulus_pass": bool(rep_modulus.passed),
        "modulus_worst": float(rep_modulus.worst_violation),
        "modulus_max_ratio": float(rep_modulus.max_ratio),
    }


def _nan_median_per_column(ratios: np.ndarray) -> list:
    # Per-step median ignoring nan entries; a step where every trial has a
    # zero increment stays nan without tripping numpy's all-nan warning.
    if not ratios.size:
        return []
    out = []
    for col in ratios.T:
        finite = col[~np.isnan(col)]
        out.append(float(np.median(finite)) if finite.size else float("nan"))
    return out


def _run_trials(worker: Callable, cfg, trials: int, parallel: int) -> list[dict]:
    if parallel <= 1:
        return [worker(cfg, t) for t in range(trials)]
    with ProcessPoolExecutor(max_workers=parallel) as ex:
        return list(ex.map(functools.partial(worker, cfg), range(trials)))


def run_continuity(
    cfg: ContinuityConfig, parallel: int = 1, field_hook=None
) -> ExperimentReport:
    """Run the rough-path pipeline; see the module docstring for the stages.

    ``parallel`` distributes whole trials over processes; output is
    bit-identical for any degree because each trial is a pure function of
    ``(config, trial index)`` and rows are assembled in trial order.
    ``field_hook(trial, n, grid) -> values`` replaces the simulator (single-
    process only), for driving the pipeline with a known deterministic field.
    """
    if field_hook is not None and parallel > 1:
        raise ValueError("field_hook runs single-process only")
    if field_hook is not None:
        rows = [_continuity_trial(cfg, t, field_hook=field_hook) for t in range(cfg.trials)]
    else:
        rows = _run_trials(_continuity_trial, cfg, cfg.trials, parallel)

    sup_err = np.array([r["sup_error"] for r in rows])
    ext_gap = np.array([r["extension_gap"] for r in rows])
    mn = np.array([r["mn"] for r in rows])
    inc = np.array([r["increment_sup"] for r in rows])
    ratios = np.array([r["increment_ratios"] for r in rows])
    rates = {
        name: float(np.mean([r[f"{name}_pass"] for r in rows]))
        for name in ("restriction", "sandwich", "modulus")
    }
    aggregates = {
        "checkpoints": list(cfg.checkpoints),
        "sup_error_median": np.median(sup_err, axis=0).tolist(),
        "extension_gap_median": np.median(ext_gap, axis=0).tolist(),
        "mn_median": np.median(mn, axis=0).tolist(),
        "increment_sup_median": np.median(inc, axis=0).tolist(),
        "increment_ratio_median_per_step": _nan_median_per_column(ratios),
        "increment_ratio_median": (
            float(np.nanmedian(ratios))
            if ratios.size and not np.all(np.isnan(ratios))
            else None
        ),
        "extension_constant_median": float(
            np.median([r["extension_constant"] for r in rows])
        ),
        "restriction_pass_rate": rates["restriction"],
        "sandwich_pass_rate": rates["sandwich"],
        "modulus_pass_rate": rates["modulus"],
        "all_pass": all(rate == 1.0 for rate in rates.values()),
    }
    return ExperimentReport(
        kind="continuity",
        config=cfg.to_dict(),
        trial_rows=tuple(rows),
        aggregates=aggregates,
    )


# --------------------------------------------------------------------------
# Smooth-path pipeline


def reconstruct_antiderivative(
    derivative: FieldSample, value_at_start: float, quadrature_points: int
) -> FieldSample:
    """Integrate sampled derivative values back into the primitive.

    A cubic spline interpolates the derivative samples; composite Simpson
    quadrature with panels aligned to the grid intervals (an even number of
    subintervals per interval, enforced internally) integrates the spline
    exactly, so the reconstruction error is the spline interpolation error
    alone.  The first output value is ``value_at_start`` exactly.
    """
    grid = derivative.grid
    if grid.domain.dim != 1:
        raise ValueError("antiderivative reconstruction is one-dimensional")
    n_pts = grid.n_points
    if quadrature_points < n_pts:
        raise ValueError(
            f"quadrature_points ({quadrature_points}) must be at least the "
            f"grid size ({n_pts})"
        )
    x = grid.points[:, 0]
    spline = CubicSpline(x, derivative.values)
    n_intervals = n_pts - 1
    per = max(2, 2 * math.ceil((quadrature_points - 1) / (2 * n_intervals)))
    offsets = np.linspace(0.0, 1.0, per + 1)
    h = np.diff(x)
    nodes = x[:-1, None] + h[:, None] * offsets[None, :]
    fvals = spline(nodes)
    weights = np.ones(per + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    panel = (h / per / 3.0) * (fvals * weights[None, :]).sum(axis=1)
    values = np.concatenate(([value_at_start], value_at_start + np.cumsum(panel)))
    return FieldSample(grid=grid, values=values, label=derivative.label)


def _smooth_trial(cfg: SmoothConfig, trial: int) -> dict:
    spec = cfg.spec
    grid = Grid.regular(spec.domain, cfg.grid_points)
    seed = cfg.seed + trial
    path = draw_path(spec, seed)

    limit = partial_sum_jets(path, spec.n_max, grid, cfg.order)
    coeff_abs = np.abs(path.coefficients)

    cm_error, top_sem, mn_trace, tail_bounds, tail_observed = [], [], [], [], []
    for n in cfg.checkpoints:
        jets_n = partial_sum_jets(path, n, grid, cfg.order)
        diff = SmoothFieldSample(grid=grid, jets=limit.jets - jets_n.jets)
        cm_error.append(cm_norm(diff, cfg.order))
        sem, _ = modulus_seminorm(diff.derivative(cfg.order + 1), cfg.modulus)
        top_sem.append(sem)
        mn_trace.append(smooth_holder_norm(jets_n, cfg.modulus).total)
        bound = sum(
            coeff_abs[k - 1] * term_bound_smooth(spec, k, cfg.modulus, cfg.order)
            for k in range(n + 1, spec.n_max + 1)
        )
        tail_bounds.append(float(bound))
        tail_observed.append(smooth_holder_norm(diff, cfg.modulus).total)
    tail_ok = all(obs <= bnd for obs, bnd in zip(tail_observed, tail_bounds))

    recon = reconstruct_antiderivative(
        limit.derivative(1), float(limit.jets[0, 0]), cfg.quadrature_points
    )
    recon_error = float(np.max(np.abs(recon.values - limit.jets[0])))

    return {
        "trial": trial,
        "seed": seed,
        "cm_error": cm_error,
        "top_seminorm": top_sem,
        "mn": mn_trace,
        "tail_bound": tail_bounds,
        "tail_observed": tail_observed,
        "tail_ok": bool(tail_ok),
        "reconstruction_error": recon_error,
    }


def run_smooth(cfg: SmoothConfig, parallel: int = 1) -> ExperimentReport:
    """Run the smooth-path pipeline; parallel semantics as in
    :func:`run_continuity`."""
    rows = _run_trials(_smooth_trial, cfg, cfg.trials, parallel)

    cm_err = np.array([r["cm_error"] for r in rows])
    top = np.array([r["top_seminorm"] for r in rows])
    mn = np.array([r["mn"] for r in rows])
    margins = np.array(
        [np.array(r["tail_bound"]) - np.array(r["tail_observed"]) for r in rows]
    )
    recon_max = float(np.max([r["reconstruction_error"] for r in rows]))
    tail_all = all(r["tail_ok"] for r in rows)
    aggregates = {
        "checkpoints": list(cfg.checkpoints),
        "cm_error_median": np.median(cm_err, axis=0).tolist(),
        "top_seminorm_median": np.median(top, axis=0).tolist(),
        "mn_median": np.median(mn, axis=0).tolist(),
        "tail_margin_min": float(np.min(margins)),
        "tail_all_ok": bool(tail_all),
        "reconstruction_max": recon_max,
        "reconstruction_tol": cfg.reconstruction_tol,
        "all_pass": bool(tail_all and recon_max <= cfg.reconstruction_tol),
    }
    return ExperimentReport(
        kind="smooth",
        config=cfg.to_dict(),
        trial_rows=tuple(rows),
        aggregates=aggregates,
    )


# --------------------------------------------------------------------------
# Report I/O

_CSV_METRICS = {
    "continuity": {
        "per_checkpoint": ["sup_error", "extension_gap", "mn", "increment_sup"],
        "per_step": ["increment_ratios"],
        "scalar": [
            "fit_constant",
            "extension_constant",
            "restriction_pass",
            "restriction_worst",
            "sandwich_pass",
            "sandwich_worst",
            "modulus_pass",
            "modulus_worst",
            "modulus_max_ratio",
        ],
    },
    "smooth": {
        "per_checkpoint": ["cm_error", "top_seminorm", "mn", "tail_bound", "tail_observed"],
        "per_step": [],
        "scalar": ["tail_ok", "reconstruction_error"],
    },
}


def _csv_lines(report: ExperimentReport) -> list[str]:
    metrics = _CSV_METRICS[report.kind]
    checkpoints = report.aggregates["checkpoints"]
    lines = [
        f"# kind: {report.kind}",
        "# config: " + json.dumps(report.config, sort_keys=True),
        "trial,checkpoint,metric,value",
    ]
    for row in report.trial_rows:
        t = row["trial"]
        for name in metrics["per_checkpoint"]:
            for c, v in zip(checkpoints, row[name]):
                lines.append(f"{t},{c},{name},{_csv_value(v)}")
        for name in metrics["per_step"]:
            for c, v in zip(checkpoints[1:], row[name]):
                lines.append(f"{t},{c},{name},{_csv_value(v)}")
        for name in metrics["scalar"]:
            lines.append(f"{t},-1,{name},{_csv_value(row[name])}")
    return lines


def _csv_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    return repr(float(v))


def write_report(report: ExperimentReport, path: str | Path, fmt: str = "json") -> None:
    """Serialize a report.  ``"json"`` round-trips; ``"csv"`` is the
    long-format hand-off ``(trial, checkpoint, metric, value)`` with the
    config echoed in `#` comment lines (checkpoint -1 marks per-trial
    scalars).  Both formats are byte-deterministic for a given report."""
    path = Path(path)
    if fmt == "json":
        path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    elif fmt == "csv":
        path.write_text("\n".join(_csv_lines(report)) + "\n")
    else:
        raise ValueError(f"format must be 'json' or 'csv', got {fmt!r}")


def read_report(path: str | Path) -> ExperimentReport:
    """Read back a JSON report written by :func:`write_report`."""
    data = json.loads(Path(path).read_text())
    return ExperimentReport.from_dict(data)
