"""Command-line interface.

Subcommands mirror the library surface: ``validate-modulus``, ``seminorm``,
``extend``, ``simulate``, and the two experiment pipelines ``theorem1``
(rough-path extension study) and ``theorem2`` (smooth-path study).  Every
subcommand reads a JSON config (``--config``), prints a one-line summary to
stdout, and optionally writes a full report (``--out``, ``--format json|csv``).
``--seed`` overrides the config seed, ``--parallel`` distributes experiment
trials over processes without changing any output byte, and ``--figures``
additionally renders PNG figures next to the report.

Exit codes: 0 — success and all checks passed; 1 — a verification failed;
2 — usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (
    ContinuityConfig,
    SmoothConfig,
    run_continuity,
    run_smooth,
    write_report,
)
from .extension import (
    AnchorSet,
    InconsistencyError,
    anchors_from_csv,
    build,
    fit_constant,
    verify_modulus,
    verify_restriction,
    verify_sandwich,
)
from .field_core import BoxDomain, FieldSample, Grid, anchored_holder_norm, holder_norm
from .martingale_sim import SeriesSpec, draw_path, martingale_check, partial_sum
from .modulus import modulus_from_dict, validate

__all__ = ["main"]


class ConfigError(Exception):
    """Configuration file missing, unreadable, or semantically invalid."""


def _load_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data


def _need(config: dict, key: str):
    if key not in config:
        raise ConfigError(f"config is missing required key {key!r}")
    return config[key]


def _write_dict_report(data: dict, path: str, fmt: str) -> None:
    if fmt == "json":
        Path(path).write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
    else:
        lines = ["key,value"]
        for key in sorted(data):
            value = data[key]
            if isinstance(value, (dict, list)):
                value = json.dumps(value, sort_keys=True)
            lines.append(f"{key},{json.dumps(value)}")
        Path(path).write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# Subcommand handlers — each returns the process exit code.


def _cmd_validate_modulus(args, config: dict) -> int:
    # Lenient load: this subcommand's whole point is to examine suspect
    # data, so the concavity gate stays open and validation reports instead.
    modulus = modulus_from_dict(_need(config, "modulus"), strict=False)
    samples = int(config.get("samples", 1024))
    tol = config.get("tol")
    report = validate(modulus, samples=samples, tol=tol)
    if args.out:
        _write_dict_report(report.to_dict(), args.out, args.format)
    status = "PASS" if report.passed else "FAIL"
    print(
        f"validate-modulus: {status} samples={report.samples} "
        f"worst_monotonicity={report.worst_monotonicity:.3e} "
        f"worst_subadditivity={report.worst_subadditivity:.3e} "
        f"witness=({report.subadditivity_witness[0]:.6g},"
        f"{report.subadditivity_witness[1]:.6g})"
    )
    return 0 if report.passed else 1


def _cmd_seminorm(args, config: dict) -> int:
    modulus = modulus_from_dict(_need(config, "modulus"))
    field = FieldSample.from_dict(_need(config, "field"))
    budget = config.get("pair_budget")
    origin = config.get("origin_index")
    breakdown = holder_norm(field, modulus, pair_budget=budget)
    out = {"check": "holder-norm", **breakdown.to_dict()}
    if origin is not None:
        anchored = anchored_holder_norm(field, modulus, origin_index=int(origin), pair_budget=budget)
        out["anchored"] = anchored.to_dict()
    if args.out:
        _write_dict_report(out, args.out, args.format)
    print(
        f"seminorm: sup={breakdown.sup_norm:.6g} "
        f"seminorm={breakdown.theta_seminorm:.6g} total={breakdown.total:.6g} "
        f"witness=({breakdown.witness_pair[0]},{breakdown.witness_pair[1]})"
    )
    return 0


def _load_anchors(config: dict) -> AnchorSet:
    if "anchors_csv" in config:
        domain = config.get("domain")
        return anchors_from_csv(
            config["anchors_csv"],
            domain=BoxDomain.from_dict(domain) if domain else None,
        )
    return AnchorSet.from_dict(_need(config, "anchors"))


def _cmd_extend(args, config: dict) -> int:
    anchors = _load_anchors(config)
    modulus = modulus_from_dict(_need(config, "modulus"))
    constant = config.get("constant")
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    n_probes = int(config.get("probes", 512))
    n_pairs = int(config.get("pairs", 512))
    tol_factor = float(config.get("tol_factor", 1e-9))

    try:
        model = build(anchors, modulus, constant=constant)
    except InconsistencyError as exc:
        print(f"extend: FAIL {exc}", file=sys.stderr)
        print("extend: FAIL inconsistent-anchors")
        return 1

    rng = np.random.Generator(np.random.Philox(key=seed))
    domain = anchors.domain
    probes = rng.uniform(domain.lower, domain.upper, size=(n_probes, domain.dim))
    pair_a = rng.uniform(domain.lower, domain.upper, size=(n_pairs, domain.dim))
    pair_b = rng.uniform(domain.lower, domain.upper, size=(n_pairs, domain.dim))

    diam = min(domain.diameter, modulus.domain_cap)
    tol = tol_factor * model.constant * float(modulus(diam))
    reports = [
        verify_restriction(model, tol=1e-12),
        verify_sandwich(model, probes, tol=tol),
        verify_modulus(model, pair_a, pair_b, tol=tol),
    ]
    passed = all(r.passed for r in reports)
    if args.out:
        _write_dict_report(
            {
                "constant": model.constant,
                "fitted_constant": fit_constant(anchors, modulus),
                "checks": [r.to_dict() for r in reports],
                "pass": passed,
            },
            args.out,
            args.format,
        )
    status = "PASS" if passed else "FAIL"
    worst = {r.check: r.worst_violation for r in reports}
    print(
        f"extend: {status} constant={model.constant:.6g} "
        f"restriction={worst['restriction']:.3e} sandwich={worst['sandwich']:.3e} "
        f"modulus={worst['modulus']:.3e}"
    )
    return 0 if passed else 1


def _cmd_simulate(args, config: dict) -> int:
    spec = SeriesSpec.from_dict(_need(config, "spec"))
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    grid = Grid.regular(spec.domain, int(config.get("grid_points", 513)))
    checkpoints = config.get("checkpoints", [spec.n_max])
    checkpoints = [int(c) for c in checkpoints]
    path = draw_path(spec, seed)
    fields = [partial_sum(path, n, grid) for n in checkpoints]

    if args.out:
        if args.format == "json":
            _write_dict_report(
                {"seed": seed, "fields": [f.to_dict() for f in fields]},
                args.out,
                "json",
            )
        else:
            with open(args.out, "w", newline="") as fh:
                fields[-1].write_csv(fh)
    if args.figures:
        from .figures import render_field_figure

        target = Path(args.out or f"simulate_seed{seed}.csv")
        render_field_figure(fields, target.with_suffix(".png"))
    deepest = fields[-1]
    print(
        f"simulate: basis={spec.basis} n={checkpoints[-1]} seed={seed} "
        f"points={grid.n_points} sup={float(np.max(np.abs(deepest.values))):.6g}"
    )
    return 0


def _cmd_martingale_check(args, config: dict) -> int:
    spec = SeriesSpec.from_dict(_need(config, "spec"))
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    report = martingale_check(
        spec,
        n=int(_need(config, "n")),
        x=float(_need(config, "x")),
        trials=int(config.get("trials", 10_000)),
        seed=seed,
    )
    if args.out:
        _write_dict_report(report.to_dict(), args.out, args.format)
    status = "PASS" if report.passed else "FAIL"
    zs = " ".join(f"z[{s.name}]={s.z_score:+.2f}" for s in report.statistics)
    print(f"martingale-check: {status} n={report.n} x={report.x:g} trials={report.trials} {zs}")
    return 0 if report.passed else 1


def _run_experiment(args, cfg, runner, kind: str) -> int:
    report = runner(cfg, parallel=args.parallel)
    if args.out:
        write_report(report, args.out, fmt=args.format)
    if args.figures:
        from .figures import render_report_figures

        out = Path(args.out) if args.out else Path(f"{kind}_report.json")
        render_report_figures(report, out.parent if args.out else Path.cwd(), out.stem)
    agg = report.aggregates
    status = "PASS" if report.all_pass else "FAIL"
    if kind == "theorem1":
        print(
            f"theorem1: {status} trials={cfg.trials} "
            f"checkpoints={len(cfg.checkpoints)} "
            f"sup_error_last={agg['sup_error_median'][-1]:.4e} "
            f"increment_ratio_median={agg['increment_ratio_median']:.4f} "
            f"verify_rates=({agg['restriction_pass_rate']:.3f},"
            f"{agg['sandwich_pass_rate']:.3f},{agg['modulus_pass_rate']:.3f})"
        )
    else:
        print(
            f"theorem2: {status} trials={cfg.trials} "
            f"checkpoints={len(cfg.checkpoints)} "
            f"cm_error_last={agg['cm_error_median'][-1]:.4e} "
            f"tail_margin_min={agg['tail_margin_min']:.4e} "
            f"reconstruction_max={agg['reconstruction_max']:.4e}"
        )
    return 0 if report.all_pass else 1


def _cmd_theorem1(args, config: dict) -> int:
    config = dict(config)
    config.pop("kind", None)
    cfg = ContinuityConfig.from_dict(config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return _run_experiment(args, cfg, run_continuity, "theorem1")


def _cmd_theorem2(args, config: dict) -> int:
    config = dict(config)
    config.pop("kind", None)
    cfg = SmoothConfig.from_dict(config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return _run_experiment(args, cfg, run_smooth, "theorem2")


_HANDLERS = {
    "validate-modulus": _cmd_validate_modulus,
    "seminorm": _cmd_seminorm,
    "extend": _cmd_extend,
    "simulate": _cmd_simulate,
    "martingale-check": _cmd_martingale_check,
    "theorem1": _cmd_theorem1,
    "theorem2": _cmd_theorem2,
}

_FIGURE_COMMANDS = {"simulate", "theorem1", "theorem2"}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modfield",
        description="Modulus-calibrated random field toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler in _HANDLERS.items():
        p = sub.add_parser(name, help=handler.__doc__)
        p.add_argument("--config", required=True, help="JSON configuration path")
        p.add_argument("--out", default=None, help="write the full report here")
        p.add_argument(
            "--format",
            choices=("json", "csv"),
            default="json",
            help="report serialization (default json)",
        )
        p.add_argument(
            "--seed", type=int, default=None, help="override the config seed"
        )
        p.add_argument(
            "--parallel",
            type=int,
            default=1,
            help="worker processes for experiment trials (output-identical)",
        )
        if name in _FIGURE_COMMANDS:
            p.add_argument(
                "--figures",
                action="store_true",
                help="render PNG figures alongside the report",
            )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.parallel < 1:
        print("error: --parallel must be at least 1", file=sys.stderr)
        return 2
    try:
        config = _load_json(args.config)
        return _HANDLERS[args.command](args, config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InconsistencyError as exc:
        print(f"error: inconsistent anchor data: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
