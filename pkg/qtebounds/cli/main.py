"""
Command-Line Interface
Subcommands bounds, qte, simulate, inference, check and dataset-dump

Exit codes: 0 success, 2 partial per-point failures, 1 fatal error (structured JSON on stderr).
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from .. import __version__
from ..config import config
from ..core.bounds import bound_curve, curve_widths, qte_bounds
from ..core.data_loader import load_csv
from ..core.estimators import CoefficientEstimator
from ..exceptions import QteBoundsError
from ..inference.envelope import envelope_gradient, envelope_hessian, split_inner_outer
from ..inference.numerical_delta import bound_value, numerical_delta_ci
from ..inference.saddle import saddle_check, saddle_state
from ..models.bound_models import BoundsConfig
from ..models.estimate_models import EvalGrid
from ..models.silp_models import Sense, SolverStatus
from ..models.sim_models import SimParams
from ..simulation.dgp import dgp_sample
from ..simulation.study import replicate, tighten_report
from ..verification.dataset_validator import validate_dataset
from ..verification.regularity_checker import RegularityChecker
from .artifacts import (
    artifact_meta, curve_plot_frame, error_payload, jsonable, write_csv, write_dataset, write_figure_data,
    write_json,
)
from .run_config import RunConfig, StudyConfig, load_config_file

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2


# ---------------------------------------------------------------------- parsing

def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(',') if v.strip()]


def _ints(text: str) -> List[int]:
    return [int(v) for v in text.split(',') if v.strip()]


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default=None, help="Log level for the stderr sink")
    common.add_argument("--log-dir", default=None, help="Directory for rotating log files")
    common.add_argument("--jobs", type=int, default=None, help="Parallel workers")
    common.add_argument("--config", default=None, help="JSON or TOML file with run settings")
    common.add_argument("--output-dir", default=None, help="Directory for artifacts")
    common.add_argument("--seed", type=int, default=None, help="Root seed")
    common.add_argument("--tau", type=float, default=None, help="Squared radius of the regularization ball")
    common.add_argument("--smoothed", action="store_true", default=None, help="Normal-CDF smoothed estimators")
    return common


def _data_parser() -> argparse.ArgumentParser:
    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", default=None, help="Dataset CSV")
    data.add_argument("--y-col", default=None)
    data.add_argument("--d-col", default=None)
    data.add_argument("--z-col", default=None)
    data.add_argument("--x-cols", default=None, help="Comma-separated covariate columns")
    data.add_argument("--reference", type=float, default=None, help="Reference instrument value")
    data.add_argument("--x", type=_floats, default=None, help="Covariate evaluation point")
    data.add_argument("--y0-lo", type=float, default=None)
    data.add_argument("--y0-hi", type=float, default=None)
    data.add_argument("--y0-size", type=int, default=None)
    data.add_argument("--y0-points", type=_floats, default=None, help="Explicit comma-separated y0 grid")
    data.add_argument("--grid-cap", type=int, default=None)
    data.add_argument("--margin-min", type=float, default=None)
    data.add_argument("--trusted-interval", type=_floats, default=None, help="lo,hi")
    data.add_argument("--no-fallback", action="store_true", default=None)
    data.add_argument("--min-cell", type=int, default=None)
    data.add_argument("--tol", action="append", default=None, metavar="NAME=VALUE",
                      help="Solver tolerance override, repeatable")
    return data


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtebounds", description="Bounds on quantile treatment effects "
                                     "for the treated with a discrete instrument")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common, data = _common_parser(), _data_parser()

    sub.add_parser("bounds", parents=[common, data], help="Bound curve on F_{Y0|D=1}")

    qte = sub.add_parser("qte", parents=[common, data], help="Bounds on the QTE at one quantile level")
    qte.add_argument("--tau-q", type=float, default=None)

    inference = sub.add_parser("inference", parents=[common, data], help="Numerical delta intervals")
    inference.add_argument("--y0", type=_floats, default=None, help="Comma-separated evaluation points")
    inference.add_argument("--level", type=float, default=None)
    inference.add_argument("--n-boot", type=int, default=None)
    inference.add_argument("--step", type=float, default=None)
    inference.add_argument("--kappa", type=float, default=None)
    inference.add_argument("--sense", choices=[s.value for s in Sense], default=None)
    inference.add_argument("--resolve", action="store_true", default=None)

    sub.add_parser("check", parents=[common, data], help="Slater, recession and active-set diagnostics")

    dump = sub.add_parser("dataset-dump", parents=[common, data], help="Write a dataset in canonical form")
    dump.add_argument("--output", default=None, help="Output CSV (default <output-dir>/dataset.csv)")
    dump.add_argument("--sim-n", type=int, default=None, help="Simulate n observations instead of reading")
    dump.add_argument("--sim-l", type=int, default=None, help="Instrument support size for simulation")
    dump.add_argument("--sim-rho", type=float, default=None)

    simulate = sub.add_parser("simulate", parents=[common], help="Replication and tightening study")
    simulate.add_argument("--profile", default=None, help="smoke or study")
    simulate.add_argument("--n-reps", type=int, default=None)
    simulate.add_argument("--n-list", type=_ints, default=None)
    simulate.add_argument("--l-list", type=_ints, default=None)
    simulate.add_argument("--n-large", type=int, default=None)
    simulate.add_argument("--level", type=float, default=None)
    simulate.add_argument("--trusted", choices=['oracle', 'margin'], default=None)
    simulate.add_argument("--figure-mode", action="store_true", default=None)
    return parser


def configure_logging(level: str, log_dir: Optional[str] = None) -> None:
    """JSON lines on stderr, optional rotating file sink"""
    logger.remove()
    logger.add(sys.stderr, level=level, serialize=True)
    if log_dir:
        logger.add(
            str(Path(log_dir) / "qtebounds_{time}.log"),
            level=level,
            rotation="10 MB",
            retention=f"{config.LOG_RETENTION_DAYS} days",
            format="{time} | {level} | {name}:{function}:{line} | {message}",
        )


def _grid_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    grid: Dict[str, Any] = {}
    for key, attr in (('lo', 'y0_lo'), ('hi', 'y0_hi'), ('size', 'y0_size'), ('points', 'y0_points')):
        value = getattr(args, attr, None)
        if value is not None:
            grid[key] = value
    return grid


def _tolerance_overrides(pairs: Optional[Sequence[str]]) -> Dict[str, float]:
    out: Dict[str, float] = {}
    for pair in pairs or []:
        name, sep, value = pair.partition('=')
        if not sep:
            raise ValueError(f"tolerance override '{pair}' is not NAME=VALUE")
        out[name.strip()] = float(value)
    return out


FLAG_FIELDS = {
    'input': 'input', 'reference': 'reference', 'x': 'x', 'tau': 'tau', 'smoothed': 'smoothed',
    'grid_cap': 'grid_cap', 'margin_min': 'margin_min', 'trusted_interval': 'trusted_interval',
    'min_cell': 'min_cell_size', 'seed': 'seed', 'output_dir': 'output_dir', 'jobs': 'n_workers',
    'tau_q': 'tau_q', 'y0': 'y0', 'level': 'level', 'n_boot': 'n_boot', 'step': 'step', 'kappa': 'kappa',
    'sense': 'sense', 'resolve': 'resolve', 'output': 'output',
}


def run_config(args: argparse.Namespace) -> RunConfig:
    """File settings first, then flags"""
    data: Dict[str, Any] = load_config_file(Path(args.config)) if args.config else {}
    data['subcommand'] = args.command
    for flag, key in FLAG_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    if getattr(args, 'no_fallback', None):
        data['use_fallback'] = False

    columns = dict(data.get('column_map', {}))
    for key in ('y', 'd', 'z'):
        value = getattr(args, f"{key}_col", None)
        if value is not None:
            columns[key] = value
    if getattr(args, 'x_cols', None):
        columns['x'] = [c.strip() for c in args.x_cols.split(',') if c.strip()]
    data['column_map'] = columns

    grid = dict(data.get('y0_grid', {}))
    grid.update(_grid_overrides(args))
    data['y0_grid'] = grid
    tolerances = dict(data.get('tolerances', {}))
    tolerances.update(_tolerance_overrides(getattr(args, 'tol', None)))
    data['tolerances'] = tolerances

    if args.command == 'dataset-dump':
        sim = dict(data.get('sim') or {})
        for key, attr in (('n', 'sim_n'), ('n_instruments', 'sim_l'), ('rho', 'sim_rho')):
            value = getattr(args, attr, None)
            if value is not None:
                sim[key] = value
        data['sim'] = sim or None
    return RunConfig(**data)


def study_config(args: argparse.Namespace) -> StudyConfig:
    data: Dict[str, Any] = load_config_file(Path(args.config)) if args.config else {}
    for flag, key in (('profile', 'profile'), ('seed', 'seed'), ('n_reps', 'n_reps'), ('n_list', 'n_list'),
                      ('l_list', 'l_list'), ('n_large', 'n_large'), ('level', 'level'), ('tau', 'tau'),
                      ('smoothed', 'smoothed'), ('trusted', 'trusted'), ('figure_mode', 'figure_mode'),
                      ('output_dir', 'output_dir'), ('jobs', 'n_workers')):
        value = getattr(args, flag, None)
        if value is not None:
            data[key] = value
    if data.get('seed') is None:
        raise ValueError("simulate needs --seed")
    return StudyConfig(**data)


# ---------------------------------------------------------------------- subcommands

def _load(cfg: RunConfig):
    if cfg.input is None:
        raise ValueError(f"{cfg.subcommand} needs --input")
    return load_csv(cfg.input, cfg.column_map or None, cfg.reference)


def _exit_code(n_failed: int) -> int:
    return EXIT_PARTIAL if n_failed else EXIT_OK


def cmd_bounds(args: argparse.Namespace) -> int:
    cfg = run_config(args)
    dataset = _load(cfg)
    curve = bound_curve(dataset, y0_grid=cfg.y0_grid.resolve(dataset), x=cfg.x, cfg=cfg.bounds_config())
    meta = artifact_meta('bounds', cfg.resolved())
    out = cfg.output_dir
    write_csv(out / 'bounds.csv', curve.to_records(), meta)
    write_json(out / 'bounds.json', {'curve': curve.to_records(), 'widths': curve_widths(curve)}, meta)
    write_json(out / 'bounds_diagnostics.json', {
        'diagnostics': curve.diagnostics,
        'n_failed': curve.n_failed,
        'n_trusted': int(np.sum(curve.trusted_mask)),
        'config_issues': config.validate(),
    }, meta)
    write_csv(out / 'plots' / 'bounds_curve.csv', curve_plot_frame(curve), meta)
    if curve.n_failed:
        logger.warning(f"{curve.n_failed} grid point(s) fell back to vacuous bounds")
    return _exit_code(curve.n_failed)


def cmd_qte(args: argparse.Namespace) -> int:
    cfg = run_config(args)
    dataset = _load(cfg)
    bcfg = cfg.bounds_config()
    curve = bound_curve(dataset, y0_grid=cfg.y0_grid.resolve(dataset), x=cfg.x, cfg=bcfg)
    result = qte_bounds(dataset, cfg.tau_q, x=cfg.x, cfg=bcfg, curve=curve)
    meta = artifact_meta('qte', cfg.resolved())
    write_csv(cfg.output_dir / 'qte.csv', [result.to_dict()], meta)
    write_json(cfg.output_dir / 'qte.json', {'qte': result.to_dict(), 'curve': curve.to_records(),
                                             'n_failed': curve.n_failed}, meta)
    return _exit_code(curve.n_failed)


def _inference_diagnostics(cfg: RunConfig, bcfg: BoundsConfig, estimator: CoefficientEstimator,
                           y0: float) -> Dict[str, Any]:
    """Saddle checks on the solved program and, for smoothed upper bounds, envelope derivatives"""
    triple = estimator.triple(y0)
    solution = bound_value(triple, cfg.sense, bcfg.tau, bcfg.tolerances)
    out: Dict[str, Any] = {'y0': y0, 'status': solution.status.value}
    if solution.status != SolverStatus.OPTIMAL:
        return out
    state = saddle_state(triple, solution, bcfg.tolerances)
    out['saddle'] = saddle_check(triple, state.gamma, state.measure, seed=cfg.seed or 0, sense=cfg.sense,
                                 tau=bcfg.tau).to_dict()
    if cfg.sense != Sense.UPPER or not cfg.smoothed:
        return out
    try:
        split = split_inner_outer(triple, solution, tolerances=bcfg.tolerances)
        gradient = envelope_gradient(split, triple, tolerances=bcfg.tolerances)
        hessian = envelope_hessian(split, triple, tolerances=bcfg.tolerances)
    except QteBoundsError as e:
        out['envelope'] = {'available': False, 'reason': e.message}
        return out
    out['envelope'] = {
        'available': True,
        'k': split.k,
        'pivoted': split.pivoted,
        'gradient': gradient.gradient,
        'gradient_discrepancy': gradient.discrepancy,
        'hessian': hessian.hessian,
        'hessian_min_eigenvalue': hessian.min_eigenvalue,
        'hessian_asymmetry': hessian.asymmetry,
    }
    return out


def cmd_inference(args: argparse.Namespace) -> int:
    cfg = run_config(args)
    dataset = _load(cfg)
    bcfg = cfg.bounds_config()
    points = cfg.y0 if cfg.y0 is not None else [float(np.median(dataset.y))]
    grid = EvalGrid(bcfg.grid_points) if bcfg.grid_points is not None else None
    estimator = CoefficientEstimator(dataset, bandwidths=bcfg.bandwidths, grid=grid, x=cfg.x,
                                     smoothed=bcfg.smoothed, grid_cap=bcfg.grid_cap)

    rows, intervals, diagnostics, failed = [], [], [], 0
    for y0 in points:
        try:
            ci = numerical_delta_ci(dataset, y0, x=cfg.x, level=cfg.level, n_boot=cfg.n_boot, step=cfg.step,
                                    seed=cfg.seed or 0, kappa=cfg.kappa, sense=cfg.sense, cfg=bcfg,
                                    resolve=cfg.resolve, n_workers=cfg.n_workers)
        except QteBoundsError as e:
            failed += 1
            logger.warning(f"Interval at y0={y0} failed: {e.message}")
            rows.append({'y0': y0, 'sense': cfg.sense.value, 'lo': np.nan, 'hi': np.nan, 'point': np.nan,
                         'level': cfg.level, 'n_draws': 0, 'status': 'failed'})
            intervals.append({'y0': y0, 'error': e.to_dict()})
            continue
        rows.append({'y0': y0, 'sense': cfg.sense.value, 'lo': ci.lo, 'hi': ci.hi, 'point': ci.point,
                     'level': ci.level, 'n_draws': int(ci.draws.size), 'status': 'ok'})
        intervals.append(ci.to_dict())
        diagnostics.append(_inference_diagnostics(cfg, bcfg, estimator, float(y0)))

    meta = artifact_meta('inference', cfg.resolved())
    write_csv(cfg.output_dir / 'inference.csv', rows, meta)
    write_json(cfg.output_dir / 'inference.json', {'intervals': intervals, 'diagnostics': diagnostics}, meta)
    return _exit_code(failed)


def cmd_check(args: argparse.Namespace) -> int:
    cfg = run_config(args)
    dataset = _load(cfg)
    validation = validate_dataset(dataset, min_cell=cfg.min_cell_size)
    bcfg = cfg.bounds_config()
    checker = RegularityChecker(tolerances=bcfg.tolerances, tau=bcfg.tau, margin_min=bcfg.margin_min)
    reports = checker.check_dataset(dataset, cfg.y0_grid.resolve(dataset), x=cfg.x, cfg=bcfg)

    rows = []
    for report in reports:
        row = {'y0': report.y0, 'passed': report.passed}
        row.update({k: v for k, v in report.metrics.items() if np.isscalar(v)})
        row['issues'] = ';'.join(i.rule_id for i in report.issues)
        rows.append(row)
    meta = artifact_meta('check', cfg.resolved())
    write_csv(cfg.output_dir / 'check.csv', pd.DataFrame(rows), meta)
    write_json(cfg.output_dir / 'check.json', {
        'dataset': validation.to_dict(),
        'points': [r.to_dict() for r in reports],
        'config_issues': config.validate(),
    }, meta)
    return EXIT_OK


def cmd_dataset_dump(args: argparse.Namespace) -> int:
    cfg = run_config(args)
    if cfg.input is not None:
        dataset = _load(cfg)
    elif cfg.sim is not None:
        dataset = dgp_sample(SimParams(**{'seed': cfg.seed or 0, **cfg.sim}))
    else:
        raise ValueError("dataset-dump needs --input or simulation settings")
    output = cfg.output or cfg.output_dir / 'dataset.csv'
    meta = artifact_meta('dataset-dump', cfg.resolved())
    write_dataset(dataset, output, meta, cfg.column_map or None)
    return EXIT_OK


def _replication_frame(result) -> pd.DataFrame:
    frames = []
    for block in result.by_n:
        for r in range(block.n_replications):
            frames.append(pd.DataFrame({
                'n': block.n,
                'replication': r,
                'y0': result.y0_grid,
                'lower': block.lower_curves[r],
                'upper': block.upper_curves[r],
            }))
    return pd.concat(frames, ignore_index=True)


def cmd_simulate(args: argparse.Namespace) -> int:
    study = study_config(args)
    params = study.sim_params()
    grid = study.grid.resolve()
    bcfg = BoundsConfig(tau=study.tau, smoothed=study.smoothed, n_workers=study.n_workers)
    oracle = study.trusted == 'oracle'
    meta = artifact_meta('simulate', study.resolved())
    out = study.output_dir

    tighten = tighten_report(params, study.l_list, study.n_large, grid, bcfg, trusted_from_oracle=oracle)

    failures: Dict[str, Any] = {}
    per_l: List[Dict[str, Any]] = []
    for n_instruments in study.l_list:
        params_l = params.with_overrides(n_instruments=n_instruments)
        reference = tighten.curves[n_instruments]
        result = replicate(params_l, study.n_reps, study.n_list, grid, level=study.level, cfg=bcfg,
                           n_workers=study.n_workers, reference=reference, trusted_from_oracle=oracle)
        write_csv(out / f"replications_L{n_instruments}.csv", _replication_frame(result), meta)
        summary = result.summary_frame()
        write_csv(out / f"summary_L{n_instruments}.csv", summary, meta)
        write_figure_data(out, n_instruments, result.truth, reference, result, meta)

        failed = {str(b.n): b.failed for b in result.by_n if b.failed}
        if failed or reference.n_failed:
            failures[str(n_instruments)] = {'replications': failed, 'reference_points': reference.n_failed}
        dispersion = tighten.add_replications(n_instruments, result)
        write_csv(out / f"dispersion_L{n_instruments}.csv", dispersion, meta)
        per_l.append({
            'L': n_instruments,
            'mean_coverage': summary.groupby('n')['coverage'].mean().to_dict(),
            'reference_covered': (summary.groupby('n')['reference_covered'].mean().to_dict()
                                  if 'reference_covered' in summary.columns else {}),
            'dispersion': dispersion.to_dict(orient='records'),
            'dispersion_shrinks': result.dispersion_shrinks(),
            'reference_coverage_ok': result.reference_coverage_ok(),
        })

    write_csv(out / 'tighten.csv', tighten.table, meta)
    write_json(out / 'simulate.json', {
        'params': params.to_dict(),
        'tighten': tighten.table.to_dict(orient='records'),
        'weakly_decreasing': tighten.weakly_decreasing,
        'slack': tighten.slack,
        'by_l': per_l,
        'failures': failures,
    }, meta)
    return _exit_code(len(failures))


COMMANDS: Dict[str, Callable[[argparse.Namespace], int]] = {
    'bounds': cmd_bounds,
    'qte': cmd_qte,
    'inference': cmd_inference,
    'check': cmd_check,
    'dataset-dump': cmd_dataset_dump,
    'simulate': cmd_simulate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or config.LOG_LEVEL, args.log_dir)
    try:
        code = COMMANDS[args.command](args)
    except (QteBoundsError, OSError, ValueError) as e:
        # pydantic ValidationError is a ValueError
        logger.error(f"{args.command} failed: {e}")
        payload = error_payload(e)
        errors = getattr(e, 'errors', None)
        if callable(errors):
            payload['context'] = {'errors': errors(include_url=False)}
        sys.stderr.write(json.dumps(jsonable(payload), sort_keys=True, default=str) + "\n")
        return EXIT_FATAL
    logger.info(f"{args.command} finished with exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
