# qestim_cli.py - コマンドライン入口（単点計算・スイープ・図データ出力）
#
# 終了コード: 0 正常 / 2 入出力エラー / 3 使い方・ID の誤り / 4 数値エラー
import argparse
import csv
import json
import os
import sys

import numpy as np

import estimation
import lindblad_dynamics
import sweep_runner
from estimation import Observable, point_context, reduced_qfi
from figure_presets import FIGURES, preset_spec
from qestim_errors import DivergentVariance, MissingCoefficients, QEstimError, SpecError
from qestim_logging import get_logger, setup_logging

logger = get_logger("cli")

EXIT_OK = 0
EXIT_IO = 2
EXIT_USAGE = 3
EXIT_NUMERIC = 4

POINT_COMMANDS = ("sld", "qfi", "lambda", "distance")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse のエラーを終了コード 3 に回すためのパーサ"""

    def error(self, message):
        raise UsageError(message)


# ============================================================
# 引数
# ============================================================
def parse_arguments(argv=None):
    common = _Parser(add_help=False)
    common.add_argument('--config', default='config.json', help='Configuration file path')
    common.add_argument('--output', default=None, help='Output file (CSV for sweeps, JSON for point commands)')
    common.add_argument('--seed', type=int, default=None, help='Override the random seed')
    common.add_argument('--threads', type=int, default=None,
                        help='Worker threads for sweeps (default: QESTIM_THREADS, then config, then CPU count)')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true', help='Debug logging')
    verbosity.add_argument('--quiet', action='store_true', help='Warnings and errors only')

    parser = _Parser(description='Single-parameter quantum estimation toolkit')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=_Parser)

    for name in POINT_COMMANDS:
        p = sub.add_parser(name, parents=[common], help=f'{name} at a single (theta, t) point')
        p.add_argument('--model', default='driven-qubit', choices=sweep_runner.MODELS)
        p.add_argument('--param', action='append', default=[], metavar='NAME=VALUE',
                       help='Model parameter (theta, t, F, phi, Omega_1, g, phi1, phi2, kappa, jump, dt)')
        p.add_argument('--form', default=None, help='Observable form (qubit, local-electron, local-nucleus, joint)')
        p.add_argument('--coeff', action='append', default=[], metavar='NAME=VALUE',
                       help='Observable coefficient, e.g. A_x=0.4 or Ae_z=-0.25')

    p = sub.add_parser('sweep', parents=[common], help='Run a sweep described by a JSON spec file')
    p.add_argument('--spec', required=True, help='Sweep spec JSON file')

    p = sub.add_parser('figure', parents=[common], help='Regenerate the dataset behind a figure')
    p.add_argument('figure_id', nargs='?', default=None, help=f"One of {', '.join(FIGURES)}")
    p.add_argument('--list', action='store_true', help='List available figure ids')

    return parser.parse_args(argv)


def _key_values(items, what):
    out = {}
    for item in items:
        if '=' not in item:
            raise UsageError(f"{what} must look like NAME=VALUE, got {item!r}")
        key, value = item.split('=', 1)
        out[key.strip()] = value.strip()
    return out


# ============================================================
# 設定
# ============================================================
def load_config(path):
    """config.json を読み、各モジュールの既定値に反映"""
    try:
        with open(path, 'r') as f:
            config = json.load(f)
    except FileNotFoundError:
        logger.warning(f"⚠ {path} not found, using default settings")
        config = {}
    except json.JSONDecodeError as e:
        raise SpecError(f"{path}: invalid JSON ({e})")
    estimation.apply_settings(config.get('estimation', {}))
    lindblad_dynamics.apply_settings(config.get('lindblad', {}))
    sweep_runner.apply_settings(config.get('sweep', {}))
    return config


def resolve_threads(args):
    """--threads > QESTIM_THREADS > config > CPU 数"""
    if args.threads is not None:
        return sweep_runner.resolve_threads(args.threads)
    env = os.environ.get('QESTIM_THREADS')
    if env:
        try:
            return sweep_runner.resolve_threads(int(env))
        except ValueError:
            logger.warning(f"⚠ ignoring QESTIM_THREADS={env!r}")
    return sweep_runner.resolve_threads(None)


# ============================================================
# 出力
# ============================================================
def format_value(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(result, path):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(result.columns)
        for row in result.rows:
            writer.writerow([format_value(row.get(c)) for c in result.columns])


def metadata_path(csv_path):
    return os.path.splitext(csv_path)[0] + ".json"


def write_json(data, path=None):
    text = json.dumps(data, indent=2)
    if path is None:
        print(text)
        return
    with open(path, 'w') as f:
        f.write(text + "\n")


def write_result(result, path, extra=None):
    metadata = dict(result.metadata)
    metadata.update(extra or {})
    write_csv(result, path)
    write_json(metadata, metadata_path(path))
    logger.info(f"✓ {len(result.rows)} rows -> {path} (metadata {metadata_path(path)})")


def matrix_json(M):
    M = np.asarray(M, dtype=complex)
    return {'real': M.real.tolist(), 'imag': M.imag.tolist()}


# ============================================================
# コマンド
# ============================================================
def cmd_point(args):
    params = sweep_runner.parse_params(args.model, _key_values(args.param, "--param"))
    family = sweep_runner.build_family(args.model, params)
    ctx = point_context(family, params['theta'], params['t'])
    out = {'command': args.command, 'model': args.model, 'params': params}

    if args.command in ("sld", "qfi"):
        out['qfi'] = ctx.qfi
        out['qcrb'] = ctx.qcrb if ctx.qfi > 0 else None
        if family.dims is not None:
            out['qfi_nucleus'] = reduced_qfi(ctx.rho, ctx.drho, family.dims, "a")
            out['qfi_electron'] = reduced_qfi(ctx.rho, ctx.drho, family.dims, "b")
        if args.command == "sld":
            out['sld'] = matrix_json(ctx.L)
        write_json(out, args.output)
        return EXIT_OK

    form = args.form or sweep_runner.MODEL_FORMS[args.model][0]
    if form not in sweep_runner.MODEL_FORMS[args.model]:
        raise MissingCoefficients(f"form {form!r} is not available for model {args.model!r}")
    try:
        coeffs = {k: float(v) for k, v in _key_values(args.coeff, "--coeff").items()}
    except ValueError as e:
        raise UsageError(f"--coeff values must be numbers ({e})")
    A = Observable.from_coeffs(form, coeffs)
    report = estimation.report_from_context(A, ctx)
    out.update(form=form, coeffs=A.coeffs)
    out.update(report.to_dict())
    if args.command == "lambda":
        out['lambda_lower_bound'] = estimation.lambda_lower_bound(A, family, params['theta'], params['t'], ctx=ctx)
    else:
        _, nearest = estimation.min_distance(A, ctx.L, es=ctx.sld_eig)
        out['nearest'] = matrix_json(nearest)
    write_json(out, args.output)
    return EXIT_OK


def cmd_sweep(args):
    try:
        with open(args.spec, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise SpecError(f"{args.spec}: invalid JSON ({e})")
    if not isinstance(data, dict):
        raise SpecError(f"{args.spec}: sweep spec must be a JSON object")
    if args.seed is not None:
        inner = data.get('spec', data)
        if not isinstance(inner, dict):
            raise SpecError(f"{args.spec}: 'spec' must be a JSON object")
        data = dict(inner)
        data['seed'] = args.seed
    spec = sweep_runner.SweepSpec.from_dict(data)
    output = args.output or os.path.splitext(os.path.basename(args.spec))[0] + ".csv"
    result = sweep_runner.run_sweep(spec, resolve_threads(args))
    write_result(result, output)
    return EXIT_OK


def cmd_figure(args):
    if args.list:
        for fig_id, preset in FIGURES.items():
            print(f"{fig_id:>3}  {preset.description}")
        return EXIT_OK
    if args.figure_id is None:
        raise UsageError("figure id required (use --list to see them)")
    spec = preset_spec(args.figure_id, seed=args.seed)
    output = args.output or f"figure_{args.figure_id}.csv"
    logger.info(f"figure {args.figure_id}: {FIGURES[args.figure_id].description}")
    result = sweep_runner.run_sweep(spec, resolve_threads(args))
    write_result(result, output, {'figure': args.figure_id})
    return EXIT_OK


def main(argv=None):
    try:
        args = parse_arguments(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE

    setup_logging("DEBUG" if args.verbose else "WARNING" if args.quiet else "INFO")
    try:
        config = load_config(args.config)
        if not (args.verbose or args.quiet):
            setup_logging(config.get('logging', {}).get('level', 'INFO'))
        if args.command in POINT_COMMANDS:
            return cmd_point(args)
        if args.command == 'sweep':
            return cmd_sweep(args)
        return cmd_figure(args)
    except (UsageError, SpecError, MissingCoefficients) as e:
        logger.error(f"❌ {e}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"❌ I/O error: {e}")
        return EXIT_IO
    except DivergentVariance as e:
        logger.error(f"❌ divergent variance: {e}")
        return EXIT_NUMERIC
    except QEstimError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
