import logging
import math
import os
from datetime import datetime, timezone
from functools import wraps

import click
import numpy as np
from flask import Flask, current_app
from flask.cli import AppGroup, ScriptInfo

from config import config
from core.correlators import PAIR_LABELS, quantum_correlation_set
from core.database import db
from core.exceptions import InvalidMixture, TempoBellError, ZeroVector
from core.inequality import check_inequality
from core.ledger import RunLedger
from core.lhv_model import (
    STRATEGIES, StrategyMixture, classical_max_functional, mixture_correlations,
    strategy_functional, verify_derivation_chain,
)
from core.montecarlo import (
    SELECTION_SCHEMES, ExperimentConfig, estimate_correlations, estimate_from_records,
    exact_reference, iter_trials, run_lhv_experiment,
)
from core.optimizer import DirectionTriple, grid_search, optimize_directions, sqrt2_instance, sweep_functional
from core.qubit import BlochVector, QubitState, SpinRotation, TOLERANCE, make_direction
from utils.helpers import (
    DataFormatter, RunManifest, export_data, load_json_file, manifest_path_for,
    parse_numbers, read_records_csv, write_records_csv, write_text,
)

# 配置日志
logging.basicConfig(level=config.LOG_LEVEL, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
logger = logging.getLogger(__name__)

EXIT_CHECK_FAILED = 1
EXIT_IO_ERROR = 4
GRID_AGREEMENT = 1e-3
# 只决定输出去向、不影响结果的参数，不写入清单
OUTPUT_ONLY_PARAMS = {'as_json', 'out', 'manifest', 'records_out'}


def create_app(config_object=None):
    app = Flask(__name__)
    app.config.from_object(config_object or config)
    # TEMPO_BELL_SEED=7 之类的环境变量覆盖同名配置
    app.config.from_prefixed_env('TEMPO_BELL')
    logging.getLogger().setLevel(app.config['LOG_LEVEL'])

    if not app.config.get('SQLALCHEMY_DATABASE_URI'):
        app.config['SQLALCHEMY_DATABASE_URI'] = _default_ledger_uri(app)
    if not app.config.get('MANIFEST_DIR'):
        app.config['MANIFEST_DIR'] = os.path.join(app.instance_path, 'manifests')

    # 初始化运行台账，数据库不可用时台账自动关闭
    db.init_app(app)
    ledger = RunLedger(app.config)
    with app.app_context():
        ledger.initialize()
    app.extensions['run_ledger'] = ledger
    return app


def _default_ledger_uri(app):
    try:
        os.makedirs(app.instance_path, exist_ok=True)
    except OSError as e:
        logger.warning(f"无法创建 instance 目录 {app.instance_path}，台账改用内存数据库: {e}")
        return 'sqlite://'
    return 'sqlite:///' + os.path.join(app.instance_path, app.config['LEDGER_FILENAME'])


# === 参数类型 ===

class DirectionType(click.ParamType):
    """'x,y,z' 字符串或三元素列表，输入时归一化"""
    name = 'x,y,z'

    def convert(self, value, param, ctx):
        if isinstance(value, BlochVector):
            return value
        try:
            if isinstance(value, (list, tuple)):
                x, y, z = (float(v) for v in value)
                # 清单回放时已是单位向量，原样使用以保证逐位一致
                if abs(x * x + y * y + z * z - 1.0) <= TOLERANCE:
                    return BlochVector(x, y, z)
            else:
                x, y, z = parse_numbers(value, 3)
            return make_direction(x, y, z)
        except ZeroVector as e:
            self.fail(str(e), param, ctx)
        except (TypeError, ValueError) as e:
            self.fail(f"malformed direction {value!r}: {e}", param, ctx)


class TimesType(click.ParamType):
    name = 't1,t2,t3'

    def convert(self, value, param, ctx):
        try:
            if isinstance(value, (list, tuple)):
                return tuple(float(v) for v in value)
            return tuple(parse_numbers(value, 3))
        except (TypeError, ValueError) as e:
            self.fail(f"malformed times {value!r}: {e}", param, ctx)


DIRECTION = DirectionType()
TIMES = TimesType()
SEED = click.IntRange(0, 2 ** 64 - 1)


def _load_config_file(ctx, param, value):
    """
    --config 回调：把 JSON 文件内容放进 default_map，命令行参数仍然优先

    文件可以是 {参数名: 值} 对象，也可以是运行清单(取其中的 config)
    """
    if not value:
        return value
    try:
        data = load_json_file(value)
    except (OSError, ValueError) as e:
        raise click.BadParameter(f"cannot read config file: {e}", ctx=ctx, param=param)
    if isinstance(data, dict) and 'command' in data and 'config' in data:
        data = data['config']
    if not isinstance(data, dict):
        raise click.BadParameter("config file must contain a JSON object", ctx=ctx, param=param)
    data = {k.replace('-', '_'): v for k, v in data.items()}
    known = {p.name for p in ctx.command.params}
    unknown = sorted(set(data) - known)
    if unknown:
        raise click.BadParameter(f"unknown option(s) in config file: {', '.join(unknown)}", ctx=ctx, param=param)
    ctx.default_map = {**(ctx.default_map or {}), **data}
    return value


def output_options(f):
    """所有子命令共用的 --config / --json / --out / --manifest"""
    f = click.option('--manifest', type=click.Path(dir_okay=False),
                     help='Write the run manifest to this path.')(f)
    f = click.option('--out', type=click.Path(dir_okay=False),
                     help='Write the full-precision JSON report here (manifest goes to <out>.manifest.json).')(f)
    f = click.option('--json', 'as_json', is_flag=True, help='Print full-precision JSON instead of a table.')(f)
    f = click.option('--config', 'config_file', type=click.Path(exists=True, dir_okay=False),
                     callback=_load_config_file, is_eager=True, expose_value=False,
                     help='JSON file (or run manifest) supplying option values; flags override it.')(f)
    return f


def direction_options(f):
    f = click.option('--a-bisect-diff', is_flag=True,
                     help='Set a to (b - c)/|b - c|; with b.c = 0 this is the sqrt(2) configuration.')(f)
    f = click.option('--c', 'c', type=DIRECTION, help='Direction measured at t3.')(f)
    f = click.option('--b', 'b', type=DIRECTION, help='Direction measured at t2.')(f)
    f = click.option('--a', 'a', type=DIRECTION, help='Direction measured at t1.')(f)
    return f


def block_size_option(f):
    return click.option('--block-size', type=click.IntRange(min=1),
                        help='Trials per random-number block (default from config); changes the sample.')(f)


def _exit_error(message, code):
    error = click.ClickException(message)
    error.exit_code = code
    return error


def cli_errors(f):
    """领域异常 -> 退出码: 配置/参数错误 2, 数据不足 3, 文件读写 4, 科学检查失败 1"""

    @wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except TempoBellError as e:
            name = type(e).__name__
            message = str(e) if str(e).startswith(name) else f"{name}: {e}"
            logger.error(message)
            raise _exit_error(message, e.exit_code)
        except OSError as e:
            logger.error(f"I/O error: {e}")
            raise _exit_error(f"I/O error: {e}", EXIT_IO_ERROR)

    return wrapper


# === 公共逻辑 ===

def _resolve_seed(seed):
    return int(current_app.config['SEED']) if seed is None else seed


def _resolve_directions(a, b, c, a_bisect_diff, default=None):
    if a_bisect_diff:
        if a is not None:
            raise click.UsageError("--a and --a-bisect-diff are mutually exclusive")
        if b is None or c is None:
            raise click.UsageError("--a-bisect-diff needs both --b and --c")
        a = make_direction(b.x - c.x, b.y - c.y, b.z - c.z)
    if a is None and b is None and c is None and default is not None:
        return default
    missing = [name for name, v in (('--a', a), ('--b', b), ('--c', c)) if v is None]
    if missing:
        raise click.UsageError(f"missing direction(s): {', '.join(missing)}")
    return DirectionTriple(a=a, b=b, c=c)


def _parse_initial(text):
    """'mixed' 或 'bloch:x,y,z' (|r| <= 1)"""
    if text == 'mixed':
        return QubitState.maximally_mixed()
    if text.startswith('bloch:'):
        try:
            return QubitState.from_bloch(parse_numbers(text[len('bloch:'):], 3))
        except ValueError as e:
            raise click.BadParameter(str(e), param_hint='--initial')
    raise click.BadParameter(f"expected 'mixed' or 'bloch:x,y,z', got {text!r}", param_hint='--initial')


def _parse_precession(text):
    """'none' 或 'axis:x,y,z,rate'"""
    if text in (None, 'none'):
        return SpinRotation.identity()
    if text.startswith('axis:'):
        try:
            x, y, z, rate = parse_numbers(text[len('axis:'):], 4)
        except ValueError as e:
            raise click.BadParameter(str(e), param_hint='--precession')
        return SpinRotation(axis=make_direction(x, y, z), angular_rate=rate)
    raise click.BadParameter(f"expected 'none' or 'axis:x,y,z,rate', got {text!r}", param_hint='--precession')


def _jsonable(value):
    if isinstance(value, BlochVector):
        return value.to_list()
    if isinstance(value, tuple):
        return list(value)
    return value


def _resolved_config(ctx, resolved=None):
    """
    清单里的完整配置：命令行/配置文件给出的参数，再用实际生效的值覆盖

    resolved 里是从应用配置补齐的默认值(种子、试验次数、块大小等)，
    必须写进清单，回放时才不依赖当时的环境变量
    """
    values = {
        name: _jsonable(value) for name, value in ctx.params.items()
        if name not in OUTPUT_ONLY_PARAMS and value is not None
    }
    values.update({name: _jsonable(value) for name, value in (resolved or {}).items() if value is not None})
    return values


def _default_manifest_path(command):
    stamp = datetime.now(timezone.utc).strftime('%Y%m%dT%H%M%S%f')
    directory = current_app.config['MANIFEST_DIR']
    os.makedirs(directory, exist_ok=True)
    return os.path.join(directory, f"{command}-{stamp}.manifest.json")


def _emit(ctx, payload, text, as_json, out=None, manifest=None, resolved=None, summary=None,
          extra_outputs=(), write_payload=True, always_manifest=False):
    """
    输出结果、写报告文件和清单，并记入运行台账

    每个输出文件旁边都会写一份 <file>.manifest.json；
    always_manifest 时即使没有输出文件也会在 MANIFEST_DIR 下写一份
    """
    click.echo(export_data(payload, 'json') if as_json else text)

    config_values = _resolved_config(ctx, resolved)
    run_manifest = RunManifest(
        command=ctx.info_name,
        config=config_values,
        version=current_app.config['VERSION'],
        seed=config_values.get('seed'),
    )
    outputs = [p for p in ([out] if out else []) + list(extra_outputs) if p]
    if out and write_payload:
        write_text(out, export_data(payload, 'json'))
    manifest_paths = [manifest_path_for(path) for path in outputs]
    if manifest:
        manifest_paths.append(manifest)
    if always_manifest and not manifest_paths:
        manifest_paths.append(_default_manifest_path(ctx.info_name))
    for path in manifest_paths:
        run_manifest.write(path)
        logger.info(f"运行清单: {path}")

    current_app.extensions['run_ledger'].record_run(
        run_manifest, summary=payload if summary is None else summary, output_path=out,
    )
    return run_manifest


def _fmt(value):
    return DataFormatter.format_number(value)


def _correlation_lines(corr):
    lines = []
    for label, p, se in zip(PAIR_LABELS, corr.values(), corr.errors()):
        pair = f"P({label[0].lower()},{label[1].lower()})"
        lines.append(f"  {pair} = {_fmt(p)}" + (f" ± {_fmt(se)}" if corr.estimated else ''))
    return lines


def _report_lines(report):
    lines = [
        f"Bell functional |P(a,b) - P(a,c)| + P(b,c) = {_fmt(report.functional_value)}",
        f"Classical bound = {_fmt(report.classical_bound)}",
        f"Margin = {_fmt(report.margin)}",
    ]
    if report.margin_se is not None:
        lines.append(f"Margin standard error = {_fmt(report.margin_se)} (threshold {_fmt(report.sigma)} sigma)")
        if report.kink_warning:
            lines.append("Warning: |P(a,b) - P(a,c)| is within the noise; the error estimate is unreliable")
    lines.append(f"Verdict: {'VIOLATED' if report.violated else 'not violated'}")
    return lines


def _random_mixtures(count, seed):
    rng = np.random.default_rng(seed)
    return [StrategyMixture.random(rng) for _ in range(count)]


# === 命令行 ===

@click.group(cls=AppGroup, help='Temporal Bell inequality toolkit: exact correlators, '
                                'deterministic models, optimization and simulation.')
@click.version_option(version=config.VERSION, prog_name='tempo-bell')
def cli():
    pass


@cli.command('exact')
@direction_options
@output_options
@click.pass_context
@cli_errors
def cmd_exact(ctx, a, b, c, a_bisect_diff, as_json, out, manifest):
    """Quantum correlators and inequality verdict for one direction triple."""
    triple = _resolve_directions(a, b, c, a_bisect_diff)
    corr = quantum_correlation_set(triple.a, triple.b, triple.c)
    report = check_inequality(corr)

    payload = {
        'directions': triple.to_dict(),
        'correlations': corr.to_dict(),
        'report': report.to_dict(),
    }
    lines = ['Directions'] + [f"  {n} = {v}" for n, v in zip('abc', triple)]
    lines += ['Quantum correlations'] + _correlation_lines(corr) + _report_lines(report)
    _emit(ctx, payload, '\n'.join(lines), as_json, out, manifest)


@cli.command('lhv')
@click.option('--mixture', 'mixture_file', type=click.Path(exists=True, dir_okay=False),
              help='JSON mixture: {"weights": [8 numbers]} or {"strategies": {"+-+": w, ...}}.')
@click.option('--scan-extremals', is_flag=True, help='Evaluate all 8 deterministic strategies.')
@click.option('--random', 'random_count', type=click.IntRange(min=1), help='Check N random mixtures.')
@click.option('--trials', type=click.IntRange(min=1), help='With --mixture: also simulate this many trials.')
@click.option('--seed', type=SEED, help='Seed (default: TEMPO_BELL_SEED or 0).')
@click.option('--sigma', type=click.FloatRange(min=0.0), help='Significance threshold for simulated estimates.')
@block_size_option
@output_options
@click.pass_context
@cli_errors
def cmd_lhv(ctx, mixture_file, scan_extremals, random_count, trials, seed, sigma, block_size, as_json, out,
            manifest):
    """Deterministic hidden-variable models and the classical bound."""
    modes = [m for m in (mixture_file, scan_extremals or None, random_count) if m]
    if len(modes) != 1:
        raise click.UsageError("choose exactly one of --mixture, --scan-extremals, --random")
    seed = _resolve_seed(seed)
    sigma = current_app.config['SIGNIFICANCE_SIGMA'] if sigma is None else sigma
    block_size = current_app.config['BLOCK_SIZE'] if block_size is None else block_size
    resolved = {'seed': seed}
    bound = classical_max_functional()
    failed = bound != 1

    if scan_extremals:
        rows = []
        for s in STRATEGIES:
            ab, ac, bc = s.products()
            derivation = verify_derivation_chain(StrategyMixture.point_mass(s))
            failed = failed or not derivation.passed
            rows.append({'strategy': s.label, 'p_ab': ab, 'p_ac': ac, 'p_bc': bc,
                         'functional': strategy_functional(s), 'derivation': derivation.passed})
        payload = {'mode': 'scan-extremals', 'strategies': rows, 'classical_bound': bound,
                   'max_functional': max(r['functional'] for r in rows)}
        text = DataFormatter.format_table(rows, ['strategy', 'p_ab', 'p_ac', 'p_bc', 'functional', 'derivation'])
        text += f"\nMax functional over deterministic strategies = {payload['max_functional']}"
        text += f"\nClassical bound = {bound}"

    elif random_count:
        max_functional, min_margin, passed = -math.inf, math.inf, 0
        for mixture in _random_mixtures(random_count, seed):
            report = check_inequality(mixture_correlations(mixture))
            derivation = verify_derivation_chain(mixture)
            ok = derivation.passed and not report.violated
            passed += ok
            max_functional = max(max_functional, report.functional_value)
            min_margin = min(min_margin, derivation.bell_margin)
        failed = failed or passed != random_count
        payload = {'mode': 'random', 'mixtures': random_count, 'seed': seed, 'passed': passed,
                   'max_functional': max_functional, 'min_bell_margin': min_margin, 'classical_bound': bound}
        text = '\n'.join([
            f"Random mixtures checked = {random_count} (seed {seed})",
            f"All inequality checks pass = {passed == random_count} ({passed}/{random_count})",
            f"Max functional = {_fmt(max_functional)}",
            f"Min margin of |P(a,b) - P(a,c)| <= 1 - P(b,c) = {_fmt(min_margin)}",
            f"Classical bound = {bound}",
        ])

    else:
        try:
            data = load_json_file(mixture_file)
        except ValueError as e:
            raise InvalidMixture(f"InvalidMixture: {mixture_file} is not valid JSON: {e}") from e
        mixture = StrategyMixture.from_dict(data)
        corr = mixture_correlations(mixture)
        report = check_inequality(corr)
        derivation = verify_derivation_chain(mixture)
        failed = failed or report.violated or not derivation.passed
        payload = {'mode': 'mixture', 'mixture': mixture.to_dict(), 'correlations': corr.to_dict(),
                   'report': report.to_dict(), 'derivation': derivation.to_dict(), 'classical_bound': bound}
        lines = ['Mixture correlations'] + _correlation_lines(corr) + _report_lines(report)
        lines.append(f"Derivation chain checks pass = {derivation.passed}")
        if trials:
            estimates = run_lhv_experiment(mixture, trials, seed, block_size=block_size)
            resolved.update(sigma=sigma, block_size=block_size)
            sim_report = check_inequality(estimates.correlations, sigma=sigma)
            failed = failed or sim_report.violated
            payload['simulation'] = {'trials': trials, 'seed': seed, 'estimates': estimates.to_dict(),
                                     'report': sim_report.to_dict()}
            lines += [f"Simulated ({trials} trials, seed {seed})"] + _correlation_lines(estimates.correlations)
            lines += _report_lines(sim_report)
        text = '\n'.join(lines)

    _emit(ctx, payload, text, as_json, out, manifest, resolved=resolved)
    if failed:
        ctx.exit(EXIT_CHECK_FAILED)


@cli.command('optimize')
@click.option('--restarts', type=int, help='Random restarts (default from config, 20).')
@click.option('--tol', type=float, help='Final coordinate step in radians (default 1e-8).')
@click.option('--initial-step', type=float, help='First coordinate step in radians (default pi/8).')
@click.option('--max-sweeps', type=click.IntRange(min=1), help='Sweep limit per restart (default 100000).')
@click.option('--seed', type=SEED, help='Seed (default: TEMPO_BELL_SEED or 0).')
@click.option('--workers', type=click.IntRange(min=1), default=1, show_default=True,
              help='Threads for independent restarts; does not change the result.')
@click.option('--warm-start-sqrt2', is_flag=True, help='Start the first restart from the sqrt(2) configuration.')
@click.option('--grid-check', is_flag=True, help='Also run the 1-degree grid oracle and compare.')
@output_options
@click.pass_context
@cli_errors
def cmd_optimize(ctx, restarts, tol, initial_step, max_sweeps, seed, workers, warm_start_sqrt2, grid_check,
                 as_json, out, manifest):
    """Maximize |a.b - a.c| + b.c over direction triples."""
    app_config = current_app.config
    restarts = app_config['OPT_RESTARTS'] if restarts is None else restarts
    tol = app_config['OPT_TOL'] if tol is None else tol
    seed = _resolve_seed(seed)
    initial_step = app_config['OPT_INITIAL_STEP'] if initial_step is None else initial_step
    max_sweeps = app_config['OPT_MAX_SWEEPS'] if max_sweeps is None else max_sweeps
    resolved = {
        'restarts': restarts, 'tol': tol, 'initial_step': initial_step,
        'max_sweeps': max_sweeps, 'seed': seed,
    }

    result = optimize_directions(
        restarts, tol, np.random.default_rng(seed),
        warm_start=sqrt2_instance() if warm_start_sqrt2 else None,
        initial_step=initial_step,
        max_sweeps=max_sweeps,
        workers=workers,
    )
    sqrt2_value = sqrt2_instance().functional()
    payload = result.to_dict()
    payload['sqrt2_instance_value'] = sqrt2_value
    lines = [
        'Best triple (canonical frame: a = z, b in the xz-plane)',
        *(f"  {n} = {v}" for n, v in zip('abc', result.best)),
        f"Best functional = {_fmt(result.value)}",
        f"Restarts = {result.restarts_used}, converged = {result.converged}",
        f"Value at the sqrt(2) configuration (b.c = 0, a = (b - c)/sqrt(2)) = {_fmt(sqrt2_value)}",
    ]
    failed = False
    if grid_check:
        grid_value, grid_angles = grid_search(1.0)
        agrees = abs(grid_value - result.value) <= GRID_AGREEMENT
        failed = not agrees
        payload['grid_oracle'] = {'resolution_deg': 1.0, 'value': grid_value,
                                  'angles_deg': [math.degrees(t) for t in grid_angles], 'agrees': agrees}
        lines.append(f"1-degree grid maximum = {_fmt(grid_value)} (agrees within {GRID_AGREEMENT}: {agrees})")

    _emit(ctx, payload, '\n'.join(lines), as_json, out, manifest, resolved=resolved)
    if failed:
        ctx.exit(EXIT_CHECK_FAILED)


@cli.command('simulate')
@click.option('--trials', type=click.IntRange(min=1), help='Number of prepared systems (default from config).')
@click.option('--seed', type=SEED, help='Seed (default: TEMPO_BELL_SEED or 0).')
@click.option('--initial', default='mixed', show_default=True, help="'mixed' or 'bloch:x,y,z' with |r| <= 1.")
@click.option('--precession', default='none', show_default=True,
              help="'none' or 'axis:x,y,z,rate' (rate in radians per unit time).")
@click.option('--times', type=TIMES, default='0,1,2', show_default=True, help='t1,t2,t3 with t1 < t2 < t3.')
@direction_options
@click.option('--selection', type=click.Choice(SELECTION_SCHEMES), default='random', show_default=True,
              help='Pair selection: uniform random, or the deterministic AB, AC, BC cycle.')
@click.option('--shards', type=click.IntRange(min=1), help='Parallel shards; does not change the result.')
@click.option('--sigma', type=click.FloatRange(min=0.0), help='Significance threshold in standard errors.')
@click.option('--records-out', type=click.Path(dir_okay=False), help='Also write every trial as CSV.')
@block_size_option
@output_options
@click.pass_context
@cli_errors
def cmd_simulate(ctx, trials, seed, initial, precession, times, a, b, c, a_bisect_diff, selection, shards,
                 sigma, records_out, block_size, as_json, out, manifest):
    """Monte Carlo run of the sequential-measurement experiment."""
    app_config = current_app.config
    seed = _resolve_seed(seed)
    block_size = app_config['BLOCK_SIZE'] if block_size is None else block_size
    experiment = ExperimentConfig(
        directions=_resolve_directions(a, b, c, a_bisect_diff, default=sqrt2_instance()),
        times=times,
        initial_state=_parse_initial(initial),
        rotation=_parse_precession(precession),
        trials=app_config['DEFAULT_TRIALS'] if trials is None else trials,
        seed=seed,
        selection=selection,
        block_size=block_size,
        shards=app_config['WORKERS'] if shards is None else shards,
    )
    sigma = app_config['SIGNIFICANCE_SIGMA'] if sigma is None else sigma

    estimates = estimate_correlations(experiment)
    exact = exact_reference(experiment)
    report = check_inequality(estimates.correlations, sigma=sigma)
    z_scores = {
        label: (p - q) / se if se > 0 else None
        for label, p, q, se in zip(PAIR_LABELS, estimates.correlations.values(), exact.values(),
                                   estimates.correlations.errors())
    }
    if records_out:
        write_records_csv(iter_trials(experiment), records_out)

    payload = {
        'experiment': experiment.to_dict(),
        'estimates': estimates.to_dict(),
        'exact': exact.to_dict(),
        'z_scores': z_scores,
        'report': report.to_dict(),
    }
    lines = [f"Trials = {experiment.trials} (seed {seed}, selection {selection})"]
    lines += [f"  {label}: {n} trials" for label, n in zip(PAIR_LABELS, estimates.counts)]
    lines += ['Estimated correlations'] + _correlation_lines(estimates.correlations)
    lines += ['Exact quantum correlations'] + _correlation_lines(exact) + _report_lines(report)
    resolved = {'trials': experiment.trials, 'seed': seed, 'shards': experiment.shards,
                'sigma': sigma, 'block_size': block_size}
    _emit(ctx, payload, '\n'.join(lines), as_json, out, manifest, resolved=resolved,
          extra_outputs=[records_out], always_manifest=True)


@cli.command('analyze')
@click.option('--records', 'records_file', type=click.Path(exists=True, dir_okay=False), required=True,
              help='CSV with columns pair,first,second (pair in AB/AC/BC, outcomes +1/-1).')
@click.option('--sigma', type=click.FloatRange(min=0.0), help='Significance threshold in standard errors.')
@output_options
@click.pass_context
@cli_errors
def cmd_analyze(ctx, records_file, sigma, as_json, out, manifest):
    """Test recorded dichotomic outcomes from any experiment against the inequality."""
    sigma = current_app.config['SIGNIFICANCE_SIGMA'] if sigma is None else sigma
    try:
        records = read_records_csv(records_file)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint='--records')
    estimates = estimate_from_records(records)
    report = check_inequality(estimates.correlations, sigma=sigma)

    payload = {'records': len(records), 'estimates': estimates.to_dict(), 'report': report.to_dict()}
    lines = [f"Records = {len(records)}"]
    lines += [f"  {label}: {n} trials" for label, n in zip(PAIR_LABELS, estimates.counts)]
    lines += ['Estimated correlations'] + _correlation_lines(estimates.correlations) + _report_lines(report)
    _emit(ctx, payload, '\n'.join(lines), as_json, out, manifest, resolved={'sigma': sigma})


@cli.command('sweep')
@click.option('--grid-points', type=int, help='Uniform grid size over u = b.c in [-1, 1] (default 201).')
@click.option('--out', type=click.Path(dir_okay=False), required=True, help='Table file to write.')
@click.option('--format', 'fmt', type=click.Choice(['csv', 'json']), default='csv', show_default=True)
@click.option('--json', 'as_json', is_flag=True, help='Print the summary as JSON.')
@click.option('--manifest', type=click.Path(dir_okay=False), help='Also write the run manifest here.')
@click.option('--config', 'config_file', type=click.Path(exists=True, dir_okay=False),
              callback=_load_config_file, is_eager=True, expose_value=False,
              help='JSON file (or run manifest) supplying option values; flags override it.')
@click.pass_context
@cli_errors
def cmd_sweep(ctx, grid_points, out, fmt, as_json, manifest):
    """Write g(u) = sqrt(2 - 2u) + u, each row realized by an explicit triple."""
    grid_points = current_app.config['SWEEP_GRID_POINTS'] if grid_points is None else grid_points
    rows = sweep_functional(grid_points)
    write_text(out, export_data([r.to_dict() for r in rows], fmt))

    best = max(rows, key=lambda r: r.functional)
    payload = {'out': out, 'format': fmt, 'grid_points': grid_points,
               'max': best.to_dict(), 'rows_checked': len(rows)}
    text = '\n'.join([
        f"Wrote {len(rows)} rows to {out} ({fmt})",
        f"Grid maximum: g({_fmt(best.u)}) = {_fmt(best.functional)}",
        "Every row matches |a.b - a.c| + b.c on its explicit triple within 1e-12",
    ])
    _emit(ctx, payload, text, as_json, out, manifest, resolved={'grid_points': grid_points},
          write_payload=False)


@cli.command('derive-check')
@click.option('--random', 'random_count', type=click.IntRange(min=1), required=True,
              help='Number of random mixtures.')
@click.option('--seed', type=SEED, help='Seed (default: TEMPO_BELL_SEED or 0).')
@output_options
@click.pass_context
@cli_errors
def cmd_derive_check(ctx, random_count, seed, as_json, out, manifest):
    """Numerically check each step of the inequality's derivation on random mixtures."""
    seed = _resolve_seed(seed)
    failures = []
    worst = {'identity_residual': 0.0, 'absolute_bound_margin': math.inf, 'bell_margin': math.inf}
    for index, mixture in enumerate(_random_mixtures(random_count, seed)):
        report = verify_derivation_chain(mixture)
        worst['identity_residual'] = max(worst['identity_residual'], report.identity_residual)
        worst['absolute_bound_margin'] = min(worst['absolute_bound_margin'], report.absolute_bound_margin)
        worst['bell_margin'] = min(worst['bell_margin'], report.bell_margin)
        if not report.passed:
            failures.append({'index': index, 'mixture': mixture.to_dict(), 'report': report.to_dict()})

    passed = random_count - len(failures)
    payload = {'mixtures': random_count, 'seed': seed, 'passed': passed,
               'failures': failures, 'worst': worst}
    lines = [
        f"Derivation chain on {random_count} random mixtures (seed {seed}): {passed} passed, {len(failures)} failed",
        f"  max |identity residual| = {_fmt(worst['identity_residual'])}",
        f"  min margin after taking absolute values = {_fmt(worst['absolute_bound_margin'])}",
        f"  min margin of |P(a,b) - P(a,c)| <= 1 - P(b,c) = {_fmt(worst['bell_margin'])}",
        'PASS' if not failures else 'FAIL',
    ]
    _emit(ctx, payload, '\n'.join(lines), as_json, out, manifest, resolved={'seed': seed})
    if failures:
        ctx.exit(EXIT_CHECK_FAILED)


@cli.command('runs')
@click.option('--limit', type=click.IntRange(min=1), default=20, show_default=True)
@click.option('--json', 'as_json', is_flag=True)
@cli_errors
def cmd_runs(limit, as_json):
    """List recorded runs from the ledger, newest first."""
    records = current_app.extensions['run_ledger'].get_runs(limit=limit)
    if as_json:
        click.echo(export_data([r.to_dict() for r in records], 'json'))
        return
    rows = [{'id': str(r.id), 'command': r.command, 'seed': r.seed or '-',
             'created_at': r.created_at.strftime('%Y-%m-%d %H:%M:%S'), 'output': r.output_path or '-'}
            for r in records]
    if not rows:
        click.echo('No runs recorded.')
        return
    click.echo(DataFormatter.format_table(rows, ['id', 'command', 'seed', 'created_at', 'output']))


def main(argv=None):
    return cli.main(args=argv, prog_name='tempo-bell', obj=ScriptInfo(create_app=create_app))


if __name__ == '__main__':
    main()
