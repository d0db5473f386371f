# sweep_runner.py - 散布図・等高線グリッド・境界曲線のデータセット生成
import math
import os
import queue
import threading
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from bipartite_model import BipartiteParams, bipartite_family
from driven_qubit_model import driven_qubit_family
from estimation import (FORM_KEYS, Observable, context_from_state, reduced_qfi,
                        report_from_context)
from lindblad_dynamics import JUMPS, NoiseSpec, lindblad_family
from qestim_errors import DivergentVariance, SpecError
from qestim_logging import get_logger

logger = get_logger("sweep")

QFI_FLOOR = 1e-12
QUARTER_PI = math.pi / 4

MODELS = ("driven-qubit", "bipartite", "bipartite-noisy")
MODES = ("scatter", "grid", "curves")
REFERENCES = ("sld", "zero")

# モデルごとの既定パラメータ（theta は推定対象 ω_a / ω_l の値）
MODEL_DEFAULTS = {
    "driven-qubit": {"theta": 2.0, "t": 1.0, "F": 1.0, "phi": QUARTER_PI},
    "bipartite": {"theta": 2.0, "t": 2.0, "Omega_1": 3.0, "g": 2.0,
                  "phi1": QUARTER_PI, "phi2": QUARTER_PI},
    "bipartite-noisy": {"theta": 2.0, "t": 2.0, "Omega_1": 3.0, "g": 2.0,
                        "phi1": QUARTER_PI, "phi2": QUARTER_PI,
                        "kappa": 0.2, "jump": "dephasing", "dt": None},
}

MODEL_FORMS = {
    "driven-qubit": ("qubit",),
    "bipartite": ("local-electron", "local-nucleus", "joint"),
    "bipartite-noisy": ("local-electron", "local-nucleus", "joint"),
}

PARAM_AXES = {
    "driven-qubit": ("theta", "t", "phi"),
    "bipartite": ("theta", "t", "phi1", "phi2"),
    "bipartite-noisy": ("theta", "t", "phi1", "phi2"),
}

# config.json の "sweep" セクションで上書き
SWEEP_DEFAULTS = {
    'threads': 0,
    'sample_low': -0.5,
    'sample_high': 0.5,
    'default_axis_min': -1.0,
    'default_axis_max': 1.0,
    'default_axis_count': 101,
}


def apply_settings(section):
    for key in SWEEP_DEFAULTS:
        if key in section:
            SWEEP_DEFAULTS[key] = section[key]


def resolve_threads(requested=None):
    """0 以下・未指定ならマシンの並列数"""
    n = SWEEP_DEFAULTS['threads'] if requested is None else requested
    if not n or n <= 0:
        n = os.cpu_count() or 1
    return int(n)


# ============================================================
# スペック
# ============================================================
@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    count: int

    def values(self):
        return np.linspace(self.min, self.max, self.count)

    def to_dict(self):
        return {'name': self.name, 'min': self.min, 'max': self.max, 'count': self.count}


@dataclass
class SweepSpec:
    model: str
    mode: str
    form: str
    axes: List[Axis] = field(default_factory=list)
    fixed: Dict[str, float] = field(default_factory=dict)
    params: Dict[str, object] = field(default_factory=dict)
    seed: int = 0
    samples: int = 0
    reference: str = "sld"
    sample_range: tuple = (-0.5, 0.5)

    @classmethod
    def from_dict(cls, data):
        """JSON 由来の辞書を検証して SweepSpec にする（メタデータの "spec" ラッパーも可）"""
        if not isinstance(data, dict):
            raise SpecError("sweep spec must be a JSON object")
        if isinstance(data.get('spec'), dict):
            data = data['spec']
        known = {'model', 'mode', 'form', 'axes', 'fixed', 'params', 'seed',
                 'samples', 'reference', 'sample_range'}
        unknown = set(data) - known
        if unknown:
            raise SpecError(f"unknown spec keys: {sorted(unknown)}")

        model = data.get('model')
        if model not in MODELS:
            raise SpecError(f"model must be one of {MODELS}, got {model!r}")
        mode = data.get('mode')
        if mode not in MODES:
            raise SpecError(f"mode must be one of {MODES}, got {mode!r}")
        form = data.get('form', MODEL_FORMS[model][0])
        if form not in MODEL_FORMS[model]:
            raise SpecError(f"form {form!r} is not available for model {model!r}")

        params = parse_params(model, _require_type(data, 'params', dict, {}))
        axes = [_parse_axis(a) for a in _require_type(data, 'axes', list, [])]
        try:
            fixed = {k: float(v) for k, v in _require_type(data, 'fixed', dict, {}).items()}
        except (TypeError, ValueError) as e:
            raise SpecError(f"fixed coefficients must be numbers: {e}")
        for name in fixed:
            if name not in FORM_KEYS[form]:
                raise SpecError(f"fixed coefficient {name!r} is not valid for form {form!r}")

        seed = data.get('seed', 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2 ** 64:
            raise SpecError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
        samples = data.get('samples', 0)
        if not isinstance(samples, int) or isinstance(samples, bool) or samples < 0:
            raise SpecError(f"samples must be a non-negative integer, got {samples!r}")
        reference = data.get('reference', 'sld')
        if reference not in REFERENCES:
            raise SpecError(f"reference must be one of {REFERENCES}, got {reference!r}")
        low, high = _sample_range(data.get('sample_range'))
        if not low < high:
            raise SpecError(f"sample_range must satisfy low < high, got [{low}, {high}]")

        spec = cls(model=model, mode=mode, form=form, axes=axes, fixed=fixed, params=params,
                   seed=seed, samples=samples, reference=reference,
                   sample_range=(float(low), float(high)))
        spec._check_axes()
        return spec

    def _check_axes(self):
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise SpecError(f"duplicate axis names: {names}")
        if self.mode == "grid":
            if not 1 <= len(self.axes) <= 2:
                raise SpecError("grid mode needs one or two coefficient axes")
            for a in self.axes:
                if a.name not in FORM_KEYS[self.form]:
                    raise SpecError(f"axis {a.name!r} is not a coefficient of form {self.form!r}")
                if a.name in self.fixed:
                    raise SpecError(f"axis {a.name!r} is also fixed")
            return
        if self.mode == "curves" and len(self.axes) != 1:
            raise SpecError("curves mode takes exactly one axis")
        if len(self.axes) > 1:
            raise SpecError("scatter mode takes at most one axis")
        for a in self.axes:
            if a.name not in PARAM_AXES[self.model]:
                raise SpecError(f"axis {a.name!r} must be one of {PARAM_AXES[self.model]}")

    def to_dict(self):
        return {
            'model': self.model,
            'mode': self.mode,
            'form': self.form,
            'axes': [a.to_dict() for a in self.axes],
            'fixed': dict(self.fixed),
            'params': dict(self.params),
            'seed': self.seed,
            'samples': self.samples,
            'reference': self.reference,
            'sample_range': list(self.sample_range),
        }


def _require_type(data, key, kind, default):
    value = data.get(key, default)
    if not isinstance(value, kind):
        raise SpecError(f"{key!r} must be a JSON {'object' if kind is dict else 'array'}, got {value!r}")
    return value


def _sample_range(value):
    if value is None:
        return float(SWEEP_DEFAULTS['sample_low']), float(SWEEP_DEFAULTS['sample_high'])
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise SpecError(f"sample_range must be [low, high], got {value!r}")
    try:
        return float(value[0]), float(value[1])
    except (TypeError, ValueError):
        raise SpecError(f"sample_range entries must be numbers, got {value!r}")


def parse_params(model, given):
    params = dict(MODEL_DEFAULTS[model])
    for key, value in given.items():
        if key not in params:
            raise SpecError(f"unknown parameter {key!r} for model {model!r}")
        if key == 'jump':
            if value not in JUMPS:
                raise SpecError(f"jump must be one of {sorted(JUMPS)}, got {value!r}")
            params[key] = value
            continue
        if key == 'dt' and value is None:
            params[key] = None
            continue
        try:
            params[key] = float(value)
        except (TypeError, ValueError):
            raise SpecError(f"parameter {key!r} must be a number, got {value!r}")
    if model == "bipartite-noisy":
        NoiseSpec(kappa=params['kappa'], jump=params['jump'], dt=params['dt'])
    return params


def _parse_axis(entry):
    if not isinstance(entry, dict) or 'name' not in entry:
        raise SpecError(f"axis entry needs a name: {entry!r}")
    count = entry.get('count', SWEEP_DEFAULTS['default_axis_count'])
    if not isinstance(count, int) or isinstance(count, bool) or count < 2:
        raise SpecError(f"axis {entry['name']!r}: count must be an integer >= 2, got {count!r}")
    try:
        lo = float(entry.get('min', SWEEP_DEFAULTS['default_axis_min']))
        hi = float(entry.get('max', SWEEP_DEFAULTS['default_axis_max']))
    except (TypeError, ValueError):
        raise SpecError(f"axis {entry['name']!r}: min/max must be numbers")
    return Axis(name=entry['name'], min=lo, max=hi, count=count)


@dataclass
class SweepResult:
    columns: List[str]
    rows: List[dict]
    metadata: dict


# ============================================================
# 状態族
# ============================================================
def build_family(model, params):
    if model == "driven-qubit":
        return driven_qubit_family(F=params['F'], phi=params['phi'])
    if model == "bipartite":
        return bipartite_family(Omega_1=params['Omega_1'], g=params['g'],
                                phi1=params['phi1'], phi2=params['phi2'])
    noise = NoiseSpec(kappa=params['kappa'], jump=params['jump'], dt=params['dt'])
    base = BipartiteParams(omega_l=params['theta'], Omega_1=params['Omega_1'], g=params['g'],
                           phi1=params['phi1'], phi2=params['phi2'])
    return lindblad_family(base, noise)


def params_at(spec, axis_name=None, value=None):
    """軸の値を差し込んだパラメータ（phi1 軸は phi2 も同じ値）"""
    params = dict(spec.params)
    if axis_name is not None:
        params[axis_name] = float(value)
        if axis_name == "phi1":
            params['phi2'] = float(value)
    return params


def _state_at(model, params):
    family = build_family(model, params)
    return family, family.evaluate(params['theta'], params['t'])


def _context_at(model, params):
    _, (rho, drho) = _state_at(model, params)
    return context_from_state(rho, drho)


# ============================================================
# ワーカープール
# ============================================================
def run_cells(func, items, threads=None):
    """items を func で評価し、入力順の結果リストを返す"""
    items = list(items)
    results = [None] * len(items)
    workers = min(resolve_threads(threads), len(items))
    if workers <= 1:
        return [func(item) for item in items]

    tasks = queue.Queue()
    for index in range(len(items)):
        tasks.put(index)
    errors = []
    lock = threading.Lock()

    def worker():
        while True:
            try:
                index = tasks.get_nowait()
            except queue.Empty:
                return
            try:
                results[index] = func(items[index])
            except Exception as e:
                with lock:
                    errors.append((index, e))
                return

    pool = [threading.Thread(target=worker, daemon=True) for _ in range(workers)]
    for th in pool:
        th.start()
    for th in pool:
        th.join()
    if errors:
        # スケジュールに依らず最初のセルのエラーを返す
        raise min(errors, key=lambda item: item[0])[1]
    return results


def _inverse(q):
    return None if q < QFI_FLOOR else 1.0 / q


def _try_report(A, ctx):
    try:
        return report_from_context(A, ctx)
    except DivergentVariance as e:
        logger.debug(f"divergent cell: {e}")
        return None


def _metadata(spec, columns, rows):
    return {'spec': spec.to_dict(), 'columns': list(columns), 'row_count': len(rows)}


# ============================================================
# グリッド
# ============================================================
def _product(value_lists):
    grids = np.meshgrid(*value_lists, indexing="ij")
    return list(zip(*(g.reshape(-1) for g in grids)))


def run_grid(spec, threads=None):
    """係数軸の等高線グリッド（行優先、Λ と D は生の値）"""
    if spec.mode != "grid":
        raise SpecError(f"run_grid needs mode=grid, got {spec.mode!r}")
    ctx = _context_at(spec.model, spec.params)
    names = [a.name for a in spec.axes]

    def cell(values):
        row = dict(zip(names, (float(v) for v in values)))
        coeffs = dict(spec.fixed)
        coeffs.update(row)
        report = _try_report(Observable.from_coeffs(spec.form, coeffs), ctx)
        if report is None:
            row['variance'] = None
            row['qfi'] = ctx.qfi
            row['lambda'] = None
            row['distance'] = None
            row['status'] = "divergent"
        else:
            row['variance'] = report.variance
            row['qfi'] = report.qfi
            row['lambda'] = report.lambda_
            row['distance'] = report.distance
            row['status'] = "ok"
        return row

    rows = run_cells(cell, _product([a.values() for a in spec.axes]), threads)
    logger.debug(f"grid: {len(rows)} cells, qfi={ctx.qfi:.6g}")
    columns = names + ['variance', 'qfi', 'lambda', 'distance', 'status']
    return SweepResult(columns, rows, _metadata(spec, columns, rows))


# ============================================================
# 散布図
# ============================================================
def run_scatter(spec, threads=None):
    """ランダム観測量 A = A_ref + δA の散布データ（サンプルは先に全て引く）"""
    if spec.mode != "scatter":
        raise SpecError(f"run_scatter needs mode=scatter, got {spec.mode!r}")
    axis = spec.axes[0] if spec.axes else None
    keys = FORM_KEYS[spec.form]
    rng = np.random.default_rng(spec.seed)
    low, high = spec.sample_range
    draws = rng.uniform(low, high, size=(spec.samples, len(keys)))

    axis_values = list(axis.values()) if axis is not None else [None]
    if spec.samples == 0:
        axis_values = []
    contexts = run_cells(
        lambda v: _context_at(spec.model, params_at(spec, axis.name if axis else None, v)),
        axis_values, threads)

    def cell(task):
        i, k = task
        ctx = contexts[i]
        delta = Observable.from_coeffs(spec.form, dict(zip(keys, draws[k]))).matrix
        A = ctx.L + delta if spec.reference == "sld" else delta
        row = {'sample': k}
        if axis is not None:
            row[axis.name] = float(axis_values[i])
        report = _try_report(A, ctx)
        if report is None:
            row['variance'] = None
            row['lambda'] = None
            row['inv_qfi'] = _inverse(ctx.qfi)
            row['status'] = "divergent"
        else:
            row['variance'] = report.variance
            row['lambda'] = report.lambda_
            row['inv_qfi'] = report.qcrb
            row['status'] = "ok"
        return row

    tasks = [(i, k) for i in range(len(contexts)) for k in range(spec.samples)]
    rows = run_cells(cell, tasks, threads)
    columns = ['sample'] + ([axis.name] if axis is not None else []) + ['variance', 'lambda', 'inv_qfi', 'status']
    return SweepResult(columns, rows, _metadata(spec, columns, rows))


# ============================================================
# 境界曲線
# ============================================================
def run_curves(spec, threads=None):
    """全系・核・電子の QCRB 曲線（driven-qubit は全系のみ）"""
    if spec.mode != "curves":
        raise SpecError(f"run_curves needs mode=curves, got {spec.mode!r}")
    axis = spec.axes[0]
    bipartite = spec.model != "driven-qubit"

    def cell(value):
        family, (rho, drho) = _state_at(spec.model, params_at(spec, axis.name, value))
        ctx = context_from_state(rho, drho)
        row = {axis.name: float(value), 'inv_qfi': _inverse(ctx.qfi)}
        qfis = [ctx.qfi]
        if bipartite:
            q_n = reduced_qfi(rho, drho, family.dims, "a")
            q_e = reduced_qfi(rho, drho, family.dims, "b")
            row['inv_qfi_nucleus'] = _inverse(q_n)
            row['inv_qfi_electron'] = _inverse(q_e)
            qfis += [q_n, q_e]
        row['status'] = "ok" if min(qfis) >= QFI_FLOOR else "unbounded-subsystem"
        return row

    rows = run_cells(cell, list(axis.values()), threads)
    columns = [axis.name, 'inv_qfi']
    if bipartite:
        columns += ['inv_qfi_nucleus', 'inv_qfi_electron']
    columns.append('status')
    return SweepResult(columns, rows, _metadata(spec, columns, rows))


def run_sweep(spec, threads=None):
    runner = {"scatter": run_scatter, "grid": run_grid, "curves": run_curves}[spec.mode]
    logger.debug(f"{spec.mode} sweep on {spec.model} ({spec.form})")
    return runner(spec, threads)
