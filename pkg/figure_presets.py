# figure_presets.py - 図ごとの組み込み SweepSpec
import math
from dataclasses import dataclass

from qestim_errors import SpecError
from sweep_runner import SweepSpec

PI = math.pi
QUARTER_PI = PI / 4
DEFAULT_SEED = 42

DRIVEN = {"theta": 2.0, "F": 1.0, "phi": QUARTER_PI}
BIPARTITE = {"theta": 2.0, "Omega_1": 3.0, "g": 2.0, "phi1": QUARTER_PI, "phi2": QUARTER_PI, "t": 2.0}


def _axis(name, lo=-1.0, hi=1.0, count=101):
    return {"name": name, "min": lo, "max": hi, "count": count}


def _local_electron_grid(model, extra=None):
    params = dict(BIPARTITE)
    params.update(extra or {})
    return {
        "model": model, "mode": "grid", "form": "local-electron",
        "fixed": {"Ae_s": -1.0, "Ae_z": -0.25},
        "axes": [_axis("Ae_x"), _axis("Ae_y")],
        "params": params,
    }


_JOINT_GRID = {
    "model": "bipartite", "mode": "grid", "form": "joint",
    "fixed": {"An_s": 2.0, "An_x": 1.0, "An_z": -1.0, "Ae_s": 0.0, "Ae_x": 1.0, "Ae_z": -0.5},
    "axes": [_axis("An_y"), _axis("Ae_y")],
    "params": dict(BIPARTITE),
}


@dataclass(frozen=True)
class FigurePreset:
    description: str
    spec: dict


FIGURES = {
    "1a": FigurePreset(
        "driven qubit: random A = L + dA over the initial angle phi (t=1.5)",
        {"model": "driven-qubit", "mode": "scatter", "samples": 20, "seed": DEFAULT_SEED,
         "axes": [_axis("phi", 0.0, PI, 31)], "params": dict(DRIVEN, t=1.5)}),
    "1b": FigurePreset(
        "driven qubit: random A = L + dA over time t (phi=pi/4)",
        {"model": "driven-qubit", "mode": "scatter", "samples": 20, "seed": DEFAULT_SEED,
         "axes": [_axis("t", 0.0, 10.0, 41)], "params": dict(DRIVEN, t=1.5)}),
    "2": FigurePreset(
        "driven qubit: Lambda and distance over (A_x, A_y), A_s=-0.7, A_z=0.2, t=1",
        {"model": "driven-qubit", "mode": "grid", "form": "qubit",
         "fixed": {"A_s": -0.7, "A_z": 0.2}, "axes": [_axis("A_x"), _axis("A_y")],
         "params": dict(DRIVEN, t=1.0)}),
    "3a": FigurePreset(
        "bipartite: Lambda for local electron observables over (Ae_x, Ae_y)",
        _local_electron_grid("bipartite")),
    "3b": FigurePreset(
        "bipartite: distance for local electron observables over (Ae_x, Ae_y)",
        _local_electron_grid("bipartite")),
    "3c": FigurePreset(
        "bipartite: Lambda for joint observables over (An_y, Ae_y)",
        _JOINT_GRID),
    "3d": FigurePreset(
        "bipartite: distance for joint observables over (An_y, Ae_y)",
        _JOINT_GRID),
    "4a": FigurePreset(
        "bipartite: global / nucleus / electron bounds over phi1 = phi2 (t=2)",
        {"model": "bipartite", "mode": "curves", "axes": [_axis("phi1", 0.0, PI, 101)],
         "params": dict(BIPARTITE)}),
    "4b": FigurePreset(
        "bipartite: global / nucleus / electron bounds over t (phi1 = phi2 = pi/4)",
        {"model": "bipartite", "mode": "curves", "axes": [_axis("t", 0.0, 10.0, 101)],
         "params": dict(BIPARTITE)}),
    "5": FigurePreset(
        "driven qubit: variance vs Lambda for 200 random A = L + dA (t=1)",
        {"model": "driven-qubit", "mode": "scatter", "samples": 200, "seed": DEFAULT_SEED,
         "params": dict(DRIVEN, t=1.0)}),
    "6": FigurePreset(
        "noisy bipartite (dephasing, kappa=0.2): local electron grid",
        _local_electron_grid("bipartite-noisy", {"kappa": 0.2, "jump": "dephasing"})),
    "7": FigurePreset(
        "noisy bipartite (dissipation, kappa=0.2): local electron grid",
        _local_electron_grid("bipartite-noisy", {"kappa": 0.2, "jump": "dissipation"})),
}


def preset_spec(figure_id, seed=None):
    """図 ID から SweepSpec を作る（seed 指定で上書き）"""
    if figure_id not in FIGURES:
        raise SpecError(f"unknown figure id {figure_id!r} (available: {', '.join(FIGURES)})")
    data = dict(FIGURES[figure_id].spec)
    if seed is not None:
        data['seed'] = seed
    return SweepSpec.from_dict(data)
