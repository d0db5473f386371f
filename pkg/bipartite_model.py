# bipartite_model.py - 核スピン×電子スピン系（回転波近似後の H_I）の固有解と状態
#
# テンソル積の順序は (核, 電子)、各因子の基底は (|e>, |g>)。
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

import qm_linalg as qm
from estimation import ParamFamily
from qestim_errors import InvalidState
from qestim_logging import get_logger

logger = get_logger("bipartite")

QUARTER_PI = math.pi / 4
DIMS = (2, 2)

# 固有ベクトルを書いた基底 (e^e g^n, e^e e^n, g^e g^n, g^e e^n) → (核, 電子) 基底の位置
_EIGEN_BASIS_TO_INDEX = (2, 0, 3, 1)


@dataclass(frozen=True)
class BipartiteParams:
    omega_l: float            # 核ラーモア周波数（推定対象）
    Omega_1: float = 3.0      # ラビ周波数
    g: float = 2.0            # 結合強度
    phi1: float = QUARTER_PI  # 核の初期角
    phi2: float = QUARTER_PI  # 電子の初期角
    t: float = 0.0

    @property
    def alpha(self):
        return 0.5 * (self.omega_l - self.Omega_1)

    @property
    def beta(self):
        return 0.5 * (self.omega_l + self.Omega_1)

    def at(self, omega_l=None, t=None):
        changes = {}
        if omega_l is not None:
            changes['omega_l'] = omega_l
        if t is not None:
            changes['t'] = t
        return replace(self, **changes)

    def validate(self):
        if self.alpha ** 2 + self.g ** 2 == 0.0 or self.beta ** 2 + self.g ** 2 == 0.0:
            raise InvalidState("degenerate coupling: alpha^2+g^2 and beta^2+g^2 must be positive")


NUCLEUS_IZ = qm.kron(qm.SIGMA_Z, qm.IDENTITY2)


def hamiltonian(omega_l, Omega_1, g):
    """H_I = (Ω1/2) I⊗σx + (ω_l/2) Iz⊗I + g Ix⊗σz"""
    return (0.5 * Omega_1 * qm.kron(qm.IDENTITY2, qm.SIGMA_X)
            + 0.5 * omega_l * NUCLEUS_IZ
            + g * qm.kron(qm.SIGMA_X, qm.SIGMA_Z))


# ∂H_I/∂ω_l = Iz/2
D_HAMILTONIAN = 0.5 * NUCLEUS_IZ


def initial_state(phi1, phi2):
    psi = np.kron(qm.qubit_state(phi1), qm.qubit_state(phi2))
    return qm.ket_to_dm(psi)


def mixing_angle_pair(x, g):
    """tan(+) = g/(x + r), tan(-) = g/(x - r), r = √(x² + g²)"""
    if g == 0.0:
        plus = 0.0 if x > 0 else 0.5 * math.pi
        return plus, plus - 0.5 * math.pi
    r = math.hypot(x, g)
    return math.atan(g / (x + r)), math.atan(g / (x - r))


def mixing_angles(p):
    """(θ+, θ-, φ+, φ-)"""
    theta_p, theta_m = mixing_angle_pair(p.alpha, p.g)
    varphi_p, varphi_m = mixing_angle_pair(p.beta, p.g)
    return theta_p, theta_m, varphi_p, varphi_m


class BipartiteEigen(NamedTuple):
    energies: np.ndarray  # (E1, E2, E3, E4)
    vectors: np.ndarray   # 列 k が |E_{k+1}>


def _reorder(v):
    out = np.zeros(4)
    for k, idx in enumerate(_EIGEN_BASIS_TO_INDEX):
        out[idx] = v[k]
    return out


def bipartite_eigensystem(p):
    p.validate()
    tp, tm, fp, fm = mixing_angles(p)
    ra = math.hypot(p.alpha, p.g)
    rb = math.hypot(p.beta, p.g)
    h = math.sqrt(0.5)
    raw = [
        (math.cos(tp), -math.sin(tp), math.cos(tp), math.sin(tp)),
        (-math.cos(fp), math.sin(fp), math.cos(fp), math.sin(fp)),
        (math.cos(tm), -math.sin(tm), math.cos(tm), math.sin(tm)),
        (-math.cos(fm), math.sin(fm), math.cos(fm), math.sin(fm)),
    ]
    V = np.column_stack([_reorder(np.array(v) * h) for v in raw]).astype(complex)
    return BipartiteEigen(np.array([-ra, -rb, ra, rb]), V)


def bipartite_state(p):
    """(rho, |Φ>) を返す。φ1 = φ2 = π/4 以外は汎用ユニタリ発展"""
    if abs(p.phi1 - QUARTER_PI) < 1e-12 and abs(p.phi2 - QUARTER_PI) < 1e-12:
        eig = bipartite_eigensystem(p)
        tp, tm, fp, fm = mixing_angles(p)
        weights = math.sqrt(0.5) * np.array([math.cos(tp), math.sin(fp), math.cos(tm), math.sin(fm)])
        phases = np.exp(-1j * eig.energies * p.t)
        psi = eig.vectors @ (phases * weights)
        return qm.ket_to_dm(psi), psi

    logger.debug(f"phi1={p.phi1:.6f}, phi2={p.phi2:.6f}: generic unitary path")
    psi0 = np.kron(qm.qubit_state(p.phi1), qm.qubit_state(p.phi2))
    if p.t == 0:
        return qm.ket_to_dm(psi0), psi0
    U = qm.unitary_from_eig(hamiltonian(p.omega_l, p.Omega_1, p.g), p.t)
    psi = U @ psi0
    return qm.ket_to_dm(psi), psi


def bipartite_dstate(p):
    """∂rho/∂ω_l（行列指数の Fréchet 微分による厳密値）"""
    _, drho = qm.evolve_unitary_derivative(hamiltonian(p.omega_l, p.Omega_1, p.g), D_HAMILTONIAN,
                                           initial_state(p.phi1, p.phi2), p.t)
    return drho


def bipartite_family(Omega_1=3.0, g=2.0, phi1=QUARTER_PI, phi2=QUARTER_PI):
    """θ = ω_l の ParamFamily（dims = (核, 電子)）"""
    base = BipartiteParams(omega_l=0.0, Omega_1=Omega_1, g=g, phi1=phi1, phi2=phi2)
    return ParamFamily(
        dim=4,
        state_at=lambda w, t: bipartite_state(base.at(omega_l=w, t=t))[0],
        derivative_at=lambda w, t: bipartite_dstate(base.at(omega_l=w, t=t)),
        dims=DIMS,
        label=f"bipartite(Omega_1={Omega_1}, g={g}, phi1={phi1}, phi2={phi2})",
    )
