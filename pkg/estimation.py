# estimation.py - SLD・QFI・誤差伝播・Λ・最小ユークリッド距離などの推定量
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

import qm_linalg as qm
from qestim_errors import (DegenerateProbability, DimensionMismatch, DivergentVariance,
                           InvalidState, MissingCoefficients, NonHermitian,
                           NonSaturatingReference)
from qestim_logging import get_logger

logger = get_logger("estimation")

# ---- 数値許容値（config.json の "estimation" で上書き可能） ----
CLUSTER_TOL = 1e-9
SATURATION_TOL = 1e-9
FD_STEP = 1e-6
SLD_DENOM_TOL = 1e-12
DERIVATIVE_TOL = 1e-12
STATE_PSD_TOL = 1e-8
STATE_TRACE_TOL = 1e-8
PROB_TOL = 1e-12
PROB_DERIV_TOL = 1e-10


def apply_settings(section):
    """config.json の estimation セクションを反映"""
    global CLUSTER_TOL, SATURATION_TOL, FD_STEP
    CLUSTER_TOL = section.get('cluster_tol', CLUSTER_TOL)
    SATURATION_TOL = section.get('saturation_tol', SATURATION_TOL)
    FD_STEP = section.get('fd_step', FD_STEP)


# ============================================================
# 観測量
# ============================================================
QUBIT_KEYS = ("A_s", "A_x", "A_y", "A_z")
NUCLEUS_KEYS = ("An_s", "An_x", "An_y", "An_z")
ELECTRON_KEYS = ("Ae_s", "Ae_x", "Ae_y", "Ae_z")

FORM_KEYS = {
    "qubit": QUBIT_KEYS,
    "local-electron": ELECTRON_KEYS,
    "local-nucleus": NUCLEUS_KEYS,
    "joint": NUCLEUS_KEYS + ELECTRON_KEYS,
}


def pauli_combination(s, x, y, z):
    """A_s I + A_x σx + A_y σy + A_z σz"""
    return s * qm.IDENTITY2 + x * qm.SIGMA_X + y * qm.SIGMA_Y + z * qm.SIGMA_Z


def _pick(coeffs, keys):
    return [float(coeffs.get(k, 0.0)) for k in keys]


@dataclass(frozen=True)
class Observable:
    matrix: np.ndarray
    coeffs: Optional[Dict[str, float]] = None
    form: Optional[str] = None

    def __post_init__(self):
        M = qm.as_matrix(self.matrix)
        if not qm.is_hermitian(M):
            raise NonHermitian(f"observable is not Hermitian (defect {qm.hermiticity_defect(M):.3e})")
        object.__setattr__(self, 'matrix', M)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, M):
        return cls(qm.as_matrix(M))

    @classmethod
    def qubit(cls, s=0.0, x=0.0, y=0.0, z=0.0):
        coeffs = dict(zip(QUBIT_KEYS, (s, x, y, z)))
        return cls(pauli_combination(s, x, y, z), coeffs, "qubit")

    @classmethod
    def local_electron(cls, s=0.0, x=0.0, y=0.0, z=0.0):
        """I^n ⊗ A^e"""
        coeffs = dict(zip(ELECTRON_KEYS, (s, x, y, z)))
        return cls(qm.kron(qm.IDENTITY2, pauli_combination(s, x, y, z)), coeffs, "local-electron")

    @classmethod
    def local_nucleus(cls, s=0.0, x=0.0, y=0.0, z=0.0):
        """A^n ⊗ I^e"""
        coeffs = dict(zip(NUCLEUS_KEYS, (s, x, y, z)))
        return cls(qm.kron(pauli_combination(s, x, y, z), qm.IDENTITY2), coeffs, "local-nucleus")

    @classmethod
    def joint(cls, nucleus, electron):
        """A^n ⊗ A^e（各因子は (s, x, y, z)）"""
        coeffs = dict(zip(NUCLEUS_KEYS, nucleus))
        coeffs.update(zip(ELECTRON_KEYS, electron))
        M = qm.kron(pauli_combination(*nucleus), pauli_combination(*electron))
        return cls(M, coeffs, "joint")

    @classmethod
    def from_coeffs(cls, form, coeffs):
        """form 名と係数辞書から生成（欠けた係数は 0）"""
        if form not in FORM_KEYS:
            raise MissingCoefficients(f"unknown observable form {form!r}")
        unknown = set(coeffs) - set(FORM_KEYS[form])
        if unknown:
            raise MissingCoefficients(f"coefficients {sorted(unknown)} are not valid for form {form!r}")
        if form == "qubit":
            return cls.qubit(*_pick(coeffs, QUBIT_KEYS))
        if form == "local-electron":
            return cls.local_electron(*_pick(coeffs, ELECTRON_KEYS))
        if form == "local-nucleus":
            return cls.local_nucleus(*_pick(coeffs, NUCLEUS_KEYS))
        return cls.joint(_pick(coeffs, NUCLEUS_KEYS), _pick(coeffs, ELECTRON_KEYS))


def _matrix_of(A):
    return A.matrix if isinstance(A, Observable) else qm.as_matrix(A)


# ============================================================
# パラメータ付き状態族
# ============================================================
@dataclass
class ParamFamily:
    """rho(θ, t) と ∂rho/∂θ を返す状態族

    derivative_at が無い場合は中心差分（h = FD_STEP * max(1, |θ|)）を使う。
    joint_at があれば (rho, ∂rho) を一度に計算する経路として優先する。
    """
    dim: int
    state_at: Callable[[float, float], np.ndarray]
    derivative_at: Optional[Callable[[float, float], np.ndarray]] = None
    joint_at: Optional[Callable[[float, float], Tuple[np.ndarray, np.ndarray]]] = None
    dims: Optional[Tuple[int, int]] = None
    label: str = ""

    def state(self, theta, t):
        return qm.as_matrix(self.state_at(theta, t))

    def derivative(self, theta, t):
        if self.derivative_at is not None:
            return qm.as_matrix(self.derivative_at(theta, t))
        h = FD_STEP * max(1.0, abs(theta))
        plus = self.state(theta + h, t)
        minus = self.state(theta - h, t)
        return qm.hermitize((plus - minus) / (2.0 * h))

    def evaluate(self, theta, t):
        if self.joint_at is not None:
            rho, drho = self.joint_at(theta, t)
            return qm.as_matrix(rho), qm.as_matrix(drho)
        return self.state(theta, t), self.derivative(theta, t)


def check_state(rho):
    """エルミート・単位トレース・半正定値をチェック"""
    rho = qm.as_matrix(rho)
    defect = qm.hermiticity_defect(rho)
    if defect > 1e-10:
        raise InvalidState(f"state is not Hermitian (defect {defect:.3e})")
    tr = float(np.real(np.trace(rho)))
    if abs(tr - 1.0) > STATE_TRACE_TOL:
        raise InvalidState(f"state trace {tr:.12f} != 1")
    es = qm.eig_hermitian(qm.hermitize(rho))
    if es.values[0] < -STATE_PSD_TOL:
        raise InvalidState(f"state has negative eigenvalue {es.values[0]:.3e}")
    return es


# ============================================================
# SLD / QFI
# ============================================================
def _sld_from_eig(es, drho):
    mu, V = es.values, es.vectors
    D = V.conj().T @ drho @ V
    denom = mu[:, None] + mu[None, :]
    keep = denom >= SLD_DENOM_TOL
    Lt = np.zeros_like(D)
    Lt[keep] = 2.0 * D[keep] / denom[keep]
    return qm.hermitize(V @ Lt @ V.conj().T)


def sld(rho, drho):
    """対称対数微分 L : ∂rho = (rho L + L rho)/2 のスペクトル解"""
    es = check_state(rho)
    drho = qm.as_matrix(drho)
    if drho.shape != es.vectors.shape:
        raise DimensionMismatch(f"drho shape {drho.shape} does not match state")
    if not qm.is_hermitian(drho, 1e-10):
        raise InvalidState("state derivative is not Hermitian")
    return _sld_from_eig(es, qm.hermitize(drho))


def qfi(rho, drho):
    """F_Q = Tr(rho L^2)"""
    L = sld(rho, drho)
    return _qfi_value(qm.as_matrix(rho), L)


def _qfi_value(rho, L):
    return max(0.0, float(np.real(np.trace(rho @ L @ L))))


@dataclass
class PointContext:
    """観測量に依存しない (θ, t) ごとの量をまとめたもの"""
    rho: np.ndarray
    drho: np.ndarray
    L: np.ndarray
    qfi: float
    sld_eig: qm.EigenSystem
    clusters: list = field(default_factory=list)

    @property
    def qcrb(self):
        return math.inf if self.qfi <= 0.0 else 1.0 / self.qfi


def context_from_state(rho, drho):
    rho = qm.as_matrix(rho)
    L = sld(rho, drho)
    es = qm.eig_hermitian(L)
    return PointContext(rho=rho, drho=qm.hermitize(drho), L=L, qfi=_qfi_value(rho, L),
                        sld_eig=es, clusters=es.clusters(CLUSTER_TOL))


def point_context(family, theta, t):
    rho, drho = family.evaluate(theta, t)
    return context_from_state(rho, drho)


def _context(family, theta, t, ctx):
    return ctx if ctx is not None else point_context(family, theta, t)


# ============================================================
# 古典 Fisher 情報
# ============================================================
def classical_fisher(probabilities, derivatives):
    """F_c = Σ_j (∂p_j)^2 / p_j"""
    p = np.asarray(probabilities, dtype=float)
    dp = np.asarray(derivatives, dtype=float)
    if p.shape != dp.shape:
        raise DimensionMismatch("probabilities and derivatives differ in length")
    if p.size == 0:
        return 0.0
    if np.any(p < -PROB_TOL) or abs(p.sum() - 1.0) > STATE_TRACE_TOL:
        raise InvalidState(f"not a probability distribution (sum {p.sum():.12f})")
    total = 0.0
    for pj, dpj in zip(p, dp):
        if pj < PROB_TOL:
            if abs(dpj) >= PROB_DERIV_TOL:
                raise DegenerateProbability(f"p={pj:.3e} with dp={dpj:.3e}")
            continue
        total += dpj * dpj / pj
    return float(total)


def projectors_from_eig(es, tol=None):
    tol = CLUSTER_TOL if tol is None else tol
    projectors = []
    for group in es.clusters(tol):
        Vg = es.vectors[:, group]
        projectors.append(Vg @ Vg.conj().T)
    return projectors


def sld_projectors(L):
    """L の固有空間への射影子"""
    return projectors_from_eig(qm.eig_hermitian(L))


def measurement_fisher(projectors, rho, drho):
    p = [qm.expectation(P, rho) for P in projectors]
    dp = [qm.expectation(P, drho) for P in projectors]
    return classical_fisher(p, dp)


def observable_fisher(A, rho, drho):
    """A の固有射影測定による古典 Fisher 情報"""
    es = qm.eig_hermitian(_matrix_of(A))
    return measurement_fisher(projectors_from_eig(es), rho, drho)


# ============================================================
# 誤差伝播と Λ
# ============================================================
def _moments(A, rho, drho):
    """(<A>, <ΔA^2>, ∂<A>)"""
    mean = qm.expectation(A, rho)
    second = qm.expectation(A @ A, rho)
    deriv = qm.expectation(A, drho)
    return mean, max(0.0, second - mean * mean), deriv


def variance_from_state(A, rho, drho):
    _, var, deriv = _moments(_matrix_of(A), qm.as_matrix(rho), qm.as_matrix(drho))
    if abs(deriv) < DERIVATIVE_TOL:
        raise DivergentVariance(f"|d<A>/dθ| = {abs(deriv):.3e}: observable carries no parameter information")
    return var / (deriv * deriv)


def variance_error_propagation(A, family, theta, t, ctx=None):
    """(δθ)^2 = <(ΔA)^2> / |∂θ<A>|^2"""
    c = _context(family, theta, t, ctx)
    return variance_from_state(A, c.rho, c.drho)


def _require_information(c):
    if c.qfi < DERIVATIVE_TOL:
        raise DivergentVariance(f"QFI {c.qfi:.3e}: state carries no parameter information")


def lambda_direct(A, family, theta, t, ctx=None):
    """Λ = (δθ)^2 - 1/F_Q"""
    c = _context(family, theta, t, ctx)
    var = variance_from_state(A, c.rho, c.drho)
    _require_information(c)
    return var - 1.0 / c.qfi


def _saturation_gap(A, c):
    return abs(variance_from_state(A, c.rho, c.drho) - 1.0 / c.qfi)


def saturates(A, family, theta, t, ctx=None):
    """A が QCRB を達成するか"""
    c = _context(family, theta, t, ctx)
    if c.qfi < DERIVATIVE_TOL:
        return False
    try:
        return _saturation_gap(A, c) <= 1e-8 * max(1.0, 1.0 / c.qfi)
    except DivergentVariance:
        return False


def lambda_decomposed(A, family, theta, t, A_opt=None, ctx=None):
    """A = A_opt + δA 分解による Λ（A_opt 既定は SLD 自身）"""
    c = _context(family, theta, t, ctx)
    _require_information(c)
    opt = c.L if A_opt is None else _matrix_of(A_opt)
    if not saturates(opt, family, theta, t, ctx=c):
        raise NonSaturatingReference("reference observable does not saturate the QCRB")

    dA = _matrix_of(A) - opt
    m_opt, _, d_opt = _moments(opt, c.rho, c.drho)
    m_dA, var_dA, d_dA = _moments(dA, c.rho, c.drho)
    total = d_opt + d_dA
    if abs(total) < DERIVATIVE_TOL:
        raise DivergentVariance(f"|d<A>/dθ| = {abs(total):.3e}")

    ratio = d_dA / d_opt
    varepsilon = (1.0 + ratio) ** 2
    eta = 2.0 * (float(np.real(np.trace(c.rho @ opt @ dA))) - m_opt * m_dA)
    epsilon = (var_dA + eta) / (total * total)
    return -(ratio * ratio + 2.0 * ratio) / (varepsilon * c.qfi) + epsilon


def lambda_lower_bound(A, family, theta, t, ctx=None):
    """Λ ≥ |<[A,L]>|^2 / (F_Q <{A,L}>^2)"""
    c = _context(family, theta, t, ctx)
    _require_information(c)
    M = _matrix_of(A)
    comm = np.trace(c.rho @ qm.commutator(M, c.L))
    anti = qm.expectation(qm.anticommutator(M, c.L), c.rho)
    if abs(anti) < 2.0 * DERIVATIVE_TOL:
        raise DivergentVariance("observable carries no parameter information")
    return float(abs(comm) ** 2 / (c.qfi * anti * anti))


# ============================================================
# SLD の可換子と最小ユークリッド距離
# ============================================================
def commutant_basis(L):
    """[L, M] = 0 を満たすエルミート行列の基底（固有クラスタごとのブロック生成子）"""
    es = qm.eig_hermitian(L)
    basis = []
    r2 = math.sqrt(2.0)
    for group in es.clusters(CLUSTER_TOL):
        vecs = [es.vectors[:, k] for k in group]
        for i, vi in enumerate(vecs):
            basis.append(np.outer(vi, vi.conj()))
            for vj in vecs[i + 1:]:
                E = np.outer(vi, vj.conj())
                basis.append((E + E.conj().T) / r2)
                basis.append(1j * (E - E.conj().T) / r2)
    return basis


def _pinch(M, es, clusters):
    V = es.vectors
    Mt = V.conj().T @ M @ V
    mask = np.zeros(Mt.shape, dtype=bool)
    for group in clusters:
        mask[np.ix_(group, group)] = True
    return qm.hermitize(V @ np.where(mask, Mt, 0.0) @ V.conj().T)


def min_distance(A, L, es=None):
    """D = min ||A - M||_F over [L, M] = 0 をピンチングで求め (D, M*) を返す"""
    M = _matrix_of(A)
    if not qm.is_hermitian(M):
        raise NonHermitian("observable is not Hermitian")
    if es is None:
        es = qm.eig_hermitian(L)
    if es.vectors.shape != M.shape:
        raise DimensionMismatch(f"observable shape {M.shape} does not match SLD")
    nearest = _pinch(M, es, es.clusters(CLUSTER_TOL))
    return qm.frobenius_norm(M - nearest), nearest


# ============================================================
# 部分系 QFI・不確定性関係
# ============================================================
def subsystem_qfi(family, theta, t, keep="a"):
    """F_Q^i = Tr[rho^i (L^i)^2]、rho^i は他方をトレースアウトした状態"""
    if family.dims is None or family.dims[0] * family.dims[1] != family.dim:
        raise DimensionMismatch(f"family {family.label!r} is not declared bipartite")
    rho, drho = family.evaluate(theta, t)
    return reduced_qfi(rho, drho, family.dims, keep)


def reduced_qfi(rho, drho, dims, keep):
    rho_k = qm.partial_trace(rho, dims, keep)
    drho_k = qm.partial_trace(drho, dims, keep)
    return qfi(rho_k, drho_k)


def schrodinger_robertson_check(A, L, rho):
    """<ΔX^2><ΔY^2> ≥ Cov^2 + |<[X,Y]>|^2/4 が成立するか"""
    X, Y, rho = _matrix_of(A), _matrix_of(L), qm.as_matrix(rho)
    mx, my = qm.expectation(X, rho), qm.expectation(Y, rho)
    vx = qm.expectation(X @ X, rho) - mx * mx
    vy = qm.expectation(Y @ Y, rho) - my * my
    cov = 0.5 * qm.expectation(qm.anticommutator(X, Y), rho) - mx * my
    comm = np.trace(rho @ qm.commutator(X, Y))
    return vx * vy - cov * cov - abs(comm) ** 2 / 4.0 >= -1e-10


# ============================================================
# まとめて評価
# ============================================================
@dataclass
class EstimationReport:
    variance: float
    qfi: float
    lambda_: float
    distance: float
    qcrb: float
    saturated: bool

    def to_dict(self):
        return {
            'variance': self.variance,
            'qfi': self.qfi,
            'lambda': self.lambda_,
            'distance': self.distance,
            'qcrb': self.qcrb,
            'saturated': self.saturated,
        }


def evaluate(A, family, theta, t, ctx=None):
    """1つの (状態族, 観測量) について EstimationReport を作る"""
    return report_from_context(A, _context(family, theta, t, ctx))


def report_from_context(A, c):
    var = variance_from_state(A, c.rho, c.drho)
    _require_information(c)
    lam = var - 1.0 / c.qfi
    dist, _ = min_distance(A, c.L, es=c.sld_eig)
    return EstimationReport(variance=var, qfi=c.qfi, lambda_=lam, distance=dist,
                            qcrb=1.0 / c.qfi, saturated=bool(lam < SATURATION_TOL))
