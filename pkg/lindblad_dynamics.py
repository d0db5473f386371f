# lindblad_dynamics.py - マルコフ雑音下のマスター方程式（固定刻み RK4）
#
#   dρ/dt = -i[H, ρ] + (κ/2)(2MρM† - ρM†M - M†Mρ)
#
# 密度行列は行優先でベクトル化し vec(AXB) = (A ⊗ B^T) vec(X) を使う。
# 線形方程式なので RK4 の1ステップは多項式 P = Σ_{k≤4} (hL)^k/k! と一致し、
# n ステップは P^n の作用として計算する。
import math
from dataclasses import dataclass

import numpy as np

import qm_linalg as qm
from bipartite_model import D_HAMILTONIAN, DIMS, hamiltonian, initial_state
from estimation import ParamFamily, check_state
from qestim_errors import SpecError, StepTooLarge
from qestim_logging import get_logger

logger = get_logger("lindblad")

DEFAULT_DT = 1e-3
TRACE_DRIFT_LIMIT = 1e-6

JUMPS = {
    "dephasing": qm.SIGMA_X,
    "dissipation": qm.SIGMA_MINUS,
}


def apply_settings(section):
    global DEFAULT_DT
    DEFAULT_DT = section.get('dt', DEFAULT_DT)


@dataclass(frozen=True)
class NoiseSpec:
    kappa: float = 0.0
    jump: str = "dephasing"   # dephasing (σx) | dissipation (σ-)
    dt: float = None          # None → config の lindblad.dt
    embed: str = "electron"   # 4次元系で M が作用する因子

    def __post_init__(self):
        if self.kappa < 0:
            raise SpecError(f"kappa must be >= 0, got {self.kappa}")
        if self.jump not in JUMPS:
            raise SpecError(f"unknown jump {self.jump!r} (expected one of {sorted(JUMPS)})")
        if self.embed not in ("electron", "nucleus"):
            raise SpecError(f"unknown embedding {self.embed!r}")
        if self.dt is not None and self.dt <= 0:
            raise SpecError(f"dt must be > 0, got {self.dt}")

    @property
    def step(self):
        return DEFAULT_DT if self.dt is None else self.dt


def jump_operator(noise, dim):
    M = JUMPS[noise.jump]
    if dim == 2:
        return M
    if dim == 4:
        return qm.kron(qm.IDENTITY2, M) if noise.embed == "electron" else qm.kron(M, qm.IDENTITY2)
    raise SpecError(f"no jump embedding for dimension {dim}")


def commutator_superop(H):
    """X → -i[H, X]"""
    d = H.shape[0]
    eye = np.eye(d, dtype=complex)
    return -1j * (np.kron(H, eye) - np.kron(eye, H.T))


def liouvillian(H, M, kappa):
    H = qm.as_matrix(H)
    L = commutator_superop(H)
    if kappa > 0:
        d = H.shape[0]
        eye = np.eye(d, dtype=complex)
        MdM = M.conj().T @ M
        L = L + 0.5 * kappa * (2.0 * np.kron(M, M.conj()) - np.kron(eye, MdM.T) - np.kron(MdM, eye))
    return L


def rk4_propagator(generator, h):
    """線形系 dx/dt = G x に対する RK4 の1ステップ写像"""
    n = generator.shape[0]
    hG = h * generator
    P = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in range(1, 5):
        term = term @ hG / k
        P = P + term
    return P


def _steps(t, dt):
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    n = max(1, math.ceil(t / dt - 1e-12))
    return n, t / n


def _check_trace(rho, t, h):
    """トレースのずれ、または純度 > 1（不安定な刻み）を検出"""
    if not np.all(np.isfinite(rho)):
        raise StepTooLarge(f"integration diverged at t={t} with dt={h:.3e}; reduce dt")
    drift = abs(float(np.real(np.trace(rho))) - 1.0)
    if drift > TRACE_DRIFT_LIMIT:
        raise StepTooLarge(f"trace drift {drift:.3e} at t={t} with dt={h:.3e}; reduce dt")
    excess = qm.purity(rho) - 1.0
    if excess > TRACE_DRIFT_LIMIT:
        raise StepTooLarge(f"purity exceeds 1 by {excess:.3e} at t={t} with dt={h:.3e}; reduce dt")


def lindblad_evolve(H, rho0, noise, t):
    """固定刻み RK4 で rho(t) を求める"""
    check_state(rho0)
    rho0 = qm.as_matrix(rho0)
    if t == 0:
        return rho0.copy()
    d = rho0.shape[0]
    n, h = _steps(t, noise.step)
    G = liouvillian(H, jump_operator(noise, d), noise.kappa)
    vec = np.linalg.matrix_power(rk4_propagator(G, h), n) @ rho0.reshape(-1)
    rho = vec.reshape(d, d)
    _check_trace(rho, t, h)
    logger.debug(f"RK4: {n} steps of {h:.3e} (kappa={noise.kappa}, jump={noise.jump})")
    return qm.hermitize(rho)


def lindblad_evolve_with_derivative(H, dH, rho0, noise, t):
    """(rho, ∂rho) を拡大系 [ρ, σ] の同時積分で求める

    σ' = -i[H, σ] - i[dH, ρ] + D(σ),  σ(0) = 0
    """
    check_state(rho0)
    rho0 = qm.as_matrix(rho0)
    d = rho0.shape[0]
    if t == 0:
        return rho0.copy(), np.zeros_like(rho0)
    n, h = _steps(t, noise.step)
    G = liouvillian(H, jump_operator(noise, d), noise.kappa)
    K = commutator_superop(qm.as_matrix(dH))
    zero = np.zeros_like(G)
    augmented = np.block([[G, zero], [K, G]])
    x0 = np.concatenate([rho0.reshape(-1), np.zeros(d * d, dtype=complex)])
    x = np.linalg.matrix_power(rk4_propagator(augmented, h), n) @ x0
    rho = x[:d * d].reshape(d, d)
    drho = x[d * d:].reshape(d, d)
    _check_trace(rho, t, h)
    return qm.hermitize(rho), qm.hermitize(drho)


def lindblad_family(p, noise):
    """θ = ω_l の雑音付き ParamFamily（p の omega_l と t は評価時に置き換える）"""
    rho0 = initial_state(p.phi1, p.phi2)

    def joint(w, t):
        return lindblad_evolve_with_derivative(hamiltonian(w, p.Omega_1, p.g), D_HAMILTONIAN,
                                               rho0, noise, t)

    return ParamFamily(
        dim=4,
        state_at=lambda w, t: lindblad_evolve(hamiltonian(w, p.Omega_1, p.g), rho0, noise, t),
        derivative_at=lambda w, t: joint(w, t)[1],
        joint_at=joint,
        dims=DIMS,
        label=f"bipartite-noisy(kappa={noise.kappa}, jump={noise.jump})",
    )
