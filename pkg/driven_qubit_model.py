# driven_qubit_model.py - 駆動された2準位系 H = (ω_a/2)σz + Fσx の閉形式解
import math
from dataclasses import dataclass, replace

import numpy as np

import qm_linalg as qm
from estimation import QUBIT_KEYS, Observable, ParamFamily
from qestim_errors import MissingCoefficients
from qestim_logging import get_logger

logger = get_logger("driven_qubit")

QUARTER_PI = math.pi / 4


@dataclass(frozen=True)
class DrivenQubitParams:
    omega_a: float          # 推定対象の角周波数
    F: float = 1.0          # 駆動振幅
    phi: float = QUARTER_PI  # 初期状態 cos(phi)|g> + sin(phi)|e>
    t: float = 0.0

    def at(self, omega_a=None, t=None):
        changes = {}
        if omega_a is not None:
            changes['omega_a'] = omega_a
        if t is not None:
            changes['t'] = t
        return replace(self, **changes)


def hamiltonian(omega_a, F):
    return 0.5 * omega_a * qm.SIGMA_Z + F * qm.SIGMA_X


# ∂H/∂ω_a
D_HAMILTONIAN = 0.5 * qm.SIGMA_Z


def initial_state(phi):
    return qm.ket_to_dm(qm.qubit_state(phi))


def _closed_form_ok(p):
    return abs(p.phi - QUARTER_PI) < 1e-12 and (p.F != 0.0 or p.omega_a != 0.0)


def mixing(p):
    """(λ, cosϑ, sinϑ)  λ = √(4F² + ω²),  ϑ = arctan(ω / 2F)"""
    lam = math.hypot(2.0 * p.F, p.omega_a)
    return lam, 2.0 * p.F / lam, p.omega_a / lam


def bloch_terms(p):
    """(ξ, ζ) : rho = ½[[1+ξ, ζ], [ζ*, 1-ξ]]"""
    lam, c, s = mixing(p)
    lt = lam * p.t
    xi = (1.0 - math.cos(lt)) * c * s
    zeta = complex(c * c + s * s * math.cos(lt), -s * math.sin(lt))
    return xi, zeta


def bloch_terms_derivative(p):
    """(∂ξ, ∂ζ) with respect to ω_a"""
    lam, c, s = mixing(p)
    t = p.t
    lt = lam * t
    sin_lt, cos_lt = math.sin(lt), math.cos(lt)
    xi = (1.0 - cos_lt) * c * s
    cos2 = c * c - s * s
    d_xi = t * s * s * c * sin_lt + (1.0 - cos_lt) * c * cos2 / lam
    d_re = -2.0 * c * xi / lam - t * s ** 3 * sin_lt
    d_im = -c * c * sin_lt / lam - t * s * s * cos_lt
    return d_xi, complex(d_re, d_im)


def _from_bloch(xi, zeta, trace=1.0):
    return 0.5 * np.array([[trace + xi, zeta],
                           [np.conj(zeta), trace - xi]], dtype=complex)


def driven_qubit_state(p):
    if _closed_form_ok(p):
        return _from_bloch(*bloch_terms(p))
    logger.debug(f"phi={p.phi:.6f}: generic unitary path")
    return qm.evolve_unitary(hamiltonian(p.omega_a, p.F), initial_state(p.phi), p.t)


def driven_qubit_dstate(p):
    """∂rho/∂ω_a（π/4 以外は行列指数の Fréchet 微分）"""
    if _closed_form_ok(p):
        d_xi, d_zeta = bloch_terms_derivative(p)
        return _from_bloch(d_xi, d_zeta, trace=0.0)
    _, drho = qm.evolve_unitary_derivative(hamiltonian(p.omega_a, p.F), D_HAMILTONIAN,
                                           initial_state(p.phi), p.t)
    return drho


def _coefficients(A):
    coeffs = A.coeffs if isinstance(A, Observable) else A
    if not coeffs:
        raise MissingCoefficients("driven-qubit closed forms need (A_s, A_x, A_y, A_z)")
    missing = [k for k in QUBIT_KEYS if k not in coeffs]
    if missing:
        raise MissingCoefficients(f"missing coefficients: {', '.join(missing)}")
    return [float(coeffs[k]) for k in QUBIT_KEYS]


def driven_qubit_mean_and_derivative(A, p):
    """(<A>, <(ΔA)^2>, ∂<A>/∂ω_a) を閉形式で返す"""
    a_s, a_x, a_y, a_z = _coefficients(A)
    if not _closed_form_ok(p):
        M = Observable.qubit(a_s, a_x, a_y, a_z).matrix
        rho, drho = driven_qubit_state(p), driven_qubit_dstate(p)
        mean = qm.expectation(M, rho)
        var = max(0.0, qm.expectation(M @ M, rho) - mean * mean)
        return mean, var, qm.expectation(M, drho)

    lam, c, s = mixing(p)
    lt = lam * p.t
    xi, zeta = bloch_terms(p)
    mean = a_s + a_x * zeta.real - a_y * zeta.imag + a_z * xi

    beta1 = a_x * c + a_z * s
    beta2 = a_z * c - a_x * s
    gamma1 = beta2 * s * math.cos(lt) - beta1 * c
    gamma2 = a_y * s * math.sin(lt)
    var = max(0.0, a_x * a_x + a_y * a_y + a_z * a_z - (gamma1 - gamma2) ** 2)

    d_xi, d_zeta = bloch_terms_derivative(p)
    deriv = a_x * d_zeta.real - a_y * d_zeta.imag + a_z * d_xi
    return mean, var, deriv


def driven_qubit_family(F=1.0, phi=QUARTER_PI):
    """θ = ω_a の ParamFamily"""
    base = DrivenQubitParams(omega_a=0.0, F=F, phi=phi)
    return ParamFamily(
        dim=2,
        state_at=lambda w, t: driven_qubit_state(base.at(omega_a=w, t=t)),
        derivative_at=lambda w, t: driven_qubit_dstate(base.at(omega_a=w, t=t)),
        label=f"driven-qubit(F={F}, phi={phi})",
    )
