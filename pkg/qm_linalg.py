# qm_linalg.py - 2×2 / 4×4 向けの密な複素線形代数（固有分解・部分トレース・時間発展）
import math
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm_frechet

from qestim_errors import ConvergenceError, DimensionMismatch, NonHermitian
from qestim_logging import get_logger

logger = get_logger("linalg")

HERMITIAN_TOL = 1e-12
JACOBI_OFF_TOL = 1e-14
JACOBI_MAX_SWEEPS = 60
CLUSTER_GAP = 1e-9

# ---- スピン1/2 の基底は (|e>, |g>) の順 : σz|e> = +|e> ----
IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |g><e|


class EigenSystem(NamedTuple):
    values: np.ndarray   # 昇順の実固有値
    vectors: np.ndarray  # 列が固有ベクトルのユニタリ行列

    def clusters(self, tol=CLUSTER_GAP):
        return eigen_clusters(self.values, tol)


def as_matrix(M):
    """正方な complex128 配列に変換"""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"square matrix expected, got shape {A.shape}")
    return A


def hermiticity_defect(M):
    A = as_matrix(M)
    return float(np.max(np.abs(A - A.conj().T))) if A.size else 0.0


def is_hermitian(M, tol=HERMITIAN_TOL):
    return hermiticity_defect(M) <= tol


def hermitize(M):
    A = as_matrix(M)
    return 0.5 * (A + A.conj().T)


def qubit_state(phi):
    """cos(phi)|g> + sin(phi)|e> を (|e>, |g>) 基底のベクトルで返す"""
    return np.array([math.sin(phi), math.cos(phi)], dtype=complex)


def ket_to_dm(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def expectation(A, rho):
    """<A> = Tr(A rho) の実部"""
    return float(np.real(np.trace(as_matrix(A) @ as_matrix(rho))))


def purity(rho):
    rho = as_matrix(rho)
    return float(np.real(np.trace(rho @ rho)))


def eigen_clusters(values, tol=CLUSTER_GAP):
    """昇順固有値を隣接ギャップ < tol でまとめたインデックスのリスト"""
    groups = []
    for k, v in enumerate(values):
        if groups and v - values[groups[-1][-1]] < tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def _jacobi_rotate(A, V, p, q):
    """(p,q) 要素を消す複素 Jacobi 回転"""
    apq = A[p, q]
    b = abs(apq)
    phase = apq / b
    theta = 0.5 * math.atan2(2.0 * b, A[q, q].real - A[p, p].real)
    c, s = math.cos(theta), math.sin(theta)
    J = np.array([[c, s],
                  [-s * np.conj(phase), c * np.conj(phase)]], dtype=complex)
    idx = [p, q]
    A[:, idx] = A[:, idx] @ J
    A[idx, :] = J.conj().T @ A[idx, :]
    A[p, q] = A[q, p] = 0.0
    A[p, p] = A[p, p].real
    A[q, q] = A[q, q].real
    V[:, idx] = V[:, idx] @ J


def _off_norm(A):
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


def _fix_phase(v):
    """最大振幅成分（同率なら先頭）を実数・非負にそろえる"""
    mags = np.abs(v)
    top = mags.max()
    if top == 0.0:
        return v
    k = int(np.argmax(mags >= top - 1e-12))
    return v * (np.conj(v[k]) / mags[k])


def eig_hermitian(M):
    """巡回 Jacobi 法によるエルミート行列の固有分解

    固有値は昇順、縮退クラスタ内の固有ベクトルはインデックス順に
    Gram-Schmidt で直交化し、位相は _fix_phase の規約に従う。
    """
    A = as_matrix(M)
    defect = hermiticity_defect(A)
    if defect > HERMITIAN_TOL:
        raise NonHermitian(f"matrix is not Hermitian (defect {defect:.3e})")
    A = hermitize(A).copy()
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    tol = JACOBI_OFF_TOL * max(1.0, np.linalg.norm(A))

    sweeps = 0
    while _off_norm(A) >= tol:
        if sweeps >= JACOBI_MAX_SWEEPS:
            off = _off_norm(A)
            if off > 1e-10 * max(1.0, np.linalg.norm(A)):
                raise ConvergenceError(f"Jacobi did not converge: off-diagonal mass {off:.3e}")
            logger.warning(f"Jacobi sweep cap reached, off-diagonal mass {off:.3e}")
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) > 1e-300:
                    _jacobi_rotate(A, V, p, q)
        sweeps += 1

    values = np.real(np.diag(A)).copy()
    order = np.argsort(values, kind="stable")
    values = values[order]
    V = V[:, order]

    for group in eigen_clusters(values):
        if len(group) > 1:
            Q, _ = np.linalg.qr(V[:, group])
            V[:, group] = Q
    for k in range(n):
        V[:, k] = _fix_phase(V[:, k])
    return EigenSystem(values, V)


def kron(A, B):
    return np.kron(np.asarray(A, dtype=complex), np.asarray(B, dtype=complex))


def partial_trace(M, dims, keep="a"):
    """2体系 (dA, dB) の部分トレース。keep='a' なら B をトレースアウト"""
    M = as_matrix(M)
    dA, dB = dims
    if M.shape[0] != dA * dB:
        raise DimensionMismatch(f"dim {M.shape[0]} != {dA}*{dB}")
    T = M.reshape(dA, dB, dA, dB)
    if keep == "a":
        return np.trace(T, axis1=1, axis2=3)
    if keep == "b":
        return np.trace(T, axis1=0, axis2=2)
    raise DimensionMismatch(f"keep must be 'a' or 'b', got {keep!r}")


def _same_shape(A, B):
    A, B = as_matrix(A), as_matrix(B)
    if A.shape != B.shape:
        raise DimensionMismatch(f"shapes differ: {A.shape} vs {B.shape}")
    return A, B


def commutator(A, B):
    A, B = _same_shape(A, B)
    return A @ B - B @ A


def anticommutator(A, B):
    A, B = _same_shape(A, B)
    return A @ B + B @ A


def frobenius_norm(M):
    return float(np.linalg.norm(np.asarray(M, dtype=complex), "fro"))


def unitary_from_eig(H, t):
    """U = V exp(-i λ t) V†"""
    es = eig_hermitian(H)
    return (es.vectors * np.exp(-1j * es.values * t)) @ es.vectors.conj().T


def evolve_unitary(H, rho0, t):
    """rho(t) = U rho0 U†,  U = exp(-iHt)"""
    rho0 = as_matrix(rho0)
    if t == 0:
        return rho0.copy()
    U = unitary_from_eig(H, t)
    return hermitize(U @ rho0 @ U.conj().T)


def evolve_unitary_derivative(H, dH, rho0, t):
    """rho(t) と ∂rho/∂θ（∂H/∂θ = dH）を行列指数の Fréchet 微分で厳密に計算"""
    H, dH = _same_shape(H, dH)
    rho0 = as_matrix(rho0)
    if not (is_hermitian(H) and is_hermitian(dH)):
        raise NonHermitian("Hamiltonian and its derivative must be Hermitian")
    if t == 0:
        return rho0.copy(), np.zeros_like(rho0)
    U, dU = expm_frechet(-1j * t * H, -1j * t * dH)
    Ud = U.conj().T
    rho = U @ rho0 @ Ud
    drho = dU @ rho0 @ Ud + U @ rho0 @ dU.conj().T
    return hermitize(rho), hermitize(drho)
