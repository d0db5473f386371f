# test_estimation.py - SLD・QFI・Λ・最小距離のテスト
import math

import numpy as np
import pytest
from scipy.linalg import expm_frechet

import bipartite_model as bipartite
import driven_qubit_model as driven
import estimation as est
import qm_linalg as qm
from bipartite_model import bipartite_family
from driven_qubit_model import DrivenQubitParams, bloch_terms_derivative, driven_qubit_family
from estimation import Observable, ParamFamily
from qestim_errors import (DegenerateProbability, DimensionMismatch, DivergentVariance,
                           InvalidState, MissingCoefficients, NonHermitian,
                           NonSaturatingReference)


@pytest.fixture
def qubit():
    return driven_qubit_family(F=1.0)


@pytest.fixture
def nv():
    return bipartite_family(Omega_1=3.0, g=2.0)


def mixed_family(p=0.2):
    """(1-p)|ψθ><ψθ| + p I/2（有限差分の導関数経路を使う）"""
    def state(theta, t):
        psi = np.array([math.sin(theta), math.cos(theta)], dtype=complex)
        return (1 - p) * qm.ket_to_dm(psi) + p * 0.5 * np.eye(2)
    return ParamFamily(dim=2, state_at=state, label="mixed")


def sld_coeffs(omega=2.0, t=1.5):
    """純粋状態の駆動量子ビットで L = 2∂ρ となる Pauli 係数"""
    d_xi, d_zeta = bloch_terms_derivative(DrivenQubitParams(omega_a=omega, t=t))
    return {"A_s": 0.0, "A_x": d_zeta.real, "A_y": -d_zeta.imag, "A_z": d_xi}


# ---- SLD / QFI ----
def test_sld_of_pure_state_is_twice_derivative(qubit):
    rho, drho = qubit.evaluate(2.0, 1.5)
    np.testing.assert_allclose(est.sld(rho, drho), 2 * drho, atol=1e-10)


def test_sld_solves_lyapunov_equation_for_mixed_state():
    fam = mixed_family()
    rho, drho = fam.evaluate(0.6, 0.0)
    L = est.sld(rho, drho)
    np.testing.assert_allclose(0.5 * (rho @ L + L @ rho), drho, atol=1e-8)


def test_qfi_of_depolarized_rotation():
    # (1-p)^2 * 4 <Δn>^2 : 回転した純粋状態の QFI は 4、混合で (1-p)^2 倍
    fam = mixed_family(p=0.2)
    rho, drho = fam.evaluate(0.6, 0.0)
    assert est.qfi(rho, drho) == pytest.approx(4 * 0.8 ** 2, rel=1e-6)


def test_qfi_zero_without_parameter_dependence(qubit):
    rho, drho = qubit.evaluate(2.0, 0.0)
    assert est.qfi(rho, drho) == 0.0


def test_sld_rejects_invalid_state():
    with pytest.raises(InvalidState):
        est.sld(np.diag([0.8, 0.8]), np.zeros((2, 2)))
    with pytest.raises(InvalidState):
        est.sld(np.diag([1.2, -0.2]), np.zeros((2, 2)))


def test_finite_difference_derivative_matches_analytic(qubit):
    fd = ParamFamily(dim=2, state_at=qubit.state_at)
    np.testing.assert_allclose(fd.derivative(2.0, 1.5), qubit.derivative(2.0, 1.5), atol=1e-7)


# ---- 古典 Fisher 情報 ----
def test_classical_fisher_simple():
    assert est.classical_fisher([0.5, 0.5], [0.1, -0.1]) == pytest.approx(0.04)


def test_classical_fisher_skips_zero_probability_without_slope():
    assert est.classical_fisher([1.0, 0.0], [0.0, 0.0]) == 0.0


def test_classical_fisher_degenerate_probability():
    with pytest.raises(DegenerateProbability):
        est.classical_fisher([1.0, 0.0], [-0.1, 0.1])


@pytest.mark.parametrize("theta,t", [(2.0, 1.5), (1.0, 0.7)])
def test_sld_projectors_achieve_qfi(qubit, nv, theta, t):
    for fam in (qubit, nv):
        rho, drho = fam.evaluate(theta, t)
        L = est.sld(rho, drho)
        projectors = est.sld_projectors(L)
        np.testing.assert_allclose(sum(projectors), np.eye(fam.dim), atol=1e-10)
        assert est.measurement_fisher(projectors, rho, drho) == pytest.approx(est.qfi(rho, drho), rel=1e-8)


def test_observable_fisher_chain(nv):
    rng = np.random.default_rng(21)
    rho, drho = nv.evaluate(2.0, 2.0)
    inv_qfi = 1.0 / est.qfi(rho, drho)
    for _ in range(20):
        A = Observable.joint(rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4))
        var = est.variance_from_state(A, rho, drho)
        fc = est.observable_fisher(A, rho, drho)
        assert var >= 1.0 / fc - 1e-9
        assert 1.0 / fc >= inv_qfi - 1e-9


# ---- 誤差伝播と Λ ----
def test_identity_observable_diverges(qubit):
    with pytest.raises(DivergentVariance):
        est.variance_error_propagation(Observable.qubit(s=1.0), qubit, 2.0, 1.5)


def test_sld_observable_saturates(qubit):
    A = Observable.from_coeffs("qubit", sld_coeffs())
    assert est.lambda_direct(A, qubit, 2.0, 1.5) == pytest.approx(0.0, abs=1e-10)
    assert est.saturates(A, qubit, 2.0, 1.5)
    report = est.evaluate(A, qubit, 2.0, 1.5)
    assert report.saturated
    assert report.distance == pytest.approx(0.0, abs=1e-10)


def test_shifted_and_scaled_sld_still_saturates(qubit):
    c = sld_coeffs()
    A = Observable.qubit(0.3, 2 * c["A_x"], 2 * c["A_y"], 2 * c["A_z"])
    assert est.lambda_direct(A, qubit, 2.0, 1.5) == pytest.approx(0.0, abs=1e-9)


def test_non_saturating_reference(qubit):
    with pytest.raises(NonSaturatingReference):
        est.lambda_decomposed(Observable.qubit(z=1.0), qubit, 2.0, 1.5, A_opt=np.eye(2))
    assert not est.saturates(np.eye(2), qubit, 2.0, 1.5)


def test_decomposed_lambda_matches_direct(qubit):
    rng = np.random.default_rng(42)
    ctx = est.point_context(qubit, 2.0, 1.5)
    for coeffs in rng.uniform(-0.5, 0.5, size=(30, 4)):
        A = ctx.L + Observable.qubit(*coeffs).matrix
        try:
            direct = est.lambda_direct(A, qubit, 2.0, 1.5, ctx=ctx)
        except DivergentVariance:
            continue
        assert direct >= -1e-9
        assert est.lambda_decomposed(A, qubit, 2.0, 1.5, ctx=ctx) == pytest.approx(direct, abs=1e-8)


def test_lambda_lower_bound_holds(nv):
    rng = np.random.default_rng(8)
    ctx = est.point_context(nv, 2.0, 2.0)
    for _ in range(30):
        A = Observable.local_electron(*rng.uniform(-1, 1, 4))
        direct = est.lambda_direct(A, nv, 2.0, 2.0, ctx=ctx)
        bound = est.lambda_lower_bound(A, nv, 2.0, 2.0, ctx=ctx)
        assert bound >= 0.0
        assert direct >= bound - 1e-9


def test_report_identity(nv):
    A = Observable.local_electron(-1.0, 0.3, -0.4, -0.25)
    report = est.evaluate(A, nv, 2.0, 2.0)
    assert report.variance == pytest.approx(report.qcrb + report.lambda_, rel=1e-12)
    assert report.to_dict()["lambda"] == report.lambda_


# ---- 可換子と最小距離 ----
def test_min_distance_worked_example():
    A = qm.SIGMA_X + 0.5 * qm.SIGMA_Z
    D, nearest = est.min_distance(A, qm.SIGMA_Z)
    assert D == pytest.approx(math.sqrt(2), abs=1e-12)
    np.testing.assert_allclose(nearest, 0.5 * qm.SIGMA_Z, atol=1e-12)


def test_min_distance_zero_for_commuting_observable():
    L = qm.SIGMA_Z
    D, _ = est.min_distance(2 * qm.SIGMA_Z + 0.3 * np.eye(2), L)
    assert D == pytest.approx(0.0, abs=1e-14)


def test_min_distance_rejects_bad_input():
    with pytest.raises(NonHermitian):
        est.min_distance(np.array([[0, 1], [0, 0]]), qm.SIGMA_Z)
    with pytest.raises(DimensionMismatch):
        est.min_distance(np.eye(4), qm.SIGMA_Z)


@pytest.mark.parametrize("L,size", [(qm.SIGMA_Z, 2), (np.eye(2), 4),
                                    (qm.kron(qm.SIGMA_Z, qm.IDENTITY2), 8)])
def test_commutant_basis(L, size):
    basis = est.commutant_basis(L)
    assert len(basis) == size
    for B in basis:
        assert qm.is_hermitian(B)
        np.testing.assert_allclose(qm.commutator(B, L), 0, atol=1e-12)
    gram = np.array([[np.trace(B1.conj().T @ B2) for B2 in basis] for B1 in basis])
    np.testing.assert_allclose(gram, np.eye(size), atol=1e-12)


def test_pinching_equals_commutant_projection(nv):
    rng = np.random.default_rng(4)
    rho, drho = nv.evaluate(2.0, 2.0)
    L = est.sld(rho, drho)
    A = Observable.joint(rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)).matrix
    projected = sum(np.real(np.trace(B @ A)) * B for B in est.commutant_basis(L))
    D, nearest = est.min_distance(A, L)
    np.testing.assert_allclose(nearest, projected, atol=1e-10)
    assert D == pytest.approx(qm.frobenius_norm(A - projected), abs=1e-10)


# ---- 部分系・不確定性関係 ----
def test_subsystem_qfi_bounded_by_global(nv):
    for t in (0.5, 1.0, 2.0, 3.7):
        rho, drho = nv.evaluate(2.0, t)
        total = est.qfi(rho, drho)
        assert est.subsystem_qfi(nv, 2.0, t, keep="a") <= total + 1e-9
        assert est.subsystem_qfi(nv, 2.0, t, keep="b") <= total + 1e-9


def test_subsystem_qfi_needs_bipartite_family(qubit):
    with pytest.raises(DimensionMismatch):
        est.subsystem_qfi(qubit, 2.0, 1.0)


def test_schrodinger_robertson_holds(nv):
    rng = np.random.default_rng(13)
    rho, drho = nv.evaluate(2.0, 2.0)
    L = est.sld(rho, drho)
    for _ in range(10):
        A = Observable.joint(rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4))
        assert est.schrodinger_robertson_check(A, L, rho)


# ---- 観測量 ----
def test_observable_constructors():
    A = Observable.local_electron(-1.0, 0.5, 0.0, -0.25)
    np.testing.assert_allclose(A.matrix, qm.kron(np.eye(2), est.pauli_combination(-1.0, 0.5, 0.0, -0.25)))
    B = Observable.local_nucleus(0.0, 1.0, 0.0, 0.0)
    np.testing.assert_allclose(B.matrix, qm.kron(qm.SIGMA_X, np.eye(2)))
    C = Observable.from_coeffs("joint", {"An_s": 1.0, "Ae_z": 1.0})
    np.testing.assert_allclose(C.matrix, qm.kron(np.eye(2), qm.SIGMA_Z))
    assert C.coeffs["An_x"] == 0.0


def test_observable_validation():
    with pytest.raises(NonHermitian):
        Observable.from_matrix([[0, 1], [0, 0]])
    with pytest.raises(MissingCoefficients):
        Observable.from_coeffs("qubit", {"Ae_x": 1.0})
    with pytest.raises(MissingCoefficients):
        Observable.from_coeffs("spin-3/2", {})


# ---- 両モデルでの格子・乱数チェック ----
LATTICE = [(theta, t) for theta in np.linspace(0.5, 3.0, 4) for t in np.linspace(0.5, 4.0, 5)]


def both_models():
    return [
        (driven_qubit_family(F=1.0), driven.D_HAMILTONIAN,
         qm.qubit_state(math.pi / 4), lambda theta: driven.hamiltonian(theta, 1.0)),
        (bipartite_family(Omega_1=3.0, g=2.0), bipartite.D_HAMILTONIAN,
         np.kron(qm.qubit_state(math.pi / 4), qm.qubit_state(math.pi / 4)),
         lambda theta: bipartite.hamiltonian(theta, 3.0, 2.0)),
    ]


@pytest.mark.parametrize("theta,t", LATTICE)
def test_sld_equation_and_projector_fisher_on_lattice(theta, t):
    for fam, *_ in both_models():
        rho, drho = fam.evaluate(theta, t)
        L = est.sld(rho, drho)
        np.testing.assert_allclose(0.5 * (rho @ L + L @ rho), drho, atol=1e-8)
        fisher = est.measurement_fisher(est.sld_projectors(L), rho, drho)
        assert fisher == pytest.approx(est.qfi(rho, drho), rel=1e-8, abs=1e-8)


@pytest.mark.parametrize("theta,t", [(2.0, 1.0), (2.0, 2.0), (0.7, 3.3), (-1.5, 0.4)])
def test_qfi_matches_state_vector_formula(theta, t):
    # 4(<∂ψ|∂ψ> - |<ψ|∂ψ>|^2) を状態ベクトルから独立に計算
    for fam, dH, psi0, hamiltonian_at in both_models():
        H = hamiltonian_at(theta)
        U, dU = expm_frechet(-1j * t * H, -1j * t * dH)
        psi, dpsi = U @ psi0, dU @ psi0
        overlap = np.vdot(psi, dpsi)
        expected = 4.0 * (np.vdot(dpsi, dpsi).real - abs(overlap) ** 2)
        assert est.qfi(*fam.evaluate(theta, t)) == pytest.approx(expected, rel=1e-8, abs=1e-8)


def test_lambda_non_negative_for_many_random_observables():
    rng = np.random.default_rng(2024)
    qubit_ctx = est.point_context(driven_qubit_family(F=1.0), 2.0, 1.0)
    nv_ctx = est.point_context(bipartite_family(Omega_1=3.0, g=2.0), 2.0, 2.0)
    worst = math.inf
    for _ in range(10_000):
        c = rng.uniform(-1, 1, 4)
        pairs = [(Observable.qubit(*c).matrix, qubit_ctx),
                 (Observable.joint(rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)).matrix, nv_ctx)]
        for A, ctx in pairs:
            try:
                lam = est.variance_from_state(A, ctx.rho, ctx.drho) - 1.0 / ctx.qfi
            except DivergentVariance:
                continue
            worst = min(worst, lam)
    assert worst >= -1e-9


@pytest.mark.parametrize("phi", np.linspace(0.0, math.pi, 13))
def test_subsystem_bounds_over_initial_angle(phi):
    fam = bipartite_family(Omega_1=3.0, g=2.0, phi1=phi, phi2=phi)
    rho, drho = fam.evaluate(2.0, 2.0)
    total = est.qfi(rho, drho)
    for keep in ("a", "b"):
        assert est.reduced_qfi(rho, drho, fam.dims, keep) <= total + 1e-8


@pytest.mark.parametrize("t", np.linspace(0.0, 10.0, 21))
def test_subsystem_bounds_over_time(nv, t):
    rho, drho = nv.evaluate(2.0, t)
    total = est.qfi(rho, drho)
    for keep in ("a", "b"):
        assert est.reduced_qfi(rho, drho, nv.dims, keep) <= total + 1e-8
