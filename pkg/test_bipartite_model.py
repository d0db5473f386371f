# test_bipartite_model.py - 核×電子系の固有解・状態のテスト
import math

import numpy as np
import pytest

import qm_linalg as qm
from bipartite_model import (D_HAMILTONIAN, BipartiteParams, bipartite_dstate,
                             bipartite_eigensystem, bipartite_family, bipartite_state,
                             hamiltonian, initial_state, mixing_angles)
from qestim_errors import InvalidState

LATTICE = [(w, t) for w in np.linspace(-2.0, 4.0, 5) for t in np.linspace(0.0, 9.0, 10)]


def test_initial_amplitudes():
    _, psi = bipartite_state(BipartiteParams(omega_l=2.0, t=0.0))
    np.testing.assert_allclose(psi, 0.5 * np.ones(4), atol=1e-15)


@pytest.mark.parametrize("w,t", LATTICE)
def test_closed_form_matches_unitary_evolution(w, t):
    p = BipartiteParams(omega_l=w, t=t)
    rho, psi = bipartite_state(p)
    expected = qm.evolve_unitary(hamiltonian(w, 3.0, 2.0), initial_state(math.pi / 4, math.pi / 4), t)
    np.testing.assert_allclose(rho, expected, atol=1e-10)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-10)
    assert qm.purity(rho) == pytest.approx(1.0, abs=1e-9)


def test_caption_point():
    p = BipartiteParams(omega_l=2.0, Omega_1=3.0, g=2.0, t=2.0)
    expected = qm.evolve_unitary(hamiltonian(2.0, 3.0, 2.0), initial_state(math.pi / 4, math.pi / 4), 2.0)
    np.testing.assert_allclose(bipartite_state(p)[0], expected, atol=1e-10)


def test_hamiltonian_matrix_elements():
    # 固有ベクトルを書いた基底 (e^e g^n, e^e e^n, g^e g^n, g^e e^n) に並べ替えて比較
    A, B, g = 1.0, 1.5, 2.0
    H = hamiltonian(2 * A, 2 * B, g)
    order = [2, 0, 3, 1]
    expected = np.array([[-A, g, B, 0],
                         [g, A, 0, B],
                         [B, 0, -A, -g],
                         [0, B, -g, A]])
    np.testing.assert_allclose(H[np.ix_(order, order)], expected)


@pytest.mark.parametrize("w,Omega,g", [(2.0, 3.0, 2.0), (-1.0, 0.5, 0.3), (5.0, 3.0, -1.2),
                                       (2.0, 3.0, 0.0), (-4.0, 1.0, 0.0)])
def test_eigensystem(w, Omega, g):
    p = BipartiteParams(omega_l=w, Omega_1=Omega, g=g)
    eig = bipartite_eigensystem(p)
    H = hamiltonian(w, Omega, g)
    V = eig.vectors
    np.testing.assert_allclose(V.conj().T @ V, np.eye(4), atol=1e-12)
    for k in range(4):
        np.testing.assert_allclose(H @ V[:, k], eig.energies[k] * V[:, k], atol=1e-12)
    E = eig.energies
    assert E[2] == -E[0]
    assert E[3] == -E[1]

    tp, tm, fp, fm = mixing_angles(p)
    assert math.cos(tp) * math.cos(tm) + math.sin(tp) * math.sin(tm) == pytest.approx(0.0, abs=1e-12)
    assert math.cos(fp) * math.cos(fm) + math.sin(fp) * math.sin(fm) == pytest.approx(0.0, abs=1e-12)


def test_degenerate_coupling_rejected():
    with pytest.raises(InvalidState):
        bipartite_eigensystem(BipartiteParams(omega_l=3.0, Omega_1=3.0, g=0.0))


def test_general_angles_use_unitary_path():
    p = BipartiteParams(omega_l=2.0, phi1=0.3, phi2=1.1, t=1.7)
    expected = qm.evolve_unitary(hamiltonian(2.0, 3.0, 2.0), initial_state(0.3, 1.1), 1.7)
    np.testing.assert_allclose(bipartite_state(p)[0], expected, atol=1e-10)


def test_derivative_matches_finite_difference():
    h = 1e-6
    p = BipartiteParams(omega_l=2.0, t=2.0)
    fd = (bipartite_state(p.at(omega_l=2.0 + h))[0] - bipartite_state(p.at(omega_l=2.0 - h))[0]) / (2 * h)
    np.testing.assert_allclose(bipartite_dstate(p), fd, atol=1e-7)


def test_hamiltonian_linear_in_larmor_frequency():
    np.testing.assert_allclose(hamiltonian(3.0, 3.0, 2.0) - hamiltonian(2.0, 3.0, 2.0), D_HAMILTONIAN)
    np.testing.assert_allclose(D_HAMILTONIAN, 0.5 * qm.kron(qm.SIGMA_Z, np.eye(2)))


def test_family_is_bipartite():
    fam = bipartite_family()
    assert fam.dims == (2, 2)
    rho, drho = fam.evaluate(2.0, 2.0)
    assert abs(np.trace(drho)) < 1e-12
    np.testing.assert_allclose(rho, bipartite_state(BipartiteParams(omega_l=2.0, t=2.0))[0])
