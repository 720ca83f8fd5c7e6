import numpy as np
import pytest
from scipy import integrate
from scipy.linalg import expm

from metastab import kernels
from metastab.pauli import X, Z, diagonalize, random_2local, single_qubit, single_qubit_jump_set
from metastab.spectral import (
    FilterParams,
    bohr_decompose,
    contract,
    contract_many,
    convolve_ft,
    double_bohr_residual,
    heisenberg_evolve,
    imaginary_time_conjugate_ft,
    omega_time_kernel,
    operator_ft,
    pair_tensor,
    parseval_bound_check,
    sum_over_energies,
    twirl_ft,
)


@pytest.fixture(scope="module")
def sp3():
    return diagonalize(random_2local(3, seed=7))


def test_filter_params_validation():
    assert FilterParams(2.0).sigma == 0.5
    with pytest.raises(ValueError):
        FilterParams(1.0, 1.5)
    with pytest.raises(ValueError):
        FilterParams(0.0)
    with pytest.raises(ValueError):
        FilterParams(-1.0, 0.1)
    assert FilterParams(0.0, 0.3).sigma == 0.3


def test_bohr_components_of_x_under_z():
    dec = bohr_decompose(X, diagonalize(single_qubit()))
    assert np.allclose(dec.frequencies, [-2, 2])
    comps = dec.components
    # sigma^+ raises the energy of H = Z (|1> -> |0>)
    assert np.allclose(comps[2.0], [[0, 1], [0, 0]])
    assert np.allclose(dec.reconstruct(), X)


def test_heisenberg_evolution(sp3, rng):
    A = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    H = sp3.matrix()
    t = 0.73
    ref = expm(1j * H * t) @ A @ expm(-1j * H * t)
    assert np.allclose(heisenberg_evolve(bohr_decompose(A, sp3), t), ref, atol=1e-12)


def test_dimension_mismatch(sp3):
    with pytest.raises(ValueError):
        bohr_decompose(np.eye(4), sp3)


def test_sum_over_energies_reconstructs(sp3):
    A = single_qubit_jump_set(3, [1])[0].to_matrix()
    dec = bohr_decompose(A, sp3)
    for beta in (0.5, 1.0, 2.0):
        assert np.abs(sum_over_energies(dec, FilterParams(beta)) - A).max() <= 1e-8


def test_imaginary_time_conjugation(sp3):
    A = single_qubit_jump_set(3, [0])[1].to_matrix()
    dec = bohr_decompose(A, sp3)
    fp = FilterParams(1.0)
    for omega in (-1.0, 0.0, 0.7):
        lhs, rhs = imaginary_time_conjugate_ft(dec, fp, omega, 0.5)
        assert np.abs(lhs - rhs).max() <= 1e-10 * max(1.0, np.abs(lhs).max())


def test_convolution_identity(sp3):
    dec = bohr_decompose(single_qubit_jump_set(3, [2])[2].to_matrix(), sp3)
    direct, conv = convolve_ft(dec, 0.6, 0.5, 0.3)
    assert np.abs(direct - conv).max() <= 1e-7


def test_convolution_of_identity_is_scalar(sp3):
    dec = bohr_decompose(np.eye(8), sp3)
    direct, conv = convolve_ft(dec, 0.4, 0.3, 0.2)
    assert np.abs(direct - direct[0, 0] * np.eye(8)).max() <= 1e-14
    assert np.abs(direct - conv).max() <= 1e-8


def test_convolution_narrow_second_width(sp3):
    # a narrow second filter leaves the first width nearly unchanged
    dec = bohr_decompose(single_qubit_jump_set(3, [0])[0].to_matrix(), sp3)
    s1 = 0.5
    _, conv = convolve_ft(dec, s1, s1 / 100, 0.1)
    assert np.abs(conv - operator_ft(dec, FilterParams(1.0, s1), 0.1)).max() <= 1e-4


def test_twirling_identity():
    dec = bohr_decompose(X, diagonalize(Z))
    assert twirl_ft(dec, 0.8, 0.6, 0.4) <= 1e-10
    dec3 = bohr_decompose(single_qubit_jump_set(3, [1])[0].to_matrix(), diagonalize(random_2local(3, seed=7)))
    assert twirl_ft(dec3, 0.7, 0.9, -0.2) <= 1e-8


def test_double_bohr_expansion(sp3, rng):
    sp1 = diagonalize(random_2local(3, seed=8))
    A = rng.normal(size=(8, 8))
    assert double_bohr_residual(A, sp1, sp3, 0.3 + 0.2j) <= 1e-8


def test_parseval_bound(sp3):
    jumps = [p.to_matrix() for p in single_qubit_jump_set(3, [0, 1])]
    for weight in (kernels.unit_weight(), kernels.metropolis(1.0, 1.0), kernels.dirichlet_h(1.0, 1.0)):
        lhs, rhs = parseval_bound_check(jumps, sp3, weight, 1.0)
        assert lhs <= rhs + 1e-12
    lhs, rhs = parseval_bound_check([X], diagonalize(Z), kernels.unit_weight(), 1.0)
    assert lhs == pytest.approx(1.0, abs=1e-12) and rhs == 1.0


def test_pair_tensor_contraction_matches_explicit_integral(sp3):
    """The Bohr-pair tensor against a brute-force omega integral of Tr[M1 A(w)^dag M2 A(w)]."""
    A = single_qubit_jump_set(3, [1])[0].to_matrix()
    dec = bohr_decompose(A, sp3)
    fp = FilterParams(1.0)
    gamma = kernels.metropolis(1.0, 1.0)
    rng = np.random.default_rng(5)
    M1 = sp3.to_eigenbasis(rng.normal(size=(8, 8)))
    M2 = sp3.to_eigenbasis(rng.normal(size=(8, 8)))
    Z_ = pair_tensor(dec.eig, dec.eig, dec.nu, omega_time_kernel(gamma, fp.sigma))
    fast = contract(Z_, M1, M2)

    def f(om):
        Aw = dec.eig * kernels.fhat(om - dec.nu, fp.sigma)
        return gamma(om) * np.trace(M1 @ Aw.conj().T @ M2 @ Aw)

    # split at the kink of the Metropolis weight
    slow = sum(integrate.quad_vec(f, a, b, epsabs=1e-13, epsrel=1e-12)[0] for a, b in [(-16, gamma.a), (gamma.a, 16)])
    assert fast == pytest.approx(slow, rel=1e-10)
    many = contract_many(Z_, [M1, M2], [M2, M1], [2.0, -1.0])
    assert many == pytest.approx(2 * fast - contract(Z_, M2, M1), rel=1e-12)


def test_operator_ft_time_shift(sp3):
    dec = bohr_decompose(single_qubit_jump_set(3, [0])[0].to_matrix(), sp3)
    fp = FilterParams(1.0)
    H = sp3.matrix()
    t = 0.4
    ref = expm(1j * H * t) @ operator_ft(dec, fp, 0.2) @ expm(-1j * H * t)
    assert np.allclose(operator_ft(dec, fp, 0.2, t), ref, atol=1e-12)
