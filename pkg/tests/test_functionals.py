import numpy as np
import pytest
from conftest import random_full_rank
from scipy.linalg import expm

from metastab.functionals import (
    QuadratureError,
    adb_error,
    adb_error_int_log,
    adb_error_no_time,
    adb_vs_fi_report,
    coherent_entropy_flow,
    entropy_production,
    fisher_information,
    free_energy,
    gibbs_free_energy,
    log_corrected_fisher,
    metastability_report,
    regularize,
    relative_entropy,
    weighted_inner,
)
from metastab.lindblad import time_averaged_state
from metastab.matfuncs import logm_h, op_norm, trace_norm
from metastab.pauli import gibbs_state


@pytest.fixture(scope="module")
def states():
    rng = np.random.default_rng(77)
    return [random_full_rank(4, rng) for _ in range(3)]


def test_ep_equals_fisher(zzx_lind, states):
    for s in states:
        for a in range(len(zzx_lind.jumps)):
            ep = entropy_production(zzx_lind.local(a), s)
            fi = fisher_information(zzx_lind, s, a)
            assert fi >= 0
            assert abs(fi - ep) <= max(1e-8, 1e-4 * ep)


def test_ep_finite_difference(zzx_lind, states):
    rho = gibbs_state(zzx_lind.spectrum, 1.0)
    s = states[0]
    La = zzx_lind.local(2)
    S = La.superop()
    eps = 1e-5
    # central difference of D(exp(eps L) s || rho)
    fwd = (expm(eps * S) @ s.ravel()).reshape(4, 4)
    bwd = (expm(-eps * S) @ s.ravel()).reshape(4, 4)
    slope = (relative_entropy(fwd, rho) - relative_entropy(bwd, rho)) / (2 * eps)
    assert entropy_production(La, s) == pytest.approx(-slope, rel=1e-6)


def test_gibbs_state_is_a_zero(zzx_lind):
    rho = gibbs_state(zzx_lind.spectrum, 1.0)
    for a in range(len(zzx_lind.jumps)):
        assert abs(entropy_production(zzx_lind.local(a), rho)) <= 1e-12
        assert abs(fisher_information(zzx_lind, rho, a)) <= 1e-12
        assert abs(adb_error(zzx_lind, rho, a)) <= 1e-10
        assert abs(adb_error_no_time(zzx_lind, rho, a)) <= 1e-10


def test_adb_dual_representation(zzx_lind, states):
    for s in states[:2]:
        for a in (0, 4):
            direct = adb_error(zzx_lind, s, a)
            via_logs = adb_error_int_log(zzx_lind, s, a)
            assert direct >= 0
            assert abs(direct - via_logs) <= 1e-5 * max(abs(direct), 1e-12)


def test_diagonal_adb_matches_two_level_enumeration(qubit_lind):
    """For H = Z, jump X and a diagonal state, only the two transitions nu = +-2 contribute.

    A(w, t) sqrt(s) - sqrt(s) rho^-1/2 A(w, t) rho^1/2 has entries A_nu (sqrt(p_j) - sqrt(p_i) e^{beta nu/2}),
    so ADB = sum over the two transitions of W_t(nu) (sqrt(p_from) - sqrt(p_to) e^{beta nu / 2})^2
    where W_t is the time-averaged transition weight.
    """
    from metastab import kernels

    beta = 1.0
    p = np.array([0.3, 0.7])
    s = np.diag(p).astype(complex)
    E = np.array([1.0, -1.0])
    total = 0.0
    for i, j in ((0, 1), (1, 0)):
        nu = E[i] - E[j]
        W = kernels.pair_integral(kernels.metropolis(beta, 1.0), nu, nu, 1.0) * kernels.g_ft(0.0, beta)
        total += W * (np.sqrt(p[j]) - np.sqrt(p[i]) * np.exp(beta * nu / 2)) ** 2
    assert adb_error(qubit_lind, s, 0) == pytest.approx(total, rel=1e-12)


def test_coherent_flow_vanishes_for_commuting_states(zzx_lind, states):
    rho = gibbs_state(zzx_lind.spectrum, 0.3)
    assert abs(coherent_entropy_flow(zzx_lind, rho)) <= 1e-12
    assert np.isfinite(coherent_entropy_flow(zzx_lind, states[0]))


def test_singular_states_need_regularization(zzx_lind):
    pure = np.zeros((4, 4), dtype=complex)
    pure[0, 0] = 1
    with pytest.raises(ValueError, match="regularize"):
        entropy_production(zzx_lind, pure)
    rho = gibbs_state(zzx_lind.spectrum, 1.0)
    reg, bound = regularize(pure, rho, 1e-3)
    assert np.linalg.eigvalsh(reg).min() > 0
    assert op_norm(logm_h(reg)) <= bound + np.log(2)
    assert np.isfinite(fisher_information(zzx_lind, reg, 0))
    with pytest.raises(ValueError):
        regularize(pure, rho, 0.7)


def test_quadrature_gate_raises_on_too_few_nodes(zzx_lind, states):
    with pytest.raises(QuadratureError):
        fisher_information(zzx_lind, states[0], 0, nodes=1, gate=1e-12)


def test_weighted_inner_products(states):
    w = states[1]
    A, B = states[0], states[2]
    assert weighted_inner(A, B, w, 0.0) == pytest.approx(np.trace(A.conj().T @ _sqrt(w) @ B @ _sqrt(w)))
    assert weighted_inner(A, B, w, 0.5) == pytest.approx(np.trace(A.conj().T @ w @ B))
    with pytest.raises(ValueError):
        weighted_inner(A, B, w, 0.6)


def _sqrt(m):
    lam, U = np.linalg.eigh(m)
    return (U * np.sqrt(lam)) @ U.conj().T


def test_free_energy_gap_is_relative_entropy(zzx_lind, states):
    beta = 1.0
    sp = zzx_lind.spectrum
    H = sp.matrix()
    rho = gibbs_state(sp, beta)
    for s in states:
        gap = beta * (free_energy(s, H, beta) - gibbs_free_energy(sp, beta))
        assert gap == pytest.approx(relative_entropy(s, rho), abs=1e-12)


def test_log_corrected_fisher_clamp():
    assert log_corrected_fisher(0.0, 3.0) == (0.0, 1.0)
    val, factor = log_corrected_fisher(1.0, 0.1)
    assert factor == 1.0 and val == 1.0
    val, factor = log_corrected_fisher(0.01, 1.0)
    assert factor == pytest.approx(1 + np.log(100))


def test_adb_report_and_time_average(zzx_lind, states):
    avg = time_averaged_state(zzx_lind, states[0], 50.0)
    rep = adb_vs_fi_report(zzx_lind, avg, 1)
    assert rep["ratio"] >= 0 and np.isfinite(rep["ratio"])
    assert rep["sqrt_ADB"] == pytest.approx(np.sqrt(rep["ADB"]))
    # Holder: EP <= ||L[s]||_1 ||log s - log rho||
    ep = entropy_production(zzx_lind, avg)
    rho = gibbs_state(zzx_lind.spectrum, 1.0)
    assert ep <= trace_norm(zzx_lind.apply(avg)) * op_norm(logm_h(avg) - logm_h(rho)) + 1e-12


def test_metastability_report(zzx_lind, states):
    rep = metastability_report(zzx_lind, states[0], "s0", jump_labels=["a"] * 6)
    assert len(rep.rows()) == 6
    assert rep.totals["EP"] == pytest.approx(rep.totals["FI"], rel=1e-4)
    assert rep.eps_meta == pytest.approx(trace_norm(zzx_lind.apply(states[0])))
    assert '"state_id": "s0"' in rep.to_json()
