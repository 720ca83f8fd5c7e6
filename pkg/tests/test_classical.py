import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from metastab.classical import (
    ClassicalChain,
    HardDisks,
    SpinModel,
    classical_adb_report,
    classical_ep,
    classical_fisher,
    classical_recovery_experiment,
    erase_region,
    flip_rates,
    geometric_decrease,
    gillespie,
    glauber_generator,
    hard_disk_sampler,
    int_log_residual,
    majority_mask,
    relative_entropy,
    sampled_recovery_error,
    write_hard_disk_csv,
)


@pytest.fixture(scope="module")
def grid_chain():
    return glauber_generator(SpinModel.grid(2, 2), 1.0)


def random_law(n_states, rng):
    return rng.dirichlet(np.ones(n_states))


def test_spin_encoding_and_energies():
    m = SpinModel(2, {(0, 1): 1.0}, fields=[0.5, 0.0])
    # site 0 is the most significant bit; bit 0 means spin up
    assert m.spins().tolist() == [[1, 1], [1, -1], [-1, 1], [-1, -1]]
    assert np.allclose(m.energies(), [-1.5, 0.5, 1.5, -0.5])
    s = m.spins()
    for a in range(2):
        flipped = s.copy()
        flipped[:, a] *= -1
        e_flip = m.energies(np.arange(4) ^ (1 << (1 - a)))
        assert np.allclose(m.flip_energy(s, a), e_flip - m.energies())


def test_bad_couplings():
    with pytest.raises(ValueError):
        SpinModel(2, {(0, 0): 1.0})
    with pytest.raises(ValueError):
        SpinModel(2, {(0, 2): 1.0})


def test_rate_rules():
    de = np.array([-2.0, 0.0, 3.0])
    assert np.allclose(flip_rates(de, 1.0), 1 / (1 + np.exp(de)))
    assert np.allclose(flip_rates(de, 1.0, "metropolis"), [1.0, 1.0, np.exp(-3.0)])
    with pytest.raises(ValueError):
        flip_rates(de, 1.0, "glauber-ish")


@pytest.mark.parametrize("rule", ["heat-bath", "metropolis"])
def test_chain_is_reversible(rule):
    model = SpinModel.grid(2, 3, J=0.8)
    model.fields = np.linspace(-0.3, 0.3, 6)
    chain = ClassicalChain(model, 0.7, rule)
    assert chain.stationary_residual() <= 1e-15
    assert chain.detailed_balance_residual() <= 1e-15
    assert chain.row_sum_residual() <= 1e-14
    rng = np.random.default_rng(2)
    nu = random_law(64, rng)
    assert np.allclose(chain.apply(nu), chain.generator().T @ nu)
    assert np.allclose(chain.apply(nu, [1, 4]), chain.generator([4, 1]).T @ nu)


def test_two_state_entropy_production():
    """One free spin: pi = (1/2, 1/2), both rates 1/2, nu = (0.9, 0.1).

    dnu_0/dt = -0.4 and dD/dt = -0.4 log 9, so EP = 0.4 log 9.  The s-integral of
    a^(1-s) b^s is (b - a)/log(b/a), which makes the Fisher information equal too.
    """
    chain = glauber_generator(SpinModel(1), 1.0)
    nu = np.array([0.9, 0.1])
    assert classical_ep(chain, nu) == pytest.approx(0.878889830934487753116196189538, rel=1e-14)
    assert classical_fisher(chain, nu) == pytest.approx(0.4 * math.log(9), rel=1e-13)


def test_ep_is_entropy_decay_rate(grid_chain, rng):
    nu = random_law(16, rng)
    Q = grid_chain.generator().toarray()
    eps = 1e-5
    fwd, bwd = nu @ expm(eps * Q), nu @ expm(-eps * Q)
    slope = (relative_entropy(fwd, grid_chain.pi) - relative_entropy(bwd, grid_chain.pi)) / (2 * eps)
    assert classical_ep(grid_chain, nu) == pytest.approx(-slope, rel=1e-7)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([None, (0,), (1, 3)]))
def test_ep_equals_fisher(seed, sites):
    chain = _grid()
    nu = random_law(16, np.random.default_rng(seed))
    ep = classical_ep(chain, nu, sites)
    assert abs(classical_fisher(chain, nu, sites) - ep) <= 1e-8 * max(1.0, ep)


_CHAINS = {}


def _grid():
    if "g" not in _CHAINS:
        _CHAINS["g"] = glauber_generator(SpinModel.grid(2, 2), 1.0)
    return _CHAINS["g"]


def test_fisher_infinite_off_support(grid_chain):
    nu = np.zeros(16)
    nu[0] = 1.0
    assert classical_fisher(grid_chain, nu) == math.inf
    assert classical_ep(grid_chain, grid_chain.pi) == pytest.approx(0.0, abs=1e-15)


@given(st.floats(1e-3, 1e3))
def test_integral_log_identity(alpha):
    assert int_log_residual(alpha) <= 1e-10 * max(1.0, alpha)


def test_adb_statistics(grid_chain, rng):
    rep = classical_adb_report(grid_chain, grid_chain.pi)
    assert rep["mean"] == pytest.approx(0.0, abs=1e-12) and rep["zero_fraction"] == pytest.approx(1.0)
    nu = grid_chain.pi.copy()
    nu[0] = 0.0
    nu /= nu.sum()
    rep = classical_adb_report(grid_chain, nu)
    assert rep["support_leaving_mass"] > 0
    assert np.isfinite(rep["mean"])


def test_majority_mask_tie_break():
    m0, m1 = majority_mask(2, 0), majority_mask(2, 1)
    assert (m0 | m1).all()
    # two up and two down spins tie and count for both bits
    assert (m0 & m1).sum() == 6
    assert not (majority_mask(3, 0) & majority_mask(3, 1)).any()


def test_hard_disks_cut_information_matches_enumeration():
    hd = HardDisks(4, 2, 2.0)
    assert hd.n_pairs == 4
    assert hd.pair_mi_enumerated() == pytest.approx(hd.mi_block(), abs=1e-12)
    assert hd.enumerated_cut_mi(2) == pytest.approx(2 * hd.mi_block(), abs=1e-12)
    assert hd.cut_mi() == pytest.approx(4 * hd.mi_block(), abs=1e-15)
    rep = hd.report()
    assert rep["cut_mi_bits"] == pytest.approx(rep["cut_mi"] / math.log(2))


def test_hard_disks_low_temperature_limit():
    # deep in the ordered phase every block pair carries one shared bit
    assert HardDisks(3, 3, 50.0).mi_block() == pytest.approx(math.log(2), abs=1e-12)


def test_fixed_pattern_is_a_product():
    hd = HardDisks(4, 2, 2.0, pattern=[0, 1, 1, 0])
    assert hd.cut_mi() == 0.0
    assert hd.enumerated_cut_mi(2) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        HardDisks(4, 2, 2.0, pattern=[0, 1])
    with pytest.raises(ValueError):
        HardDisks(5, 2, 2.0)


def test_stationarity_decreases_geometrically_in_block_size():
    vals = [HardDisks(12, m, 2.0).per_site_stationarity() for m in (2, 3, 4)]
    assert geometric_decrease(vals, 0.7)
    assert not geometric_decrease([1.0, 0.9], 0.7)


def test_unconditioned_blocks_are_stationary():
    hd = HardDisks(4, 2, 1.0, conditioned=False)
    assert hd.per_site_stationarity() <= 1e-15
    assert hd.mi_block() == pytest.approx(0.0, abs=1e-15)


def test_hard_disk_csv(tmp_path):
    p = tmp_path / "hd.csv"
    write_hard_disk_csv([HardDisks(4, 2, 2.0).report()], p)
    lines = p.read_text().splitlines()
    assert lines[0] == "m,beta,per_site_stationarity,cut_mi"
    assert lines[1].startswith("2,2.0,")


def test_erase_region_marginals(rng):
    nu = random_law(8, rng)
    out = erase_region(nu, [1], 3)
    t_in, t_out = nu.reshape(2, 2, 2), out.reshape(2, 2, 2)
    assert np.allclose(t_out.sum(axis=1), t_in.sum(axis=1))
    assert np.allclose(t_out.sum(axis=(0, 2)), [0.5, 0.5])
    assert np.allclose(erase_region(nu, [], 3), nu)


def test_recovery_of_stationary_law_is_exact(grid_chain):
    res = classical_recovery_experiment(grid_chain, grid_chain.pi, [0], [1.0, 10.0, 100.0])
    errors = [r.total for r in res["rows"]]
    assert errors == sorted(errors, reverse=True)
    assert res["error_at_t_star"] <= 1e-8
    assert all(r.leakage <= 1e-12 for r in res["rows"])


def test_recovery_of_conditioned_law():
    hd = HardDisks(4, 2, 2.0)
    chain = glauber_generator(hd.lattice_model(1), 2.0)
    nu = hd.lattice_distribution(1)
    res = classical_recovery_experiment(chain, nu, [0], [0.1, 1.0, 10.0, 100.0])
    assert res["error_at_t_star"] <= 0.05
    for r in res["rows"]:
        assert r.total <= r.leakage + r.mixing + 1e-12
        assert r.leakage <= r.leakage_bound + 1e-12


def test_global_mixing_forgets_the_state(grid_chain, rng):
    nu = random_law(16, rng)
    res = classical_recovery_experiment(grid_chain, nu, range(4), [200.0])
    assert res["rows"][0].total == pytest.approx(np.abs(nu - grid_chain.pi).sum(), abs=1e-6)


def test_exact_mode_limit():
    with pytest.raises(MemoryError):
        ClassicalChain(SpinModel(21), 1.0)


def test_gillespie_moves_only_chosen_sites():
    model = SpinModel.grid(2, 2)
    rng = np.random.default_rng(3)
    s0 = np.array([1, 1, 1, 1], dtype=np.int8)
    out = gillespie(model, s0, 50.0, 0.1, rng, sites=[2])
    assert out[[0, 1, 3]].tolist() == [1, 1, 1]
    assert np.array_equal(gillespie(model, s0, 0.0, 1.0, rng), s0)


def test_gillespie_samples_gibbs_marginal():
    model = SpinModel(1, fields=[0.5])
    rng = np.random.default_rng(4)
    ups = np.mean([gillespie(model, np.array([1], dtype=np.int8), 20.0, 1.0, rng)[0] == 1 for _ in range(2000)])
    assert ups == pytest.approx(1 / (1 + math.exp(-1.0)), abs=0.04)


def test_sampled_recovery_error_has_interval():
    hd = HardDisks(2, 2, 2.0)
    model = hd.lattice_model(hd.n_pairs)
    out = sampled_recovery_error(model, 2.0, hard_disk_sampler(hd), [0], 5.0, np.random.default_rng(5),
                                 samples=300, boots=50)
    assert out["ci_low"] <= out["error"] <= out["ci_high"] + 1e-12
    assert out["window"] == [0, 1, 2]
    assert out["error"] < 0.5
