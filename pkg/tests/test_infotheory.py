import math

import numpy as np
import pytest
from conftest import random_full_rank
from hypothesis import given, settings
from hypothesis import strategies as st

from metastab.infotheory import (
    Bipartition,
    area_law_audit,
    area_law_bound,
    boundary_norm,
    contiguous_cuts,
    free_energy_decomposition,
    in_bits,
    mutual_information,
    partial_trace,
    product_of_marginals,
    von_neumann_entropy,
    write_audit_csv,
)
from metastab.pauli import HamiltonianSpec, Z, diagonalize, gibbs_state, ising_chain, random_2local


def bell():
    v = np.zeros(4)
    v[0] = v[3] = 1 / math.sqrt(2)
    return np.outer(v, v).astype(complex)


def test_bell_pair_information():
    cut = Bipartition(2, (0,))
    assert mutual_information(bell(), cut) == pytest.approx(2 * math.log(2), abs=1e-12)
    assert in_bits(mutual_information(bell(), cut)) == pytest.approx(2.0)
    assert von_neumann_entropy(bell()) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_maximally_mixed_entropy(k):
    assert von_neumann_entropy(np.eye(2**k) / 2**k) == pytest.approx(k * math.log(2), abs=1e-13)


def test_partial_trace_of_product(rng):
    a, b, c = (random_full_rank(2, rng) for _ in range(3))
    s = np.kron(np.kron(a, b), c)
    assert np.allclose(partial_trace(s, [1]), b)
    assert np.allclose(partial_trace(s, [2, 0]), np.kron(a, c))
    assert np.allclose(product_of_marginals(s, Bipartition(3, (0, 2))), s)


def test_partial_trace_rejects_odd_dimension():
    with pytest.raises(ValueError):
        partial_trace(np.eye(3) / 3, [0])


def test_bipartition_validation_and_label():
    cut = Bipartition(4, (2, 0, 2))
    assert cut.region == (0, 2) and cut.complement == (1, 3)
    assert cut.label() == "ABAB"
    with pytest.raises(ValueError):
        Bipartition(2, (3,))
    assert mutual_information(np.eye(4) / 4, Bipartition(2, ())) == 0.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_information_is_nonnegative_and_subadditive(seed):
    rng = np.random.default_rng(seed)
    s = random_full_rank(8, rng)
    for cut in contiguous_cuts(3):
        mi = mutual_information(s, cut)
        assert mi >= -1e-12
        assert mi <= 2 * min(len(cut.region), len(cut.complement)) * math.log(2) + 1e-12


def test_boundary_norms():
    h = ising_chain(4, g=0.7)
    assert boundary_norm(h, Bipartition(4, (0, 1))) == pytest.approx(1.0)
    assert boundary_norm(h, Bipartition(4, ())) == 0.0
    # 2x2 plaquette (sites 0 1 / 2 3), left column vs right column: two ZZ bonds cross
    plaquette = HamiltonianSpec.from_paulis(4, [("ZZII", 1.0), ("IIZZ", 1.0), ("ZIZI", 1.0), ("IZIZ", 1.0)])
    direct = np.linalg.norm(np.kron(np.kron(Z, Z), np.eye(4)) + np.kron(np.eye(4), np.kron(Z, Z)), 2)
    assert boundary_norm(plaquette, Bipartition(4, (0, 2))) == pytest.approx(direct) == pytest.approx(2.0)


def test_free_energy_decomposition(rng):
    h = random_2local(4, seed=3)
    for _ in range(5):
        s = random_full_rank(16, rng)
        out = free_energy_decomposition(s, h, Bipartition(4, (0, 1)), 1.3)
        assert out["residual"] <= 1e-9
    prod = np.kron(random_full_rank(4, rng), random_full_rank(4, rng))
    out = free_energy_decomposition(prod, h, Bipartition(4, (0, 1)), 1.0)
    assert abs(out["lhs"]) <= 1e-12 and abs(out["mi"]) <= 1e-12


@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_gibbs_area_law(beta):
    h = ising_chain(4, g=0.5)
    rho = gibbs_state(diagonalize(h), beta)
    rows = area_law_audit(rho, h, beta, contiguous_cuts(4))
    assert all(r["pass"] for r in rows)
    assert all(r["MI_nats"] <= 2 * beta * r["boundary_norm"] for r in rows)


def test_area_law_correction_term():
    assert area_law_bound(1.0, 1.0) == 2.0
    eps = 0.01
    assert area_law_bound(1.0, 1.0, eps, h_norm=3.0, n=4) == pytest.approx(2 + 4 * eps * math.log(100))
    assert area_law_bound(1.0, 1.0, 0.5, h_norm=3.0, n=4) == pytest.approx(2 + 4 * 0.5 * 4)


def test_audit_csv(tmp_path):
    h = ising_chain(2)
    rho = gibbs_state(diagonalize(h), 1.0)
    rows = area_law_audit(rho, h, 1.0, contiguous_cuts(2), eps_markov=[0.0])
    p = tmp_path / "a.csv"
    write_audit_csv(rows, p)
    text = p.read_text().splitlines()
    assert text[0] == "cut,MI_nats,bound,slack,pass"
    assert text[1].startswith("AB,") and text[1].endswith(",true")


def test_entropy_ignores_tiny_negative_eigenvalues():
    s = np.diag([1.0, 1e-18, -1e-18, 0.0])
    assert von_neumann_entropy(s) == 0.0
    assert von_neumann_entropy(np.diag([0.5, 0.5, 0.0, 0.0])) == pytest.approx(math.log(2))
