import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metastab.pauli import (
    PAULI,
    DimensionError,
    HamiltonianSpec,
    PauliString,
    X,
    Y,
    Z,
    all_pauli_strings,
    assemble_dense,
    crossing_terms,
    diagonalize,
    embed,
    gibbs_state,
    hamiltonian_from_dict,
    interaction_degree,
    ising_chain,
    log_partition_function,
    make_preset,
    random_2local,
    single_qubit,
)

letters = st.text(alphabet="IXYZ", min_size=1, max_size=3)


def test_single_letter_products():
    assert PauliString("X") * PauliString("Y") == PauliString("Z", 1j)
    assert PauliString("Y") * PauliString("X") == PauliString("Z", -1j)
    assert PauliString("Z") * PauliString("Z") == PauliString("I")


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3).flatmap(lambda n: st.tuples(st.text("IXYZ", min_size=n, max_size=n),
                                                       st.text("IXYZ", min_size=n, max_size=n))))
def test_product_matches_matrices(pair):
    a, b = PauliString(pair[0]), PauliString(pair[1])
    assert np.allclose((a * b).to_matrix(), a.to_matrix() @ b.to_matrix())


@given(letters)
def test_support_and_hermiticity(s):
    p = PauliString(s)
    assert p.support == {i for i, c in enumerate(s) if c != "I"}
    assert p.is_hermitian()
    M = p.to_matrix()
    assert np.allclose(M @ M, np.eye(2 ** len(s)))


def test_bad_letters_rejected():
    with pytest.raises(ValueError):
        PauliString("XA")
    with pytest.raises(ValueError):
        PauliString("X", 2.0)


def test_embed_respects_qubit_order():
    # qubit 0 is the leftmost tensor factor
    assert np.allclose(embed(X, [0], 2), np.kron(X, np.eye(2)))
    assert np.allclose(embed(X, [1], 2), np.kron(np.eye(2), X))
    XZ = np.kron(X, Z)
    assert np.allclose(embed(XZ, [2, 0], 3), np.kron(np.kron(Z, np.eye(2)), X))


def test_ising_chain_matches_kron():
    H = assemble_dense(ising_chain(3, J=1.0, g=0.5))
    I2 = np.eye(2)
    k = lambda a, b, c: np.kron(np.kron(a, b), c)
    ref = k(Z, Z, I2) + k(I2, Z, Z) + 0.5 * (k(X, I2, I2) + k(I2, X, I2) + k(I2, I2, X))
    assert np.allclose(H, ref)


def test_periodic_chain_has_wraparound_bond():
    h = ising_chain(4, periodic=True)
    assert {t.support for t in h.terms} == {(0, 1), (1, 2), (2, 3), (0, 3)}
    assert interaction_degree(h) == 3


def test_diagonalize_groups_degeneracies():
    sp = diagonalize(ising_chain(3))
    # classical ZZ chain: energies -2, 0, 2 with multiplicities 2, 4, 2
    assert np.allclose(sp.energies, [-2, 0, 2])
    assert np.bincount(sp.labels).tolist() == [2, 4, 2]
    assert np.allclose(sp.bohr_frequencies, [-4, -2, 0, 2, 4])
    P = sp.projectors()
    assert np.allclose(sum(P), np.eye(8))


def test_spectrum_roundtrip(rng):
    sp = diagonalize(random_2local(3, seed=7))
    A = rng.normal(size=(8, 8))
    assert np.allclose(sp.from_eigenbasis(sp.to_eigenbasis(A)), A)
    assert np.allclose(sp.matrix(), assemble_dense(random_2local(3, seed=7)))


def test_gibbs_single_qubit():
    sp = diagonalize(single_qubit())
    rho = gibbs_state(sp, 1.0)
    # excited population e^-1 / (e + e^-1)
    assert rho[0, 0].real == pytest.approx(0.119202922022117555940, abs=1e-15)
    assert log_partition_function(sp, 1.0) == pytest.approx(np.log(np.e + 1 / np.e), abs=1e-14)
    assert np.allclose(gibbs_state(sp, 0.0), np.eye(2) / 2)
    with pytest.raises(ValueError):
        gibbs_state(sp, -1.0)


def test_dict_and_preset_parsing():
    a = hamiltonian_from_dict({"preset": "random_2local(7)", "n": 3})
    b = random_2local(3, seed=7)
    assert np.allclose(assemble_dense(a), assemble_dense(b))
    d = {"n": 2, "terms": [{"paulis": "ZZ", "coeff": 1.0},
                           {"support": [1], "matrix": [[0, [0, -1]], [[0, 1], 0]], "coeff": 0.5}]}
    H = assemble_dense(hamiltonian_from_dict(d))
    assert np.allclose(H, np.kron(Z, Z) + 0.5 * np.kron(np.eye(2), Y))
    with pytest.raises(ValueError):
        make_preset("nope")


def test_non_hermitian_block_rejected():
    with pytest.raises(ValueError):
        HamiltonianSpec(1).with_block([0], [[0, 1], [0, 0]])


def test_dense_limit_from_environment(monkeypatch):
    monkeypatch.setenv("METASTAB_MAX_QUBITS", "2")
    with pytest.raises(DimensionError):
        assemble_dense(ising_chain(3))
    assert assemble_dense(ising_chain(2)).shape == (4, 4)


def test_pauli_strings_and_crossing_terms():
    assert len(all_pauli_strings(3, [0, 2])) == 16
    assert all(p.support <= {0, 2} for p in all_pauli_strings(3, [0, 2]))
    crossing = crossing_terms(ising_chain(4, g=1.0), [0, 1])
    assert [t.support for t in crossing] == [(1, 2)]


def test_pauli_table_is_complete():
    assert set(PAULI) == set("IXYZ")
