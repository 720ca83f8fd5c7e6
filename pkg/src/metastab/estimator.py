"""scikit-learn style wrapper: fit a thermal Lindbladian to a Hamiltonian, transform states into metastability features."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .functionals import metastability_report
from .lindblad import build_full_lindbladian
from .pauli import HamiltonianSpec, assemble_dense, diagonalize, gibbs_state, hamiltonian_from_dict, make_preset, single_qubit_jump_set
from .spectral import FilterParams
from .validation import check_states

FEATURES = ("eps_meta", "EP", "FI", "ADB", "relative_entropy")


def _to_hamiltonian(X):
    if isinstance(X, HamiltonianSpec):
        return X
    if isinstance(X, str):
        return make_preset(X)
    if isinstance(X, dict):
        return hamiltonian_from_dict(X)
    return np.asarray(X, dtype=complex)


class MetastabilityFeatures(TransformerMixin, BaseEstimator):
    """Features of density matrices under the detailed-balanced Lindbladian of a fixed Hamiltonian.

    ``fit`` takes the Hamiltonian (a HamiltonianSpec, dense matrix, preset name or dict) and builds
    the generator with every single-qubit Pauli jump on ``region`` (all qubits when None).
    ``transform`` maps a stack of states of shape (k, D, D) to a (k, 5) array with columns
    ``FEATURES``: stationarity error, entropy production, Fisher information, detailed-balance
    error and relative entropy to the Gibbs state, each summed over jumps.
    """

    def __init__(self, beta: float = 1.0, sigma: float | None = None, eta: float = 1.0, region=None,
                 delta: float = 0.0, nodes: int = 64):
        self.beta = beta
        self.sigma = sigma
        self.eta = eta
        self.region = region
        self.delta = delta
        self.nodes = nodes

    def fit(self, X, y=None):
        h = _to_hamiltonian(X)
        H = assemble_dense(h) if isinstance(h, HamiltonianSpec) else h
        n = int(round(np.log2(H.shape[0])))
        region = range(n) if self.region is None else self.region
        jumps = single_qubit_jump_set(n, region)
        self.spectrum_ = diagonalize(H)
        self.lindbladian_ = build_full_lindbladian(
            self.spectrum_, [p.to_matrix() for p in jumps], FilterParams(self.beta, self.sigma), eta=self.eta
        )
        self.jump_labels_ = [p.letters for p in jumps]
        self.gibbs_ = gibbs_state(self.spectrum_, self.beta)
        self.n_qubits_ = n
        return self

    def transform(self, X):
        check_is_fitted(self, "lindbladian_")
        states = check_states(X)
        if states.shape[1] != self.spectrum_.dim:
            raise ValueError(f"states have dimension {states.shape[1]}, the fitted Hamiltonian {self.spectrum_.dim}")
        out = np.empty((len(states), len(FEATURES)))
        for i, s in enumerate(states):
            rep = metastability_report(self.lindbladian_, s, delta=self.delta, nodes=self.nodes)
            tot = rep.totals
            out[i] = [rep.eps_meta, tot["EP"], tot["FI"], tot["ADB"], rep.relative_entropy]
        return out

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURES, dtype=object)
