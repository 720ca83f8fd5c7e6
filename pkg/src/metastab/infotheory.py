"""Entropies, mutual information across cuts, boundary Hamiltonians and the area-law audit."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .matfuncs import op_norm
from .pauli import HamiltonianSpec, assemble_dense, crossing_terms, embed

ENTROPY_FLOOR = 1e-14
LN2 = math.log(2.0)


def _n_of(m: np.ndarray) -> int:
    n = int(round(math.log2(m.shape[0])))
    if 2**n != m.shape[0]:
        raise ValueError(f"dimension {m.shape[0]} is not a power of two")
    return n


def partial_trace(state, keep: Iterable[int], n: int | None = None) -> np.ndarray:
    """Reduced state on the qubits in ``keep`` (kept in ascending order)."""
    state = np.asarray(state, dtype=complex)
    n = _n_of(state) if n is None else n
    keep = sorted(set(keep))
    drop = [q for q in range(n) if q not in keep]
    t = state.reshape([2] * (2 * n))
    t = t.transpose(keep + drop + [n + q for q in keep] + [n + q for q in drop])
    dk, dd = 2 ** len(keep), 2 ** len(drop)
    return np.einsum("ajbj->ab", t.reshape(dk, dd, dk, dd))


def von_neumann_entropy(state, floor: float = ENTROPY_FLOOR) -> float:
    """-Tr[s log s] in nats, with 0 log 0 = 0."""
    w = np.linalg.eigvalsh((state + np.conj(state).T) / 2)
    w = w[w > floor]
    return float(-(w * np.log(w)).sum())


def in_bits(nats: float) -> float:
    return nats / LN2


@dataclass(frozen=True)
class Bipartition:
    n: int
    region: tuple

    def __post_init__(self):
        region = tuple(sorted(set(self.region)))
        if any(q < 0 or q >= self.n for q in region):
            raise ValueError(f"region {region} is not inside {self.n} qubits")
        object.__setattr__(self, "region", region)

    @property
    def complement(self) -> tuple:
        return tuple(q for q in range(self.n) if q not in self.region)

    def boundary_terms(self, h: HamiltonianSpec) -> list:
        return crossing_terms(h, self.region)

    def label(self) -> str:
        return "".join("A" if q in self.region else "B" for q in range(self.n))


def mutual_information(state, cut: Bipartition) -> float:
    if not cut.region or not cut.complement:
        return 0.0
    a = von_neumann_entropy(partial_trace(state, cut.region, cut.n))
    b = von_neumann_entropy(partial_trace(state, cut.complement, cut.n))
    return a + b - von_neumann_entropy(state)


def boundary_operator(h: HamiltonianSpec, cut: Bipartition) -> np.ndarray:
    out = np.zeros((2**h.n, 2**h.n), dtype=complex)
    for t in cut.boundary_terms(h):
        out += t.coeff * embed(t.local_matrix(), t.support, h.n)
    return out


def boundary_norm(h: HamiltonianSpec, cut: Bipartition) -> float:
    return op_norm(boundary_operator(h, cut))


def product_of_marginals(state, cut: Bipartition) -> np.ndarray:
    """state_A (x) state_B, with qubits returned to their original order."""
    n = cut.n
    A, B = list(cut.region), list(cut.complement)
    if not A or not B:
        return np.asarray(state, dtype=complex)
    rA = partial_trace(state, A, n)
    rB = partial_trace(state, B, n)
    return embed(np.kron(rA, rB), A + B, n)


def free_energy_decomposition(state, h: HamiltonianSpec, cut: Bipartition, beta: float) -> dict:
    """Both sides of beta F(s) - beta F(s_A (x) s_B) = I(A:B) + beta Tr[dH (s - s_A (x) s_B)]."""
    H = assemble_dense(h)
    prod = product_of_marginals(state, cut)

    def beta_f(s):
        return beta * float(np.trace(H @ s).real) - von_neumann_entropy(s)

    lhs = beta_f(state) - beta_f(prod)
    mi = mutual_information(state, cut)
    boundary = beta * float(np.trace(boundary_operator(h, cut) @ (state - prod)).real)
    return {"lhs": lhs, "mi": mi, "boundary_energy": boundary, "residual": abs(lhs - mi - boundary)}


def area_law_bound(beta: float, boundary: float, eps: float = 0.0, h_norm: float = 0.0, n: int = 0) -> float:
    """2 beta ||dH|| plus the recovery correction 4 eps max(log 1/eps, beta ||H||, n)."""
    bound = 2 * beta * boundary
    if eps > 0:
        bound += 4 * eps * max(math.log(1 / eps), beta * h_norm, n)
    return bound


def area_law_audit(state, h: HamiltonianSpec, beta: float, cuts: Sequence[Bipartition],
                   eps_markov: float | Sequence[float] | None = None) -> list:
    """One row per cut: mutual information against the (possibly corrected) area-law bound."""
    h_norm = op_norm(assemble_dense(h))
    eps_list = [eps_markov] * len(cuts) if not isinstance(eps_markov, (list, tuple, np.ndarray)) else list(eps_markov)
    rows = []
    for cut, eps in zip(cuts, eps_list):
        mi = mutual_information(state, cut)
        dh = boundary_norm(h, cut)
        bound = area_law_bound(beta, dh, eps or 0.0, h_norm, h.n)
        rows.append({
            "cut": cut.label(),
            "MI_nats": mi,
            "MI_bits": in_bits(mi),
            "boundary_norm": dh,
            "eps_markov": eps or 0.0,
            "bound": bound,
            "slack": bound - mi,
            "pass": bool(mi <= bound + 1e-12),
        })
    return rows


AUDIT_COLUMNS = ("cut", "MI_nats", "bound", "slack", "pass")


def write_audit_csv(rows: list, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AUDIT_COLUMNS)
        for r in rows:
            w.writerow([r["cut"], repr(r["MI_nats"]), repr(r["bound"]), repr(r["slack"]), str(r["pass"]).lower()])


def contiguous_cuts(n: int) -> list:
    """Left-block cuts [0..k) for k = 1..n-1."""
    return [Bipartition(n, tuple(range(k))) for k in range(1, n)]
