"""Pauli strings, few-body Hamiltonians, spectra and Gibbs states."""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .validation import check_hermitian, max_qubits

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}

# single-qubit product table: (a, b) -> (phase, c) with a*b = phase*c
_PRODUCT = {}
for _a, _ma in PAULI.items():
    for _b, _mb in PAULI.items():
        _m = _ma @ _mb
        for _c, _mc in PAULI.items():
            _ph = np.trace(_mc.conj().T @ _m) / 2
            if abs(abs(_ph) - 1) < 1e-12:
                _PRODUCT[_a, _b] = (complex(np.round(_ph)), _c)
                break


class DimensionError(ValueError):
    """Raised when a request exceeds the dense-feasible qubit count."""


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis with a unit phase.

    Qubit 0 is the leftmost (most significant) tensor factor.
    """

    letters: str
    phase: complex = 1.0

    def __post_init__(self):
        if set(self.letters) - set("IXYZ"):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        if not np.isclose(abs(self.phase), 1.0):
            raise ValueError("phase must have unit modulus")

    @classmethod
    def single(cls, n: int, qubit: int, letter: str) -> "PauliString":
        s = ["I"] * n
        s[qubit] = letter
        return cls("".join(s))

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls("I" * n)

    @property
    def n(self) -> int:
        return len(self.letters)

    @property
    def support(self) -> frozenset:
        return frozenset(i for i, c in enumerate(self.letters) if c != "I")

    def __mul__(self, other: "PauliString") -> "PauliString":
        if other.n != self.n:
            raise ValueError("qubit count mismatch")
        phase = self.phase * other.phase
        out = []
        for a, b in zip(self.letters, other.letters):
            ph, c = _PRODUCT[a, b]
            phase *= ph
            out.append(c)
        return PauliString("".join(out), complex(np.round(phase.real) + 1j * np.round(phase.imag)))

    def is_hermitian(self) -> bool:
        return np.isclose(self.phase.imag, 0.0)

    def to_matrix(self) -> np.ndarray:
        return self.phase * reduce(np.kron, [PAULI[c] for c in self.letters], np.ones((1, 1)))

    def __str__(self):
        sign = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}.get(complex(self.phase), str(self.phase))
        return f"{sign}{self.letters}"


def embed(block: np.ndarray, support: Sequence[int], n: int) -> np.ndarray:
    """Embed a dense operator acting on ``support`` (in that order) into n qubits."""
    support = list(support)
    k = len(support)
    block = np.asarray(block, dtype=complex)
    if block.shape != (2**k, 2**k):
        raise ValueError(f"block shape {block.shape} does not match support size {k}")
    rest = [q for q in range(n) if q not in support]
    full = np.kron(block, np.eye(2 ** len(rest)))
    # axes of `full` are ordered (support..., rest...); permute to (0..n-1)
    order = support + rest
    perm = np.argsort(order)
    t = full.reshape([2] * (2 * n))
    t = t.transpose(list(perm) + [n + p for p in perm])
    return t.reshape(2**n, 2**n)


@dataclass(frozen=True)
class Term:
    support: tuple
    coeff: float
    pauli: PauliString | None = None
    block: np.ndarray | None = field(default=None, compare=False)

    def local_matrix(self) -> np.ndarray:
        if self.pauli is not None:
            letters = "".join(self.pauli.letters[q] for q in self.support)
            return PauliString(letters, self.pauli.phase).to_matrix()
        return self.block

    def norm(self) -> float:
        return abs(self.coeff) * np.linalg.norm(self.local_matrix(), 2)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Few-body Hamiltonian: a list of weighted Pauli strings or dense blocks."""

    n: int
    terms: tuple = ()

    @classmethod
    def from_paulis(cls, n: int, items: Iterable[tuple]) -> "HamiltonianSpec":
        terms = []
        for letters, coeff in items:
            p = PauliString(letters)
            if p.n != n:
                raise ValueError(f"Pauli string {letters} is not on {n} qubits")
            terms.append(Term(tuple(sorted(p.support)), float(coeff), pauli=p))
        return cls(n, tuple(terms))

    def with_block(self, support: Sequence[int], block, coeff: float = 1.0) -> "HamiltonianSpec":
        block = np.asarray(block, dtype=complex)
        check_hermitian(block, what="Hamiltonian block")
        term = Term(tuple(support), float(coeff), block=block)
        return HamiltonianSpec(self.n, self.terms + (term,))

    def term_matrices(self) -> list:
        return [t.coeff * embed(t.local_matrix(), t.support, self.n) for t in self.terms]

    def max_term_norm(self) -> float:
        return max((t.norm() for t in self.terms), default=0.0)


def assemble_dense(h: HamiltonianSpec, limit: int | None = None) -> np.ndarray:
    limit = max_qubits(limit)
    if h.n > limit:
        raise DimensionError(f"n={h.n} exceeds the dense limit {limit}")
    dim = 2**h.n
    out = np.zeros((dim, dim), dtype=complex)
    for t in h.terms:
        if t.pauli is not None and not t.pauli.is_hermitian():
            raise ValueError(f"non-Hermitian term {t.pauli}")
        local = t.local_matrix()
        check_hermitian(local, what="Hamiltonian term")
        out += t.coeff * embed(local, t.support, h.n)
    return out


def interaction_degree(h: HamiltonianSpec) -> int:
    """Maximum degree of the support-overlap graph, counting the self-loop."""
    supports = [set(t.support) for t in h.terms]
    if not supports:
        return 0
    return max(sum(1 for s2 in supports if s1 & s2) for s1 in supports)


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a Hermitian matrix with energies grouped by degeneracy."""

    eigenvalues: np.ndarray  # full sorted list, one per basis vector
    eigenvectors: np.ndarray  # columns
    energies: np.ndarray  # distinct grouped energies
    labels: np.ndarray  # basis index -> group index
    tol: float

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def snapped(self) -> np.ndarray:
        """Per-basis-vector energies with degenerate groups set to their common value."""
        return self.energies[self.labels]

    def projectors(self) -> list:
        U = self.eigenvectors
        return [U[:, self.labels == g] @ U[:, self.labels == g].conj().T for g in range(len(self.energies))]

    @property
    def bohr_frequencies(self) -> np.ndarray:
        diffs = (self.energies[:, None] - self.energies[None, :]).ravel()
        return _dedup(np.sort(diffs), self.tol)

    def matrix(self) -> np.ndarray:
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T

    def to_eigenbasis(self, op: np.ndarray) -> np.ndarray:
        U = self.eigenvectors
        return U.conj().T @ op @ U

    def from_eigenbasis(self, op: np.ndarray) -> np.ndarray:
        U = self.eigenvectors
        return U @ op @ U.conj().T

    def function(self, f) -> np.ndarray:
        U = self.eigenvectors
        return (U * f(self.eigenvalues)) @ U.conj().T


def _dedup(sorted_vals: np.ndarray, tol: float) -> np.ndarray:
    out = [sorted_vals[0]]
    for v in sorted_vals[1:]:
        if v - out[-1] > tol:
            out.append(v)
    vals = np.array(out)
    # symmetrize so that 0 and +-nu appear exactly
    vals[np.abs(vals) <= tol] = 0.0
    return vals


def diagonalize(h, tol: float | None = None) -> Spectrum:
    """Full eigendecomposition; ``h`` may be a HamiltonianSpec or a Hermitian matrix."""
    H = assemble_dense(h) if isinstance(h, HamiltonianSpec) else np.asarray(h, dtype=complex)
    check_hermitian(H, what="Hamiltonian")
    H = (H + H.conj().T) / 2
    try:
        w, U = scipy.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    scale = max(np.linalg.norm(H, 2), 1.0)
    tol = 1e-9 * scale if tol is None else tol
    labels = np.zeros(len(w), dtype=int)
    energies = [w[0]]
    members = [[w[0]]]
    for i in range(1, len(w)):
        if w[i] - members[-1][-1] > tol:
            energies.append(w[i])
            members.append([w[i]])
        else:
            members[-1].append(w[i])
        labels[i] = len(members) - 1
    energies = np.array([np.mean(m) for m in members])
    return Spectrum(w, U, energies, labels, tol)


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray
    min_eigenvalue: float
    trace: float

    @classmethod
    def from_matrix(cls, m, tol: float = 1e-10) -> "DensityMatrix":
        from .validation import check_density_matrix

        m = check_density_matrix(m, tol=tol)
        return cls(m, float(np.linalg.eigvalsh(m).min()), float(np.trace(m).real))


def gibbs_state(spectrum: Spectrum, beta: float) -> np.ndarray:
    """exp(-beta H) / Z built from the spectrum (shifted for stability)."""
    if beta < 0:
        raise ValueError("inverse temperature must be non-negative")
    w = spectrum.snapped
    p = np.exp(-beta * (w - w.min()))
    p /= p.sum()
    U = spectrum.eigenvectors
    rho = (U * p) @ U.conj().T
    return (rho + rho.conj().T) / 2


def log_partition_function(spectrum: Spectrum, beta: float) -> float:
    w = spectrum.snapped
    return float(-beta * w.min() + np.log(np.exp(-beta * (w - w.min())).sum()))


def single_qubit_jump_set(n: int, region: Iterable[int]) -> list:
    return [PauliString.single(n, q, c) for q in sorted(set(region)) for c in "XYZ"]


# ---------------------------------------------------------------- presets


def ising_chain(n: int, J: float = 1.0, g: float = 0.0, h: float = 0.0, periodic: bool = False) -> HamiltonianSpec:
    """sum J Z_i Z_{i+1} + g X_i + h Z_i with unit-norm Pauli terms."""
    items = []
    edges = [(i, i + 1) for i in range(n - 1)] + ([(n - 1, 0)] if periodic and n > 2 else [])
    for i, j in edges:
        s = ["I"] * n
        s[i] = s[j] = "Z"
        items.append(("".join(s), J))
    for i in range(n):
        if g:
            items.append((PauliString.single(n, i, "X").letters, g))
        if h:
            items.append((PauliString.single(n, i, "Z").letters, h))
    return HamiltonianSpec.from_paulis(n, items)


def random_2local(n: int, seed: int = 0) -> HamiltonianSpec:
    """Chain of random two-qubit Hermitian blocks, each of operator norm drawn from [0.5, 1]."""
    rng = np.random.default_rng(seed)
    spec = HamiltonianSpec(n)
    if n == 1:
        G = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        B = (G + G.conj().T) / 2
        return spec.with_block([0], B / np.linalg.norm(B, 2) * rng.uniform(0.5, 1.0))
    for i in range(n - 1):
        G = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        B = (G + G.conj().T) / 2
        B = B / np.linalg.norm(B, 2) * rng.uniform(0.5, 1.0)
        spec = spec.with_block([i, i + 1], B)
    return spec


def zz_x(n: int = 2, field: float = 0.4) -> HamiltonianSpec:
    """Ising chain with a transverse field on qubit 0 only."""
    spec = ising_chain(n)
    return HamiltonianSpec.from_paulis(
        n, [(t.pauli.letters, t.coeff) for t in spec.terms] + [(PauliString.single(n, 0, "X").letters, field)]
    )


def single_qubit(field: float = 1.0) -> HamiltonianSpec:
    return HamiltonianSpec.from_paulis(1, [("Z", field)])


PRESETS = {
    "ising_chain": ising_chain,
    "random_2local": random_2local,
    "zz_x": zz_x,
    "single_qubit": single_qubit,
}


def make_preset(name: str, **kwargs) -> HamiltonianSpec:
    try:
        return PRESETS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def hamiltonian_from_dict(d: dict) -> HamiltonianSpec:
    """Parse the JSON Hamiltonian description (explicit terms or a named preset)."""
    if "preset" in d:
        kwargs = {k: v for k, v in d.items() if k != "preset"}
        name = d["preset"]
        m = re.fullmatch(r"\s*(\w+)\s*\(\s*(-?\d+)\s*\)\s*", name)
        if m:
            # shorthand "random_2local(7)" carries the seed
            name = m.group(1)
            kwargs.setdefault("seed", int(m.group(2)))
        return make_preset(name, **kwargs)
    n = int(d["n"])
    spec = HamiltonianSpec(n)
    paulis = [(t["paulis"], t.get("coeff", 1.0)) for t in d.get("terms", []) if "paulis" in t]
    spec = HamiltonianSpec.from_paulis(n, paulis)
    for t in d.get("terms", []):
        if "matrix" in t:
            m = np.array([[complex(*v) if isinstance(v, (list, tuple)) else complex(v) for v in row] for row in t["matrix"]])
            spec = spec.with_block(t["support"], m, t.get("coeff", 1.0))
    return spec


def load_hamiltonian(path: str | os.PathLike) -> HamiltonianSpec:
    with open(path) as fh:
        return hamiltonian_from_dict(json.load(fh))


def all_pauli_strings(n: int, region: Sequence[int] | None = None) -> list:
    """All 4^|region| Pauli strings supported inside ``region`` (identity included)."""
    region = list(range(n)) if region is None else sorted(region)
    out = []
    for idx in np.ndindex(*([4] * len(region))):
        s = ["I"] * n
        for q, k in zip(region, idx):
            s[q] = "IXYZ"[k]
        out.append(PauliString("".join(s)))
    return out


def crossing_terms(h: HamiltonianSpec, region: Iterable[int]) -> list:
    region = set(region)
    return [t for t in h.terms if set(t.support) & region and set(t.support) - region]
