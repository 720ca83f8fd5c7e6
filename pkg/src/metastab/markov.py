"""Noise channels, the local time-averaging recovery map and the recovery experiments."""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .lindblad import LindbladOperator, _adjoint_superop_eig, build_full_lindbladian, kms_inner
from .matfuncs import trace_norm
from .pauli import PAULI, PauliString, Spectrum, diagonalize, embed, gibbs_state, single_qubit_jump_set
from .spectral import FilterParams


# ------------------------------------------------------------------ channels


@dataclass
class QuantumChannel:
    """Kraus channel acting on ``region`` of an n-qubit register (identity elsewhere)."""

    n: int
    region: tuple
    local_kraus: list
    kind: str = "custom"
    kraus: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.region = tuple(self.region)
        if not self.kraus:
            if self.region:
                self.kraus = [embed(K, self.region, self.n) for K in self.local_kraus]
            else:
                self.kraus = [np.asarray(K, dtype=complex) * np.eye(2**self.n) for K in self.local_kraus]
        dev = np.abs(sum(K.conj().T @ K for K in self.kraus) - np.eye(2**self.n)).max()
        if dev > 1e-12:
            raise ValueError(f"Kraus operators are not trace preserving (deviation {dev:.2e})")

    def apply(self, state) -> np.ndarray:
        return sum(K @ state @ K.conj().T for K in self.kraus)

    def adjoint(self, X) -> np.ndarray:
        return sum(K.conj().T @ X @ K for K in self.kraus)

    __call__ = apply


def identity_channel(n: int) -> QuantumChannel:
    return QuantumChannel(n, (), [np.ones((1, 1))], "identity")


def erasure_channel(n: int, region: Sequence[int], tau=None) -> QuantumChannel:
    """Replace the qubits in ``region`` by ``tau`` (maximally mixed by default)."""
    d = 2 ** len(region)
    tau = np.eye(d) / d if tau is None else np.asarray(tau, dtype=complex)
    p, U = np.linalg.eigh(tau)
    kraus = []
    for k in range(d):
        if p[k] <= 0:
            continue
        for m in range(d):
            K = np.sqrt(p[k]) * np.outer(U[:, k], np.eye(d)[m])
            kraus.append(K)
    return QuantumChannel(n, tuple(region), kraus, "erasure")


def depolarizing_channel(n: int, region: Sequence[int], p: float = 1.0) -> QuantumChannel:
    """(1 - p) id + p * (replace region by the maximally mixed state)."""
    k = len(region)
    d2 = 4**k
    kraus = []
    for letters in itertools.product("IXYZ", repeat=k):
        P = PauliString("".join(letters)).to_matrix() if k else np.ones((1, 1))
        w = (1 - p + p / d2) if set(letters) <= {"I"} else p / d2
        if w > 0:
            kraus.append(np.sqrt(w) * P)
    return QuantumChannel(n, tuple(region), kraus, "depolarizing")


def measurement_channel(n: int, region: Sequence[int], basis: str = "Z") -> QuantumChannel:
    """Projective measurement of every qubit in ``region`` in the X, Y or Z eigenbasis."""
    _, U = np.linalg.eigh(PAULI[basis])
    U = U[:, ::-1]  # +1 eigenvector first, so outcome 0 is |0> for Z
    d = 2 ** len(region)
    Ufull = U
    for _ in range(len(region) - 1):
        Ufull = np.kron(Ufull, U)
    kraus = [np.outer(Ufull[:, b], Ufull[:, b].conj()) for b in range(d)]
    return QuantumChannel(n, tuple(region), kraus, "measurement")


def custom_channel(n: int, region: Sequence[int], kraus) -> QuantumChannel:
    return QuantumChannel(n, tuple(region), [np.asarray(K, dtype=complex) for K in kraus], "custom")


def random_channel(n: int, region: Sequence[int], rng, rank: int | None = None) -> QuantumChannel:
    """Random CPTP map from a Haar isometry (Stinespring dilation)."""
    d = 2 ** len(region)
    rank = d * d if rank is None else rank
    G = rng.normal(size=(d * rank, d)) + 1j * rng.normal(size=(d * rank, d))
    Q, _ = np.linalg.qr(G)
    kraus = [Q[r * d:(r + 1) * d, :] for r in range(rank)]
    return custom_channel(n, region, kraus)


def apply_noise(channel: QuantumChannel, state) -> np.ndarray:
    return channel.apply(np.asarray(state, dtype=complex))


def measurement_branches(channel: QuantumChannel, state) -> list:
    """[(p_b, sigma_b)] with sigma_b = M_b sigma M_b^dag / p_b (zero matrix when p_b = 0)."""
    out = []
    for K in channel.kraus:
        m = K @ state @ K.conj().T
        p = float(np.trace(m).real)
        out.append((p, m / p if p > 1e-300 else np.zeros_like(m)))
    return out


# ------------------------------------------------------------------ recovery


def local_generator(h, region: Sequence[int], fp: FilterParams) -> LindbladOperator:
    """Sum of the single-qubit Pauli generators on ``region``, without -i[H, .]."""
    spectrum = h if isinstance(h, Spectrum) else diagonalize(h)
    n = int(round(np.log2(spectrum.dim)))
    jumps = [p.to_matrix() for p in single_qubit_jump_set(n, region)]
    return build_full_lindbladian(spectrum, jumps, fp, hamiltonian_term=False)


def _averaged_propagator(S: np.ndarray, t: float) -> np.ndarray:
    """(1/t) int_0^t exp(sS) ds from the augmented exponential of [[S, I], [0, 0]]."""
    N = S.shape[0]
    aug = np.zeros((2 * N, 2 * N), dtype=complex)
    aug[:N, :N] = S * t
    aug[:N, N:] = np.eye(N) * t
    return expm(aug)[:N, N:] / t


@dataclass
class RecoveryMap:
    """R_{A,t}[X] = (1/t) int_0^t exp(s L_A)[X] ds and its adjoint, as dense superoperators."""

    generator: LindbladOperator
    t: float
    region: tuple = ()
    _R: np.ndarray | None = field(default=None, repr=False)
    _Rd: np.ndarray | None = field(default=None, repr=False)

    @property
    def spectrum(self) -> Spectrum:
        return self.generator.spectrum

    def _matrix(self) -> np.ndarray:
        if self._R is None:
            D = self.generator.dim
            if not self.generator.jumps or self.t == 0:
                self._R = np.eye(D * D, dtype=complex)
            else:
                self._R = _averaged_propagator(self.generator.superop_eig(), self.t)
        return self._R

    def _adj_matrix(self) -> np.ndarray:
        # built from the Heisenberg-picture generator, not by conjugating the forward map
        if self._Rd is None:
            D = self.generator.dim
            if not self.generator.jumps or self.t == 0:
                self._Rd = np.eye(D * D, dtype=complex)
            else:
                self._Rd = _averaged_propagator(_adjoint_superop_eig(self.generator), self.t)
        return self._Rd

    def apply(self, state) -> np.ndarray:
        sp, D = self.spectrum, self.generator.dim
        x = sp.to_eigenbasis(np.asarray(state, dtype=complex)).ravel()
        out = sp.from_eigenbasis((self._matrix() @ x).reshape(D, D))
        return (out + out.conj().T) / 2

    def adjoint(self, O) -> np.ndarray:
        sp, D = self.spectrum, self.generator.dim
        y = sp.to_eigenbasis(np.asarray(O, dtype=complex)).ravel()
        return sp.from_eigenbasis((self._adj_matrix() @ y).reshape(D, D))

    __call__ = apply

    def duality_residual(self, rng, trials: int = 10) -> float:
        D = self.generator.dim
        worst = 0.0
        for _ in range(trials):
            O = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
            G = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
            s = G @ G.conj().T
            s /= np.trace(s)
            lhs = np.trace(self.adjoint(O).conj().T @ s)
            rhs = np.trace(O.conj().T @ self.apply(s))
            worst = max(worst, abs(lhs - rhs) / np.linalg.norm(O, 2))
        return float(worst)


def recovery_map(h, region: Sequence[int], t: float, fp: FilterParams, generator: LindbladOperator | None = None) -> RecoveryMap:
    if t < 0:
        raise ValueError("recovery time must be non-negative")
    gen = local_generator(h, region, fp) if generator is None else generator
    return RecoveryMap(gen, float(t), tuple(region))


@dataclass
class RecoveryResult:
    region: tuple
    t: float
    total: float
    leakage: float
    mixing: float
    leakage_bound: float = float("nan")
    strong: float = float("nan")

    @property
    def triangle_ok(self) -> bool:
        return self.total <= self.leakage + self.mixing + 1e-10

    def row(self) -> dict:
        d = asdict(self)
        d["region"] = " ".join(str(q) for q in self.region)
        return d


RECOVERY_COLUMNS = ("region", "t", "total", "leakage", "mixing", "leakage_bound", "strong")


def write_recovery_csv(results: Sequence[RecoveryResult], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECOVERY_COLUMNS)
        for r in results:
            row = r.row()
            w.writerow([row["region"]] + [repr(float(row[c])) for c in RECOVERY_COLUMNS[1:]])


def write_recovery_json(results: Sequence[RecoveryResult], path) -> None:
    with open(path, "w") as fh:
        json.dump([r.row() for r in results], fh, indent=1)


def _recovery_errors(R: RecoveryMap, state, noisy) -> tuple:
    total = trace_norm(state - R(noisy))
    leakage = trace_norm(state - R(state))
    mixing = trace_norm(R(state - noisy))
    return total, leakage, mixing


def metastable_recovery_experiment(h, beta: float, state, region: Sequence[int], channel: QuantumChannel,
                                   t_grid: Sequence[float], fp: FilterParams | None = None) -> list:
    """Recovery of ``state`` after ``channel`` by R_{A,t} over a grid of times."""
    fp = FilterParams(beta) if fp is None else fp
    gen = local_generator(h, region, fp)
    state = np.asarray(state, dtype=complex)
    noisy = channel.apply(state)
    local_rate = trace_norm(gen.apply(state)) if gen.jumps else 0.0
    out = []
    for t in t_grid:
        R = RecoveryMap(gen, float(t), tuple(region))
        total, leak, mix = _recovery_errors(R, state, noisy)
        out.append(RecoveryResult(tuple(region), float(t), total, leak, mix, float(t) * local_rate))
    return out


def gibbs_recovery_experiment(h, beta: float, region: Sequence[int], channel: QuantumChannel,
                              t_grid: Sequence[float], fp: FilterParams | None = None) -> list:
    spectrum = h if isinstance(h, Spectrum) else diagonalize(h)
    rho = gibbs_state(spectrum, beta)
    return metastable_recovery_experiment(spectrum, beta, rho, region, channel, t_grid, fp)


def best_time(results: Sequence[RecoveryResult]) -> RecoveryResult:
    return min(results, key=lambda r: r.total)


def is_non_increasing(values: Sequence[float], plateau: float = 0.05) -> bool:
    """Each step decreases or stays within ``plateau`` (relative) of the previous value."""
    return all(b <= a * (1 + plateau) + 1e-15 for a, b in zip(values[:-1], values[1:]))


# ------------------------------------------------------------ strong Markov


def strong_markov_report(state, channel: QuantumChannel, recovery: Callable | None = None) -> dict:
    """Sum over outcomes of ||R[M_b s M_b^dag] - p_b s||_1 next to the plain error ||R[N[s]] - s||_1."""
    R = (lambda x: x) if recovery is None else recovery
    state = np.asarray(state, dtype=complex)
    strong = 0.0
    per = []
    for K in channel.kraus:
        m = K @ state @ K.conj().T
        p = float(np.trace(m).real)
        e = trace_norm(R(m) - p * state)
        per.append({"p": p, "error": e})
        strong += e
    plain = trace_norm(R(channel.apply(state)) - state)
    if plain > strong + 1e-10:
        raise AssertionError(f"plain Markov error {plain} exceeds the strong one {strong}")
    return {"strong": strong, "plain": plain, "outcomes": per}


# ------------------------------------------------ commutator decomposition


def _pauli_coeffs(V: np.ndarray, k: int) -> dict:
    d = 2**k
    out = {}
    for letters in itertools.product("IXYZ", repeat=k):
        s = "".join(letters)
        P = PauliString(s).to_matrix() if k else np.ones((1, 1))
        c = np.trace(P.conj().T @ V) / d
        if abs(c) > 1e-14:
            out[s] = c
    return out


def _leibniz(letters: str):
    """[P, X] = sum_j (P_1..P_{j-1}) [P_j, X] (P_{j+1}..P_w) over non-identity factors.

    Yields (prefix, jump, suffix) as local Pauli strings with unit phase (factors on
    distinct qubits commute, so the ordered products are plain strings).
    """
    k = len(letters)
    idx = [q for q in range(k) if letters[q] != "I"]
    for pos, q in enumerate(idx):
        pre = ["I"] * k
        suf = ["I"] * k
        for r in idx[:pos]:
            pre[r] = letters[r]
        for r in idx[pos + 1:]:
            suf[r] = letters[r]
        jump = ["I"] * k
        jump[q] = letters[q]
        yield "".join(pre), "".join(jump), "".join(suf)


def _mul(a: str, b: str) -> tuple:
    p = PauliString(a) * PauliString(b)
    return p.letters, p.phase


def channel_commutator_decomposition(channel: QuantumChannel) -> dict:
    """Coefficients c with X - N^dag[X] = sum c * S [A, X] S' over local Paulis on the region.

    Keys are (A, S, S') as Pauli-letter strings on the region; A is single-qubit.
    Uses X - N^dag X = 1/2 sum_i ([X, V_i^dag] V_i + V_i^dag [V_i, X]) and the Leibniz
    rule for commutators with Pauli products.
    """
    k = len(channel.region)
    table: dict = {}

    def add(key, val):
        table[key] = table.get(key, 0.0) + val

    for V in channel.local_kraus:
        coeffs = _pauli_coeffs(np.asarray(V, dtype=complex), k)
        for p, cp in coeffs.items():
            for q, cq in coeffs.items():
                c = 0.5 * np.conj(cp) * cq
                # [X, P^dag] Q = -[P, X] Q   (Paulis are Hermitian)
                for pre, jump, suf in _leibniz(p):
                    s2, ph = _mul(suf, q)
                    add((jump, pre, s2), -c * ph)
                # P^dag [Q, X]
                for pre, jump, suf in _leibniz(q):
                    s1, ph = _mul(p, pre)
                    add((jump, s1, suf), c * ph)
    return {key: val for key, val in table.items() if abs(val) > 1e-13}


def reconstruct_from_commutators(table: dict, channel: QuantumChannel, X) -> np.ndarray:
    n, region = channel.n, channel.region
    out = np.zeros_like(X, dtype=complex)
    for (jump, s1, s2), c in table.items():
        A = embed(PauliString(jump).to_matrix(), region, n)
        S1 = embed(PauliString(s1).to_matrix(), region, n)
        S2 = embed(PauliString(s2).to_matrix(), region, n)
        out += c * S1 @ (A @ X - X @ A) @ S2
    return out


# ---------------------------------------------------------- local stationarity


def local_stationarity(R: RecoveryMap, lind_full: LindbladOperator, state, O, per_jump: bool = True) -> dict:
    """|<R^dag O, L_a^dag R^dag O>_state| for each jump of the local generator, and for their sum."""
    X = R.adjoint(O)
    gen = R.generator
    vals = []
    if per_jump:
        for a in range(len(gen.jumps)):
            vals.append(abs(kms_inner(X, gen.local(a).apply_adj(X), state)))
    total = abs(kms_inner(X, gen.apply_adj(X), state)) if gen.jumps else 0.0
    return {"per_jump": vals, "summed": total, "bound": 2.0 / R.t if R.t > 0 else float("inf")}
