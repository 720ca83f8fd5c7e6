"""KMS detailed-balanced Lindbladians built from Bohr-pair coefficient tables.

For a Hermitian jump A and Hamiltonian H (eigenbasis, energies E), the local generator is

    L_a[X] = -i[C, X] + T[X] - 1/2 {D, X}

with the transition T[X]_ij = sum_kl A_ik conj(A_jl) W(nu_ik, nu_jl) X_kl, the decay
matrix D_il = sum_j conj(A_ji) A_jl W(nu_ji, nu_jl) and the coherent term
C_il = chat(E_i - E_l) D_il.  W is the shifted-Metropolis pair integral and chat is the
principal-value transform (i/2) tanh(beta x / 4) of the coherent time kernel.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from . import kernels
from .matfuncs import powm_h, random_hermitian, trace_norm
from .pauli import HamiltonianSpec, Spectrum, diagonalize, gibbs_state
from .spectral import FilterParams, commutator_form, omega_time_kernel, pair_tensor
from .validation import DEFAULT_MAX_SUPEROP_QUBITS, check_density_matrix, check_full_rank

DENSE_MAX_QUBITS = 5
KERNEL_CACHE_MAX_DIM = 64


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class WeightFunctions:
    """The frequency and time filters of the generator family at given (beta, sigma)."""

    beta: float
    sigma: float

    @property
    def gamma(self) -> kernels.PiecewiseExp:
        return kernels.metropolis(self.beta, self.sigma)

    @property
    def h(self) -> kernels.PiecewiseExp:
        return kernels.dirichlet_h(self.beta, self.sigma)

    def h_s(self, s: float) -> kernels.PiecewiseExp:
        return kernels.s_weighted_h(s, self.beta, self.sigma)

    def g(self, t):
        return kernels.g_time(t, self.beta)

    def c(self, t):
        return kernels.coherent_c_time(t, self.beta)

    def g_hat(self, x):
        return kernels.g_ft(x, self.beta)

    def c_hat(self, x):
        return kernels.coherent_c_ft(x, self.beta)


def _as_matrix(op, n: int | None = None) -> np.ndarray:
    if hasattr(op, "to_matrix"):
        return op.to_matrix()
    return np.asarray(op, dtype=complex)


@dataclass
class LindbladOperator:
    """Sum of local KMS detailed-balanced terms, optionally plus -i[H, .].

    All tables live in the eigenbasis of H.  ``apply``/``apply_adj`` accept and return
    matrices in the computational basis.
    """

    spectrum: Spectrum
    fp: FilterParams
    jumps: list
    eta: float = 1.0
    hamiltonian_term: bool = True
    jump_eig: list = field(default_factory=list, repr=False)
    decay: list = field(default_factory=list, repr=False)
    coherent: list = field(default_factory=list, repr=False)
    _W: np.ndarray | None = field(default=None, repr=False)
    _superop: np.ndarray | None = field(default=None, repr=False)

    # ---------------------------------------------------------------- structure

    @property
    def dim(self) -> int:
        return self.spectrum.dim

    @property
    def n(self) -> int:
        return int(round(np.log2(self.dim)))

    @property
    def nu(self) -> np.ndarray:
        e = self.spectrum.snapped
        return e[:, None] - e[None, :]

    @property
    def weights(self) -> WeightFunctions:
        return WeightFunctions(self.fp.beta, self.fp.sigma)

    def kernel_table(self) -> np.ndarray:
        """W[i,k,j,l] = shifted-Metropolis pair integral at (nu_ik, nu_jl)."""
        if self._W is None:
            nu = self.nu
            W = kernels.pair_integral(self.weights.gamma, nu[:, :, None, None], nu[None, None, :, :], self.fp.sigma)
            if self.dim > KERNEL_CACHE_MAX_DIM:
                return W
            self._W = W
        return self._W

    def local(self, a: int) -> "LindbladOperator":
        """The single-jump generator L_a (no Hamiltonian commutator, eta = 1)."""
        return self.subset([a], hamiltonian_term=False, eta=1.0)

    def subset(self, idx, hamiltonian_term: bool = False, eta: float | None = None) -> "LindbladOperator":
        idx = list(idx)
        return LindbladOperator(
            self.spectrum,
            self.fp,
            [self.jumps[i] for i in idx],
            self.eta if eta is None else eta,
            hamiltonian_term,
            [self.jump_eig[i] for i in idx],
            [self.decay[i] for i in idx],
            [self.coherent[i] for i in idx],
            self._W,
        )

    # ------------------------------------------------------------------ actions

    def _transition(self, Ae: np.ndarray, X: np.ndarray) -> np.ndarray:
        return np.einsum("ik,jl,ikjl,kl->ij", Ae, Ae.conj(), self.kernel_table(), X, optimize=True)

    def _transition_adj(self, Ae: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return np.einsum("ji,kl,jikl,jk->il", Ae.conj(), Ae, self.kernel_table(), Y, optimize=True)

    def apply_eig(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros_like(X, dtype=complex)
        if self.hamiltonian_term:
            out += -1j * self.nu * X
        for Ae, Dm, C in zip(self.jump_eig, self.decay, self.coherent):
            term = -1j * (C @ X - X @ C) + self._transition(Ae, X) - 0.5 * (Dm @ X + X @ Dm)
            out += self.eta * term
        return out

    def apply_adj_eig(self, Y: np.ndarray) -> np.ndarray:
        out = np.zeros_like(Y, dtype=complex)
        if self.hamiltonian_term:
            out += 1j * self.nu * Y
        for Ae, Dm, C in zip(self.jump_eig, self.decay, self.coherent):
            term = 1j * (C @ Y - Y @ C) + self._transition_adj(Ae, Y) - 0.5 * (Dm @ Y + Y @ Dm)
            out += self.eta * term
        return out

    def apply(self, X) -> np.ndarray:
        if self._superop is not None:
            D = self.dim
            Xe = self.spectrum.to_eigenbasis(np.asarray(X, dtype=complex))
            return self.spectrum.from_eigenbasis((self._superop @ Xe.ravel()).reshape(D, D))
        sp = self.spectrum
        return sp.from_eigenbasis(self.apply_eig(sp.to_eigenbasis(np.asarray(X, dtype=complex))))

    def apply_adj(self, Y) -> np.ndarray:
        sp = self.spectrum
        return sp.from_eigenbasis(self.apply_adj_eig(sp.to_eigenbasis(np.asarray(Y, dtype=complex))))

    __call__ = apply

    # ------------------------------------------------------------ superoperator

    def superop_eig(self) -> np.ndarray:
        """Row-major vectorized generator in the eigenbasis: vec(L[X]) = S vec(X)."""
        if self._superop is not None:
            return self._superop
        if self.n > DENSE_MAX_QUBITS:
            raise MemoryError(f"dense superoperator limited to {DENSE_MAX_QUBITS} qubits")
        D = self.dim
        I = np.eye(D)
        S = np.zeros((D * D, D * D), dtype=complex)
        if self.hamiltonian_term:
            S += np.diag(-1j * self.nu.ravel())
        W = self.kernel_table()
        for Ae, Dm, C in zip(self.jump_eig, self.decay, self.coherent):
            T = (Ae[:, :, None, None] * Ae.conj()[None, None, :, :] * W).transpose(0, 2, 1, 3).reshape(D * D, D * D)
            K = T - 0.5 * (np.kron(Dm, I) + np.kron(I, Dm.T)) - 1j * (np.kron(C, I) - np.kron(I, C.T))
            S += self.eta * K
        self._superop = S
        return S

    def superop(self) -> np.ndarray:
        """Row-major vectorized generator in the computational basis."""
        U = self.spectrum.eigenvectors
        V = np.kron(U, U.conj())
        return V @ self.superop_eig() @ V.conj().T

    @property
    def dense(self) -> bool:
        return self.n <= DENSE_MAX_QUBITS


def _jump_tables(spectrum: Spectrum, fp: FilterParams, A: np.ndarray):
    e = spectrum.snapped
    nu = e[:, None] - e[None, :]
    Ae = spectrum.to_eigenbasis(A)
    gamma = kernels.metropolis(fp.beta, fp.sigma)
    # D_il = sum_j conj(A_ji) A_jl W(nu_ji, nu_jl)
    Wd = kernels.pair_integral(gamma, nu[:, :, None], nu[:, None, :], fp.sigma)
    Dm = np.einsum("ji,jl,jil->il", Ae.conj(), Ae, Wd)
    Dm = (Dm + Dm.conj().T) / 2
    C = kernels.coherent_c_ft(e[:, None] - e[None, :], fp.beta) * Dm
    C = (C + C.conj().T) / 2
    return Ae, Dm, C


def _check_jump(A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    if np.abs(A - A.conj().T).max(initial=0.0) > tol:
        raise ValueError("jump operators must be Hermitian")
    if np.linalg.norm(A, 2) > 1 + 1e-9:
        raise ValueError("jump operators must have operator norm at most 1")
    return A


def build_full_lindbladian(h, jumps, fp: FilterParams, eta: float = 1.0, hamiltonian_term: bool = True,
                           max_qubits: int | None = None) -> LindbladOperator:
    """-i[H, .] + eta * sum_a L_a over the given Hermitian jumps."""
    spectrum = h if isinstance(h, Spectrum) else diagonalize(h)
    n = int(round(np.log2(spectrum.dim)))
    limit = DEFAULT_MAX_SUPEROP_QUBITS if max_qubits is None else max_qubits
    if n > limit:
        raise MemoryError(f"{n} qubits exceeds the superoperator-level limit of {limit}")
    mats = [_check_jump(_as_matrix(A)) for A in jumps]
    tables = [_jump_tables(spectrum, fp, A) for A in mats]
    lind = LindbladOperator(
        spectrum,
        fp,
        mats,
        eta,
        hamiltonian_term,
        [t[0] for t in tables],
        [t[1] for t in tables],
        [t[2] for t in tables],
    )
    if lind.dense:
        lind.superop_eig()
    return lind


def build_local_lindbladian(h, jump, fp: FilterParams) -> LindbladOperator:
    """The single-jump generator L_a with its coherent term and no Hamiltonian commutator."""
    return build_full_lindbladian(h, [jump], fp, hamiltonian_term=False)


# ----------------------------------------------------------------- checks


def kms_inner(X, Y, rho) -> complex:
    r = powm_h(rho, 0.5)
    return complex(np.trace(X.conj().T @ r @ Y @ r))


def kms_detailed_balance_residual(lind: LindbladOperator, rho=None, trials: int = 20, rng=None) -> float:
    """max over jumps and random (X, Y) of |<X, L_a^dag Y>_rho - <L_a^dag X, Y>_rho| / (|X||Y|)."""
    rng = np.random.default_rng(0) if rng is None else rng
    rho = gibbs_state(lind.spectrum, lind.fp.beta) if rho is None else rho
    worst = 0.0
    D = lind.dim
    for a in range(len(lind.jumps)):
        La = lind.local(a)
        for _ in range(trials):
            X = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
            Y = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
            X /= np.linalg.norm(X, 2)
            Y /= np.linalg.norm(Y, 2)
            r = abs(kms_inner(X, La.apply_adj(Y), rho) - kms_inner(La.apply_adj(X), Y, rho))
            worst = max(worst, r)
    return worst


def fixed_point_residual(lind: LindbladOperator) -> float:
    rho = gibbs_state(lind.spectrum, lind.fp.beta)
    return trace_norm(lind.apply(rho))


def choi_min_eigenvalue(lind: LindbladOperator, eps: float = 1e-3) -> float:
    """Smallest eigenvalue of the Choi matrix of exp(eps L) (dense mode only)."""
    D = lind.dim
    E = expm(eps * lind.superop())
    # row-major: E[(i,j),(k,l)] maps |k><l| -> |i><j|; Choi_{(i,k),(j,l)} = E[(i,j),(k,l)]
    choi = E.reshape(D, D, D, D).transpose(0, 2, 1, 3).reshape(D * D, D * D)
    return float(np.linalg.eigvalsh((choi + choi.conj().T) / 2).min())


# ---------------------------------------------------------------- dynamics


def _vec(X):
    return np.asarray(X, dtype=complex).ravel()


def evolve(lind: LindbladOperator, sigma0, t: float, rtol: float = 1e-8, atol: float = 1e-10) -> np.ndarray:
    """exp(tL)[sigma0]; dense exponential for small systems, adaptive ODE otherwise."""
    if t < 0:
        raise ValueError("evolution time must be non-negative")
    sigma0 = np.asarray(sigma0, dtype=complex)
    if t == 0:
        return sigma0.copy()
    sp = lind.spectrum
    D = lind.dim
    X0 = sp.to_eigenbasis(sigma0)
    if lind.dense:
        out = expm_multiply(t * lind.superop_eig(), X0.ravel())
        return _herm(sp.from_eigenbasis(out.reshape(D, D)))
    sol = solve_ivp(
        lambda _, y: lind.apply_eig(y.reshape(D, D)).ravel(),
        (0.0, t),
        X0.ravel(),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise IntegrationError(f"ODE integration failed after {sol.nfev} evaluations: {sol.message}")
    return _herm(sp.from_eigenbasis(sol.y[:, -1].reshape(D, D)))


def evolve_heisenberg(lind: LindbladOperator, O, t: float, rtol: float = 1e-8, atol: float = 1e-10) -> np.ndarray:
    """exp(tL^dag)[O], built from the adjoint action independently of the Schrodinger one."""
    O = np.asarray(O, dtype=complex)
    if t == 0:
        return O.copy()
    sp = lind.spectrum
    D = lind.dim
    Y0 = sp.to_eigenbasis(O).ravel()
    if lind.dense:
        S = _adjoint_superop_eig(lind)
        return sp.from_eigenbasis(expm_multiply(t * S, Y0).reshape(D, D))
    sol = solve_ivp(lambda _, y: lind.apply_adj_eig(y.reshape(D, D)).ravel(), (0.0, t), Y0,
                    method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(f"ODE integration failed after {sol.nfev} evaluations: {sol.message}")
    return sp.from_eigenbasis(sol.y[:, -1].reshape(D, D))


def _adjoint_superop_eig(lind: LindbladOperator) -> np.ndarray:
    D = lind.dim
    cols = [lind.apply_adj_eig(np.eye(D * D, dtype=complex)[k].reshape(D, D)).ravel() for k in range(D * D)]
    return np.array(cols).T


def _herm(m):
    return (m + m.conj().T) / 2


def time_integral(lind: LindbladOperator, X0_eig: np.ndarray, t: float, adjoint: bool = False,
                  method: str = "exact", nodes: int = 64) -> np.ndarray:
    """int_0^t exp(sL)[X] ds in the eigenbasis.

    ``exact`` uses the augmented exponential exp(t [[S, x], [0, 0]]), whose last column
    holds the integral.  ``gauss-legendre`` uses a fixed-node rule with a node-doubling
    check (dense mode), and the matrix-free path integrates the augmented ODE.
    """
    D = lind.dim
    x = X0_eig.ravel()
    if lind.dense:
        S = _adjoint_superop_eig(lind) if adjoint else lind.superop_eig()
        if method == "exact":
            N = D * D
            aug = np.zeros((N + 1, N + 1), dtype=complex)
            aug[:N, :N] = S
            aug[:N, N] = x
            e = np.zeros(N + 1, dtype=complex)
            e[N] = 1.0
            return expm_multiply(t * aug, e)[:N].reshape(D, D)
        if method == "gauss-legendre":
            def rule(k):
                xs, ws = np.polynomial.legendre.leggauss(k)
                s = 0.5 * t * (xs + 1)
                return sum(0.5 * t * w * expm_multiply(si * S, x) for si, w in zip(s, ws))
            a, b = rule(nodes), rule(2 * nodes)
            if np.abs(a - b).max() > 1e-6 * max(1.0, np.abs(b).max()):
                raise IntegrationError("time-average quadrature did not converge under node doubling")
            return b.reshape(D, D)
        raise ValueError(f"unknown time-integration method {method!r}")
    act = lind.apply_adj_eig if adjoint else lind.apply_eig
    N = D * D

    def rhs(_, y):
        cur = y[:N].reshape(D, D)
        return np.concatenate([act(cur).ravel(), y[:N]])

    sol = solve_ivp(rhs, (0.0, t), np.concatenate([x, np.zeros(N, dtype=complex)]),
                    method="DOP853", rtol=1e-8, atol=1e-10)
    if not sol.success:
        raise IntegrationError(f"ODE integration failed after {sol.nfev} evaluations: {sol.message}")
    return sol.y[N:, -1].reshape(D, D)


def time_averaged_state(lind: LindbladOperator, sigma0, t: float, method: str = "exact") -> np.ndarray:
    """(1/t) int_0^t exp(sL)[sigma0] ds."""
    sigma0 = np.asarray(sigma0, dtype=complex)
    if t <= 0:
        return sigma0.copy()
    sp = lind.spectrum
    integral = time_integral(lind, sp.to_eigenbasis(sigma0), t, method=method)
    return _herm(sp.from_eigenbasis(integral / t))


# ----------------------------------------------------------- Dirichlet form


def dirichlet_form(lind_a: LindbladOperator, X, Y, w=None, a: int = 0) -> complex:
    """int int <[A(w,t), X], [A(w,t), Y]>_w g(t) h(w) dt dw via the Bohr-pair reduction.

    With w equal to the Gibbs state this is -<X, L_a^dag Y>_rho; with another full-rank
    state it is the auxiliary form used for local stationarity.
    """
    sp = lind_a.spectrum
    beta, sigma = lind_a.fp.beta, lind_a.fp.sigma
    w = gibbs_state(sp, beta) if w is None else check_full_rank(check_density_matrix(w), 0.0, "weight state")
    Ae = lind_a.jump_eig[a]
    kern = omega_time_kernel(kernels.dirichlet_h(beta, sigma), sigma, lambda x: kernels.g_ft(x, beta))
    Z = pair_tensor(Ae, Ae, lind_a.nu, kern)
    r = sp.to_eigenbasis(powm_h(w, 0.5))
    Xe = sp.to_eigenbasis(np.asarray(X, dtype=complex))
    Ye = sp.to_eigenbasis(np.asarray(Y, dtype=complex))
    return commutator_form(Z, Xe, Ye, r, r)


# ------------------------------------------------------ coefficient tables

MAGIC = b"MSTBCOEF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHHIIIddd")  # magic, version, reserved, n, K (Bohr count), jumps, beta, sigma, eta


@dataclass
class CoefficientTable:
    """Per-Bohr-pair scalars defining a generator: W over B(H) x B(H), chat over B(H)."""

    n: int
    beta: float
    sigma: float
    eta: float
    energies: np.ndarray
    bohr: np.ndarray
    transition: np.ndarray
    coherent: np.ndarray
    jumps: list

    @classmethod
    def from_lindbladian(cls, lind: LindbladOperator) -> "CoefficientTable":
        B = lind.spectrum.bohr_frequencies
        W = kernels.pair_integral(lind.weights.gamma, B[:, None], B[None, :], lind.fp.sigma)
        chat = kernels.coherent_c_ft(B, lind.fp.beta).imag
        return cls(lind.n, lind.fp.beta, lind.fp.sigma, lind.eta, lind.spectrum.snapped.copy(), B, W, chat,
                   [np.asarray(A, dtype=complex) for A in lind.jumps])

    # little-endian binary: fixed header then float64 / complex128 arrays in field order
    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        K = len(self.bohr)
        buf.write(_HEADER.pack(MAGIC, FORMAT_VERSION, 0, self.n, K, len(self.jumps), self.beta, self.sigma, self.eta))
        for arr in (self.energies, self.bohr, self.transition, self.coherent):
            buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        for A in self.jumps:
            buf.write(np.ascontiguousarray(A, dtype="<c16").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "CoefficientTable":
        magic, version, _, n, K, J, beta, sigma, eta = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise ValueError("not a coefficient table dump")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported coefficient table version {version}")
        D = 2**n
        off = _HEADER.size

        def take(count, dtype):
            nonlocal off
            arr = np.frombuffer(data, dtype=dtype, count=count, offset=off)
            off += arr.nbytes
            return arr.copy()

        energies = take(D, "<f8")
        bohr = take(K, "<f8")
        W = take(K * K, "<f8").reshape(K, K)
        chat = take(K, "<f8")
        jumps = [take(D * D, "<c16").reshape(D, D) for _ in range(J)]
        return cls(n, beta, sigma, eta, energies, bohr, W, chat, jumps)

    def to_json(self) -> str:
        d = {
            "format": "metastab-coefficients",
            "version": FORMAT_VERSION,
            "n": self.n,
            "beta": self.beta,
            "sigma": self.sigma,
            "eta": self.eta,
            "energies": self.energies.tolist(),
            "bohr": self.bohr.tolist(),
            "transition": self.transition.tolist(),
            "coherent_imag": self.coherent.tolist(),
            "jumps": [[A.real.tolist(), A.imag.tolist()] for A in self.jumps],
        }
        return json.dumps(d)

    @classmethod
    def from_json(cls, text: str) -> "CoefficientTable":
        d = json.loads(text)
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported coefficient table version {d.get('version')}")
        jumps = [np.array(re) + 1j * np.array(im) for re, im in d["jumps"]]
        return cls(d["n"], d["beta"], d["sigma"], d["eta"], np.array(d["energies"]), np.array(d["bohr"]),
                   np.array(d["transition"]), np.array(d["coherent_imag"]), jumps)

    def equals(self, other: "CoefficientTable") -> bool:
        same = (self.n, self.beta, self.sigma, self.eta) == (other.n, other.beta, other.sigma, other.eta)
        arrays = [(self.energies, other.energies), (self.bohr, other.bohr), (self.transition, other.transition),
                  (self.coherent, other.coherent)] + list(zip(self.jumps, other.jumps))
        return same and len(self.jumps) == len(other.jumps) and all(np.array_equal(a, b) for a, b in arrays)


def random_observable(dim: int, rng) -> np.ndarray:
    return random_hermitian(dim, rng)


__all__ = [
    "WeightFunctions",
    "LindbladOperator",
    "IntegrationError",
    "build_local_lindbladian",
    "build_full_lindbladian",
    "kms_inner",
    "kms_detailed_balance_residual",
    "fixed_point_residual",
    "choi_min_eigenvalue",
    "evolve",
    "evolve_heisenberg",
    "time_integral",
    "time_averaged_state",
    "dirichlet_form",
    "CoefficientTable",
    "HamiltonianSpec",
]
