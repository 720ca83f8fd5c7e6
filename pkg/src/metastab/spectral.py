"""Bohr-frequency calculus: energy-resolved components, operator Fourier transforms and
the per-Bohr-pair contraction that every filtered quadratic form reduces to.

Work happens in the eigenbasis of H.  There an operator A has entries A_ij that change
the energy by nu_ij = E_i - E_j, so A_nu is A masked to the entries with that gap and

    A(omega, t)_ij = A_ij * fhat(omega - nu_ij) * exp(i nu_ij t).

Any integral of a product of two such transforms against w(omega) k(t) is therefore an
elementwise product with a scalar table indexed by two Bohr frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.linalg import expm

from . import kernels
from .pauli import Spectrum, diagonalize
from .validation import check_sigma_width, check_square


@dataclass(frozen=True)
class FilterParams:
    beta: float
    sigma: float | None = None

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("inverse temperature must be non-negative")
        if self.sigma is None:
            if self.beta == 0:
                raise ValueError("beta = 0 needs an explicit Gaussian width")
            object.__setattr__(self, "sigma", 1.0 / self.beta)
        check_sigma_width(self.beta, self.sigma)


@dataclass
class BohrDecomposition:
    """An operator split into components of definite energy change."""

    base: np.ndarray
    spectrum: Spectrum
    eig: np.ndarray = field(repr=False)  # base in the eigenbasis
    nu: np.ndarray = field(repr=False)  # nu_ij = E_i - E_j (snapped)

    @property
    def frequencies(self) -> np.ndarray:
        vals = np.unique(np.round(self.nu[np.abs(self.eig) > 0], 12))
        return vals

    def component(self, freq: float, tol: float | None = None) -> np.ndarray:
        tol = self.spectrum.tol if tol is None else tol
        mask = np.abs(self.nu - freq) <= tol
        return self.spectrum.from_eigenbasis(np.where(mask, self.eig, 0))

    @property
    def components(self) -> dict:
        return {float(f): self.component(f) for f in self.frequencies}

    def reconstruct(self) -> np.ndarray:
        return sum(self.components.values(), np.zeros_like(self.base))


def bohr_decompose(A, spectrum: Spectrum) -> BohrDecomposition:
    A = check_square(A, "operator")
    if A.shape[0] != spectrum.dim:
        raise ValueError(f"operator dimension {A.shape[0]} does not match Hamiltonian dimension {spectrum.dim}")
    e = spectrum.snapped
    return BohrDecomposition(A, spectrum, spectrum.to_eigenbasis(A), e[:, None] - e[None, :])


def heisenberg_evolve(decomp: BohrDecomposition, t: float) -> np.ndarray:
    """e^{iHt} A e^{-iHt} = sum_nu e^{i nu t} A_nu."""
    return decomp.spectrum.from_eigenbasis(decomp.eig * np.exp(1j * decomp.nu * t))


def operator_ft(decomp: BohrDecomposition, fp: FilterParams, omega: float, t: float = 0.0) -> np.ndarray:
    """Gaussian-filtered component sum_nu A_nu fhat(omega - nu), optionally Heisenberg-evolved."""
    coeff = kernels.fhat(omega - decomp.nu, fp.sigma)
    if t:
        coeff = coeff * np.exp(1j * decomp.nu * t)
    return decomp.spectrum.from_eigenbasis(decomp.eig * coeff)


def sum_over_energies(decomp: BohrDecomposition, fp: FilterParams) -> np.ndarray:
    """(2 sigma sqrt(2 pi))^{-1/2} times the omega-integral of A(omega), by adaptive quadrature."""
    nu_max = float(np.abs(decomp.nu).max(initial=0.0))
    half = nu_max + 12 * fp.sigma
    f = lambda w: decomp.eig * kernels.fhat(w - decomp.nu, fp.sigma)
    val, _ = integrate.quad_vec(f, -half, half, epsabs=1e-13, epsrel=1e-12, limit=400)
    return decomp.spectrum.from_eigenbasis(val / np.sqrt(2 * fp.sigma * np.sqrt(2 * np.pi)))


def imaginary_time_conjugate_ft(decomp: BohrDecomposition, fp: FilterParams, omega: float, beta_t: float):
    """Both sides of e^{bH} A(w) e^{-bH} = e^{b w + s^2 b^2} A(w + 2 s^2 b).

    The left side uses dense matrix exponentials of H, the right side only the filter.
    Returns (lhs, rhs).
    """
    H = decomp.spectrum.matrix()
    lhs = expm(beta_t * H) @ operator_ft(decomp, fp, omega) @ expm(-beta_t * H)
    s2 = fp.sigma**2
    rhs = np.exp(beta_t * omega + s2 * beta_t**2) * operator_ft(decomp, fp, omega + 2 * s2 * beta_t)
    return lhs, rhs


def double_bohr(A, spec1: Spectrum, spec2: Spectrum) -> dict:
    """{(nu1, nu2): (A_nu1)_nu2} with nu1 taken w.r.t. H1 and nu2 w.r.t. H2."""
    table = {}
    for nu1, A1 in bohr_decompose(A, spec1).components.items():
        for nu2, A12 in bohr_decompose(A1, spec2).components.items():
            table[(nu1, nu2)] = A12
    return table


def double_bohr_residual(A, spec1: Spectrum, spec2: Spectrum, z: complex) -> float:
    """Max deviation between e^{zH2}e^{-zH1} A e^{zH1}e^{-zH2} and its double Bohr expansion."""
    H1, H2 = spec1.matrix(), spec2.matrix()
    lhs = expm(z * H2) @ expm(-z * H1) @ A @ expm(z * H1) @ expm(-z * H2)
    rhs = sum(B * np.exp(z * (nu2 - nu1)) for (nu1, nu2), B in double_bohr(A, spec1, spec2).items())
    return float(np.abs(lhs - rhs).max())


def convolution_constant(s1: float, s2: float) -> float:
    s3 = np.hypot(s1, s2)
    return np.sqrt(s3) / (np.sqrt(s1 * s2) * np.sqrt(2) * (2 * np.pi) ** 0.25)


def convolve_ft(decomp: BohrDecomposition, s1: float, s2: float, omega: float):
    """Both sides of A_{s3}(w) = C * int A_{s1}(w') fhat_{s2}(w - w') dw', s3^2 = s1^2 + s2^2.

    The right side is an adaptive quadrature.  Returns (direct, convolved).
    """
    s3 = float(np.hypot(s1, s2))
    direct = decomp.spectrum.from_eigenbasis(decomp.eig * kernels.fhat(omega - decomp.nu, s3))
    nu_max = float(np.abs(decomp.nu).max(initial=0.0))
    lo, hi = -nu_max - 12 * s1, nu_max + 12 * s1
    lo, hi = min(lo, omega - 12 * s2), max(hi, omega + 12 * s2)
    f = lambda w: decomp.eig * (kernels.fhat(w - decomp.nu, s1) * kernels.fhat(omega - w, s2))
    pts = sorted(set(np.round(np.append(decomp.nu.ravel(), omega), 12)))
    val = np.zeros_like(decomp.eig)
    # split at every Bohr frequency so narrow widths stay resolved
    edges = [lo] + [p for p in pts if lo < p < hi] + [hi]
    for a, b in zip(edges[:-1], edges[1:]):
        part, _ = integrate.quad_vec(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=400)
        val = val + part
    conv = decomp.spectrum.from_eigenbasis(convolution_constant(s1, s2) * val)
    return direct, conv


def twirl_ft(decomp: BohrDecomposition, s1: float, s2: float, omega: float) -> float:
    """Residual of the twirling identity on every (nu1, nu2) pair present in A.

    Left: the t-integral of A_{s1}(w,t) (x) A_{s1}(w,t)^dag against f_{s2}(t)^2, whose
    Gaussian time integral is exp(-(nu1-nu2)^2 / 8 s2^2).  Right: the w'-integral of
    A_{s3}(w') (x) A_{s3}(w')^dag against a normal density of variance s1^2 - s3^2, done
    by quadrature.  The tensors share the factor A_ij conj(A_lk); the residual is the max
    over entries of |A_ij A_lk| times the coefficient difference.
    """
    s3 = 1.0 / np.sqrt(1 / s1**2 + 1 / s2**2)
    nus = decomp.frequencies
    n1, n2 = np.meshgrid(nus, nus, indexing="ij")
    lhs = kernels.fhat(omega - n1, s1) * kernels.fhat(omega - n2, s1) * np.exp(-((n1 - n2) ** 2) / (8 * s2**2))
    var = s1**2 - s3**2
    dens = lambda w: np.exp(-((omega - w) ** 2) / (2 * var)) / np.sqrt(2 * np.pi * var)
    f = lambda w: dens(w) * kernels.fhat(w - n1, s3) * kernels.fhat(w - n2, s3)
    half = float(np.abs(nus).max(initial=0.0)) + abs(omega) + 14 * max(s1, s3)
    rhs, _ = integrate.quad_vec(f, -half, half, epsabs=1e-15, epsrel=1e-12, limit=400)
    scale = np.abs(decomp.eig).max(initial=0.0) ** 2
    return float(np.abs(lhs - rhs).max(initial=0.0) * scale)


# ------------------------------------------------------- Bohr-pair contraction


def pair_tensor(AL: np.ndarray, AR: np.ndarray, nu: np.ndarray, kernel: Callable) -> np.ndarray:
    """Z[j,i,k,l] = conj(AL[j,i]) AR[k,l] K(nu_ji, nu_kl), all in the eigenbasis.

    ``kernel(nu1, nu2)`` must broadcast.  With this tensor

        int int w(omega) k(t) Tr[M1 AL(omega,t)^dag M2 AR(omega,t)] = einsum('li,jk,jikl->', M1, M2, Z)

    where the kernel is the omega pair integral times the Fourier transform of k at
    nu_kl - nu_ji.
    """
    # evaluate on distinct frequencies only, then gather
    B, inv = np.unique(np.round(nu, 12), return_inverse=True)
    inv = inv.reshape(nu.shape)
    K = kernel(B[:, None], B[None, :])[inv[:, :, None, None], inv[None, None, :, :]]
    return np.conj(AL)[:, :, None, None] * AR[None, None, :, :] * K


def contract(Z: np.ndarray, M1: np.ndarray, M2: np.ndarray) -> complex:
    """sum_{jikl} M1[l,i] M2[j,k] Z[j,i,k,l]."""
    R = np.tensordot(Z, M1.T, axes=([1, 3], [0, 1]))
    return complex(np.sum(R * M2))


def contract_many(Z: np.ndarray, M1s, M2s, coeffs) -> complex:
    """sum_t coeffs[t] * contract(Z, M1s[t], M2s[t]) with a single tensordot."""
    M1 = np.stack([m.T for m in M1s], axis=-1)
    R = np.tensordot(Z, M1, axes=([1, 3], [0, 1]))  # (j, k, t)
    M2 = np.stack(M2s, axis=-1)
    return complex(np.sum(R * M2, axis=(0, 1)) @ np.asarray(coeffs))


def omega_time_kernel(weight: kernels.PiecewiseExp, sigma: float, time_ft: Callable | None = None) -> Callable:
    """Combine an omega-weight and (optionally) a time filter transform into a pair kernel."""

    def k(n1, n2):
        val = kernels.pair_integral(weight, n1, n2, sigma)
        if time_ft is not None:
            val = val * time_ft(n2 - n1)
        return val

    return k


def commutator_form(Z: np.ndarray, X: np.ndarray, Y: np.ndarray, W1: np.ndarray, W2: np.ndarray) -> complex:
    """int int Tr[[A,X]^dag W1 [A,Y] W2] weighted by the kernel baked into Z (eigenbasis)."""
    Xd = X.conj().T
    return contract_many(
        Z,
        [Y @ W2 @ Xd, W2 @ Xd, Y @ W2, W2],
        [W1, W1 @ Y, Xd @ W1, Xd @ W1 @ Y],
        [1.0, -1.0, -1.0, 1.0],
    )


def parseval_bound_check(jumps, spectrum: Spectrum, weight: kernels.PiecewiseExp, sigma: float):
    """(||sum_a int w A^a(w)^dag A^a(w) dw||, sup w * ||sum_a A^a^dag A^a||)."""
    e = spectrum.snapped
    nu = e[:, None] - e[None, :]
    D = spectrum.dim
    lhs = np.zeros((D, D), dtype=complex)
    rhs = np.zeros((D, D), dtype=complex)
    for A in jumps:
        Ae = spectrum.to_eigenbasis(np.asarray(A, dtype=complex))
        # (A^dag A)_il = sum_j conj(A_ji) A_jl W(nu_ji, nu_jl)
        W = kernels.pair_integral(weight, nu[:, :, None], nu[:, None, :], sigma)
        lhs += np.einsum("ji,jl,jil->il", Ae.conj(), Ae, W)
        rhs += Ae.conj().T @ Ae
    return float(np.linalg.norm(lhs, 2)), float(weight.sup() * np.linalg.norm(rhs, 2))


__all__ = [
    "FilterParams",
    "BohrDecomposition",
    "bohr_decompose",
    "heisenberg_evolve",
    "operator_ft",
    "sum_over_energies",
    "imaginary_time_conjugate_ft",
    "double_bohr",
    "double_bohr_residual",
    "convolve_ft",
    "convolution_constant",
    "twirl_ft",
    "pair_tensor",
    "contract",
    "contract_many",
    "omega_time_kernel",
    "commutator_form",
    "parseval_bound_check",
    "diagonalize",
]
