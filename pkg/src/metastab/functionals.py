"""Scalar functionals of a state relative to the Gibbs state of a detailed-balanced generator.

Entropy production, the s-weighted Fisher information, the approximate-detailed-balance
error in two representations, free energies and regularization.  All filtered integrals
go through the Bohr-pair contraction of :mod:`metastab.spectral`; the only numerical
quadrature left is the one-dimensional integral over s.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .infotheory import von_neumann_entropy
from .lindblad import LindbladOperator
from .matfuncs import logm_h, op_norm, trace_norm
from .pauli import Spectrum, gibbs_state
from .spectral import commutator_form, contract, omega_time_kernel, pair_tensor
from .validation import check_density_matrix, check_full_rank

S_NODES = 64
S_GATE = 1e-6


class QuadratureError(RuntimeError):
    pass


def weighted_inner(X, Y, w, s: float = 0.0) -> complex:
    """Tr[X^dag w^(1/2+s) Y w^(1/2-s)]; s = 0 is the KMS product, s = 1/2 the GNS one."""
    if abs(s) > 0.5 + 1e-15:
        raise ValueError("s must lie in [-1/2, 1/2]")
    lam, U = np.linalg.eigh(w)
    if lam.min() <= 0:
        raise ValueError("weight state must be full rank")
    P = (U * lam ** (0.5 + s)) @ U.conj().T
    Q = (U * lam ** (0.5 - s)) @ U.conj().T
    return complex(np.trace(np.conj(X).T @ P @ Y @ Q))


def relative_entropy(sigma, rho) -> float:
    """D(sigma || rho) = Tr[sigma (log sigma - log rho)]; sigma may be rank deficient."""
    return float(-von_neumann_entropy(sigma) - np.trace(sigma @ logm_h(rho)).real)


def free_energy(sigma, H, beta: float) -> float:
    """Tr[H sigma] - S(sigma) / beta."""
    return float(np.trace(np.asarray(H) @ sigma).real - von_neumann_entropy(sigma) / beta)


def gibbs_free_energy(spectrum: Spectrum, beta: float) -> float:
    from .pauli import log_partition_function

    return -log_partition_function(spectrum, beta) / beta


# ------------------------------------------------------------------ helpers


def log_rho_eig(sp: Spectrum, beta: float) -> np.ndarray:
    e = sp.snapped
    shifted = -beta * (e - e.min())
    return np.diag(shifted - np.log(np.exp(shifted).sum())).astype(complex)


def _state_eig(sp: Spectrum, sigma):
    """Eigen-decomposition of sigma expressed in the H eigenbasis."""
    se = sp.to_eigenbasis(np.asarray(sigma, dtype=complex))
    lam, V = np.linalg.eigh((se + se.conj().T) / 2)
    return lam, V


def _power(lam, V, p):
    return (V * lam**p) @ V.conj().T


def _full_rank_state(sigma, what="state"):
    sigma = check_density_matrix(sigma)
    return check_full_rank(sigma, 0.0, what)


def _gauss_legendre(a: float, b: float, k: int):
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


# ------------------------------------------------------------- EP and FI


def entropy_production(lind: LindbladOperator, sigma) -> float:
    """-Tr[L[sigma](log sigma - log rho)] for whatever generator is passed."""
    sigma = _full_rank_state(sigma)
    sp = lind.spectrum
    O = sp.to_eigenbasis(logm_h(sigma)) - log_rho_eig(sp, lind.fp.beta)
    Ls = sp.to_eigenbasis(lind.apply(sigma))
    return float(-np.trace(Ls @ O).real)


def coherent_entropy_flow(lind: LindbladOperator, sigma) -> float:
    """Contribution of -i[H, sigma] alone; zero when sigma commutes with H."""
    sigma = _full_rank_state(sigma)
    sp = lind.spectrum
    se = sp.to_eigenbasis(sigma)
    O = sp.to_eigenbasis(logm_h(sigma)) - log_rho_eig(sp, lind.fp.beta)
    return float(-np.trace((-1j * lind.nu * se) @ O).real)


def _s_integral(lind: LindbladOperator, sigma, a: int, weight_for_s, time_ft_for_s, pieces, nodes):
    sp = lind.spectrum
    beta = lind.fp.beta
    sigma_s = lind.fp.sigma
    lam, V = _state_eig(sp, sigma)
    if lam.min() <= 0:
        raise ValueError("state is singular; regularize it first with functionals.regularize")
    O = (V * np.log(lam)) @ V.conj().T - log_rho_eig(sp, beta)
    Ae = lind.jump_eig[a]
    nu = lind.nu
    total = 0.0
    for lo, hi in pieces:
        xs, ws = _gauss_legendre(lo, hi, nodes)
        for s, w in zip(xs, ws):
            kern = omega_time_kernel(weight_for_s(s, beta, sigma_s), sigma_s, lambda x, s=s: time_ft_for_s(x, s, beta))
            Z = pair_tensor(Ae, Ae, nu, kern)
            val = commutator_form(Z, O, O, _power(lam, V, 0.5 + s), _power(lam, V, 0.5 - s))
            total += w * val.real
    return float(total)


def _gated(fn, nodes: int, gate: float, check: bool):
    a = fn(nodes)
    if not check:
        return a
    b = fn(2 * nodes)
    if abs(a - b) > gate * max(abs(b), 1e-300) and abs(a - b) > 1e-14:
        raise QuadratureError(f"s-quadrature not converged: {nodes} nodes give {a!r}, {2 * nodes} give {b!r}")
    return b


def fisher_information(lind: LindbladOperator, sigma, a: int = 0, nodes: int = S_NODES, check: bool = True,
                       gate: float = S_GATE) -> float:
    """Integral over s in (-1/2, 1/2) of the s-weighted commutator norm of log sigma - log rho.

    Frequency weight h_s, time filter g_s.  With ``check`` the rule is repeated with
    doubled nodes and a relative change above ``gate`` raises :class:`QuadratureError`.
    """
    sigma = _full_rank_state(sigma)
    fn = lambda k: _s_integral(lind, sigma, a, kernels.s_weighted_h, kernels.g_s_ft, [(-0.5, 0.5)], k)
    return _gated(fn, nodes, gate, check)


# ------------------------------------------------------------------- ADB


def _adb_four_terms(lind: LindbladOperator, sigma, a: int, with_time: bool) -> float:
    sp = lind.spectrum
    beta, sg = lind.fp.beta, lind.fp.sigma
    lam, V = _state_eig(sp, check_density_matrix(sigma))
    lam = np.clip(lam, 0.0, None)
    S = (V * np.sqrt(lam)) @ V.conj().T
    S2 = (V * lam) @ V.conj().T
    I = np.eye(sp.dim)
    nu = lind.nu
    A = lind.jump_eig[a]
    Ap = A * np.exp(beta * nu / 2)  # rho^{-1/2} A rho^{1/2}
    tf = (lambda x: kernels.g_ft(x, beta)) if with_time else None
    kern = omega_time_kernel(kernels.metropolis(beta, sg), sg, tf)
    val = (
        contract(pair_tensor(A, A, nu, kern), S2, I)
        - contract(pair_tensor(A, Ap, nu, kern), S, S)
        - contract(pair_tensor(Ap, A, nu, kern), S, S)
        + contract(pair_tensor(Ap, Ap, nu, kern), I, S2)
    )
    return float(val.real)


def adb_error(lind: LindbladOperator, sigma, a: int = 0) -> float:
    """Weighted squared distance between A(w,t) sqrt(sigma) and sqrt(sigma) rho^-1/2 A(w,t) rho^1/2."""
    return _adb_four_terms(lind, sigma, a, with_time=True)


def adb_error_no_time(lind: LindbladOperator, sigma, a: int = 0) -> float:
    """Same as :func:`adb_error` with the time average dropped (frequency filter only)."""
    return _adb_four_terms(lind, sigma, a, with_time=False)


def adb_error_int_log(lind: LindbladOperator, sigma, a: int = 0, nodes: int = S_NODES, check: bool = True,
                      gate: float = S_GATE) -> float:
    """ADB as an s-integral of commutator norms of log sigma - log rho (time filter g^ADB_s).

    The time filter depends on |s|, so each half-interval gets its own rule.
    """
    sigma = _full_rank_state(sigma)
    fn = lambda k: _s_integral(lind, sigma, a, kernels.s_weighted_h, kernels.g_adb_ft, [(-0.5, 0.0), (0.0, 0.5)], k)
    return _gated(fn, nodes, gate, check)


# ----------------------------------------------------------- regularization


def regularize(sigma, rho, delta: float):
    """(sigma_delta, Delta_delta) with sigma_delta = (1 - delta) sigma + delta rho.

    Delta_delta = log(1/delta) + ||log rho|| bounds ||log sigma_delta|| up to a constant.
    """
    if not 0.0 <= delta <= 0.5:
        raise ValueError("regularization parameter must lie in [0, 1/2]")
    sigma = np.asarray(sigma, dtype=complex)
    out = (1 - delta) * sigma + delta * np.asarray(rho, dtype=complex)
    big = math.inf if delta == 0 else math.log(1 / delta) + op_norm(logm_h(rho))
    return (out + out.conj().T) / 2, big


# ----------------------------------------------------------------- reports


def log_corrected_fisher(fi: float, log_gap_norm: float, jump_norm: float = 1.0) -> tuple:
    """FI * factor with factor = 1 + log(||log s - log r||^2 ||A||^2 / FI), clamped below at 1."""
    if fi <= 0:
        return 0.0, 1.0
    factor = 1.0 + math.log(max(log_gap_norm**2 * jump_norm**2 / fi, 1e-300))
    factor = max(factor, 1.0)
    return fi * factor, factor


def adb_vs_fi_report(lind: LindbladOperator, sigma, a: int = 0, nodes: int = S_NODES) -> dict:
    sigma = _full_rank_state(sigma)
    sp = lind.spectrum
    La = lind.local(a)
    adb = adb_error(lind, sigma, a)
    fi = fisher_information(lind, sigma, a, nodes=nodes)
    gap = op_norm(logm_h(sigma) - sp.from_eigenbasis(log_rho_eig(sp, lind.fp.beta)))
    bound, factor = log_corrected_fisher(fi, gap, op_norm(lind.jumps[a]))
    return {
        "ADB": adb,
        "FI": fi,
        "log_gap_norm": gap,
        "log_factor": factor,
        "FI_log_corrected": bound,
        "ratio": adb / bound if bound > 0 else 0.0,
        "local_stationarity": trace_norm(La.apply(sigma)),
        "sqrt_ADB": math.sqrt(max(adb, 0.0)),
    }


@dataclass
class MetastabilityReport:
    state_id: str
    eps_meta: float
    ep: list
    fi: list
    adb: list
    coherent_ep: float
    free_energy: float
    relative_entropy: float
    delta: float = 0.0
    jump_labels: list = field(default_factory=list)

    def rows(self) -> list:
        base = {"state_id": self.state_id, "eps_meta": self.eps_meta, "coherent_ep": self.coherent_ep,
                "free_energy": self.free_energy, "relative_entropy": self.relative_entropy, "delta": self.delta}
        labels = self.jump_labels or [str(i) for i in range(len(self.ep))]
        return [dict(base, jump=lab, EP=e, FI=f, ADB=d) for lab, e, f, d in zip(labels, self.ep, self.fi, self.adb)]

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @property
    def totals(self) -> dict:
        return {"EP": float(sum(self.ep)), "FI": float(sum(self.fi)), "ADB": float(sum(self.adb))}


def metastability_report(lind: LindbladOperator, sigma, state_id: str = "state", delta: float = 0.0,
                         jump_labels=None, nodes: int = S_NODES) -> MetastabilityReport:
    sp = lind.spectrum
    beta = lind.fp.beta
    rho = gibbs_state(sp, beta)
    if delta:
        sigma, _ = regularize(sigma, rho, delta)
    sigma = _full_rank_state(sigma)
    J = len(lind.jumps)
    ep = [entropy_production(lind.local(a), sigma) for a in range(J)]
    fi = [fisher_information(lind, sigma, a, nodes=nodes) for a in range(J)]
    adb = [adb_error(lind, sigma, a) for a in range(J)]
    return MetastabilityReport(
        state_id,
        trace_norm(lind.apply(sigma)),
        ep,
        fi,
        adb,
        coherent_entropy_flow(lind, sigma) if lind.hamiltonian_term else 0.0,
        free_energy(sigma, sp.matrix(), beta),
        relative_entropy(sigma, rho),
        delta,
        list(jump_labels or []),
    )


TRAJECTORY_COLUMNS = ("t", "eps_meta", "EP", "FI", "ADB")


def write_trajectory_csv(rows, path) -> None:
    """rows: iterable of (t, MetastabilityReport) or dicts with the trajectory columns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_COLUMNS)
        for r in rows:
            if isinstance(r, tuple):
                t, rep = r
                tot = rep.totals
                r = {"t": t, "eps_meta": rep.eps_meta, **tot}
            w.writerow([repr(float(r[c])) for c in TRAJECTORY_COLUMNS])
