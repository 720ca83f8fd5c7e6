"""Input validation helpers shared by the numerical routines and the estimator API."""

from __future__ import annotations

import os

import numpy as np

DEFAULT_MAX_QUBITS = 10
DEFAULT_MAX_SUPEROP_QUBITS = 7


def max_qubits(override: int | None = None) -> int:
    if override is not None:
        return int(override)
    return int(os.environ.get("METASTAB_MAX_QUBITS", DEFAULT_MAX_QUBITS))


def check_square(m, what: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be square, got shape {m.shape}")
    return m


def check_hermitian(m, tol: float = 1e-10, what: str = "matrix") -> np.ndarray:
    m = check_square(m, what)
    scale = max(1.0, np.abs(m).max(initial=0.0))
    if np.abs(m - m.conj().T).max(initial=0.0) > tol * scale:
        raise ValueError(f"{what} is not Hermitian")
    return m


def check_density_matrix(m, tol: float = 1e-10, what: str = "state") -> np.ndarray:
    m = check_hermitian(m, tol, what)
    if abs(np.trace(m) - 1) > tol * m.shape[0]:
        raise ValueError(f"{what} does not have unit trace (trace={np.trace(m).real:.3g})")
    if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -max(tol, 1e-8):
        raise ValueError(f"{what} is not positive semidefinite")
    return (m + m.conj().T) / 2


def check_full_rank(m, floor: float = 0.0, what: str = "state") -> np.ndarray:
    lam = np.linalg.eigvalsh(m).min()
    if lam <= floor:
        raise ValueError(
            f"{what} is singular (min eigenvalue {lam:.3g}); regularize it first with functionals.regularize"
        )
    return m


def check_states(states) -> np.ndarray:
    """Coerce a single density matrix or a stack of them into shape (k, D, D)."""
    arr = np.asarray(states, dtype=complex)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"expected (k, D, D) stack of density matrices, got {arr.shape}")
    return np.stack([check_density_matrix(s) for s in arr])


def check_sigma_width(beta: float, sigma: float) -> None:
    if not (sigma > 0):
        raise ValueError("Gaussian width must be positive")
    if beta > 0 and sigma > 1.0 / beta * (1 + 1e-12):
        raise ValueError(f"Gaussian width {sigma} exceeds 1/beta = {1 / beta}")


def random_state(dim: int, rng, rank: int | None = None) -> np.ndarray:
    """Random density matrix from the induced (Ginibre) measure."""
    rank = dim if rank is None else rank
    G = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = G @ G.conj().T
    return m / np.trace(m).real


def random_unitary(dim: int, rng) -> np.ndarray:
    G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    Q, R = np.linalg.qr(G)
    return Q * (np.diag(R) / np.abs(np.diag(R)))
