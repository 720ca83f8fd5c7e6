"""Hermitian matrix functions via eigendecomposition, and trace norms."""

from __future__ import annotations

import numpy as np

LOG_FLOOR = 1e-300


def hermitian_function(m: np.ndarray, f) -> np.ndarray:
    w, U = np.linalg.eigh((m + m.conj().T) / 2)
    return (U * f(w)) @ U.conj().T


def logm_h(m: np.ndarray) -> np.ndarray:
    """Matrix log of a positive definite matrix; raises if an eigenvalue is not positive."""
    w, U = np.linalg.eigh((m + m.conj().T) / 2)
    if w.min() <= 0:
        raise ValueError(
            f"matrix logarithm of a singular state (min eigenvalue {w.min():.3g}); regularize it first"
        )
    return (U * np.log(np.maximum(w, LOG_FLOOR))) @ U.conj().T


def powm_h(m: np.ndarray, p: float) -> np.ndarray:
    w, U = np.linalg.eigh((m + m.conj().T) / 2)
    w = np.clip(w, 0.0, None)
    with np.errstate(divide="ignore"):
        fw = np.where(w > 0, w**p, 0.0) if p >= 0 else w**p
    return (U * fw) @ U.conj().T


def sqrtm_h(m: np.ndarray) -> np.ndarray:
    return powm_h(m, 0.5)


def trace_norm(m: np.ndarray) -> float:
    m = np.asarray(m)
    if np.allclose(m, m.conj().T, atol=1e-14 * max(1.0, np.abs(m).max(initial=0.0))):
        return float(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2)).sum())
    return float(np.linalg.svd(m, compute_uv=False).sum())


def op_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2))


def random_hermitian(dim: int, rng, scale: float = 1.0) -> np.ndarray:
    G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    Hm = (G + G.conj().T) / 2
    return scale * Hm / np.linalg.norm(Hm, 2)
