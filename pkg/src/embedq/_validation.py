"""Input validation helpers shared by the public functions and estimators."""

from __future__ import annotations

import numbers

import numpy as np


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


def check_nonnegative_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < 0:
        raise DomainError(f"{name} must be >= 0, got {value}")
    return int(value)


def check_positive_int(value, name: str) -> int:
    value = check_nonnegative_int(value, name)
    if value == 0:
        raise DomainError(f"{name} must be >= 1")
    return value


def check_q(q) -> float:
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"q must lie in [0, 1], got {q}")
    return q


def check_statistics(statistics: str) -> str:
    if statistics not in ("fermion", "boson"):
        raise DomainError(f"statistics must be 'fermion' or 'boson', got {statistics!r}")
    return statistics


def check_beta(beta) -> int:
    if beta not in (1, 2):
        raise DomainError(f"beta must be 1 (orthogonal) or 2 (unitary), got {beta!r}")
    return int(beta)


def check_hermitian(H: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {H.shape}")
    scale = max(float(np.max(np.abs(H))), 1.0) if H.size else 1.0
    if H.size and np.max(np.abs(H - H.conj().T)) > atol * scale:
        raise DomainError("matrix is not Hermitian")
    return H


def check_1d(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr
