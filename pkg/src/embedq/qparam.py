"""Closed-form values of the q parameter for the four embedded ensembles.

Every binomial is an exact Python integer and sums are accumulated as
``Fraction``; conversion to float happens only for the final ratio.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from ._validation import DomainError, check_beta, check_positive_int, check_statistics

__all__ = [
    "EnsembleKind",
    "SystemSpec",
    "binom",
    "g_factor",
    "q_asymptotic",
    "fegue_moments",
    "q_fegue",
    "q_fegoe",
    "q_begue",
    "q_for",
]

logger = logging.getLogger(__name__)


class EnsembleKind(Enum):
    FEGOE = ("fermion", 1)
    FEGUE = ("fermion", 2)
    BEGOE = ("boson", 1)
    BEGUE = ("boson", 2)

    @property
    def statistics(self) -> str:
        return self.value[0]

    @property
    def beta(self) -> int:
        return self.value[1]

    @classmethod
    def from_parts(cls, statistics: str, beta: int) -> "EnsembleKind":
        return cls((check_statistics(statistics), check_beta(beta)))

    @classmethod
    def parse(cls, name) -> "EnsembleKind":
        if isinstance(name, cls):
            return name
        try:
            return cls[str(name).upper()]
        except KeyError:
            raise DomainError(f"unknown ensemble kind {name!r}") from None


@dataclass(frozen=True)
class SystemSpec:
    """``m`` particles in ``N`` degenerate single-particle states, ``k``-body interaction."""

    N: int
    m: int
    k: int
    kind: EnsembleKind = EnsembleKind.FEGOE

    def __post_init__(self):
        object.__setattr__(self, "kind", EnsembleKind.parse(self.kind))
        check_positive_int(self.N, "N")
        check_positive_int(self.m, "m")
        check_positive_int(self.k, "k")
        if self.k > self.m:
            raise DomainError(f"body rank k={self.k} exceeds particle number m={self.m}")
        if self.statistics == "fermion" and self.m > self.N:
            raise DomainError(f"{self.m} fermions do not fit in N={self.N} orbitals")

    @property
    def statistics(self) -> str:
        return self.kind.statistics

    @property
    def beta(self) -> int:
        return self.kind.beta

    @property
    def dimension(self) -> int:
        if self.statistics == "fermion":
            return math.comb(self.N, self.m)
        return math.comb(self.N + self.m - 1, self.m)

    @property
    def k_dimension(self) -> int:
        if self.statistics == "fermion":
            return math.comb(self.N, self.k)
        return math.comb(self.N + self.k - 1, self.k)


def binom(a: int, b: int) -> int:
    """Binomial coefficient with ``C(a, b) = 0`` for ``b < 0``, ``a < 0`` or ``a < b``."""
    if b < 0 or a < 0 or a < b:
        return 0
    return math.comb(a, b)


def _check_order(N, m, k):
    for name, v in (("N", N), ("m", m), ("k", k)):
        check_positive_int(v, name)
    if not k <= m <= N:
        raise DomainError(f"need 1 <= k <= m <= N, got N={N}, m={m}, k={k}")


def _finish(raw: Fraction, label: str) -> float:
    value = float(raw)
    if value < -1e-9 or value > 1 + 1e-9:
        logger.warning("%s: raw q=%.12g outside [0, 1], clamped", label, value)
    return min(max(value, 0.0), 1.0)


def g_factor(m: int, k: int, r: int) -> float:
    """``G(m, k, r) = C(m - r k, k) / C(m, k)``."""
    check_positive_int(k, "k")
    if m < k or r < 0:
        raise DomainError(f"need m >= k >= 1 and r >= 0, got m={m}, k={k}, r={r}")
    return float(Fraction(binom(m - r * k, k), binom(m, k)))


def q_asymptotic(m: int, k: int) -> float:
    """Large-N value ``q = G(m, k, 1) = mu4 - 2``."""
    return g_factor(m, k, 1)


def fegue_moments(m: int, k: int) -> tuple[float, float, float]:
    """Reduced moments ``(mu4, mu6, mu8)`` of FEGUE(k) as ``N -> infinity``."""
    g1 = Fraction(binom(m - k, k), binom(m, k))
    g2 = Fraction(binom(m - 2 * k, k), binom(m, k))
    g3 = Fraction(binom(m - 3 * k, k), binom(m, k))
    mu4 = 2 + g1
    mu6 = 5 + 6 * g1 + 3 * g1**2 + g2 * g1
    tail = Fraction(0)
    for alpha in range(k + 1):
        den = binom(m, k) * binom(m - k, alpha)
        num = binom(k, alpha) ** 2 * binom(m - 2 * k, k - alpha)
        if num:
            tail += Fraction(num, den)
    mu8 = (
        14
        + 28 * g1
        + 28 * g1**2
        + 12 * g1**3
        + 8 * g2 * g1
        + 4 * g1 * g2**2
        + 8 * g1**2 * g2
        + g1 * g2 * g3
        + 2 * g1**2 * tail
    )
    return float(mu4), float(mu6), float(mu8)


def q_fegue(N: int, m: int, k: int) -> float:
    """q for FEGUE(k) with finite-N corrections to the fourth moment."""
    _check_order(N, m, k)

    def lam(nu, r):
        return binom(m - nu, r) * binom(N - m + r - nu, r)

    total = 0
    for nu in range(min(k, m - k) + 1):
        d = binom(N, nu) ** 2 - binom(N, nu - 1) ** 2
        total += lam(nu, m - k) * lam(nu, k) * d
    return _finish(Fraction(total, binom(N, m) * lam(0, k) ** 2), f"q_fegue({N},{m},{k})")


def q_fegoe(N: int, m: int, k: int) -> float:
    """q for FEGOE(k): ``F(N,m,k) / T(N,m,k)**2``."""
    _check_order(N, m, k)
    T = binom(m, k) * (binom(N - m + k, k) + 1)
    F = Fraction(binom(m, k) ** 2)
    for s in range(k + 1):
        prefactor = (
            binom(m - s, k - s) ** 2
            * binom(N - m + k - s, k)
            * binom(m - s, k)
            * binom(N - m, s)
            * binom(m, s)
        )
        if prefactor == 0:
            continue
        inverse = binom(N - s, k) * binom(k, s)
        if inverse == 0:
            raise DomainError(f"zero inverse binomial at s={s} for N={N}, m={m}, k={k}")
        F += (
            Fraction(prefactor * (N - 2 * s + 1), (N - s + 1) * inverse)
            * (2 + binom(N + 1, s))
        )
    return _finish(F / T**2, f"q_fegoe({N},{m},{k})")


def q_begue(N: int, m: int, k: int) -> float:
    """q for BEGUE(k); also used for BEGOE(k)."""
    for name, v in (("N", N), ("m", m), ("k", k)):
        check_positive_int(v, name)
    if k > m:
        raise DomainError(f"need k <= m, got m={m}, k={k}")

    def lam(nu, r):
        return binom(m - nu, r) * binom(N + m + nu - 1, r)

    total = 0
    for nu in range(min(k, m - k) + 1):
        d = binom(N + nu - 1, nu) ** 2 - binom(N + nu - 2, nu - 1) ** 2
        total += lam(nu, m - k) * lam(nu, k) * d
    raw = Fraction(total, binom(N + m - 1, m) * lam(0, k) ** 2)
    return _finish(raw, f"q_begue({N},{m},{k})")


def q_for(spec: SystemSpec) -> float:
    """Dispatch to the q formula for ``spec.kind``."""
    if spec.kind is EnsembleKind.FEGUE:
        return q_fegue(spec.N, spec.m, spec.k)
    if spec.kind is EnsembleKind.FEGOE:
        return q_fegoe(spec.N, spec.m, spec.k)
    return q_begue(spec.N, spec.m, spec.k)
