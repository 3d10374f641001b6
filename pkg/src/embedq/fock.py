"""Occupation-number bases and k-particle operator strings.

Conventions
-----------
* Orbitals are labelled ``0 .. N-1`` in code (``1 .. N`` in physics notation).
* Basis tables are sorted lexicographically (ascending) on the occupation
  vector read from the first orbital upward. The order is frozen: seeded
  runs depend on it.
* A fermion state ``|n_1 ... n_N>`` is ``(a_1^+)^{n_1} (a_2^+)^{n_2} ... |0>``.
  ``a_j`` and ``a_j^+`` pick up ``(-1)**(number of occupied orbitals below j)``.
* ``psi^+(alpha) = N_alpha a^+_{mu_1} ... a^+_{mu_k}`` and ``psi(gamma)`` is its
  adjoint, so ``psi^+(alpha) psi(gamma)`` restricted to k particles is
  ``|alpha><gamma|``. ``N_alpha = 1/sqrt(prod nu_i!)`` for bosons, 1 for fermions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from ._validation import DomainError, check_nonnegative_int, check_positive_int, check_statistics

__all__ = [
    "OccupationState",
    "BasisTable",
    "OperatorString",
    "AmplitudeTransition",
    "enumerate_basis",
    "enumerate_k_configs",
    "apply_annihilation",
    "apply_creation",
    "one_body_diagonal",
    "default_sp_energies",
    "orbital_distance",
    "format_basis",
]


@dataclass(frozen=True)
class OccupationState:
    occupations: tuple[int, ...]
    statistics: str = "fermion"
    n_particles: int = field(init=False, compare=False)

    def __post_init__(self):
        occ = tuple(int(n) for n in self.occupations)
        check_statistics(self.statistics)
        if any(n < 0 for n in occ):
            raise DomainError(f"negative occupation in {occ}")
        if self.statistics == "fermion" and any(n > 1 for n in occ):
            raise DomainError(f"fermion occupation above one in {occ}")
        object.__setattr__(self, "occupations", occ)
        object.__setattr__(self, "n_particles", sum(occ))

    @property
    def N(self) -> int:
        return len(self.occupations)

    @classmethod
    def from_orbitals(cls, N: int, orbitals: Sequence[int], statistics: str = "fermion"):
        """State with one particle per entry of ``orbitals`` (repeats allowed for bosons)."""
        occ = [0] * N
        for i in orbitals:
            occ[i] += 1
        return cls(tuple(occ), statistics)

    def __str__(self):
        return "|" + ",".join(map(str, self.occupations)) + ">"


class BasisTable:
    """Immutable, canonically ordered list of occupation states with rank lookup."""

    def __init__(self, N: int, n_particles: int, statistics: str, states: Sequence[tuple[int, ...]]):
        self.N = N
        self.n_particles = n_particles
        self.statistics = statistics
        self._states = tuple(sorted(states))
        self._index = {s: r for r, s in enumerate(self._states)}
        if len(self._index) != len(self._states):
            raise DomainError("duplicate states in basis")
        occ = np.array(self._states, dtype=np.int64).reshape(len(self._states), N)
        occ.flags.writeable = False
        self.occupations = occ

    def __len__(self) -> int:
        return len(self._states)

    def __iter__(self) -> Iterator[OccupationState]:
        for s in self._states:
            yield OccupationState(s, self.statistics)

    def __getitem__(self, rank: int) -> OccupationState:
        return OccupationState(self._states[rank], self.statistics)

    def index(self, state) -> int:
        """Rank of ``state`` (an ``OccupationState`` or occupation tuple)."""
        key = state.occupations if isinstance(state, OccupationState) else tuple(state)
        try:
            return self._index[key]
        except KeyError:
            raise DomainError(f"{key} is not in this basis") from None

    def __contains__(self, state) -> bool:
        key = state.occupations if isinstance(state, OccupationState) else tuple(state)
        return key in self._index

    def __repr__(self):
        return f"BasisTable(N={self.N}, n_particles={self.n_particles}, statistics={self.statistics!r}, size={len(self)})"


def _occupation_tuples(N: int, m: int, statistics: str):
    if statistics == "fermion":
        for orbs in itertools.combinations(range(N), m):
            occ = [0] * N
            for i in orbs:
                occ[i] = 1
            yield tuple(occ)
    else:
        for orbs in itertools.combinations_with_replacement(range(N), m):
            occ = [0] * N
            for i in orbs:
                occ[i] += 1
            yield tuple(occ)


def enumerate_basis(N: int, m: int, statistics: str) -> BasisTable:
    """All ``m``-particle occupation states over ``N`` orbitals, canonically ordered."""
    check_positive_int(N, "N")
    check_nonnegative_int(m, "m")
    check_statistics(statistics)
    if statistics == "fermion" and m > N:
        raise DomainError(f"{m} fermions do not fit in N={N} orbitals")
    return BasisTable(N, m, statistics, list(_occupation_tuples(N, m, statistics)))


def enumerate_k_configs(N: int, k: int, statistics: str) -> BasisTable:
    """k-particle configurations labelling the k-body matrix, same order as bases."""
    check_positive_int(k, "k")
    return enumerate_basis(N, k, statistics)


@dataclass(frozen=True)
class OperatorString:
    """Ordered orbital labels of a k-particle creation or annihilation operator."""

    orbitals: tuple[int, ...]
    mode: str = "creation"

    def __post_init__(self):
        orbs = tuple(int(i) for i in self.orbitals)
        if self.mode not in ("creation", "annihilation"):
            raise DomainError(f"mode must be 'creation' or 'annihilation', got {self.mode!r}")
        if any(b < a for a, b in zip(orbs, orbs[1:])):
            raise DomainError(f"orbital labels must be non-decreasing, got {orbs}")
        object.__setattr__(self, "orbitals", orbs)

    @classmethod
    def from_state(cls, state: OccupationState, mode: str = "creation") -> "OperatorString":
        orbs = [i for i, n in enumerate(state.occupations) for _ in range(n)]
        return cls(tuple(orbs), mode)

    def multiplicities(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for i in self.orbitals:
            out[i] = out.get(i, 0) + 1
        return out

    def normalization(self, statistics: str) -> float:
        if statistics == "fermion":
            return 1.0
        return 1.0 / math.sqrt(math.prod(math.factorial(v) for v in self.multiplicities().values()))


@dataclass(frozen=True)
class AmplitudeTransition:
    target: OccupationState
    amplitude: float
    rank: int | None = None


def _check_string(state: OccupationState, string: OperatorString, mode: str):
    if string.mode != mode:
        raise DomainError(f"expected a {mode} string, got {string.mode}")
    if state.statistics == "fermion" and len(set(string.orbitals)) != len(string.orbitals):
        raise DomainError(f"fermion string repeats an orbital: {string.orbitals}")
    if string.orbitals and string.orbitals[-1] >= state.N:
        raise DomainError(f"orbital {string.orbitals[-1]} outside N={state.N}")


def _finish(occ, amp, state, basis):
    target = OccupationState(tuple(occ), state.statistics)
    rank = basis.index(target) if basis is not None else None
    return AmplitudeTransition(target, amp, rank)


def apply_annihilation(
    state: OccupationState,
    string: OperatorString,
    basis: BasisTable | None = None,
    normalized: bool = True,
):
    """Apply ``psi(gamma)``; ``None`` if an orbital in ``gamma`` is empty.

    With ``normalized=False`` the bare boson product is applied, without the
    ``1/sqrt(prod nu_i!)`` factor of the k-particle configuration.
    """
    _check_string(state, string, "annihilation")
    occ = list(state.occupations)
    amp = string.normalization(state.statistics) if normalized else 1.0
    if state.statistics == "fermion":
        # psi(gamma) = a_{mu_k} ... a_{mu_1}: mu_1 acts first
        for j in string.orbitals:
            if occ[j] == 0:
                return None
            if sum(occ[:j]) % 2:
                amp = -amp
            occ[j] = 0
    else:
        for j in string.orbitals:
            if occ[j] == 0:
                return None
            amp *= math.sqrt(occ[j])
            occ[j] -= 1
    return _finish(occ, amp, state, basis)


def apply_creation(
    state: OccupationState,
    string: OperatorString,
    basis: BasisTable | None = None,
    normalized: bool = True,
):
    """Apply ``psi^+(alpha)``; ``None`` if Pauli blocked."""
    _check_string(state, string, "creation")
    occ = list(state.occupations)
    amp = string.normalization(state.statistics) if normalized else 1.0
    if state.statistics == "fermion":
        # psi^+(alpha) = a^+_{mu_1} ... a^+_{mu_k}: mu_k acts first
        for j in reversed(string.orbitals):
            if occ[j]:
                return None
            if sum(occ[:j]) % 2:
                amp = -amp
            occ[j] = 1
    else:
        for j in string.orbitals:
            occ[j] += 1
            amp *= math.sqrt(occ[j])
    return _finish(occ, amp, state, basis)


def default_sp_energies(N: int) -> np.ndarray:
    """Mean-field energies ``eps_i = i + 1/i`` for ``i = 1 .. N``."""
    i = np.arange(1, check_positive_int(N, "N") + 1, dtype=float)
    return i + 1.0 / i


def one_body_diagonal(state, eps) -> float:
    """``sum_i n_i eps_i`` for one state, or a vector over a ``BasisTable``."""
    eps = np.asarray(eps, dtype=float)
    if isinstance(state, BasisTable):
        if eps.shape != (state.N,):
            raise DomainError(f"need {state.N} single-particle energies, got {eps.shape}")
        return state.occupations @ eps
    occ = np.asarray(state.occupations if isinstance(state, OccupationState) else state)
    if eps.shape != occ.shape:
        raise DomainError(f"need {occ.size} single-particle energies, got {eps.shape}")
    return float(occ @ eps)


def orbital_distance(a, b) -> int:
    """Number of particle moves connecting two states with equal particle number."""
    a = np.asarray(a.occupations if isinstance(a, OccupationState) else a)
    b = np.asarray(b.occupations if isinstance(b, OccupationState) else b)
    return int(np.abs(a - b).sum()) // 2


def format_basis(table: BasisTable) -> str:
    """One state per line as space-separated occupations, preceded by the rank."""
    return "".join(f"{r} {' '.join(map(str, s))}\n" for r, s in enumerate(table._states))
