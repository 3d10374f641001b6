"""Sampling of k-body GOE/GUE interactions and their m-particle embedding.

Seeding: member ``i`` of a run with base seed ``s`` draws from
``numpy.random.SeedSequence(entropy=s, spawn_key=(i,))``. The spawn key is a
counter, so members are independent streams and can be generated in any
order or on any worker with identical results.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from ._validation import DomainError, check_nonnegative_int
from .fock import (
    BasisTable,
    OperatorString,
    apply_creation,
    default_sp_energies,
    enumerate_basis,
    enumerate_k_configs,
    one_body_diagonal,
)
from .qparam import SystemSpec

__all__ = [
    "MAX_DENSE_DIMENSION",
    "EmbeddingPlan",
    "EnsembleRunSpec",
    "sample_kbody",
    "embedding_plan",
    "embed",
    "compose_hamiltonian",
    "member_seed",
    "generate_member",
    "map_members",
]

logger = logging.getLogger(__name__)

MAX_DENSE_DIMENSION = 4096


def sample_kbody(spec: SystemSpec, seed) -> np.ndarray:
    """Draw the k-particle GOE (beta=1) or GUE (beta=2) with ``v = 1``.

    GOE: real symmetric, off-diagonal variance 1, diagonal variance 2.
    GUE: off-diagonal ``(x + i y)/sqrt(2)``, real standard-normal diagonal.
    ``seed`` is anything accepted by ``numpy.random.default_rng``.
    """
    rng = np.random.default_rng(seed)
    D = spec.k_dimension
    if spec.beta == 1:
        a = rng.standard_normal((D, D))
        return (a + a.T) / math.sqrt(2.0)
    a = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    a *= 0.5
    return a + a.conj().T


@dataclass(frozen=True)
class EmbeddingPlan:
    """Sparse recipe ``V[rows, cols] += coef * v[alpha, gamma]``.

    Built once per (N, m, k, statistics) by enumerating the (m-k)-particle
    intermediates ``c``: ``<c+alpha| psi^+(alpha) psi(gamma) |c+gamma>``
    equals the product of the two creation amplitudes from ``c``.
    """

    dimension: int
    k_dimension: int
    flat_index: np.ndarray
    v_index: np.ndarray
    coef: np.ndarray

    @property
    def n_terms(self) -> int:
        return self.coef.size


def _build_plan(basis: BasisTable, kconfigs: BasisTable) -> EmbeddingPlan:
    N, m, k = basis.N, basis.n_particles, kconfigs.n_particles
    stats = basis.statistics
    if kconfigs.N != N or kconfigs.statistics != stats:
        raise DomainError("basis and k-configurations disagree on N or statistics")
    if k > m:
        raise DomainError(f"body rank k={k} exceeds particle number m={m}")
    d, D = len(basis), len(kconfigs)
    strings = [OperatorString.from_state(a, "creation") for a in kconfigs]
    flat, vidx, coef = [], [], []
    for c in enumerate_basis(N, m - k, stats):
        targets, alphas, amps = [], [], []
        for a, s in enumerate(strings):
            tr = apply_creation(c, s)
            if tr is None:
                continue
            targets.append(basis.index(tr.target))
            alphas.append(a)
            amps.append(tr.amplitude)
        t = np.asarray(targets, dtype=np.int64)
        al = np.asarray(alphas, dtype=np.int64)
        am = np.asarray(amps)
        flat.append((t[:, None] * d + t[None, :]).ravel())
        vidx.append((al[:, None] * D + al[None, :]).ravel())
        coef.append(np.outer(am, am).ravel())
    return EmbeddingPlan(d, D, np.concatenate(flat), np.concatenate(vidx), np.concatenate(coef))


@lru_cache(maxsize=8)
def _cached_plan(N: int, m: int, k: int, statistics: str) -> tuple[BasisTable, BasisTable, EmbeddingPlan]:
    basis = enumerate_basis(N, m, statistics)
    kconfigs = enumerate_k_configs(N, k, statistics)
    return basis, kconfigs, _build_plan(basis, kconfigs)


def embedding_plan(spec: SystemSpec) -> tuple[BasisTable, BasisTable, EmbeddingPlan]:
    """Basis, k-configurations and embedding plan for ``spec`` (cached per process)."""
    if spec.dimension > MAX_DENSE_DIMENSION:
        raise DomainError(
            f"m-particle dimension {spec.dimension} exceeds the dense limit {MAX_DENSE_DIMENSION}"
        )
    return _cached_plan(spec.N, spec.m, spec.k, spec.statistics)


def embed(kmat: np.ndarray, basis: BasisTable, kconfigs: BasisTable, plan: EmbeddingPlan | None = None) -> np.ndarray:
    """Embed a k-particle matrix into the m-particle space of ``basis``.

    ``V = sum_{alpha, gamma} v[alpha, gamma] psi^+(alpha) psi(gamma)``.
    """
    kmat = np.asarray(kmat)
    if kmat.shape != (len(kconfigs), len(kconfigs)):
        raise DomainError(f"k-body matrix has shape {kmat.shape}, expected {(len(kconfigs),) * 2}")
    if len(basis) > MAX_DENSE_DIMENSION:
        raise DomainError(f"dimension {len(basis)} exceeds the dense limit {MAX_DENSE_DIMENSION}")
    if plan is None:
        plan = _build_plan(basis, kconfigs)
    d = plan.dimension
    vals = kmat.ravel()[plan.v_index]
    if np.iscomplexobj(kmat):
        re = np.bincount(plan.flat_index, weights=plan.coef * vals.real, minlength=d * d)
        im = np.bincount(plan.flat_index, weights=plan.coef * vals.imag, minlength=d * d)
        out = re + 1j * im
    else:
        out = np.bincount(plan.flat_index, weights=plan.coef * vals, minlength=d * d)
    return out.reshape(d, d)


def compose_hamiltonian(basis: BasisTable, eps, V: np.ndarray | None, lam: float) -> np.ndarray:
    """``H = h(1) + lam V`` with ``h(1)`` diagonal in the occupation basis.

    ``eps=None`` drops the one-body part.
    """
    d = len(basis)
    if V is None:
        H = np.zeros((d, d))
    else:
        if V.shape != (d, d):
            raise DomainError(f"V has shape {V.shape}, basis has {d} states")
        H = lam * V
    if eps is not None:
        H = H.copy() if V is not None else H
        H[np.diag_indices(d)] += one_body_diagonal(basis, eps)
    return H


@dataclass(frozen=True)
class EnsembleRunSpec:
    """Everything needed to regenerate every member of an ensemble run.

    ``mean_field=False`` gives the pure ``V(k)`` ensemble (``H = lam V``);
    otherwise ``H = h(1) + lam V`` with ``eps_i = i + 1/i`` unless ``eps`` is set.
    """

    system: SystemSpec
    members: int = 1000
    lam: float = 0.5
    seed: int = 0
    mean_field: bool = True
    eps: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        if self.members < 1:
            raise DomainError("member count must be >= 1")
        if not self.lam >= 0:
            raise DomainError(f"interaction strength must be >= 0, got {self.lam}")
        check_nonnegative_int(self.seed, "seed")
        if self.eps is not None:
            object.__setattr__(self, "eps", tuple(float(e) for e in self.eps))
            if len(self.eps) != self.system.N:
                raise DomainError(f"need {self.system.N} single-particle energies")

    def sp_energies(self) -> np.ndarray | None:
        if not self.mean_field:
            return None
        if self.eps is None:
            return default_sp_energies(self.system.N)
        return np.asarray(self.eps)


def member_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    """Counter-based child seed for member ``index``."""
    return np.random.SeedSequence(entropy=base_seed, spawn_key=(index,))


def generate_member(run: EnsembleRunSpec, index: int) -> np.ndarray:
    """Hamiltonian matrix of member ``index``: sample, embed, compose."""
    if not 0 <= index < run.members:
        raise DomainError(f"member index {index} outside [0, {run.members})")
    basis, kconfigs, plan = embedding_plan(run.system)
    v = sample_kbody(run.system, member_seed(run.seed, index))
    V = embed(v, basis, kconfigs, plan)
    return compose_hamiltonian(basis, run.sp_energies(), V, run.lam)


def _call(args):
    fn, run, index = args
    return fn(run, index)


def map_members(
    fn: Callable[[EnsembleRunSpec, int], object],
    run: EnsembleRunSpec,
    indices: Sequence[int] | None = None,
    workers: int | None = 1,
) -> list:
    """Evaluate ``fn(run, i)`` for each member, results in index order.

    ``fn`` must be picklable when ``workers > 1``. ``workers=None`` uses all
    cores. Output does not depend on the worker count.
    """
    if indices is None:
        indices = range(run.members)
    indices = list(indices)
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(indices) <= 1:
        return [fn(run, i) for i in indices]
    chunk = max(1, len(indices) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call, [(fn, run, i) for i in indices], chunksize=chunk))
