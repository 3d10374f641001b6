"""Spectra, ensemble-averaged densities, LDOS and survival probabilities.

Per-member work is split into small ``*_contribution`` functions that reduce
one diagonalized member to a few arrays. The public aggregators accept any
iterable of members (a generator keeps memory flat) and merge contributions
in iteration order, so results do not depend on how members were scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Iterable, Sequence

import numpy as np

from ._validation import DomainError, check_1d, check_hermitian, check_q
from .ensemble import EnsembleRunSpec, generate_member, map_members
from .qfunc import DEFAULT_SETTINGS, WeightSettings, support_bound, weight_pdf, weight_quadrature

__all__ = [
    "DEFAULT_BINS",
    "DEFAULT_RANGE",
    "SpectralResult",
    "Histogram",
    "Curve",
    "WindowSpec",
    "EmptyWindowError",
    "NoQualifyingStatesError",
    "diagonalize",
    "standardize",
    "density_histogram",
    "histogram_from_members",
    "theory_density",
    "theory_bin_density",
    "chi2_per_bin",
    "ldos_contribution",
    "ldos_histogram",
    "survival_contribution",
    "merge_survival",
    "survival_mc",
    "survival_theory",
    "moments_of_spectrum",
    "default_times",
    "MOMENT_ORDERS",
    "DensityRun",
    "QuenchRun",
    "density_run",
    "quench_run",
]

DEFAULT_BINS = 50
DEFAULT_RANGE = (-3.0, 3.0)


class EmptyWindowError(DomainError):
    """No basis state of a member falls inside the LDOS energy window."""


class NoQualifyingStatesError(DomainError):
    """No member has an initial state inside the survival window."""


@dataclass(frozen=True)
class SpectralResult:
    """Eigen-decomposition of one ensemble member.

    ``vectors[:, j]`` is the eigenvector of ``eigenvalues[j]`` in the
    occupation basis, so ``vectors[b, j] = <b|E_j>``. ``basis_energies`` are
    the diagonal elements ``<b|H|b>``.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray | None
    centroid: float
    width: float
    basis_energies: np.ndarray | None = None
    member: int | None = None
    standardized: bool = False


@dataclass(frozen=True)
class Histogram:
    """Unit-area histogram on uniform bins.

    ``stderr`` is the member-to-member standard error of each bin height.
    ``outside_fraction`` is the pooled weight that fell outside the edges and
    was excluded from the normalization. ``events`` is the pooled in-range
    weight: eigenvalue count for spectra, number of window states for LDOS.
    """

    edges: np.ndarray
    density: np.ndarray
    members: int
    label: str = "E"
    stderr: np.ndarray | None = None
    outside_fraction: float = 0.0
    events: float = 0.0

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    def area(self) -> float:
        return float(np.dot(self.density, self.widths))

    def moment(self, order: int) -> float:
        return float(np.dot(self.density * self.widths, self.centers**order))


@dataclass(frozen=True)
class Curve:
    x: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.x.shape != self.y.shape:
            raise DomainError("abscissa and ordinate lengths differ")
        if np.any(np.diff(self.x) <= 0):
            raise DomainError("curve grid must be strictly increasing")


@dataclass(frozen=True)
class WindowSpec:
    center: float = 0.0
    half_width: float = 0.2

    def __post_init__(self):
        if not self.half_width > 0:
            raise DomainError("window half-width must be positive")

    def mask(self, energies: np.ndarray) -> np.ndarray:
        return np.abs(energies - self.center) <= self.half_width


def diagonalize(H: np.ndarray, vectors: bool = True, member: int | None = None) -> SpectralResult:
    """Full dense eigen-decomposition with a residual check.

    ``centroid`` is the mean eigenvalue and ``width`` the population
    standard deviation of the spectrum.
    """
    H = check_hermitian(H)
    if vectors:
        E, C = np.linalg.eigh(H)
        # spectral norm of a Hermitian matrix
        scale = max(float(np.abs(E).max()), 1e-300)
        resid = np.linalg.norm(H @ C - C * E, axis=0)
        if resid.max() > 1e-9 * scale:
            raise ArithmeticError(f"eigen residual {resid.max():.3g} exceeds 1e-9 * ||H||")
    else:
        E, C = np.linalg.eigvalsh(H), None
    return SpectralResult(
        eigenvalues=E,
        vectors=C,
        centroid=float(E.mean()),
        width=float(E.std()),
        basis_energies=np.real(np.diag(H)).copy(),
        member=member,
    )


def standardize(result: SpectralResult) -> SpectralResult:
    """Shift by the centroid and scale by the width, eigenvalues and basis energies alike."""
    if not result.width > 0:
        raise DomainError(f"spectrum width is {result.width}; cannot standardize")
    E = (result.eigenvalues - result.centroid) / result.width
    e = None
    if result.basis_energies is not None:
        e = (result.basis_energies - result.centroid) / result.width
    return replace(result, eigenvalues=E, basis_energies=e, centroid=0.0, width=1.0, standardized=True)


def _as_standardized_values(member) -> np.ndarray:
    if isinstance(member, SpectralResult):
        return member.eigenvalues if member.standardized else standardize(member).eigenvalues
    return check_1d(member, "eigenvalues")


def histogram_from_members(
    counts: Sequence[np.ndarray],
    totals: Sequence[float],
    edges: np.ndarray,
    label: str = "E",
) -> Histogram:
    """Merge per-member weighted bin counts into a unit-area histogram.

    ``totals[j]`` is the full weight of member ``j`` including anything that
    fell outside ``edges``.
    """
    counts = np.asarray(counts, dtype=float)
    totals = np.asarray(totals, dtype=float)
    if counts.ndim != 2 or counts.shape[0] == 0:
        raise DomainError("need at least one member")
    widths = np.diff(edges)
    inside = counts.sum()
    if not inside > 0:
        raise DomainError("no weight inside the histogram range")
    density = counts.sum(axis=0) / (inside * widths)
    per_member = counts / (np.maximum(counts.sum(axis=1, keepdims=True), 1e-300) * widths)
    M = counts.shape[0]
    stderr = per_member.std(axis=0, ddof=1) / math.sqrt(M) if M > 1 else None
    return Histogram(
        edges=np.asarray(edges, dtype=float),
        density=density,
        members=M,
        label=label,
        stderr=stderr,
        outside_fraction=float(1.0 - inside / totals.sum()),
        events=float(inside),
    )


def _edges(bins: int, range_: tuple[float, float]) -> np.ndarray:
    if bins < 1 or not range_[1] > range_[0]:
        raise DomainError(f"invalid binning {bins} bins over {range_}")
    return np.linspace(range_[0], range_[1], bins + 1)


def density_histogram(
    members: Iterable,
    bins: int = DEFAULT_BINS,
    range: tuple[float, float] = DEFAULT_RANGE,
) -> Histogram:
    """Pool standardized eigenvalues of all members into a unit-area histogram.

    ``members`` holds ``SpectralResult`` objects (standardized on the fly if
    needed) or plain arrays of already standardized eigenvalues.
    """
    edges = _edges(bins, range)
    counts, totals = [], []
    for member in members:
        E = _as_standardized_values(member)
        counts.append(np.histogram(E, bins=edges)[0])
        totals.append(E.size)
    return histogram_from_members(counts, totals, edges, label="E")


def theory_density(grid, q: float, centroid: float = 0.0, width: float = 1.0,
                   settings: WeightSettings = DEFAULT_SETTINGS) -> Curve:
    """``rho(E) = v((E - centroid)/width | q) / width``."""
    q = check_q(q)
    if not width > 0:
        raise DomainError("width must be positive")
    grid = check_1d(grid, "grid")
    rho = np.asarray(weight_pdf((grid - centroid) / width, q, settings)) / width
    return Curve(grid, rho, {"q": q, "centroid": centroid, "width": width})


def theory_bin_density(edges, q: float, centroid: float = 0.0, width: float = 1.0,
                       settings: WeightSettings = DEFAULT_SETTINGS, nodes: int = 16) -> np.ndarray:
    """Bin-averaged theory density, renormalized to unit area over ``edges``.

    Comparable bin-for-bin with a ``Histogram`` whose out-of-range weight
    was excluded from the normalization.
    """
    edges = np.asarray(edges, dtype=float)
    t, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    x = 0.5 * (hi + lo)[:, None] + half[:, None] * t
    rho = theory_density(x.ravel(), q, centroid, width, settings).y.reshape(len(lo), nodes)
    mass = (rho * w).sum(axis=1) * half
    total = mass.sum()
    if not total > 0:
        raise DomainError("theory puts no mass inside the histogram range")
    return mass / total / np.diff(edges)


def chi2_per_bin(hist: Histogram, expected: np.ndarray, method: str = "pearson",
                 min_expected: float = 5.0) -> float:
    """Reduced chi-square between a histogram and expected bin densities.

    ``method="pearson"`` compares pooled bin counts ``O = density * width * events``
    with ``E = expected * width * events`` as ``mean((O - E)**2 / E)`` over bins
    with ``E >= min_expected``. ``method="stderr"`` averages
    ``((density - expected) / stderr)**2`` with the member-to-member standard
    error instead, which also carries within-member correlations.
    """
    expected = np.asarray(expected, dtype=float)
    if expected.shape != hist.density.shape:
        raise DomainError(f"expected has shape {expected.shape}, histogram has {hist.density.shape}")
    if method == "pearson":
        if not hist.events > 0:
            raise DomainError("histogram carries no event count")
        scale = hist.widths * hist.events
        O, E = hist.density * scale, expected * scale
        ok = E >= min_expected
        if not ok.any():
            raise DomainError(f"no bin expects at least {min_expected} events")
        return float(np.mean((O[ok] - E[ok]) ** 2 / E[ok]))
    if method == "stderr":
        if hist.stderr is None:
            raise DomainError("chi-square needs at least two members")
        ok = hist.stderr > 0
        if not ok.any():
            raise DomainError("all bins have zero standard error")
        r = (hist.density[ok] - expected[ok]) / hist.stderr[ok]
        return float(np.mean(r * r))
    raise DomainError(f"unknown chi-square method {method!r}")


def _require_vectors(result: SpectralResult):
    if result.vectors is None or result.basis_energies is None:
        raise DomainError("member was diagonalized without eigenvectors")
    return result if result.standardized else standardize(result)


def ldos_contribution(result: SpectralResult, window: WindowSpec, edges: np.ndarray):
    """Binned LDOS weight of one member and its total weight.

    The weight of eigenvalue ``E`` is ``sum |<b|E>|**2`` over basis states
    ``b`` whose standardized diagonal energy lies in ``window``.
    """
    r = _require_vectors(result)
    sel = window.mask(r.basis_energies)
    if not sel.any():
        raise EmptyWindowError(
            f"member {r.member}: no basis energy within {window.center} +/- {window.half_width}"
        )
    w = (np.abs(r.vectors[sel, :]) ** 2).sum(axis=0)
    counts = np.histogram(r.eigenvalues, bins=edges, weights=w)[0]
    return counts, float(w.sum())


def ldos_histogram(
    members: Iterable[SpectralResult],
    window: WindowSpec = WindowSpec(),
    bins: int = DEFAULT_BINS,
    range: tuple[float, float] = DEFAULT_RANGE,
) -> Histogram:
    """Ensemble-averaged LDOS of the basis states in ``window``, in standardized energy."""
    edges = _edges(bins, range)
    counts, totals = [], []
    for member in members:
        c, t = ldos_contribution(member, window, edges)
        counts.append(c)
        totals.append(t)
    return histogram_from_members(counts, totals, edges, label="E (LDOS)")


def default_times() -> np.ndarray:
    """``t`` in [0, 5], 500 steps, in units of inverse standardized energy."""
    return np.linspace(0.0, 5.0, 501)


def _times(times) -> np.ndarray:
    t = check_1d(times, "times")
    if np.any(t < 0):
        raise DomainError("times must be non-negative")
    return t


def _survival_from_weights(p: np.ndarray, E: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``|sum_E p_E exp(-i E t)|**2`` for each row of ``p``; rows sum to one."""
    phase = np.multiply.outer(E, t)
    re = p @ np.cos(phase)
    im = p @ np.sin(phase)
    F = re * re + im * im
    # completeness fixes the t = 0 value
    F[:, t == 0] = 1.0
    return F


def survival_contribution(result: SpectralResult, times, delta1: float = 0.01, center: float = 0.0):
    """Summed ``F(t)`` over this member's qualifying initial states and their count."""
    if not delta1 > 0:
        raise DomainError("delta1 must be positive")
    t = _times(times)
    r = _require_vectors(result)
    sel = np.abs(r.basis_energies - center) <= delta1
    n = int(sel.sum())
    if n == 0:
        return np.zeros_like(t), 0
    p = np.abs(r.vectors[sel, :]) ** 2
    p /= p.sum(axis=1, keepdims=True)
    return _survival_from_weights(p, r.eigenvalues, t).sum(axis=0), n


def merge_survival(contributions, times) -> Curve:
    """Average per-state survival probabilities over all members."""
    t = _times(times)
    total = np.zeros_like(t)
    count = 0
    per_member = []
    for s, n in contributions:
        total += s
        count += n
        per_member.append(n)
    if count == 0:
        raise NoQualifyingStatesError(
            "no basis state inside the survival window in any member; increase delta1"
        )
    return Curve(t, total / count, {"states": count, "states_per_member": per_member})


def survival_mc(members: Iterable[SpectralResult], times=None, delta1: float = 0.01,
                center: float = 0.0) -> Curve:
    """Monte-Carlo survival probability averaged over states and members."""
    t = default_times() if times is None else _times(times)
    return merge_survival((survival_contribution(r, t, delta1, center) for r in members), t)


def survival_theory(q: float, times=None, settings: WeightSettings = DEFAULT_SETTINGS) -> Curve:
    """``|integral v(E|q) exp(-i E t) dE|**2`` by quadrature on the standardized support."""
    q = check_q(q)
    t = default_times() if times is None else _times(times)
    x, w = weight_quadrature(q, settings)
    phase = np.multiply.outer(t, x)
    re = np.cos(phase) @ w
    im = np.sin(phase) @ w
    return Curve(t, re * re + im * im, {"q": q})


def moments_of_spectrum(members: Iterable, order: int) -> float:
    """Pooled moment ``<E**order>`` of standardized eigenvalues."""
    if order < 0 or order > 8:
        raise DomainError("order must lie in 0..8")
    total, count = 0.0, 0
    for member in members:
        E = _as_standardized_values(member)
        total += float(np.sum(E**order))
        count += E.size
    if count == 0:
        raise DomainError("no eigenvalues")
    return total / count


# ensemble drivers -----------------------------------------------------------

MOMENT_ORDERS = (2, 4, 6, 8)


@dataclass(frozen=True)
class DensityRun:
    """Density histogram of a run plus per-member standardized moments.

    ``member_moments[j, i]`` is ``<E**MOMENT_ORDERS[i]>`` of member ``j``;
    ``member_counts`` and ``member_totals`` keep the per-member binning so a
    leading subset of members can be re-histogrammed without recomputation.
    """

    histogram: Histogram
    member_moments: np.ndarray
    member_counts: np.ndarray
    member_totals: np.ndarray

    @property
    def members(self) -> int:
        return self.member_moments.shape[0]

    def head(self, n: int) -> "DensityRun":
        """The same run restricted to its first ``n`` members."""
        if not 1 <= n <= self.members:
            raise DomainError(f"cannot take {n} of {self.members} members")
        c, t = self.member_counts[:n], self.member_totals[:n]
        hist = histogram_from_members(c, t, self.histogram.edges, self.histogram.label)
        return DensityRun(hist, self.member_moments[:n], c, t)

    def moment(self, order: int) -> float:
        return float(self.member_moments[:, MOMENT_ORDERS.index(order)].mean())

    def moment_stderr(self, order: int) -> float:
        col = self.member_moments[:, MOMENT_ORDERS.index(order)]
        return float(col.std(ddof=1) / math.sqrt(col.size)) if col.size > 1 else float("nan")


@dataclass(frozen=True)
class QuenchRun:
    ldos: Histogram
    survival: Curve


def _density_task(run, index, edges):
    r = standardize(diagonalize(generate_member(run, index), vectors=False, member=index))
    E = r.eigenvalues
    return np.histogram(E, bins=edges)[0], E.size, [float(np.mean(E**n)) for n in MOMENT_ORDERS]


def _quench_task(run, index, edges, window, times, delta1):
    r = standardize(diagonalize(generate_member(run, index), member=index))
    counts, total = ldos_contribution(r, window, edges)
    return counts, total, survival_contribution(r, times, delta1, window.center)


def density_run(run: EnsembleRunSpec, bins: int = DEFAULT_BINS, range: tuple[float, float] = DEFAULT_RANGE,
                workers: int | None = 1, indices=None) -> DensityRun:
    """Diagonalize every member of ``run`` and pool standardized eigenvalues."""
    edges = _edges(bins, range)
    out = map_members(partial(_density_task, edges=edges), run, indices, workers)
    counts = np.array([o[0] for o in out])
    totals = np.array([o[1] for o in out], dtype=float)
    hist = histogram_from_members(counts, totals, edges, label="E")
    return DensityRun(hist, np.array([o[2] for o in out]), counts, totals)


def quench_run(run: EnsembleRunSpec, window: WindowSpec = WindowSpec(), delta1: float = 0.01, times=None,
               bins: int = DEFAULT_BINS, range: tuple[float, float] = DEFAULT_RANGE,
               workers: int | None = 1, indices=None) -> QuenchRun:
    """LDOS histogram and Monte-Carlo survival probability from one pass over ``run``."""
    edges = _edges(bins, range)
    t = default_times() if times is None else _times(times)
    task = partial(_quench_task, edges=edges, window=window, times=t, delta1=delta1)
    out = map_members(task, run, indices, workers)
    ldos = histogram_from_members([o[0] for o in out], [o[1] for o in out], edges, label="E (LDOS)")
    return QuenchRun(ldos, merge_survival([o[2] for o in out], t))
