"""q-deformed numbers, q-Hermite polynomials and their orthogonality weight.

All densities here live on the standardized axis (zero mean, unit variance).
For ``0 <= q < 1`` the weight is supported on ``|x| <= 2/sqrt(1-q)``; at
``q == 1`` (and numerically for ``q > GAUSSIAN_CUTOFF``) it is the standard
normal density.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._validation import check_nonnegative_int, check_q

__all__ = [
    "GAUSSIAN_CUTOFF",
    "WeightSettings",
    "q_number",
    "q_factorial",
    "q_hermite",
    "support_bound",
    "product_terms",
    "weight_unnormalized",
    "normalization_constant",
    "weight_pdf",
    "moment_closed_form",
    "weight_quadrature",
    "GaussianLimitError",
    "QuadratureError",
]

# above this q the support exceeds 63 standard deviations and the product
# converges too slowly to be worth evaluating; the Gaussian is used instead
GAUSSIAN_CUTOFF = 0.999

_PRODUCT_TOL = 1e-14
_PRODUCT_CAP = 50_000


class GaussianLimitError(ValueError):
    """Raised when a bounded-support form is requested in the Gaussian limit."""


class QuadratureError(ArithmeticError):
    """Raised when a quadrature fails its self-consistency check."""


@dataclass(frozen=True)
class WeightSettings:
    """Numerical controls for evaluating the q-Hermite weight.

    Parameters
    ----------
    product_truncation : int or None
        Number of factors kept in the infinite product. ``None`` picks it
        from ``q`` so the dropped factors differ from 1 by less than 1e-14.
    quadrature_points : int
        Total Gauss-Legendre nodes used for integrals over the support.
    normalization_tolerance : float
        Allowed deviation of the total mass from 1 after normalization.
    """

    product_truncation: int | None = None
    quadrature_points: int = 2048
    normalization_tolerance: float = 1e-10

    def __post_init__(self):
        if self.product_truncation is not None and self.product_truncation < 1:
            raise ValueError("product_truncation must be >= 1")
        if self.quadrature_points < 16:
            raise ValueError("quadrature_points must be >= 16")
        if not self.normalization_tolerance > 0:
            raise ValueError("normalization_tolerance must be positive")


DEFAULT_SETTINGS = WeightSettings()


def q_number(n: int, q: float) -> float:
    """Return ``[n]_q = 1 + q + ... + q**(n-1)``."""
    n = check_nonnegative_int(n, "n")
    q = check_q(q)
    if q == 1.0:
        return float(n)
    # the geometric sum is exact for q = 0 and avoids 0/0 as q -> 1
    return float(sum(q**j for j in range(n)))


def q_factorial(n: int, q: float) -> float:
    """Return ``[n]_q! = [1]_q [2]_q ... [n]_q`` with ``[0]_q! = 1``."""
    n = check_nonnegative_int(n, "n")
    q = check_q(q)
    out = 1.0
    for j in range(1, n + 1):
        out *= q_number(j, q)
    return out


def q_hermite(n: int, x, q: float):
    """Evaluate ``H_n(x|q)`` by the three-term recursion.

    ``H_{j+1} = x H_j - [j]_q H_{j-1}`` with ``H_0 = 1`` and ``H_{-1} = 0``.
    Accepts scalar or array ``x``.
    """
    n = check_nonnegative_int(n, "n")
    q = check_q(q)
    x = np.asarray(x, dtype=float)
    prev = np.zeros_like(x)
    cur = np.ones_like(x)
    for j in range(n):
        prev, cur = cur, x * cur - q_number(j, q) * prev
    return cur if cur.ndim else float(cur)


def support_bound(q: float) -> float:
    """Half-width ``x0 = 2/sqrt(1-q)`` of the support; ``inf`` at ``q = 1``."""
    q = check_q(q)
    if q == 1.0:
        return math.inf
    return 2.0 / math.sqrt(1.0 - q)


def product_terms(q: float, settings: WeightSettings = DEFAULT_SETTINGS) -> int:
    """Number of product factors retained for ``q``."""
    if settings.product_truncation is not None:
        return settings.product_truncation
    if q <= 0.0:
        return 1
    # factor_k deviates from 1 by at most 4 q**k
    k = math.ceil(math.log(_PRODUCT_TOL / 4.0) / math.log(q))
    return int(min(max(k, 1), _PRODUCT_CAP))


def _product(y: np.ndarray, q: float, n_terms: int) -> np.ndarray:
    """Truncated product over kappa for ``y = x**2/x0**2``."""
    if q == 0.0:
        # q**-kappa is infinite, every bracket equals one
        return np.ones_like(y)
    log_prod = np.zeros_like(y)
    # chunked over kappa to bound memory for q close to 1
    for start in range(1, n_terms + 1, 512):
        kappa = np.arange(start, min(start + 512, n_terms + 1), dtype=float)
        qk = q**kappa
        c = 4.0 * qk / (1.0 + qk) ** 2  # == 4 / (2 + q**k + q**-k)
        log_prod += np.log1p(-np.multiply.outer(y, c)).sum(axis=-1)
    return np.exp(log_prod)


def weight_unnormalized(x, q: float, settings: WeightSettings = DEFAULT_SETTINGS):
    """Unnormalized q-Hermite weight on the support ``|x| <= x0``.

    Returns ``sqrt(1 - x**2/x0**2) * prod_k [1 - 4 (x**2/x0**2) / (2 + q**k + q**-k)]``.

    Raises
    ------
    GaussianLimitError
        If ``q == 1``; use :func:`weight_pdf` for the normal density.
    ValueError
        If any ``|x| > x0``.
    """
    q = check_q(q)
    if q == 1.0:
        raise GaussianLimitError("q = 1 has unbounded support; use weight_pdf")
    x = np.asarray(x, dtype=float)
    x0 = support_bound(q)
    # tolerate round-off at the support edge
    if np.any(np.abs(x) > x0 * (1 + 1e-12)):
        raise ValueError(f"|x| exceeds the support bound {x0:.6g} for q={q}")
    y = np.clip(x * x / (x0 * x0), 0.0, 1.0)
    out = np.sqrt(1.0 - y) * _product(y, q, product_terms(q, settings))
    return out if out.ndim else float(out)


@lru_cache(maxsize=None)
def _gl_panels(n_points: int, n_panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on [-1, 1]."""
    per = max(n_points // n_panels, 2)
    t, w = np.polynomial.legendre.leggauss(per)
    edges = np.linspace(-1.0, 1.0, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t).ravel()
    weights = (half[:, None] * w).ravel()
    return nodes, weights


def weight_quadrature(q: float, settings: WeightSettings = DEFAULT_SETTINGS):
    """Nodes and weights integrating ``f(x) * weight_pdf(x, q)`` over the support.

    Uses ``x = x0 sin(theta)``, which cancels the square-root edge behaviour
    and leaves a smooth periodic integrand in ``theta``. In the Gaussian
    regime the rule covers ``|x| <= 12`` instead.

    Returns
    -------
    nodes, weights : ndarray
        ``sum(weights * f(nodes))`` approximates the expectation of ``f``.
    """
    q = check_q(q)
    u, w = _gl_panels(settings.quadrature_points, 16)
    if q > GAUSSIAN_CUTOFF:
        x = 12.0 * u
        return x, 12.0 * w * _normal_pdf(x)
    x0 = support_bound(q)
    theta = 0.5 * math.pi * u
    x = x0 * np.sin(theta)
    # dx = x0 cos(theta) dtheta and sqrt(1 - x^2/x0^2) = cos(theta)
    y = np.sin(theta) ** 2
    jac = 0.5 * math.pi * w * x0 * np.cos(theta) ** 2
    raw = jac * _product(y, q, product_terms(q, settings))
    return x, raw * normalization_constant(q, settings)


_norm_lock = threading.Lock()
_norm_cache: dict[tuple[float, WeightSettings], float] = {}


def normalization_constant(q: float, settings: WeightSettings = DEFAULT_SETTINGS) -> float:
    """Constant ``N_q`` making ``N_q * weight_unnormalized`` integrate to one.

    Memoized per (q rounded to 12 digits, settings).
    """
    q = check_q(q)
    if q == 1.0:
        raise GaussianLimitError("the q = 1 weight is the standard normal")
    key = (round(q, 12), settings)
    with _norm_lock:
        if key in _norm_cache:
            return _norm_cache[key]
    value = _normalize(q, settings)
    with _norm_lock:
        _norm_cache[key] = value
    return value


def _normalize(q: float, settings: WeightSettings) -> float:
    x0 = support_bound(q)
    n_terms = product_terms(q, settings)

    def mass(n_points):
        u, w = _gl_panels(n_points, 16)
        theta = 0.5 * math.pi * u
        y = np.sin(theta) ** 2
        f = x0 * np.cos(theta) ** 2 * _product(y, q, n_terms)
        return 0.5 * math.pi * float(np.dot(w, f))

    full = mass(settings.quadrature_points)
    coarse = mass(settings.quadrature_points // 2)
    if not (full > 0 and math.isfinite(full)):
        raise QuadratureError(f"non-positive mass {full!r} for q={q}")
    if abs(full - coarse) > settings.normalization_tolerance * full:
        raise QuadratureError(
            f"normalization not converged for q={q}: mass {full:.15g} with "
            f"{settings.quadrature_points} nodes vs {coarse:.15g} with half as many"
        )
    return 1.0 / full


def _normal_pdf(x):
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def weight_pdf(x, q: float, settings: WeightSettings = DEFAULT_SETTINGS):
    """Normalized q-Hermite weight ``v(x|q)``; zero outside the support.

    Exact standard normal for ``q > GAUSSIAN_CUTOFF`` and exact unit-variance
    semicircle at ``q == 0``.
    """
    q = check_q(q)
    x = np.asarray(x, dtype=float)
    if q > GAUSSIAN_CUTOFF:
        out = _normal_pdf(x)
    elif q == 0.0:
        out = np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / (2.0 * math.pi)
    else:
        x0 = support_bound(q)
        inside = np.abs(x) < x0
        out = np.zeros_like(x)
        if np.any(inside):
            out[inside] = normalization_constant(q, settings) * np.asarray(
                weight_unnormalized(x[inside], q, settings)
            )
    return out if out.ndim else float(out)


def moment_closed_form(n: int, q: float) -> float:
    """Even reduced moment ``mu_{2n}(q)`` of the q-Hermite weight.

    ``mu_{2n} = (1-q)**-n * sum_{r=-n}^{n} C(2n, n+r) (-1)**r q**(r(r-1)/2)``;
    at ``q == 1`` this is the Gaussian ``(2n-1)!!``.
    """
    n = check_nonnegative_int(n, "n")
    q = check_q(q)
    if q == 1.0:
        return float(math.prod(range(2 * n - 1, 0, -2)))
    coeffs = _moment_polynomial(n)
    # Horner; the coefficients are positive so there is no cancellation
    out = 0.0
    for c in reversed(coeffs):
        out = out * q + c
    return float(out)


@lru_cache(maxsize=None)
def _moment_polynomial(n: int) -> tuple[int, ...]:
    """Integer coefficients of the sum divided exactly by ``(1-q)**n``."""
    degree = n * (n + 1) // 2
    p = [0] * (degree + 1)
    for r in range(-n, n + 1):
        p[r * (r - 1) // 2] += math.comb(2 * n, n + r) * (-1) ** r
    for _ in range(n):
        # P / (1 - q): prefix sums; the remainder is zero
        acc, quotient = 0, []
        for c in p[:-1]:
            acc += c
            quotient.append(acc)
        if acc + p[-1] != 0:
            raise ArithmeticError("moment polynomial not divisible by (1-q)")
        p = quotient
    return tuple(p)
