"""Raw and modified moments, reference values and quantitative bounds.

Modified moments replace ``x^m`` by an orthogonal polynomial: ``U_n``
(Chebyshev, second kind) for the semicircle, the non-backtracking
polynomials ``P_n^{(kappa)} = U_n - U_{n-2} / (kappa - 1)``, or the
probabilists' Hermite polynomials for the Gaussian.  On matrices every
polynomial is evaluated through its three-term recurrence with two live
``N x N`` iterates, never through eigenvalues.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from ._rng import run_replicates
from .ensembles import HermitianMatrix
from .spectra import EmpiricalMeasure, cdf

__all__ = [
    "ETBracket",
    "FamilyKind",
    "KreinValue",
    "MomentKind",
    "MomentMismatchError",
    "MomentTable",
    "PolynomialFamily",
    "ReplicateMean",
    "SoninReport",
    "catalan",
    "corner_moment_profile",
    "erdos_turan_bracket",
    "gauss_hermite_measure",
    "gaussian_moment",
    "hermite_sum_moment",
    "krein_kernel",
    "krein_transform",
    "matrix_polynomial",
    "modified_moment",
    "modified_moment_from_raw",
    "modified_trace_moment",
    "modified_trace_moments",
    "raw_moment",
    "replicate_mean",
    "semicircle_cdf",
    "semicircle_moment",
    "semicircle_quadrature",
    "sonin_bound_check",
    "trace_power_moment",
    "trace_power_moments",
]


class MomentMismatchError(ValueError):
    """A moment that was required to match the reference does not."""

    def __init__(self, order: int, observed: float, expected: float):
        super().__init__(f"moment of order {order} is {observed!r}, expected {expected!r}")
        self.order = order
        self.observed = observed
        self.expected = expected


# ------------------------------------------------------------------ exact references


def catalan(j: int) -> int:
    if j < 0:
        raise ValueError("j must be nonnegative")
    return math.comb(2 * j, j) // (j + 1)


def semicircle_moment(m: int) -> Fraction:
    """``int x^m d sigma_Wig`` for the semicircle on ``[-1, 1]``."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m % 2:
        return Fraction(0)
    return Fraction(catalan(m // 2), 2**m)


def gaussian_moment(m: int) -> Fraction:
    """Standard Gaussian moment: ``m! / ((m/2)! 2^{m/2})`` for even ``m``."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m % 2:
        return Fraction(0)
    h = m // 2
    return Fraction(math.factorial(m), math.factorial(h) * 2**h)


def semicircle_cdf(xi):
    """``sigma_Wig(-inf, xi]`` in closed form."""
    x = np.clip(np.asarray(xi, dtype=float), -1.0, 1.0)
    out = 0.5 + (x * np.sqrt(1.0 - x * x) + np.arcsin(x)) / np.pi
    return float(out) if np.ndim(out) == 0 else out


def semicircle_quadrature(m: int) -> EmpiricalMeasure:
    """``m``-node Gauss quadrature for the semicircle (exact to degree ``2m-1``).

    Nodes ``cos(j pi/(m+1))``, weights ``2/(m+1) sin^2(j pi/(m+1))``.
    """
    j = np.arange(1, m + 1)
    th = j * np.pi / (m + 1)
    return EmpiricalMeasure(np.cos(th), 2.0 / (m + 1) * np.sin(th) ** 2)


def gauss_hermite_measure(m: int) -> EmpiricalMeasure:
    """``m``-node Gauss-Hermite rule normalised to a probability measure."""
    x, w = np.polynomial.hermite_e.hermegauss(m)
    return EmpiricalMeasure(x, w / w.sum())


# ------------------------------------------------------------------ polynomial families


class FamilyKind(str, enum.Enum):
    CHEBYSHEV_U = "chebyshev_u"
    NON_BACKTRACKING = "non_backtracking"
    HERMITE_HE = "hermite_he"


@dataclass(frozen=True)
class PolynomialFamily:
    """Three-term family ``p_{n+1} = a_n x p_n - b_n p_{n-1}``, ``p_0 = 1``."""

    kind: FamilyKind
    kappa: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FamilyKind(self.kind))
        if self.kind is FamilyKind.NON_BACKTRACKING and (self.kappa is None or self.kappa < 2):
            raise ValueError("non-backtracking family needs kappa >= 2")

    @classmethod
    def chebyshev_u(cls) -> "PolynomialFamily":
        return cls(FamilyKind.CHEBYSHEV_U)

    @classmethod
    def non_backtracking(cls, kappa: int) -> "PolynomialFamily":
        return cls(FamilyKind.NON_BACKTRACKING, kappa)

    @classmethod
    def hermite(cls) -> "PolynomialFamily":
        return cls(FamilyKind.HERMITE_HE)

    def recurrence(self, n: int) -> tuple[Fraction, Fraction]:
        """``(a_n, b_n)`` producing ``p_{n+1}`` from ``p_n`` and ``p_{n-1}``."""
        if self.kind is FamilyKind.HERMITE_HE:
            return Fraction(1), Fraction(n)
        if self.kind is FamilyKind.NON_BACKTRACKING and n == 1:
            return Fraction(2), 1 + Fraction(1, self.kappa - 1)
        return Fraction(2), Fraction(1 if n > 0 else 0)

    def coefficients(self, n: int) -> list[Fraction]:
        """Exact monomial coefficients ``[c_0, ..., c_n]`` of ``p_n``."""
        prev: list[Fraction] = []
        cur = [Fraction(1)]
        for j in range(n):
            a, b = self.recurrence(j)
            nxt = [Fraction(0)] + [a * c for c in cur]
            for i, c in enumerate(prev):
                nxt[i] -= b * c
            prev, cur = cur, nxt
        return cur

    def evaluate(self, x, n: int):
        """``p_n(x)`` by the recurrence (scalar or array)."""
        x = np.asarray(x, dtype=float)
        prev = np.zeros_like(x)
        cur = np.ones_like(x)
        for j in range(n):
            a, b = self.recurrence(j)
            prev, cur = cur, float(a) * x * cur - float(b) * prev
        return cur

    def evaluate_all(self, x, n_max: int) -> np.ndarray:
        """Rows ``p_0(x) .. p_{n_max}(x)``."""
        x = np.asarray(x, dtype=float)
        out = np.empty((n_max + 1,) + x.shape)
        prev = np.zeros_like(x)
        cur = np.ones_like(x)
        out[0] = cur
        for j in range(n_max):
            a, b = self.recurrence(j)
            prev, cur = cur, float(a) * x * cur - float(b) * prev
            out[j + 1] = cur
        return out


def matrix_polynomial(x: np.ndarray, family: PolynomialFamily, n: int) -> np.ndarray:
    """``p_n(X)`` for a square matrix by the matrix three-term recurrence."""
    x = np.asarray(x)
    prev = np.zeros_like(x)
    cur = np.eye(x.shape[0], dtype=x.dtype)
    for j in range(n):
        a, b = family.recurrence(j)
        nxt = float(a) * (x @ cur)
        if b:
            nxt -= float(b) * prev
        prev, cur = cur, nxt
    return cur


# ------------------------------------------------------------------ moment tables


class MomentKind(str, enum.Enum):
    RAW = "raw"
    MODIFIED_CHEBYSHEV = "modified_chebyshev"
    MODIFIED_NB = "modified_nb"
    HERMITE = "hermite"


@dataclass(frozen=True, eq=False)
class MomentTable:
    kind: MomentKind
    orders: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("moment values must be finite")


def raw_moment(mu: EmpiricalMeasure, m: int) -> float:
    """``sum_j w_j x_j^m``; raises ``OverflowError`` past the double range."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m == 0:
        return mu.total_mass
    x = mu.locations
    with np.errstate(over="ignore", invalid="ignore"):
        mx = float(np.max(np.abs(x))) if x.size else 0.0
        if mx > 0 and m * math.log(mx) > math.log(np.finfo(float).max) - 1:
            raise OverflowError(f"|x|^{m} exceeds the double range (max |x| = {mx})")
        val = float(np.dot(mu.weights, x**m))
    if not math.isfinite(val):
        raise OverflowError(f"moment of order {m} overflowed")
    return val


def modified_moment(mu: EmpiricalMeasure, n: int, family: PolynomialFamily | None = None) -> float:
    """``int p_n d mu`` (Chebyshev ``U_n`` by default)."""
    family = family or PolynomialFamily.chebyshev_u()
    return float(np.dot(mu.weights, family.evaluate(mu.locations, n)))


def modified_moment_from_raw(mu: EmpiricalMeasure, n: int, family: PolynomialFamily | None = None) -> float:
    """Same quantity as :func:`modified_moment`, via monomial coefficients and raw moments."""
    family = family or PolynomialFamily.chebyshev_u()
    coeffs = family.coefficients(n)
    return math.fsum(float(c) * raw_moment(mu, j) for j, c in enumerate(coeffs) if c)


@dataclass(frozen=True)
class ReplicateMean:
    mean: np.ndarray
    stderr: np.ndarray
    replicates: int


def replicate_mean(fn, replicates: int, master_seed: int, threads: int = 1) -> ReplicateMean:
    """Mean and standard error of ``fn(seed)`` over seeded replicates.

    ``fn`` returns a scalar or a 1-d array.  Results are reduced in
    replicate order, so the output does not depend on ``threads``.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    rows = np.array(run_replicates(fn, replicates, master_seed, threads), dtype=float)
    mean = rows.mean(axis=0)
    if replicates > 1:
        se = rows.std(axis=0, ddof=1) / math.sqrt(replicates)
    else:
        se = np.full_like(mean, np.nan)
    return ReplicateMean(mean, se, replicates)


def _scaled(h: HermitianMatrix | np.ndarray, kappa: int) -> np.ndarray:
    if kappa < 2:
        raise ValueError(f"kappa must be >= 2, got {kappa}")
    a = np.asarray(h.data if isinstance(h, HermitianMatrix) else h)
    return a / (2.0 * math.sqrt(kappa - 1))


def _trace_product(a: np.ndarray, b: np.ndarray) -> float:
    # tr(A B) for Hermitian B: sum(A * conj(B))
    return float(np.real(np.vdot(b, a)))


def trace_power_moments(h: HermitianMatrix | np.ndarray, kappa: int, m_max: int) -> np.ndarray:
    """``(1/N) tr (H / 2 sqrt(kappa-1))^m`` for ``m = 0 .. m_max``.

    Uses powers up to ``ceil(m_max / 2)`` and ``tr X^{i+j} = <X^i, X^j>``.
    """
    x = _scaled(h, kappa)
    n = x.shape[0]
    half = (m_max + 1) // 2
    powers = [np.eye(n, dtype=x.dtype), x]
    for _ in range(2, half + 1):
        powers.append(powers[-1] @ x)
    out = np.empty(m_max + 1)
    for m in range(m_max + 1):
        i = (m + 1) // 2
        j = m - i
        out[m] = _trace_product(powers[i], powers[j]) / n
    return out


def trace_power_moment(h: HermitianMatrix | np.ndarray, kappa: int, m: int) -> float:
    if m < 0:
        raise ValueError("m must be nonnegative")
    return float(trace_power_moments(h, kappa, m)[m])


def modified_trace_moments(
    h: HermitianMatrix | np.ndarray,
    kappa: int,
    family: PolynomialFamily,
    n_max: int,
) -> np.ndarray:
    """``(1/N) tr p_n(H / 2 sqrt(kappa-1))`` for ``n = 0 .. n_max``."""
    if family.kind is FamilyKind.NON_BACKTRACKING and family.kappa != kappa:
        raise ValueError(f"family kappa {family.kappa} does not match kappa {kappa}")
    x = _scaled(h, kappa)
    n = x.shape[0]
    out = np.empty(n_max + 1)
    prev = np.zeros_like(x)
    cur = np.eye(n, dtype=x.dtype)
    out[0] = 1.0
    for j in range(n_max):
        a, b = family.recurrence(j)
        nxt = float(a) * (x @ cur)
        if b:
            nxt -= float(b) * prev
        prev, cur = cur, nxt
        out[j + 1] = float(np.real(np.trace(cur))) / n
    return out


def modified_trace_moment(h, kappa: int, family: PolynomialFamily, n: int) -> float:
    if n < 0:
        raise ValueError("n must be nonnegative")
    return float(modified_trace_moments(h, kappa, family, n)[n])


def hermite_sum_moment(samples, n: int) -> float:
    """Sample mean of ``He_n(x) / sqrt(n!)``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    x = np.asarray(samples, dtype=float)
    he = PolynomialFamily.hermite().evaluate(x, n)
    return float(np.mean(he)) / math.sqrt(math.factorial(n))


# ------------------------------------------------------------------ Sonin


@dataclass(frozen=True)
class SoninReport:
    matched_up_to: int
    bound: float
    observed: float
    holds: bool


def gaussian_cdf_gap(mu: EmpiricalMeasure) -> float:
    """``sup_x |mu(-inf, x] - Phi(x)|`` (checked on both sides of every atom)."""
    x = mu.locations
    right = cdf(mu, x)
    left = right - mu.weights
    phi = ndtr(x)
    return float(max(np.max(np.abs(right - phi)), np.max(np.abs(left - phi))))


def sonin_bound_check(mu: EmpiricalMeasure, m: int, rtol: float = 1e-9, scan_to: int = 64) -> SoninReport:
    """Check moment matching with the Gaussian through order ``m`` and the CDF bound.

    ``matched_up_to`` is the largest order (at most ``scan_to``) through
    which every moment matches; the bound itself uses the requested ``m``.

    Raises
    ------
    MomentMismatchError
        For the first order ``j <= m`` whose moment differs.
    """
    if m < 2:
        raise ValueError("m must be >= 2")
    matched = -1
    for j in range(max(m, scan_to) + 1):
        ref = float(gaussian_moment(j))
        obs = raw_moment(mu, j)
        if abs(obs - ref) > rtol * max(1.0, abs(ref)):
            if j <= m:
                raise MomentMismatchError(j, obs, ref)
            break
        matched = j
    observed = gaussian_cdf_gap(mu)
    bound = math.sqrt(math.pi / (m - 1))
    return SoninReport(matched, bound, observed, observed <= bound)


# ------------------------------------------------------------------ Erdos-Turan


@dataclass(frozen=True)
class ETBracket:
    rho: float
    bracket: float
    discrepancy: float

    @property
    def ratio(self) -> float:
        return self.discrepancy / self.bracket


def erdos_turan_bracket(mu: EmpiricalMeasure, xi, n0: int):
    """Discrepancy to the semicircle and the modified-moment bracket.

    ``rho = max(1 - |xi|, n0^-2)``,
    ``bracket = rho / n0 + sqrt(rho) sum_{n<=n0} |s~(n)| / n``.

    ``xi`` may be an array; the result then holds arrays.
    """
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    xi_arr = np.asarray(xi, dtype=float)
    u = PolynomialFamily.chebyshev_u().evaluate_all(mu.locations, n0)
    s = u[1:] @ mu.weights
    tail = float(np.sum(np.abs(s) / np.arange(1, n0 + 1)))
    rho = np.maximum(1.0 - np.abs(xi_arr), n0**-2.0)
    bracket = rho / n0 + np.sqrt(rho) * tail
    disc = np.abs(np.asarray(cdf(mu, xi_arr)) - semicircle_cdf(xi_arr))
    if xi_arr.ndim == 0:
        return ETBracket(float(rho), float(bracket), float(disc))
    return ETBracket(rho, bracket, disc)


# ------------------------------------------------------------------ corners and the Krein transform


def corner_moment_profile(
    mu: EmpiricalMeasure,
    eps: float,
    eta: float,
    alphas: Sequence[float],
    parity: str = "even",
) -> np.ndarray:
    """``eps^-1 s(m; mu)`` with ``m ~ alpha / eta`` for each ``alpha``.

    ``parity="even"`` sums both edges of a symmetric measure, ``"odd"``
    takes their difference, ``"any"`` uses ``round(alpha / eta)`` as is.
    """
    if not (eps > 0 and eta > 0):
        raise ValueError("eps and eta must be positive")
    out = []
    for a in alphas:
        if not a > 0:
            raise ValueError("alpha must be positive")
        t = a / eta
        if parity == "even":
            m = 2 * int(round(t / 2))
        elif parity == "odd":
            m = 2 * int(math.floor(t / 2)) + 1
        elif parity == "any":
            m = int(round(t))
        else:
            raise ValueError(f"unknown parity {parity!r}")
        out.append(raw_moment(mu, m) / eps)
    return np.array(out)


def krein_kernel(lam, alpha: float):
    """``sin(alpha sqrt(-l)) / sqrt(-l)``, continued by ``alpha`` at 0 and ``sinh`` for ``l > 0``."""
    lam = np.asarray(lam, dtype=float)
    r = np.sqrt(np.abs(lam))
    with np.errstate(divide="ignore", invalid="ignore"):
        neg = np.sin(alpha * r) / r
        pos = np.sinh(alpha * r) / r
    out = np.where(lam < 0, neg, np.where(lam > 0, pos, alpha))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class KreinValue:
    value: float
    window: float


def krein_transform(nu: EmpiricalMeasure, alpha: float, window: float) -> KreinValue:
    """Hard-window regularised transform: atoms with ``|l| <= window`` only."""
    if not (alpha > 0 and window > 0):
        raise ValueError("alpha and window must be positive")
    keep = np.abs(nu.locations) <= window
    val = float(np.dot(nu.weights[keep], krein_kernel(nu.locations[keep], alpha)))
    return KreinValue(val, float(window))
