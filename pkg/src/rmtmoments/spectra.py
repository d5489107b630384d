"""Eigenvalues, empirical measures, rescaling and CDF distances."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np
import scipy.linalg

from .ensembles import HermitianMatrix

__all__ = [
    "ConvergenceError",
    "EmpiricalMeasure",
    "RescaleParams",
    "Spectrum",
    "cdf",
    "compose",
    "edge_point_process",
    "edge_value",
    "eigenvalues",
    "empirical_measure",
    "householder_tridiagonal",
    "ks_two_sample",
    "largest_eigenvalue",
    "rescale",
    "sup_cdf_distance",
    "tridiagonal_ql_eigenvalues",
    "write_measure_csv",
    "write_spectrum_csv",
]

DEFAULT_EIG_TOL = float(np.finfo(float).eps)


class ConvergenceError(RuntimeError):
    """The QL iteration hit its iteration cap."""


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues ``xi_1 >= ... >= xi_N``."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.ndim != 1:
            raise ValueError("eigenvalues must be one-dimensional")
        if not np.all(np.isfinite(ev)):
            raise ValueError("non-finite eigenvalue")
        if np.any(np.diff(ev) > 0):
            raise ValueError("eigenvalues must be sorted in descending order")
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    def __len__(self):
        return self.n

    @property
    def largest(self) -> float:
        return float(self.eigenvalues[0])


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Finite atomic measure; atoms sorted by location, weights positive.

    Total mass need not be one (rescaled point processes are not
    probability measures).
    """

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.locations, dtype=float).ravel()
        w = np.broadcast_to(np.asarray(self.weights, dtype=float), x.shape).copy()
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("atom weights must be positive and finite")
        if not np.all(np.isfinite(x)):
            raise ValueError("atom locations must be finite")
        order = np.argsort(x, kind="stable")
        x, w = x[order], w[order]
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "locations", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, values: Iterable[float], mass: float = 1.0) -> "EmpiricalMeasure":
        x = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)
        return cls(x, np.full(x.size, mass / x.size))

    @classmethod
    def point_mass(cls, x: float, weight: float = 1.0) -> "EmpiricalMeasure":
        return cls(np.array([x]), np.array([weight]))

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def __len__(self):
        return self.locations.size


@dataclass(frozen=True)
class RescaleParams:
    """Zoom about ``center`` by ``eta`` (variable axis), divide mass by ``eps``."""

    center: float = 0.0
    eta: float = 1.0
    eps: float = 1.0

    def __post_init__(self):
        if not (self.eta > 0 and self.eps > 0):
            raise ValueError("eta and eps must be positive")


# ------------------------------------------------------------------ eigensolver


def householder_tridiagonal(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduce a real symmetric matrix to tridiagonal form.

    Returns the diagonal ``d`` (length n) and the off-diagonal ``e``
    (length n-1) of ``Q^T A Q``.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1 :, k]
        norm = math.sqrt(float(x @ x))
        if norm == 0.0:
            continue
        alpha = -norm if x[0] >= 0 else norm
        v = x.copy()
        v[0] -= alpha
        vn = math.sqrt(float(v @ v))
        if vn == 0.0:
            continue
        v /= vn
        sub = a[k + 1 :, k + 1 :]
        p = sub @ v
        q = p - (v @ p) * v
        sub -= 2.0 * (np.outer(v, q) + np.outer(q, v))
        a[k + 1, k] = a[k, k + 1] = alpha
        a[k + 2 :, k] = 0.0
        a[k, k + 2 :] = 0.0
    return np.diagonal(a).copy(), np.diagonal(a, -1).copy()


def tridiagonal_ql_eigenvalues(
    d: np.ndarray, e: np.ndarray, tol: float = DEFAULT_EIG_TOL, max_iter: int = 60
) -> np.ndarray:
    """Eigenvalues of a symmetric tridiagonal matrix by implicit-shift QL."""
    d = [float(x) for x in d]
    n = len(d)
    e = [float(x) for x in e] + [0.0]
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= tol * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                raise ConvergenceError(f"QL iteration did not converge for eigenvalue {l} after {max_iter} sweeps")
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return np.array(d)


def _real_embedding(a: np.ndarray) -> np.ndarray:
    x, y = a.real, a.imag
    return np.block([[x, -y], [y, x]])


def eigenvalues(
    h: HermitianMatrix | np.ndarray,
    method: str = "lapack",
    tol: float = DEFAULT_EIG_TOL,
    max_iter: int = 60,
) -> Spectrum:
    """Spectrum of a Hermitian matrix, sorted descending.

    ``method="lapack"`` calls the LAPACK symmetric/Hermitian driver and is
    what every Monte Carlo path uses.  ``method="ql"`` is the self-contained
    Householder + implicit-shift QL route; complex input is handled through
    the real ``2N`` embedding ``[[X, -Y], [Y, X]]``, whose spectrum is that of
    ``H`` with every eigenvalue doubled.
    """
    a = np.asarray(h.data if isinstance(h, HermitianMatrix) else h)
    if method == "lapack":
        ev = scipy.linalg.eigvalsh(a, check_finite=True)
        return Spectrum(ev[::-1].copy())
    if method != "ql":
        raise ValueError(f"unknown method {method!r}")
    if np.iscomplexobj(a):
        d, e = householder_tridiagonal(_real_embedding(a))
        ev = np.sort(tridiagonal_ql_eigenvalues(d, e, tol, max_iter))[::-1]
        # pairs (ev[0], ev[1]), (ev[2], ev[3]), ... are the doubled eigenvalues
        ev = 0.5 * (ev[0::2] + ev[1::2])
    else:
        d, e = householder_tridiagonal(a)
        ev = np.sort(tridiagonal_ql_eigenvalues(d, e, tol, max_iter))[::-1]
    return Spectrum(ev.copy())


def largest_eigenvalue(h: HermitianMatrix | np.ndarray) -> float:
    """Top eigenvalue only (LAPACK, index-selected)."""
    a = np.asarray(h.data if isinstance(h, HermitianMatrix) else h)
    n = a.shape[0]
    return float(scipy.linalg.eigvalsh(a, subset_by_index=[n - 1, n - 1])[0])


# ------------------------------------------------------------------ measures


def empirical_measure(spec: Spectrum, scale: float = 1.0) -> EmpiricalMeasure:
    """``(1/N) sum_j delta(xi_j / scale)``."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return EmpiricalMeasure(spec.eigenvalues / scale, np.full(spec.n, 1.0 / spec.n))


def rescale(mu: EmpiricalMeasure, p: RescaleParams) -> EmpiricalMeasure:
    """Atom at ``x`` goes to ``(x - center) / eta``; weights are divided by ``eps``."""
    return EmpiricalMeasure((mu.locations - p.center) / p.eta, mu.weights / p.eps)


def compose(first: RescaleParams, then: RescaleParams) -> RescaleParams:
    """Parameters of ``rescale(rescale(mu, first), then)`` as a single rescale."""
    return RescaleParams(
        first.center + then.center * first.eta,
        first.eta * then.eta,
        first.eps * then.eps,
    )


def edge_value(xi, n: int, w: int | None = None):
    """Edge coordinate of eigenvalue(s) ``xi``.

    Wigner (``w is None``): ``N^{1/6} (xi - 2 sqrt N)``.
    Band of width ``w``:  ``N^{2/3} / sqrt(2W) * (xi - 2 sqrt(2W))``.
    """
    xi = np.asarray(xi, dtype=float)
    if w is None:
        return n ** (1.0 / 6.0) * (xi - 2.0 * math.sqrt(n))
    r = math.sqrt(2.0 * w)
    return n ** (2.0 / 3.0) / r * (xi - 2.0 * r)


def edge_point_process(spec: Spectrum, mode: str = "wigner", w: int | None = None) -> EmpiricalMeasure:
    """Unit-weight point process of edge-rescaled eigenvalues.

    ``mode`` is ``"wigner"`` or ``"band"``; the band mode needs the width ``w``
    of the matrix the spectrum came from.
    """
    if mode == "wigner":
        lam = edge_value(spec.eigenvalues, spec.n)
    elif mode == "band":
        if w is None or w < 1:
            raise ValueError("band edge rescaling needs the band width w")
        lam = edge_value(spec.eigenvalues, spec.n, w)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return EmpiricalMeasure(lam, np.ones(spec.n))


def cdf(mu: EmpiricalMeasure, xi) -> float | np.ndarray:
    """Right-continuous ``mu(-inf, xi]``."""
    if len(mu) == 0:
        raise ValueError("empty measure")
    cum = np.concatenate([[0.0], np.cumsum(mu.weights)])
    out = cum[np.searchsorted(mu.locations, xi, side="right")]
    return float(out) if np.ndim(out) == 0 else out


def sup_cdf_distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """``sup_x |mu(-inf, x] - nu(-inf, x]|``, exact over the union of atoms."""
    if len(mu) == 0 or len(nu) == 0:
        raise ValueError("empty measure")
    grid = np.union1d(mu.locations, nu.locations)
    return float(np.max(np.abs(cdf(mu, grid) - cdf(nu, grid))))


def ks_two_sample(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    return sup_cdf_distance(EmpiricalMeasure.uniform(a), EmpiricalMeasure.uniform(b))


# ------------------------------------------------------------------ csv


def write_spectrum_csv(spec: Spectrum, fh: TextIO | None = None):
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "value"])
    for j, x in enumerate(spec.eigenvalues.tolist(), 1):
        w.writerow([j, repr(x)])
    return buf.getvalue() if fh is None else None


def write_measure_csv(mu: EmpiricalMeasure, fh: TextIO | None = None):
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["location", "weight"])
    for x, wt in zip(mu.locations.tolist(), mu.weights.tolist()):
        w.writerow([repr(x), repr(wt)])
    return buf.getvalue() if fh is None else None
