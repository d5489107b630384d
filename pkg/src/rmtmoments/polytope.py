"""Polytopes ``{w >= 0 : sum_e c_r(e) w_e = alpha_r}`` and integrals over them.

Measure convention: eliminate the pivot variables of the reduced row
echelon form (the lexicographically first invertible column set) and take
Lebesgue measure in the remaining free coordinates.  Another pivot choice
rescales every volume by a constant ``|det|``.

Volumes are exact.  Columns with identical coefficient vectors form a
group whose members only enter through their total ``T_G``; for fixed
totals the group is a simplex of volume ``T_G^{n_G-1} / (n_G-1)!``.  What
is left is an integral over the polytope of group totals, which has
dimension 0 or 1 for every polytope arising from a one- or two-walk
diagram and is integrated in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "MonteCarloVolume",
    "Polytope",
    "divided_difference_exp",
    "exp_linear_integral",
    "polytope_volume",
    "polytope_volume_mc",
    "rref",
    "simplex_exp_integral",
]


# ------------------------------------------------------------------ exact linear algebra


def rref(rows: Sequence[Sequence], ncols: int | None = None):
    """Reduced row echelon form over the rationals.

    Returns ``(R, pivots)`` where ``R`` is a list of Fraction rows and
    ``pivots`` the pivot columns; rows past ``len(pivots)`` vanish in the
    eligible columns.  Only the first ``ncols`` columns are eligible as
    pivots (all by default), which lets an augmented right-hand side ride
    along.
    """
    m = [[Fraction(x) for x in r] for r in rows]
    if not m:
        return [], []
    width = len(m[0])
    ncols = width if ncols is None else ncols
    piv: list[int] = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        piv.append(c)
        r += 1
        if r == len(m):
            break
    return m, piv


def _det(mat: list[list[Fraction]]) -> Fraction:
    a = [row[:] for row in mat]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        p = next((i for i in range(c, n) if a[i][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            a[c], a[p] = a[p], a[c]
            det = -det
        det *= a[c][c]
        for i in range(c + 1, n):
            if a[i][c] != 0:
                f = a[i][c] / a[c][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    return det


def _poly_mul(p: list[Fraction], q: list[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


# ------------------------------------------------------------------ polytope


@dataclass(frozen=True)
class Polytope:
    """``{w >= 0 : sum_e coeffs[r][e] w_e = alpha[r]}``.

    Parameters
    ----------
    coeffs : k x E nonnegative integers
    alpha : k positive numbers (ints, Fractions or floats)
    labels : optional edge names used when printing constraints
    """

    coeffs: tuple
    alpha: tuple
    labels: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        c = tuple(tuple(int(x) for x in row) for row in self.coeffs)
        a = tuple(self.alpha)
        if not c or not c[0]:
            raise ValueError("need at least one constraint and one variable")
        if any(len(row) != len(c[0]) for row in c):
            raise ValueError("ragged coefficient matrix")
        if any(x < 0 for row in c for x in row):
            raise ValueError("coefficients must be nonnegative")
        if len(a) != len(c):
            raise ValueError(f"{len(c)} constraints but {len(a)} alpha values")
        if any(not (x >= 0) for x in a):
            raise ValueError("alpha must be nonnegative")
        if any(all(row[e] == 0 for row in c) for e in range(len(c[0]))):
            raise ValueError("a variable appears in no constraint (unbounded polytope)")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "alpha", a)
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def k(self) -> int:
        return len(self.coeffs)

    @property
    def n_vars(self) -> int:
        return len(self.coeffs[0])

    @cached_property
    def _rref(self):
        return rref(self.coeffs)

    @property
    def pivots(self) -> tuple[int, ...]:
        return tuple(self._rref[1])

    @property
    def free(self) -> tuple[int, ...]:
        p = set(self.pivots)
        return tuple(e for e in range(self.n_vars) if e not in p)

    @property
    def rank(self) -> int:
        return len(self.pivots)

    @property
    def full_rank(self) -> bool:
        return self.rank == self.k

    @property
    def dimension(self) -> int:
        return self.n_vars - self.rank

    @cached_property
    def groups(self) -> tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]:
        """``(column vector, member edges)`` for each distinct column, in first-appearance order."""
        out: dict = {}
        for e in range(self.n_vars):
            col = tuple(row[e] for row in self.coeffs)
            out.setdefault(col, []).append(e)
        return tuple((col, tuple(m)) for col, m in out.items())

    def with_alpha(self, alpha: Sequence) -> "Polytope":
        return Polytope(self.coeffs, tuple(alpha), self.labels)

    def constraint_strings(self) -> list[str]:
        names = self.labels or tuple(f"w{e}" for e in range(self.n_vars))
        out = []
        for r, row in enumerate(self.coeffs):
            terms = [(f"{c}" if c != 1 else "") + f"w_{names[e]}" for e, c in enumerate(row) if c]
            out.append("+".join(terms) + f" = alpha_{r + 1}")
        return out

    def contains(self, w, atol: float = 1e-12) -> bool:
        w = np.asarray(w, dtype=float)
        a = np.asarray(self.coeffs, dtype=float)
        return bool(np.all(w >= -atol) and np.allclose(a @ w, np.asarray(self.alpha, dtype=float), atol=atol, rtol=0))

    # -------------------------------------------------------------- totals parametrisation

    @cached_property
    def _fibration(self):
        """Group totals as affine functions of free totals, plus the Jacobian.

        Returns ``(null, lin, slope, jac, nt)``: the total of group ``G`` is
        ``lin[G] . alpha + slope[G] . t`` over ``nt`` free totals ``t``, and
        ``alpha`` is feasible only if ``y . alpha = 0`` for each ``y`` in
        ``null``.
        """
        groups = self.groups
        g = len(groups)
        b = [[Fraction(col[r]) for col, _ in groups] for r in range(self.k)]
        # augment with the identity so each reduced row records its combination of constraints
        aug, piv = rref([row + [Fraction(int(r == i)) for i in range(self.k)] for r, row in enumerate(b)], ncols=g)
        free = [j for j in range(g) if j not in piv]
        nt = len(free)
        # T_G = sum_r lin[G][r] * alpha_r + sum_f slope[G][f] t_f
        lin = [[Fraction(0)] * self.k for _ in range(g)]
        slope = [[Fraction(0)] * nt for _ in range(g)]
        for i, pc in enumerate(piv):
            lin[pc] = aug[i][g:]
            for fi, f in enumerate(free):
                slope[pc][fi] = -aug[i][f]
        for fi, f in enumerate(free):
            slope[f][fi] = Fraction(1)
        # consistency: rows of aug beyond rank give left null vectors y with y.alpha = 0 required
        null = [row[g:] for row in aug[len(piv):]]
        # Jacobian of (u, t) -> w_free
        cols = []
        for gi, (_, members) in enumerate(groups):
            for _ in members[:-1]:
                cols.append(("u", gi))
        cols.extend(("t", fi) for fi in range(nt))
        d = len(cols)
        m = [[Fraction(0)] * d for _ in range(self.n_vars)]
        ucol = 0
        for gi, (_, members) in enumerate(groups):
            for e in members[:-1]:
                m[e][ucol] = Fraction(1)
                m[members[-1]][ucol] = Fraction(-1)
                ucol += 1
            for fi in range(nt):
                m[members[-1]][d - nt + fi] += slope[gi][fi]
        fr = self.free
        if len(fr) != d:
            raise AssertionError("fibration dimension mismatch")
        jac = abs(_det([m[e] for e in fr])) if d else Fraction(1)
        return null, lin, slope, jac, nt

    def _totals(self, alpha):
        null, lin, slope, jac, nt = self._fibration
        for y in null:
            if sum(yi * a for yi, a in zip(y, alpha)) != 0:
                return None
        offs = [sum(li * a for li, a in zip(row, alpha)) for row in lin]
        return offs, slope, jac, nt

    def _interval(self, offs, slope):
        lo = hi = None
        for p, q in zip(offs, slope):
            q = q[0]
            if q > 0:
                b = -p / q
                lo = b if lo is None or b > lo else lo
            elif q < 0:
                b = -p / q
                hi = b if hi is None or b < hi else hi
            elif p < 0:
                return None
        if lo is None or hi is None:
            raise ValueError("polytope is unbounded")
        if hi < lo:
            return None
        return lo, hi


def _exact_alpha(alpha) -> tuple[Fraction, ...]:
    return tuple(Fraction(a) for a in alpha)


def polytope_volume(p: Polytope) -> Fraction:
    """Exact volume under the pivot-projection convention.

    Returns 0 for an infeasible system.  Raises ``NotImplementedError``
    when the group-total polytope has dimension above one.
    """
    alpha = _exact_alpha(p.alpha)
    tot = p._totals(alpha)
    if tot is None:
        return Fraction(0)
    offs, slope, jac, nt = tot
    sizes = [len(m) for _, m in p.groups]
    if nt == 0:
        if any(t < 0 for t in offs):
            return Fraction(0)
        val = Fraction(1)
        for t, n in zip(offs, sizes):
            val *= t ** (n - 1) / math.factorial(n - 1)
        return jac * val
    if nt > 1:
        raise NotImplementedError(f"group-total polytope of dimension {nt} is not supported")
    iv = p._interval(offs, slope)
    if iv is None:
        return Fraction(0)
    lo, hi = iv
    poly = [Fraction(1)]
    for (a, q), n in zip(zip(offs, slope), sizes):
        lin = [a, q[0]]
        for _ in range(n - 1):
            poly = _poly_mul(poly, lin)
        poly = [x / math.factorial(n - 1) for x in poly]
    integral = sum(c * (hi ** (j + 1) - lo ** (j + 1)) / (j + 1) for j, c in enumerate(poly))
    return jac * integral


# ------------------------------------------------------------------ exponential integrals


def _complete_homogeneous(y: np.ndarray, m_max: int) -> np.ndarray:
    h = np.zeros(m_max + 1)
    h[0] = 1.0
    for yi in y:
        for m in range(1, m_max + 1):
            h[m] += yi * h[m - 1]
    return h


def _dd_series(r: np.ndarray, t: float) -> float:
    # clustered points: shift to the mean and sum the Taylor series of exp(-t y)
    n = len(r)
    c = float(np.mean(r))
    y = r - c
    terms = 60 + n
    h = _complete_homogeneous(y, terms)
    total = 0.0
    coef = (-t) ** (n - 1) / math.factorial(n - 1)
    for j in range(n - 1, n - 1 + terms):
        term = coef * h[j - n + 1]
        total += term
        if j > n + 5 and abs(term) <= 1e-18 * abs(total):
            break
        coef *= -t / (j + 1)
    return math.exp(-t * c) * total


def divided_difference_exp(rates: Sequence[float], t: float) -> float:
    """Divided difference of ``x -> exp(-t x)`` at the given points (repeats allowed)."""
    r = np.sort(np.asarray(rates, dtype=float))
    n = len(r)
    if n == 0:
        raise ValueError("need at least one point")
    memo: dict = {}

    def dd(i: int, j: int) -> float:
        key = (i, j)
        if key in memo:
            return memo[key]
        if i == j:
            v = math.exp(-t * r[i])
        elif t * (r[j] - r[i]) <= 1.0:
            v = _dd_series(r[i : j + 1], t)
        else:
            v = (dd(i + 1, j) - dd(i, j - 1)) / (r[j] - r[i])
        memo[key] = v
        return v

    return dd(0, n - 1)


def simplex_exp_integral(rates: Sequence[float], t: float) -> float:
    """``int exp(-sum r_e w_e)`` over ``{w >= 0, sum w = t}`` (projection measure)."""
    n = len(rates)
    if t < 0:
        return 0.0
    if n == 1:
        return math.exp(-rates[0] * t)
    return (-1) ** (n - 1) * divided_difference_exp(rates, t)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def exp_linear_integral(p: Polytope, rates: Sequence[float]) -> float:
    """``int_P exp(-sum_e rate_e w_e) d mes``; equals the volume for zero rates."""
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (p.n_vars,):
        raise ValueError(f"expected {p.n_vars} rates")
    if np.any(rates < 0):
        raise ValueError("rates must be nonnegative")
    alpha = _exact_alpha(p.alpha)
    tot = p._totals(alpha)
    if tot is None:
        return 0.0
    offs, slope, jac, nt = tot
    group_rates = [rates[list(m)] for _, m in p.groups]

    def integrand(tv: float) -> float:
        val = 1.0
        for a, q, gr in zip(offs, slope, group_rates):
            tg = float(a) + (float(q[0]) * tv if nt else 0.0)
            val *= simplex_exp_integral(gr, max(tg, 0.0))
        return val

    if nt == 0:
        if any(t < 0 for t in offs):
            return 0.0
        return float(jac) * integrand(0.0)
    if nt > 1:
        raise NotImplementedError(f"group-total polytope of dimension {nt} is not supported")
    iv = p._interval(offs, slope)
    if iv is None:
        return 0.0
    lo, hi = float(iv[0]), float(iv[1])
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    s = math.fsum(wt * integrand(mid + half * x) for x, wt in zip(_GL_NODES, _GL_WEIGHTS))
    return float(jac) * half * s


# ------------------------------------------------------------------ Monte Carlo


@dataclass(frozen=True)
class MonteCarloVolume:
    estimate: float
    stderr: float
    samples: int
    hits: int


def polytope_volume_mc(p: Polytope, samples: int, rng: np.random.Generator) -> MonteCarloVolume:
    """Hit-or-miss volume estimate.

    Free coordinates are drawn uniformly from a product of scaled simplices
    that contains the projected polytope: each free variable is charged to
    the row where its coefficient is largest, and every row bounds the
    weighted sum of its charged variables by ``alpha_r``.
    """
    a = np.asarray(p.coeffs, dtype=float)
    alpha = np.asarray([float(x) for x in p.alpha])
    piv = list(p.pivots)
    free = list(p.free)
    if not p.full_rank:
        raise ValueError("Monte Carlo volume needs a full-rank system")
    charge: dict[int, list[int]] = {}
    for e in free:
        charge.setdefault(int(np.argmax(a[:, e])), []).append(e)
    wf = np.zeros((samples, p.n_vars))
    enclosing = 1.0
    for r, es in charge.items():
        n = len(es)
        cvec = a[r, es]
        x = rng.dirichlet(np.ones(n + 1), size=samples)[:, :n]
        wf[:, es] = alpha[r] * x / cvec
        enclosing *= alpha[r] ** n / (math.factorial(n) * float(np.prod(cvec)))
    ap = a[:, piv]
    rhs = alpha[None, :] - wf[:, free] @ a[:, free].T
    wp = np.linalg.solve(ap, rhs.T).T
    hits = int(np.count_nonzero(np.all(wp >= 0, axis=1)))
    ph = hits / samples
    return MonteCarloVolume(enclosing * ph, enclosing * math.sqrt(ph * (1 - ph) / samples), samples, hits)
