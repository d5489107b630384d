"""Exact combinatorial oracles for walks on graphs.

Non-backtracking (NB) walk enumeration, the walk-sum side of the
identity ``P_n^{(kappa)}(H / 2 sqrt(kappa-1))(u, v) = sum over NB walks of
prod H / sqrt(kappa-1)``, closed-walk parity censuses and the
isomorphism classification of walk tuples.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .ensembles import GraphSpec, HermitianMatrix
from .moments import PolynomialFamily, catalan, matrix_polynomial

__all__ = [
    "EnumerationGuardError",
    "NBIdentityReport",
    "UnimodularityError",
    "Walk",
    "WalkTupleClass",
    "canonical_form",
    "classify_tuple",
    "closed_even_census",
    "closed_nb_walks",
    "enumerate_nb_paths",
    "format_walks",
    "nb_walk_sums",
    "parse_walks",
    "tree_like_classes",
    "tree_like_count",
    "verify_nb_identity",
]

DEFAULT_GUARD = 10**7


class EnumerationGuardError(RuntimeError):
    """The requested enumeration is larger than the exhaustive regime."""


class UnimodularityError(ValueError):
    """A matrix entry on the graph does not have modulus one."""


@dataclass(frozen=True)
class Walk:
    """Vertex sequence ``u_0 .. u_n``."""

    vertices: tuple

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        if not self.vertices:
            raise ValueError("a walk has at least one vertex")

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    @property
    def closed(self) -> bool:
        return self.vertices[0] == self.vertices[-1]

    @property
    def non_backtracking(self) -> bool:
        v = self.vertices
        return all(v[j] != v[j + 2] for j in range(len(v) - 2))

    def steps(self) -> list[tuple]:
        v = self.vertices
        return list(zip(v[:-1], v[1:]))

    def on_graph(self, g: GraphSpec, allow_loops: bool = False) -> bool:
        for a, b in self.steps():
            if a == b:
                if not allow_loops:
                    return False
            elif not g.has_edge(a, b):
                return False
        return True

    def __len__(self) -> int:
        return self.length

    def __str__(self) -> str:
        return " ".join(str(x) for x in self.vertices)


def _guard(g: GraphSpec, n: int, guard: int) -> None:
    if n > 0 and g.degree ** n > guard:
        raise EnumerationGuardError(f"kappa^n = {g.degree}^{n} exceeds the guard {guard}")


def _extend(nbrs, prefix: list, n: int, out: list) -> None:
    # depth-first extension forbidding the immediate predecessor
    if len(prefix) == n + 1:
        out.append(tuple(prefix))
        return
    x = prefix[-1]
    back = prefix[-2] if len(prefix) > 1 else -1
    for y in nbrs[x]:
        if y != back:
            prefix.append(y)
            _extend(nbrs, prefix, n, out)
            prefix.pop()


def _walks_from(g: GraphSpec, u: int, n: int) -> list[tuple]:
    out: list[tuple] = []
    _extend(g.neighbour_lists, [u], n, out)
    return out


def enumerate_nb_paths(g: GraphSpec, u: int, v: int, n: int, guard: int = DEFAULT_GUARD) -> list[Walk]:
    """All NB walks of length ``n`` from ``u`` to ``v``.

    Raises
    ------
    EnumerationGuardError
        If ``kappa^n`` exceeds ``guard``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    _guard(g, n, guard)
    return [Walk(w) for w in _walks_from(g, u, n) if w[-1] == v]


def closed_nb_walks(g: GraphSpec, n: int, guard: int = DEFAULT_GUARD) -> list[Walk]:
    """Closed NB walks of length ``n`` over every base vertex."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    _guard(g, n, guard)
    return [Walk(w) for u in range(g.n) for w in _walks_from(g, u, n) if w[-1] == u]


def _check_unimodular(h: HermitianMatrix, atol: float) -> None:
    a = np.asarray(h.data)
    g = h.graph
    if np.any(np.abs(np.diag(a)) > atol):
        raise UnimodularityError("diagonal must vanish")
    mod = np.abs(a)
    on = g.adjacency
    bad = np.argwhere(on & (np.abs(mod - 1.0) > atol))
    if bad.size:
        u, v = bad[0]
        raise UnimodularityError(f"|H({u},{v})| = {mod[u, v]!r} on an edge")
    if np.any(mod[~on] > atol):
        raise UnimodularityError("nonzero entry off the graph")


def nb_walk_sums(h: HermitianMatrix, kappa: int, n: int, guard: int = DEFAULT_GUARD) -> np.ndarray:
    """Matrix of ``sum over NB walks u -> v of prod H(u_j, u_{j+1}) / sqrt(kappa-1)``."""
    g = h.graph
    _guard(g, n, guard)
    a = np.asarray(h.data)
    c = 1.0 / math.sqrt(kappa - 1)
    out = np.zeros((g.n, g.n), dtype=a.dtype)
    for u in range(g.n):
        for w in _walks_from(g, u, n):
            prod = 1.0
            for x, y in zip(w[:-1], w[1:]):
                prod = prod * a[x, y] * c
            out[u, w[-1]] += prod
    return out


@dataclass(frozen=True)
class NBIdentityReport:
    n: int
    kappa: int
    max_abs_error: float


def verify_nb_identity(
    h: HermitianMatrix,
    kappa: int | None = None,
    n: int = 1,
    guard: int = DEFAULT_GUARD,
    atol: float = 1e-12,
) -> NBIdentityReport:
    """Compare the matrix polynomial with the NB walk sum entrywise.

    Raises
    ------
    UnimodularityError
        If ``|H(u,v)| != 1`` on an edge, or ``H`` is nonzero elsewhere.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if h.graph is None:
        raise ValueError("the identity needs the matrix's support graph")
    kappa = h.graph.degree if kappa is None else kappa
    _check_unimodular(h, atol)
    x = np.asarray(h.data) / (2.0 * math.sqrt(kappa - 1))
    lhs = matrix_polynomial(x, PolynomialFamily.non_backtracking(kappa), n)
    rhs = nb_walk_sums(h, kappa, n, guard)
    return NBIdentityReport(n, kappa, float(np.max(np.abs(lhs - rhs))))


# ------------------------------------------------------------------ census


def _edge_index(g: GraphSpec) -> dict:
    idx = {}
    for i, (u, v) in enumerate(g.edges()):
        idx[(u, v)] = idx[(v, u)] = i
    return idx


def closed_even_census(
    g: GraphSpec,
    k: int,
    lengths: Sequence[int],
    cap: int = DEFAULT_GUARD,
) -> int:
    """Ordered ``k``-tuples of closed NB walks with every edge used an even number of times.

    Base points are independent across walks.  Each walk length is
    enumerated once; tuples are combined by an XOR convolution of edge
    parity masks, so the cost is linear in the number of single walks.
    """
    if len(lengths) != k:
        raise ValueError(f"expected {k} lengths, got {len(lengths)}")
    if any(m < 0 for m in lengths):
        raise ValueError("lengths must be nonnegative")
    if sum(g.n * g.degree ** max(m - 1, 0) for m in lengths) > cap:
        raise EnumerationGuardError(f"census over lengths {tuple(lengths)} exceeds the cap {cap}")
    eidx = _edge_index(g)
    tables = {}
    for m in set(lengths):
        c: Counter = Counter()
        for w in closed_nb_walks(g, m, guard=cap * max(g.degree, 1)):
            mask = 0
            for st in w.steps():
                mask ^= 1 << eidx[st]
            c[mask] += 1
        tables[m] = c
    acc: Counter = Counter({0: 1})
    for m in lengths:
        nxt: Counter = Counter()
        for a, ca in acc.items():
            for b, cb in tables[m].items():
                nxt[a ^ b] += ca * cb
        acc = nxt
    return acc.get(0, 0)


# ------------------------------------------------------------------ classification


def canonical_form(walks: Iterable[Sequence]) -> tuple:
    """Relabel vertices by first appearance, scanning walks in tuple order."""
    label: dict = {}
    out = []
    for w in walks:
        row = []
        for x in w:
            if x not in label:
                label[x] = len(label)
            row.append(label[x])
        out.append(tuple(row))
    return tuple(out)


@dataclass(frozen=True)
class WalkTupleClass:
    canonical: tuple
    v: int
    e: int
    e2: int

    @property
    def k(self) -> int:
        return len(self.canonical)

    @property
    def tree_like(self) -> bool:
        return self.v - self.e == self.k and self.e2 == self.e


def classify_tuple(walks: Sequence) -> WalkTupleClass:
    """Canonical form and spanned-multigraph summary of closed walks.

    Self-loops count as edges ``{x, x}``.
    """
    seqs = [w.vertices if isinstance(w, Walk) else tuple(w) for w in walks]
    for s in seqs:
        if not s or s[0] != s[-1]:
            raise ValueError(f"walk {s} is not closed")
    canon = canonical_form(seqs)
    mult: Counter = Counter()
    verts = set()
    for s in canon:
        verts.update(s)
        for a, b in zip(s[:-1], s[1:]):
            mult[(min(a, b), max(a, b))] += 1
    e2 = sum(1 for c in mult.values() if c == 2)
    return WalkTupleClass(canon, len(verts), len(mult), e2)


def _closed_rgs(m: int):
    # restricted-growth closed walks: u_0 = 0, consecutive distinct, u_m = 0
    seq = [0]

    def rec(top):
        if len(seq) == m + 1:
            if seq[-1] == 0:
                yield tuple(seq)
            return
        last = seq[-1]
        for y in range(top + 2):
            if y == last:
                continue
            seq.append(y)
            yield from rec(max(top, y))
            seq.pop()

    if m == 0:
        yield (0,)
        return
    yield from rec(0)


def tree_like_classes(m: int) -> list[tuple]:
    """Canonical closed walks of length ``m`` (no loops) that are tree-like, found exhaustively."""
    if m > 14:
        raise EnumerationGuardError("exhaustive classification limited to m <= 14")
    return [w for w in _closed_rgs(m) if classify_tuple([w]).tree_like]


def tree_like_count(m: int) -> int:
    """Number of tree-like classes of closed walks of length ``m``."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    return catalan(m // 2) if m % 2 == 0 else 0


# ------------------------------------------------------------------ text dump


def format_walks(walks: Iterable) -> str:
    """One walk per line, vertices separated by spaces."""
    return "".join(" ".join(str(x) for x in (w.vertices if isinstance(w, Walk) else w)) + "\n" for w in walks)


def parse_walks(text: str) -> list[Walk]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(Walk(int(t) for t in line.split()))
    return out
