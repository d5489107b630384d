"""k-diagrams: enumeration, surface invariants, polytopes and the edge transform series.

A diagram is a multigraph (loops and multiple edges allowed) together
with ``k`` closed non-backtracking walks that traverse every edge exactly
twice in total.  Walk ``r`` starts and ends at its own marked vertex of
degree one (the marked boundary point of the ``r``-th disk); every other
vertex has degree three.  Unmarked vertices of degree two are suppressed,
so a diagram stands for all walk tuples obtained by subdividing its
edges.  Then ``V = 2s`` and ``E = 3s - k`` with ``s = k + E - V``.

Walks are labelled and carry a direction: walk ``r`` is attached to the
parameter ``alpha_r`` and a walk and its reversal are distinct terms of a
trace expansion.  Quotients by walk reversal and walk permutation are
available as options.

Non-backtracking is checked on half-edges: a loop traversed twice in the
same direction is allowed, immediately re-entering it backwards is not.
"""

from __future__ import annotations

import itertools
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

from .polytope import Polytope, exp_linear_integral, polytope_volume

__all__ = [
    "ADSeries",
    "CountRow",
    "Diagram",
    "DiagramError",
    "PointConfig",
    "ad_transform_series",
    "diagram_count_report",
    "diagram_polytope",
    "enumerate_diagrams",
    "format_catalog",
    "parse_catalog",
]

MAX_S = 4
SUPPORTED_K = (1, 2)


class DiagramError(ValueError):
    """Walk data that does not describe a valid diagram, or a request outside the exhaustive regime."""


Step = tuple[int, bool]  # (edge, forward) where forward means ends[e][0] -> ends[e][1]


def _canonicalize(ends: Sequence[tuple[int, int]], walks: Sequence[Sequence[Step]]):
    """Relabel vertices and edges by first appearance and orient edges by first traversal."""
    vmap: dict[int, int] = {}
    emap: dict[int, int] = {}
    flip: dict[int, bool] = {}
    new_ends: list[tuple[int, int]] = []
    new_walks = []
    for w in walks:
        row = []
        for e, fwd in w:
            a, b = ends[e] if fwd else ends[e][::-1]
            if a not in vmap:
                vmap[a] = len(vmap)
            if b not in vmap:
                vmap[b] = len(vmap)
            if e not in emap:
                emap[e] = len(emap)
                flip[e] = not fwd
                new_ends.append((vmap[a], vmap[b]))
            row.append((emap[e], fwd != flip[e]))
        new_walks.append(tuple(row))
    return tuple(new_ends), tuple(new_walks), emap


def _reverse(walk: Sequence[Step]) -> tuple[Step, ...]:
    return tuple((e, not f) for e, f in reversed(walk))


@dataclass(frozen=True)
class Diagram:
    """A k-diagram in canonical form.

    Attributes
    ----------
    ends : endpoints ``(u, v)`` of every edge, oriented along its first traversal
    walks : per walk, the sequence of ``(edge, forward)`` steps
    edge_names : optional display names, one per edge (not part of equality)
    """

    ends: tuple
    walks: tuple
    edge_names: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise DiagramError("; ".join(problems))

    # -------------------------------------------------------------- constructors

    @classmethod
    def from_edge_walks(cls, ends, walks, names: Sequence | None = None) -> "Diagram":
        """Build from edge endpoints and walks of ``(edge, forward)`` steps.

        ``ends`` may be a mapping from edge names to endpoint pairs, in which
        case the walks refer to edges by name.
        """
        if isinstance(ends, dict):
            names = list(ends)
            index = {n: i for i, n in enumerate(names)}
            ends = [ends[n] for n in names]
            walks = [[(index[e], f) for e, f in w] for w in walks]
        ends = [tuple(x) for x in ends]
        c_ends, c_walks, emap = _canonicalize(ends, walks)
        if len(emap) != len(ends):
            raise DiagramError("some edge is never traversed")
        new_names = None
        if names is not None:
            inv = sorted(emap, key=emap.get)
            new_names = tuple(names[i] for i in inv)
        return cls(c_ends, c_walks, new_names)

    @classmethod
    def from_vertex_walks(cls, walks: Sequence[Sequence]) -> "Diagram":
        """Reduce closed walks on a simple graph to their diagram.

        Every vertex pair used is an edge that must be traversed exactly
        twice in total; the start vertex of each walk must have degree one.
        Unmarked vertices of degree two are contracted.
        """
        walks = [tuple(w) for w in walks]
        mult: dict[frozenset, int] = {}
        nbrs: dict = {}
        for w in walks:
            if len(w) < 2 or w[0] != w[-1]:
                raise DiagramError(f"walk {w} is not closed")
            for a, b in zip(w[:-1], w[1:]):
                if a == b:
                    raise DiagramError("vertex walks may not contain loops")
                key = frozenset((a, b))
                mult[key] = mult.get(key, 0) + 1
                nbrs.setdefault(a, set()).add(b)
                nbrs.setdefault(b, set()).add(a)
        if any(m != 2 for m in mult.values()):
            raise DiagramError("every edge must be traversed exactly twice")
        starts = {w[0] for w in walks}
        if len(starts) != len(walks):
            raise DiagramError("walks must start at distinct vertices")
        for x in starts:
            if len(nbrs[x]) != 1:
                raise DiagramError(f"start vertex {x} does not have degree one")
        branch = {x for x, nb in nbrs.items() if x in starts or len(nb) != 2}
        chains: dict[tuple, int] = {}
        ends: list[tuple] = []
        out = []
        for w in walks:
            row = []
            i = 0
            while i < len(w) - 1:
                j = i + 1
                while w[j] not in branch:
                    j += 1
                seg = w[i : j + 1]
                canon = min(seg, seg[::-1])
                if canon not in chains:
                    chains[canon] = len(ends)
                    ends.append((canon[0], canon[-1]))
                row.append((chains[canon], seg == canon))
                i = j
            out.append(row)
        return cls.from_edge_walks(ends, out)

    # -------------------------------------------------------------- validation

    def problems(self) -> list[str]:
        out = []
        ends, walks = self.ends, self.walks
        if not walks:
            return ["no walks"]
        count = [0] * len(ends)
        for r, w in enumerate(walks):
            if not w:
                out.append(f"walk {r} is empty")
                continue
            prev = None
            for e, fwd in w:
                if not 0 <= e < len(ends):
                    out.append(f"walk {r} uses unknown edge {e}")
                    return out
                count[e] += 1
                a, b = ends[e] if fwd else ends[e][::-1]
                if prev is not None:
                    pe, pf = prev
                    arrive = ends[pe][1] if pf else ends[pe][0]
                    if arrive != a:
                        out.append(f"walk {r} is not connected at edge {e}")
                    if pe == e and pf != fwd:
                        out.append(f"walk {r} backtracks along edge {e}")
                prev = (e, fwd)
            first = ends[w[0][0]][0] if w[0][1] else ends[w[0][0]][1]
            last = ends[w[-1][0]][1] if w[-1][1] else ends[w[-1][0]][0]
            if first != last:
                out.append(f"walk {r} is not closed")
        if any(c != 2 for c in count):
            out.append("every edge must be traversed exactly twice")
        deg = self.degrees
        starts = self.start_vertices
        if len(set(starts)) != len(starts):
            out.append("walks share a start vertex")
        for x, d in enumerate(deg):
            if x in starts:
                if d != 1:
                    out.append(f"start vertex {x} has degree {d}")
            elif d != 3:
                out.append(f"vertex {x} has degree {d}")
        return out

    # -------------------------------------------------------------- invariants

    @property
    def k(self) -> int:
        return len(self.walks)

    @property
    def n_edges(self) -> int:
        return len(self.ends)

    @property
    def n_vertices(self) -> int:
        return 1 + max(max(u, v) for u, v in self.ends)

    @property
    def s(self) -> int:
        return self.k + self.n_edges - self.n_vertices

    @property
    def euler_characteristic(self) -> int:
        """``V - E + k``: the glued surface has one face per disk."""
        return self.n_vertices - self.n_edges + self.k

    @property
    def degrees(self) -> list[int]:
        deg = [0] * (1 + max(max(u, v) for u, v in self.ends))
        for u, v in self.ends:
            deg[u] += 1
            deg[v] += 1
        return deg

    @property
    def start_vertices(self) -> tuple[int, ...]:
        out = []
        for w in self.walks:
            e, f = w[0]
            out.append(self.ends[e][0] if f else self.ends[e][1])
        return tuple(out)

    @cached_property
    def c(self) -> tuple[tuple[int, ...], ...]:
        """``c[r][e]``: number of traversals of edge ``e`` by walk ``r``."""
        table = [[0] * self.n_edges for _ in range(self.k)]
        for r, w in enumerate(self.walks):
            for e, _ in w:
                table[r][e] += 1
        return tuple(tuple(row) for row in table)

    def traversals(self, e: int) -> list[tuple[int, bool]]:
        """``(walk, forward)`` for both traversals of edge ``e``."""
        return [(r, f) for r, w in enumerate(self.walks) for x, f in w if x == e]

    @property
    def orientable(self) -> bool:
        """Every edge is traversed once in each direction."""
        for e in range(self.n_edges):
            (_, f1), (_, f2) = self.traversals(e)
            if f1 == f2:
                return False
        return True

    @property
    def connected(self) -> bool:
        parent = list(range(self.n_vertices))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for u, v in self.ends:
            parent[find(u)] = find(v)
        return len({find(x) for x in range(self.n_vertices)}) == 1

    @property
    def key(self) -> tuple:
        return (self.ends, self.walks)

    def vertex_sequence(self, r: int) -> tuple[int, ...]:
        w = self.walks[r]
        seq = [self.start_vertices[r]]
        for e, f in w:
            seq.append(self.ends[e][1] if f else self.ends[e][0])
        return tuple(seq)

    # -------------------------------------------------------------- symmetries

    def transformed(self, reverse: Sequence[bool], order: Sequence[int]) -> "Diagram":
        walks = [_reverse(self.walks[i]) if reverse[i] else self.walks[i] for i in order]
        return Diagram.from_edge_walks(self.ends, walks)

    def orbit(self, reversal: bool = True, permutation: bool = True) -> list["Diagram"]:
        revs = itertools.product((False, True), repeat=self.k) if reversal else [(False,) * self.k]
        revs = list(revs)
        orders = itertools.permutations(range(self.k)) if permutation else [tuple(range(self.k))]
        return [self.transformed(rv, od) for od in orders for rv in revs]

    def class_key(self, reversal: bool = True, permutation: bool = True) -> tuple:
        return min(d.key for d in self.orbit(reversal, permutation))

    def orientable_up_to_reversal(self) -> bool:
        return any(d.orientable for d in self.orbit(True, False))

    def __str__(self) -> str:
        return _format_diagram(self)


# ------------------------------------------------------------------ enumeration


def _generate(k: int, s_max: int) -> list[tuple]:
    """Depth-first generation of canonical diagrams with ``s <= s_max``.

    Vertices and edges are created in order of first appearance, so every
    class is produced exactly once, already in canonical form.
    """
    e_max = 3 * s_max - k
    v_max = 2 * s_max
    out = []
    deg: list[int] = []
    leaf: list[bool] = []
    ends: list[list[int]] = []
    cnt: list[int] = []
    walks: list[list[Step]] = []

    def finish():
        if any(not leaf[x] and deg[x] != 3 for x in range(len(deg))):
            return
        if any(c != 2 for c in cnt):
            return
        out.append((tuple(tuple(x) for x in ends), tuple(tuple(w) for w in walks)))

    def add_edge(x, y):
        ends.append([x, y])
        cnt.append(1)
        walks[-1].append((len(ends) - 1, True))

    def drop_edge():
        walks[-1].pop()
        ends.pop()
        cnt.pop()

    def start_walk(r):
        if r == k:
            finish()
            return
        home = len(deg)
        if home + 1 > v_max or len(ends) + 1 > e_max:
            return
        deg.append(1)
        leaf.append(True)
        walks.append([])
        for y in [None] + [y for y in range(home) if not leaf[y] and deg[y] < 3]:
            if y is None:
                if len(deg) + 1 > v_max:
                    continue
                deg.append(1)
                leaf.append(False)
                yy = len(deg) - 1
            else:
                deg[y] += 1
                yy = y
            add_edge(home, yy)
            step(r, home, yy, len(ends) - 1, True)
            drop_edge()
            if y is None:
                deg.pop()
                leaf.pop()
            else:
                deg[y] -= 1
        walks.pop()
        deg.pop()
        leaf.pop()

    def step(r, home, x, e_in, fwd_in):
        if x == home:
            start_walk(r + 1)
            return
        # second traversal of an edge used once so far
        for e in range(len(ends)):
            if cnt[e] != 1:
                continue
            for fwd in (True, False):
                if ends[e][0 if fwd else 1] != x:
                    continue
                if e == e_in and fwd != fwd_in:
                    continue
                cnt[e] = 2
                walks[r].append((e, fwd))
                step(r, home, ends[e][1 if fwd else 0], e, fwd)
                walks[r].pop()
                cnt[e] = 1
        if len(ends) >= e_max or deg[x] >= 3:
            return
        # new edge to a new vertex
        if len(deg) < v_max:
            deg[x] += 1
            deg.append(1)
            leaf.append(False)
            add_edge(x, len(deg) - 1)
            step(r, home, len(deg) - 1, len(ends) - 1, True)
            drop_edge()
            deg.pop()
            leaf.pop()
            deg[x] -= 1
        # new edge to an existing vertex, loops included
        for y in range(len(deg)):
            if leaf[y]:
                continue
            if y == x:
                if deg[x] > 1:
                    continue
                deg[x] += 2
            else:
                if deg[y] >= 3:
                    continue
                deg[x] += 1
                deg[y] += 1
            add_edge(x, y)
            step(r, home, y, len(ends) - 1, True)
            drop_edge()
            if y == x:
                deg[x] -= 2
            else:
                deg[x] -= 1
                deg[y] -= 1

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10_000))
    try:
        start_walk(0)
    finally:
        sys.setrecursionlimit(limit)
    return out


def _check_regime(k: int, s_max: int) -> None:
    if k not in SUPPORTED_K:
        raise DiagramError(f"k must be one of {SUPPORTED_K}, got {k}")
    if not 1 <= s_max <= MAX_S:
        raise DiagramError(f"s_max must be in 1..{MAX_S}, got {s_max}")


@lru_cache(maxsize=None)
def _catalog(k: int, s_max: int) -> tuple[Diagram, ...]:
    ds = [Diagram(e, w) for e, w in _generate(k, s_max)]
    ds.sort(key=lambda d: d.s)
    return tuple(ds)


def enumerate_diagrams(
    k: int,
    s_max: int,
    modulo_reversal: bool = False,
    modulo_permutation: bool = False,
) -> list[Diagram]:
    """All ``k``-diagrams with ``1 <= s <= s_max``, ordered by ``s``.

    With the default flags walks are labelled and directed.  Passing
    ``modulo_reversal`` or ``modulo_permutation`` keeps one representative
    per orbit (an orientable one when the orbit has one).
    """
    _check_regime(k, s_max)
    cat = _catalog(k, s_max)
    if not (modulo_reversal or modulo_permutation):
        return list(cat)
    seen: dict[tuple, Diagram] = {}
    for d in cat:
        ck = d.class_key(modulo_reversal, modulo_permutation)
        best = seen.get(ck)
        if best is None or (d.orientable and not best.orientable):
            seen[ck] = d
    return sorted(seen.values(), key=lambda d: (d.s, d.key))


# ------------------------------------------------------------------ polytopes and series


def diagram_polytope(d: Diagram, alpha: Sequence) -> Polytope:
    """``{w >= 0 : sum_e c_r(e) w(e) = alpha_r}`` for the diagram."""
    alpha = tuple(alpha)
    if len(alpha) != d.k:
        raise ValueError(f"need {d.k} alpha values, got {len(alpha)}")
    if any(not a > 0 for a in alpha):
        raise ValueError("alpha must be positive")
    return Polytope(d.c, alpha, d.edge_names)


@dataclass(frozen=True)
class PointConfig:
    points: np.ndarray
    p: float = 2.0

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] < 1:
            raise ValueError("points must be a k x d array with d >= 1")
        if not 1.0 <= self.p <= 2.0:
            raise ValueError("p must lie in [1, 2]")
        object.__setattr__(self, "points", pts)

    @property
    def k(self) -> int:
        return self.points.shape[0]

    def distance(self, q: int, r: int) -> float:
        return float(np.sum(np.abs(self.points[q] - self.points[r]) ** self.p) ** (1.0 / self.p))

    def permuted(self, order: Sequence[int]) -> "PointConfig":
        return PointConfig(self.points[list(order)], self.p)


def edge_rates(d: Diagram, points: PointConfig) -> np.ndarray:
    """``|x_{r+(e)} - x_{r-(e)}|_p`` for every edge; zero on single-walk edges."""
    out = np.zeros(d.n_edges)
    for e in range(d.n_edges):
        (r1, _), (r2, _) = d.traversals(e)
        if r1 != r2:
            out[e] = points.distance(r1, r2)
    return out


@dataclass(frozen=True)
class ADSeries:
    value: float
    per_s: dict
    partial_sums: dict
    counts: dict


def ad_transform_series(
    k: int,
    points: PointConfig,
    alpha: Sequence,
    beta: int,
    s_max: int,
) -> ADSeries:
    """Truncated series over diagrams with ``s <= s_max``.

    ``beta = 1`` sums over all diagrams, ``beta = 2`` over the orientable
    ones.  Per-``s`` terms and partial sums are returned so the
    truncation is visible.
    """
    if beta not in (1, 2):
        raise ValueError("beta must be 1 or 2")
    if points.k != k:
        raise ValueError(f"need {k} points, got {points.k}")
    per_s: dict[int, float] = {}
    counts: dict[int, int] = {}
    for d in enumerate_diagrams(k, s_max):
        if beta == 2 and not d.orientable:
            continue
        val = exp_linear_integral(diagram_polytope(d, alpha), edge_rates(d, points))
        per_s.setdefault(d.s, []).append(val)
        counts[d.s] = counts.get(d.s, 0) + 1
    terms = {s: math.fsum(v) for s, v in sorted(per_s.items())}
    partial = {}
    acc = []
    for s in range(1, s_max + 1):
        acc.append(terms.get(s, 0.0))
        partial[s] = math.fsum(acc)
    return ADSeries(partial[s_max], {s: terms.get(s, 0.0) for s in range(1, s_max + 1)}, partial, counts)


def volume_sum(k: int, alpha: Sequence, beta: int, s_max: int) -> Fraction:
    """Exact sum of polytope volumes over the same diagrams as the series."""
    total = Fraction(0)
    for d in enumerate_diagrams(k, s_max):
        if beta == 2 and not d.orientable:
            continue
        total += polytope_volume(diagram_polytope(d, alpha))
    return total


@dataclass(frozen=True)
class CountRow:
    s: int
    labelled: int
    orientable: int
    classes: int
    c_min: float


def _c_min(k: int, s: int, count: int) -> float:
    """Smallest ``C`` with ``(s/C)^a <= (k-1)! D <= (C s)^a``, ``a = s + k - 1``."""
    if count <= 0:
        return math.inf
    a = s + k - 1
    root = (math.factorial(k - 1) * count) ** (1.0 / a)
    return max(s / root, root / s)


def diagram_count_report(k: int, s_max: int) -> list[CountRow]:
    """Exact counts per ``s`` and the smallest constant compatible with the two-sided bound.

    ``labelled`` is the default convention (walks labelled and directed),
    ``classes`` the count modulo walk reversal and permutation.  ``c_min``
    refers to the labelled count.
    """
    _check_regime(k, s_max)
    cat = enumerate_diagrams(k, s_max)
    rows = []
    for s in range(1, s_max + 1):
        ds = [d for d in cat if d.s == s]
        classes = len({d.class_key() for d in ds})
        n = len(ds)
        rows.append(CountRow(s, n, sum(d.orientable for d in ds), classes, _c_min(k, s, n)))
    return rows


# ------------------------------------------------------------------ catalog text format


def _format_diagram(d: Diagram) -> str:
    parts = [f"k={d.k} s={d.s} V={d.n_vertices} E={d.n_edges} orientable={int(d.orientable)} connected={int(d.connected)}"]
    for r, w in enumerate(d.walks):
        seq = d.vertex_sequence(r)
        toks = [str(seq[0])]
        for (e, f), x in zip(w, seq[1:]):
            toks.append(f"e{e}{'+' if f else '-'}")
            toks.append(str(x))
        parts.append(" ".join(toks))
    return " | ".join(parts)


def format_catalog(diagrams: Iterable[Diagram]) -> str:
    """One diagram per line: invariants, then each walk as alternating vertices and oriented edges."""
    return "".join(_format_diagram(d) + "\n" for d in diagrams)


def parse_catalog(text: str) -> list[Diagram]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        head, *walk_parts = [p.strip() for p in line.split("|")]
        ends: dict[int, tuple[int, int]] = {}
        walks = []
        for part in walk_parts:
            toks = part.split()
            row = []
            for i in range(1, len(toks), 2):
                a, b = int(toks[i - 1]), int(toks[i + 1])
                e, f = int(toks[i][1:-1]), toks[i][-1] == "+"
                ends.setdefault(e, (a, b) if f else (b, a))
                row.append((e, f))
            walks.append(row)
        d = Diagram(tuple(ends[e] for e in range(len(ends))), tuple(tuple(w) for w in walks))
        declared = dict(kv.split("=") for kv in head.split())
        if int(declared["s"]) != d.s or int(declared["k"]) != d.k:
            raise DiagramError(f"invariants in {head!r} do not match the walks")
        out.append(d)
    return out
