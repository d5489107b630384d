"""Graphs, entry distributions and sampled Hermitian matrices.

A random matrix here is always attached to a regular graph ``G = (V, E)``:
off-diagonal entries live on the edges, the diagonal is sampled
separately, and everything else is exactly zero.  Three graph families are
provided -- the complete graph, the periodic band graph
``1 <= ||u - v||_N <= W`` and an explicit adjacency list -- which is enough
for Wigner matrices, random band matrices and hand-made test graphs.

Vertices are labelled ``0 .. N-1``.

Sampling is reproducible entry by entry: the off-diagonal value at
``(u, v)``, ``u < v``, is the ``v``-th draw of a Philox stream keyed by
``(seed, u)``, so it is a function of ``(seed, u, v)`` only.  In particular a
band matrix and a Wigner matrix sampled with the same seed agree on the
band.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from . import _rng

__all__ = [
    "ConfigError",
    "DistributionKind",
    "EntryDistribution",
    "GraphError",
    "GraphKind",
    "GraphSpec",
    "HermitianMatrix",
    "Target",
    "Truncation",
    "band",
    "build_graph",
    "complete",
    "ensemble_from_config",
    "explicit",
    "parse_config",
    "periodic_distance",
    "sample_matrix",
    "truncate_matrix",
    "write_matrix_csv",
]


class GraphError(ValueError):
    """Invalid graph parameters or an irregular explicit graph."""


class ConfigError(ValueError):
    """Malformed key-value configuration."""


class GraphKind(str, enum.Enum):
    COMPLETE = "complete"
    BAND = "band"
    EXPLICIT = "explicit"


def periodic_distance(u, v, n: int):
    """``||u - v||_N = min_l |u - v - l N|`` (works on arrays)."""
    d = np.abs(np.asarray(u) - np.asarray(v)) % n
    return np.minimum(d, n - d)


@dataclass(frozen=True)
class GraphSpec:
    """A regular graph on ``n`` vertices.

    Use :func:`complete`, :func:`band` or :func:`explicit` rather than the
    constructor; they validate.
    """

    kind: GraphKind
    n: int
    w: int | None = None
    neighbours: tuple[frozenset[int], ...] | None = field(default=None, repr=False)

    @property
    def vertex_count(self) -> int:
        return self.n

    @property
    def degree(self) -> int:
        """Connectivity ``kappa``."""
        if self.kind is GraphKind.COMPLETE:
            return self.n - 1
        if self.kind is GraphKind.BAND:
            return 2 * self.w
        return len(self.neighbours[0]) if self.n else 0

    kappa = degree

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Dense boolean adjacency (zero diagonal); O(1) pair queries."""
        n = self.n
        if self.kind is GraphKind.COMPLETE:
            a = ~np.eye(n, dtype=bool)
        elif self.kind is GraphKind.BAND:
            idx = np.arange(n)
            d = periodic_distance(idx[:, None], idx[None, :], n)
            a = (d >= 1) & (d <= self.w)
        else:
            a = np.zeros((n, n), dtype=bool)
            for u, nb in enumerate(self.neighbours):
                a[u, list(nb)] = True
        a.setflags(write=False)
        return a

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adjacency[u, v])

    def neighbours_of(self, u: int) -> tuple[int, ...]:
        if self.neighbours is not None:
            return tuple(sorted(self.neighbours[u]))
        return tuple(int(v) for v in np.flatnonzero(self.adjacency[u]))

    @cached_property
    def neighbour_lists(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self.neighbours_of(u) for u in range(self.n))

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges ``(u, v)`` with ``u < v``, lexicographic."""
        iu, iv = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(iu.tolist(), iv.tolist()))

    @property
    def edge_count(self) -> int:
        return self.n * self.degree // 2

    def relabel(self, perm: Sequence[int]) -> "GraphSpec":
        """Explicit copy with vertex ``u`` renamed ``perm[u]``."""
        nb: list[list[int]] = [[] for _ in range(self.n)]
        for u in range(self.n):
            nb[perm[u]] = [perm[v] for v in self.neighbours_of(u)]
        return explicit(nb)


def complete(n: int) -> GraphSpec:
    return build_graph(GraphSpec(GraphKind.COMPLETE, n))


def band(n: int, w: int) -> GraphSpec:
    return build_graph(GraphSpec(GraphKind.BAND, n, w))


def explicit(adjacency: Sequence[Iterable[int]]) -> GraphSpec:
    nb = tuple(frozenset(int(v) for v in row) for row in adjacency)
    return build_graph(GraphSpec(GraphKind.EXPLICIT, len(nb), None, nb))


def build_graph(spec: GraphSpec) -> GraphSpec:
    """Validate ``spec`` and return it.

    Raises
    ------
    GraphError
        Non-positive sizes, ``2W >= N`` for a band graph (the wrap-around
        would identify ``u + W`` with ``u - W``), or an explicit adjacency
        that is asymmetric, has loops, or is not regular.
    """
    if spec.n < 1:
        raise GraphError(f"vertex count must be positive, got {spec.n}")
    if spec.kind is GraphKind.COMPLETE:
        if spec.n < 2:
            raise GraphError("complete graph needs at least 2 vertices")
    elif spec.kind is GraphKind.BAND:
        if spec.w is None or spec.w < 1:
            raise GraphError(f"band width must be positive, got {spec.w}")
        if 2 * spec.w >= spec.n:
            raise GraphError(f"band width too large: 2W = {2 * spec.w} >= N = {spec.n}")
    elif spec.kind is GraphKind.EXPLICIT:
        nb = spec.neighbours
        if nb is None or len(nb) != spec.n:
            raise GraphError("explicit graph needs one neighbour set per vertex")
        for u, row in enumerate(nb):
            if u in row:
                raise GraphError(f"self-loop at vertex {u}")
            for v in row:
                if not 0 <= v < spec.n:
                    raise GraphError(f"vertex {v} out of range")
                if u not in nb[v]:
                    raise GraphError(f"asymmetric adjacency: {u}->{v} without {v}->{u}")
        degrees = {len(row) for row in nb}
        if len(degrees) != 1:
            raise GraphError(f"irregular graph: degrees {sorted(degrees)}")
        if degrees == {0}:
            raise GraphError("graph has no edges")
    else:  # pragma: no cover
        raise GraphError(f"unknown graph kind {spec.kind!r}")
    return spec


class DistributionKind(str, enum.Enum):
    RADEMACHER = "rademacher"
    REAL_GAUSSIAN = "real_gaussian"
    COMPLEX_UNIMODULAR = "complex_unimodular"
    COMPLEX_GAUSSIAN = "complex_gaussian"
    ZERO = "zero"


class Target(str, enum.Enum):
    DIAGONAL = "diagonal"
    OFF_DIAGONAL = "offdiagonal"


_COMPLEX = {DistributionKind.COMPLEX_UNIMODULAR, DistributionKind.COMPLEX_GAUSSIAN}
_UNIMODULAR = {DistributionKind.RADEMACHER, DistributionKind.COMPLEX_UNIMODULAR}


@dataclass(frozen=True)
class EntryDistribution:
    """Law of the diagonal or of the off-diagonal entries.

    Off-diagonal laws are centred with ``E|h|^2 = 1``; diagonal laws are
    real and centred.  ``ZERO`` is diagonal-only and complex laws are
    off-diagonal-only.
    """

    kind: DistributionKind
    target: Target = Target.OFF_DIAGONAL

    def __post_init__(self):
        kind = DistributionKind(self.kind)
        target = Target(self.target)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "target", target)
        if target is Target.DIAGONAL and kind in _COMPLEX:
            raise ValueError(f"{kind.value} is not a valid diagonal law (diagonal must be real)")
        if target is Target.OFF_DIAGONAL and kind is DistributionKind.ZERO:
            raise ValueError("off-diagonal law must have unit variance; 'zero' is diagonal-only")

    @property
    def is_complex(self) -> bool:
        return self.kind in _COMPLEX

    @property
    def is_unimodular(self) -> bool:
        return self.kind in _UNIMODULAR

    @property
    def variance(self) -> float:
        return 0.0 if self.kind is DistributionKind.ZERO else 1.0

    def draw(self, gen: np.random.Generator, size: int) -> np.ndarray:
        k = self.kind
        if k is DistributionKind.ZERO:
            return np.zeros(size)
        if k is DistributionKind.RADEMACHER:
            return np.where(gen.random(size) < 0.5, -1.0, 1.0)
        if k is DistributionKind.REAL_GAUSSIAN:
            return gen.standard_normal(size)
        if k is DistributionKind.COMPLEX_UNIMODULAR:
            return np.exp(2j * np.pi * gen.random(size))
        z = gen.standard_normal((2, size)) * math.sqrt(0.5)
        return z[0] + 1j * z[1]


def _diag(kind) -> EntryDistribution:
    return EntryDistribution(kind, Target.DIAGONAL)


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """Dense Hermitian matrix on a graph.

    Build it with :meth:`from_upper` (or :func:`sample_matrix`); the lower
    triangle is always derived from the upper one, so ``H(v, u)`` is the
    conjugate of ``H(u, v)`` by construction.  The array is read-only.
    """

    data: np.ndarray
    graph: GraphSpec | None = None
    diag: EntryDistribution | None = None
    offdiag: EntryDistribution | None = None

    @classmethod
    def from_upper(cls, a: np.ndarray, graph: GraphSpec | None = None, diag=None, offdiag=None):
        a = np.asarray(a)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"square matrix expected, got shape {a.shape}")
        upper = np.triu(a, 1)
        d = np.real(np.diagonal(a))
        if np.iscomplexobj(a) and np.any(np.imag(upper) != 0):
            full = upper + upper.conj().T + np.diag(d).astype(complex)
        else:
            upper = np.real(upper)
            full = upper + upper.T + np.diag(d)
        full.setflags(write=False)
        return cls(full, graph, diag, offdiag)

    @classmethod
    def from_dense(cls, a: np.ndarray, graph: GraphSpec | None = None, atol: float = 0.0):
        """Wrap an already-Hermitian array, checking symmetry to ``atol``."""
        a = np.asarray(a)
        if not np.allclose(a, a.conj().T, rtol=0.0, atol=atol):
            raise ValueError("matrix is not Hermitian")
        return cls.from_upper(a, graph)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    dimension = n

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.data)

    def __getitem__(self, idx):
        return self.data[idx]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def support_ok(self) -> bool:
        """True when entries vanish off the edge set and the diagonal."""
        if self.graph is None:
            return True
        off = ~(self.graph.adjacency | np.eye(self.n, dtype=bool))
        return not np.any(self.data[off])

    def with_data(self, upper: np.ndarray) -> "HermitianMatrix":
        return HermitianMatrix.from_upper(upper, self.graph, self.diag, self.offdiag)


def sample_matrix(
    graph: GraphSpec,
    diag: EntryDistribution | DistributionKind | str,
    offdiag: EntryDistribution | DistributionKind | str,
    seed: int,
) -> HermitianMatrix:
    """Sample ``H`` with i.i.d. off-diagonal entries on the edges of ``graph``.

    Deterministic in ``seed``; entries off the graph are exactly zero.
    """
    if not isinstance(diag, EntryDistribution):
        diag = _diag(diag)
    if not isinstance(offdiag, EntryDistribution):
        offdiag = EntryDistribution(offdiag)
    if diag.target is not Target.DIAGONAL:
        raise ValueError("diagonal law must target the diagonal")
    if offdiag.target is not Target.OFF_DIAGONAL:
        raise ValueError("off-diagonal law must target the off-diagonal")
    n = graph.n
    dtype = complex if offdiag.is_complex else float
    rows = np.zeros((n, n), dtype=dtype)
    for u in range(n - 1):
        rows[u] = offdiag.draw(_rng.stream(seed, _rng.OFFDIAG_ROW, u), n)
    upper = np.triu(rows, 1)
    upper[~graph.adjacency] = 0
    d = diag.draw(_rng.stream(seed, _rng.DIAGONAL), n)
    upper[np.diag_indices(n)] = d
    return HermitianMatrix.from_upper(upper, graph, diag, offdiag)


@dataclass(frozen=True)
class Truncation:
    matrix: HermitianMatrix
    changed: int  # entries set to zero, both triangles counted; bounds rank(H - H_trunc)


def truncate_matrix(h: HermitianMatrix, threshold: float) -> Truncation:
    """Zero every entry with ``|H(u, v)| > threshold``."""
    if not threshold >= 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    a = h.data
    drop = np.abs(a) > threshold
    if not drop.any():
        return Truncation(h, 0)
    out = np.where(drop, 0, a)
    return Truncation(h.with_data(out), int(drop.sum()))


# ---------------------------------------------------------------- config / csv


def parse_config(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Errors carry the 1-based line number.
    """
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def ensemble_from_config(cfg: Mapping[str, str]) -> tuple[GraphSpec, EntryDistribution, EntryDistribution]:
    """Build ``(graph, diag, offdiag)`` from ``ensemble.*``, ``diag.kind``, ``offdiag.kind``."""
    try:
        kind = cfg.get("ensemble.kind", "complete").lower()
        n = int(cfg["ensemble.n"])
        if kind == "complete":
            g = complete(n)
        elif kind == "band":
            g = band(n, int(cfg["ensemble.w"]))
        else:
            raise ConfigError(f"unsupported ensemble.kind {kind!r}")
        d = _diag(cfg.get("diag.kind", "zero").lower())
        o = EntryDistribution(cfg.get("offdiag.kind", "rademacher").lower())
    except KeyError as exc:
        raise ConfigError(f"missing key {exc.args[0]!r}") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return g, d, o


def write_matrix_csv(h: HermitianMatrix, fh: TextIO | None = None) -> str | None:
    """Write nonzero entries as ``row,col,re,im``; returns text if no handle given."""
    own = fh is None
    buf = io.StringIO() if own else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "col", "re", "im"])
    rows, cols = np.nonzero(h.data)
    for r, c in zip(rows.tolist(), cols.tolist()):
        z = complex(h.data[r, c])
        w.writerow([r, c, repr(z.real), repr(z.imag)])
    return buf.getvalue() if own else None
