"""Simple undirected graphs: construction, ingestion, geodesic balls and growth.

Vertices are always the dense integers ``0..N-1``.  Adjacency is stored as a
symmetric CSR matrix with sorted column indices so that every downstream
sparse product accumulates in ascending vertex order.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.spatial import cKDTree

from .exceptions import InvariantViolation, ParseError, RetriesExhausted

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION = 2.0


@dataclass(frozen=True, eq=False)
class Graph:
    """Connected simple graph with precomputed degrees.

    Parameters
    ----------
    adjacency : scipy.sparse.csr_matrix
        Symmetric 0/1 matrix without diagonal.
    coords : ndarray of shape (N, 2), optional
        Vertex positions, kept for geometric graphs.
    labels : list, optional
        Original vertex labels when the graph was read from a file.
    seed : int, optional
        Seed that actually produced the graph (after connectivity retries).
    """

    adjacency: sp.csr_matrix
    coords: np.ndarray | None = None
    labels: list | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        adj = sp.csr_matrix(self.adjacency, dtype=float)
        adj.sum_duplicates()
        adj.sort_indices()
        if adj.shape[0] != adj.shape[1]:
            raise InvariantViolation("adjacency must be square")
        if adj.diagonal().any():
            raise InvariantViolation("self-loops are not allowed")
        if (adj != adj.T).nnz:
            raise InvariantViolation("adjacency must be symmetric")
        adj.data[:] = 1.0
        object.__setattr__(self, "adjacency", adj)
        deg = np.diff(adj.indptr)
        if adj.shape[0] == 0:
            raise InvariantViolation("graph has no vertices")
        if (deg == 0).any():
            raise InvariantViolation(
                f"isolated vertices: {np.flatnonzero(deg == 0)[:10].tolist()}")
        n_comp, _ = connected_components(adj, directed=False)
        if n_comp != 1:
            raise InvariantViolation(f"graph is disconnected ({n_comp} components)")
        object.__setattr__(self, "degrees", deg.astype(np.int64))
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            if c.shape != (adj.shape[0], 2):
                raise InvariantViolation("coords must have shape (N, 2)")
            object.__setattr__(self, "coords", c)

    @property
    def n_vertices(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2

    def edges(self) -> np.ndarray:
        """Edges as an (E, 2) array with ``u < v``, sorted lexicographically."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return np.column_stack([upper.row[order], upper.col[order]]).astype(np.int64)

    def sqrt_degrees(self) -> np.ndarray:
        """The normalized constant signal ``D^{1/2} 1``."""
        return np.sqrt(self.degrees.astype(float))

    def distances(self, source: int, max_depth: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Breadth-first search from ``source``.

        Returns ``(vertices, dist)`` for every vertex within ``max_depth`` hops,
        sorted by ascending vertex id.
        """
        n = self.n_vertices
        if not 0 <= source < n:
            raise IndexError(f"vertex {source} out of range for N={n}")
        indptr, indices = self.adjacency.indptr, self.adjacency.indices
        dist = np.full(n, -1, dtype=np.int64)
        dist[source] = 0
        frontier = np.array([source])
        depth = 0
        while frontier.size and (max_depth is None or depth < max_depth):
            depth += 1
            starts, stops = indptr[frontier], indptr[frontier + 1]
            nbrs = np.concatenate([indices[a:b] for a, b in zip(starts, stops)])
            nbrs = np.unique(nbrs)
            nbrs = nbrs[dist[nbrs] < 0]
            dist[nbrs] = depth
            frontier = nbrs
        members = np.flatnonzero(dist >= 0)
        return members, dist[members]

    def all_pairs_distances(self) -> np.ndarray:
        """Dense hop-distance matrix (intended for small graphs)."""
        d = shortest_path(self.adjacency, method="D", unweighted=True, directed=False)
        return d.astype(np.int64)

    def diameter(self) -> int:
        return int(self.all_pairs_distances().max())


@dataclass(frozen=True)
class NeighborhoodIndex:
    source: int
    radius: int
    members: np.ndarray

    def __len__(self):
        return len(self.members)

    def __contains__(self, v):
        i = np.searchsorted(self.members, v)
        return i < len(self.members) and self.members[i] == v


@dataclass(frozen=True)
class GrowthProfile:
    """Polynomial growth constants: ``mu(B(i, r)) <= density * (r + 1)**dimension``."""

    dimension: float
    density: float
    max_radius: int | None = None

    def ball_bound(self, r: float) -> float:
        return self.density * (r + 1) ** self.dimension


def geodesic_ball(g: Graph, i: int, r: int) -> NeighborhoodIndex:
    """All vertices within ``r`` hops of ``i``, in ascending id order."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    members, _ = g.distances(i, max_depth=r)
    return NeighborhoodIndex(source=i, radius=r, members=members)


def ball_sizes(g: Graph, max_radius: int | None = None, chunk: int = 512) -> np.ndarray:
    """Matrix ``S[i, r] = mu(B(i, r))`` for ``0 <= r <= max_radius``.

    With ``max_radius=None`` the columns run up to the graph diameter.
    """
    n = g.n_vertices
    cap = n if max_radius is None else max_radius
    sizes = np.zeros((n, cap + 1), dtype=np.int64)
    reach = 0
    for start in range(0, n, chunk):
        idx = np.arange(start, min(n, start + chunk))
        d = shortest_path(g.adjacency, method="D", unweighted=True,
                          directed=False, indices=idx)
        d = np.minimum(d, cap + 1).astype(np.int64)
        reach = max(reach, int(d.max()))
        for row, di in zip(idx, d):
            sizes[row] = np.cumsum(np.bincount(di, minlength=cap + 2)[: cap + 1])
    if max_radius is None:
        sizes = sizes[:, : reach + 1]
    return sizes


def estimate_growth(g: Graph, max_radius: int | None = None,
                    dimension: float = DEFAULT_DIMENSION) -> GrowthProfile:
    """Smallest density compatible with a fixed Beurling dimension.

    The density is the maximum of ``mu(B(i, r)) / (r + 1)**dimension`` over
    all vertices and ``0 <= r <= max_radius``.  ``max_radius=None`` probes
    every radius up to the diameter, so the profile holds for all radii.
    """
    if max_radius is not None and max_radius < 1:
        raise ValueError("max_radius must be at least 1")
    sizes = ball_sizes(g, max_radius)
    radii = np.arange(sizes.shape[1], dtype=float)
    density = float((sizes / (radii + 1.0) ** dimension).max())
    return GrowthProfile(dimension=float(dimension), density=density,
                         max_radius=sizes.shape[1] - 1)


# --- construction ---------------------------------------------------------

def _rgg_adjacency(coords: np.ndarray) -> sp.csr_matrix:
    n = len(coords)
    radius = math.sqrt(2.0) / math.sqrt(n)
    pairs = cKDTree(coords).query_pairs(radius, output_type="ndarray")
    if len(pairs) == 0:
        return sp.csr_matrix((n, n))
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


def generate_rgg(n_vertices: int, seed: int, *, connect: str = "retry",
                 max_retries: int = 1000) -> Graph:
    """Random geometric graph on the unit square.

    Points are uniform in ``[0, 1]^2`` and joined when their Euclidean
    distance is at most ``sqrt(2 / N)``.

    ``connect`` chooses how a disconnected draw is handled:

    ``"retry"``
        redraw everything with ``seed + 1, seed + 2, ...``; the seed that
        finally worked is stored on the graph.
    ``"resample"``
        keep the seed and redraw only the vertices outside the largest
        component until the graph is connected.  At this edge radius a graph
        with a few thousand vertices is almost never connected, so this is
        the practical choice for large ``N``.
    """
    if n_vertices < 2:
        raise ValueError("n_vertices must be at least 2")
    if connect not in ("retry", "resample"):
        raise ValueError(f"unknown connect strategy {connect!r}")

    if connect == "retry":
        for attempt in range(max_retries + 1):
            s = seed + attempt
            coords = np.random.default_rng(s).random((n_vertices, 2))
            adj = _rgg_adjacency(coords)
            if connected_components(adj, directed=False)[0] == 1:
                if attempt:
                    logger.info("rgg: seed %d disconnected, used seed %d", seed, s)
                return Graph(adj, coords=coords, seed=s,
                             meta={"requested_seed": seed, "connect": "retry"})
        raise RetriesExhausted(
            f"no connected RGG_{n_vertices} within {max_retries} retries from seed {seed}")

    rng = np.random.default_rng(seed)
    coords = rng.random((n_vertices, 2))
    for rounds in range(max_retries + 1):
        adj = _rgg_adjacency(coords)
        n_comp, lab = connected_components(adj, directed=False)
        if n_comp == 1:
            logger.info("rgg: connected after %d resampling rounds", rounds)
            return Graph(adj, coords=coords, seed=seed,
                         meta={"requested_seed": seed, "connect": "resample",
                               "resample_rounds": rounds})
        giant = np.argmax(np.bincount(lab))
        stray = np.flatnonzero(lab != giant)
        coords[stray] = rng.random((len(stray), 2))
    raise RetriesExhausted(
        f"RGG_{n_vertices} still disconnected after {max_retries} resampling rounds")


def from_edges(edges, n_vertices: int | None = None, **kwargs) -> Graph:
    """Graph from an iterable of ``(u, v)`` integer pairs (duplicates allowed)."""
    e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if (e[:, 0] == e[:, 1]).any():
        raise InvariantViolation("self-loop in edge list")
    n = int(e.max()) + 1 if n_vertices is None else n_vertices
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    adj.sum_duplicates()
    adj.data[:] = 1.0
    return Graph(adj, **kwargs)


def path_graph(n: int) -> Graph:
    return from_edges([(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return from_edges([(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return from_edges([(i, j) for i in range(n) for j in range(i + 1, n)])


def _label_key(label: str):
    try:
        return (0, int(label), label)
    except ValueError:
        return (1, 0, label)


def load_edge_list(path) -> Graph:
    """Read a ``u v`` edge list; ``#`` starts a comment.

    Labels may be arbitrary tokens.  They are mapped to dense ids in natural
    order (integers numerically, so a file already using ``0..N-1`` keeps its
    ids); the original labels are kept on ``graph.labels``.
    """
    pairs = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected 'u v', got {raw.rstrip()!r}")
            if parts[0] == parts[1]:
                raise InvariantViolation(f"{path}:{lineno}: self-loop at {parts[0]}")
            pairs.append((parts[0], parts[1]))
    if not pairs:
        raise ParseError(f"{path}: no edges")
    labels = sorted({v for p in pairs for v in p}, key=_label_key)
    index = {lab: i for i, lab in enumerate(labels)}
    edges = [(index[u], index[v]) for u, v in pairs]
    return from_edges(edges, n_vertices=len(labels), labels=labels)


def write_edge_list(g: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# N={g.n_vertices} E={g.n_edges}")
        if g.seed is not None:
            fh.write(f" seed={g.seed}")
        fh.write("\n")
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")


def write_coordinates(g: Graph, path) -> None:
    if g.coords is None:
        raise ValueError("graph has no coordinates")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "x", "y"])
        for i, (x, y) in enumerate(g.coords):
            w.writerow([i, repr(float(x)), repr(float(y))])


def read_coordinates(path, n_vertices: int) -> np.ndarray:
    coords = np.full((n_vertices, 2), np.nan)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            coords[int(row["vertex"])] = float(row["x"]), float(row["y"])
    if np.isnan(coords).any():
        raise ParseError(f"{path}: coordinates missing for some vertices")
    return coords


def coordinates_path(edges_path) -> Path:
    """Conventional sidecar location: ``g.edges`` -> ``g.coords.csv``."""
    p = Path(edges_path)
    return p.with_suffix(".coords.csv")


def load_graph(path, coords_path=None) -> Graph:
    """Edge list plus the coordinate sidecar when one exists."""
    g = load_edge_list(path)
    cpath = Path(coords_path) if coords_path else coordinates_path(path)
    if cpath.exists():
        try:
            order = [int(lab) for lab in g.labels]
        except ValueError:
            raise ParseError("coordinate sidecar needs integer vertex labels") from None
        # sidecar rows are keyed by the label as written in the edge file
        coords = read_coordinates(cpath, max(order) + 1)[order]
        g = Graph(g.adjacency, coords=coords, labels=g.labels, seed=g.seed)
    return g
