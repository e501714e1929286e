"""Spatial deployments: square windows, point sampling, and R-disk neighbor graphs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NoLinksError(RuntimeError):
    """Raised when an operation needs at least one neighbor pair and the graph has none."""


@dataclass(frozen=True)
class Window:
    """Square observation region [0, side]^2.

    ``boundary`` selects the distance metric: "open" is plain Euclidean
    distance, "torus" wraps coordinates so the region has no edges (which
    removes border bias in interference sums).
    """

    side: float
    boundary: str = "open"

    def __post_init__(self):
        if not (np.isfinite(self.side) and self.side > 0):
            raise ValueError(f"window side must be a positive number, got {self.side}")
        if self.boundary not in ("open", "torus"):
            raise ValueError(f"boundary must be 'open' or 'torus', got {self.boundary!r}")

    @property
    def area(self) -> float:
        return self.side * self.side


def torus_distance(a, b, side):
    """Wrap-around distance between points of the side x side torus.

    Accepts single points or arrays of points with a trailing axis of
    length 2.
    """
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    d = np.minimum(d, side - d)
    out = np.sqrt((d * d).sum(axis=-1))
    return float(out) if out.ndim == 0 else out


def pairwise_distances(points, window):
    """All-pairs distance matrix under the window's boundary metric."""
    pts = np.asarray(points, dtype=float)
    diff = np.abs(pts[:, None, :] - pts[None, :, :])
    if window.boundary == "torus":
        diff = np.minimum(diff, window.side - diff)
    return np.sqrt((diff * diff).sum(axis=-1))


def sample_ppp(intensity, window, rng):
    """Homogeneous Poisson point pattern: a Poisson(intensity * area) number
    of points placed i.i.d. uniformly in the window."""
    if not intensity > 0:
        raise ValueError(f"intensity must be positive, got {intensity}")
    count = int(rng.poisson(intensity * window.area))
    return rng.uniform(0.0, window.side, size=(count, 2))


def sample_binomial(n, window, rng):
    """Exactly n i.i.d. uniform points (the fixed-count deployment; needs n >= 2)."""
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    return rng.uniform(0.0, window.side, size=(int(n), 2))


@dataclass(frozen=True)
class Deployment:
    """Immutable point set plus its R-disk neighbor structure.

    Neighbor lists are stored in compressed form: the neighbors of node i
    are ``indices[indptr[i]:indptr[i+1]]``. ``entry_src`` repeats the source
    node for each directed entry, and ``entry_dist`` / ``entry_edge`` carry
    the link distance and the undirected edge id of that entry. ``edges``
    lists every unordered neighbor pair once (lower index first) with
    ``edge_dist`` aligned.
    """

    window: Window
    range_r: float
    positions: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    entry_src: np.ndarray
    entry_dist: np.ndarray
    entry_edge: np.ndarray
    edges: np.ndarray
    edge_dist: np.ndarray

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def neighbors(self, i):
        """Indices of the nodes within range of node i."""
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def mean_degree(self) -> float:
        return float(self.indices.size / self.n) if self.n else 0.0


def build_disk_graph(points, range_r, window):
    """Connect every pair of points within ``range_r`` (closed ball) under the
    window's boundary metric and return the resulting Deployment."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        pts = pts.reshape(0, 2)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    if not range_r > 0:
        raise ValueError(f"range must be positive, got {range_r}")
    if pts.size and (pts.min() < 0.0 or pts.max() > window.side):
        raise ValueError("points must lie inside the window")

    n = len(pts)
    if n:
        dist = pairwise_distances(pts, window)
        adj = dist <= range_r
        np.fill_diagonal(adj, False)
    else:
        dist = np.zeros((0, 0))
        adj = np.zeros((0, 0), dtype=bool)

    src, dst = np.nonzero(adj)
    indptr = np.zeros(n + 1, dtype=np.int64)
    if n:
        np.cumsum(adj.sum(axis=1), out=indptr[1:])

    ea, eb = np.nonzero(np.triu(adj, k=1))
    edges = np.stack([ea, eb], axis=1).astype(np.int64) if ea.size else np.zeros((0, 2), dtype=np.int64)
    edge_dist = dist[ea, eb] if ea.size else np.zeros(0)

    # undirected edge id per directed entry, via sorted (lo, hi) keys
    if src.size:
        lo = np.minimum(src, dst)
        hi = np.maximum(src, dst)
        entry_edge = np.searchsorted(ea * n + eb, lo * n + hi).astype(np.int64)
        entry_dist = dist[src, dst]
    else:
        entry_edge = np.zeros(0, dtype=np.int64)
        entry_dist = np.zeros(0)

    dep = Deployment(
        window=window,
        range_r=float(range_r),
        positions=pts.copy(),
        indptr=indptr,
        indices=dst.astype(np.int64),
        entry_src=src.astype(np.int64),
        entry_dist=entry_dist,
        entry_edge=entry_edge,
        edges=edges,
        edge_dist=edge_dist,
    )
    for arr in (dep.positions, dep.indptr, dep.indices, dep.entry_src,
                dep.entry_dist, dep.entry_edge, dep.edges, dep.edge_dist):
        arr.setflags(write=False)
    return dep


def effective_distance(deployment):
    """Root-mean-square distance over the unordered neighbor pairs."""
    if deployment.n_edges == 0:
        raise NoLinksError("deployment has no neighbor pairs")
    return float(np.sqrt(np.mean(deployment.edge_dist ** 2)))


@dataclass(frozen=True)
class GeometryStats:
    n: int
    mean_degree: float
    r_eff: float


def deployment_stats(deployment):
    """Summary numbers of a deployment (raises NoLinksError on an empty edge set)."""
    return GeometryStats(
        n=deployment.n,
        mean_degree=deployment.mean_degree,
        r_eff=effective_distance(deployment),
    )


def parse_points(text):
    """Parse a plain-text point list: one "x y" pair per line.

    Blank lines and '#' comments are skipped; anything else that is not two
    numbers is an error.
    """
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'x y', got {line!r}")
        rows.append((float(parts[0]), float(parts[1])))
    return np.array(rows, dtype=float).reshape(-1, 2)


def load_points(path):
    """Read a point-list file (see parse_points) into an (n, 2) array."""
    with open(path) as fh:
        return parse_points(fh.read())
