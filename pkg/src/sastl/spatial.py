"""Precomputed shortest-path distances and distance-band location queries.

All pairwise shortest-path distances are computed once per graph and kept as
per-node arrays sorted by distance, so a band query [d1, d2] is a binary
search for the window followed by a label filter over the survivors:
O(log n) to locate, O(result) to emit. Unreachable pairs have distance
+inf, are absent from the per-node arrays, and never match any band, even
an unbounded one.
"""

from __future__ import annotations

import hashlib
import math
import os

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import UnknownLocationError
from .formula import PsiExpr, PsiNot, PsiOr, PsiProp, PsiTrue, SpatialDomain
from .signal import Labeling, SpatialGraph

_DIST_TOL = 1e-9


class DistanceIndex:
    """Per-location distance tables over a fixed graph; immutable after build."""

    def __init__(self, nodes: tuple[str, ...], matrix: np.ndarray):
        self.nodes = nodes
        self._node_ix = {n: i for i, n in enumerate(nodes)}
        self._matrix = matrix
        self._matrix.flags.writeable = False
        n = len(nodes)
        self._sorted_dist: list[np.ndarray] = []
        self._sorted_ids: list[np.ndarray] = []
        ids = np.arange(n)
        for i in range(n):
            row = matrix[i]
            reachable = np.isfinite(row)
            # ascending distance, ties broken by node order (= sorted ids)
            order = np.lexsort((ids[reachable], row[reachable]))
            self._sorted_dist.append(np.ascontiguousarray(row[reachable][order]))
            self._sorted_ids.append(np.ascontiguousarray(ids[reachable][order]))
        self._psi_masks: dict[tuple[Labeling, PsiExpr], np.ndarray] = {}

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def node_index(self, location: str) -> int:
        try:
            return self._node_ix[location]
        except KeyError:
            raise UnknownLocationError(location) from None

    def distance(self, a: str, b: str) -> float:
        """Shortest-path distance; +inf when unreachable."""
        return float(self._matrix[self.node_index(a), self.node_index(b)])

    def band_ids(self, loc_index: int, d1: float, d2: float) -> np.ndarray:
        """Node indices with d1 <= d(l, .) <= d2, ascending distance."""
        dist = self._sorted_dist[loc_index]
        lo = np.searchsorted(dist, d1 - _DIST_TOL, side="left")
        if math.isinf(d2):
            hi = len(dist)
        else:
            hi = np.searchsorted(dist, d2 + _DIST_TOL, side="right")
        return self._sorted_ids[loc_index][lo:hi]

    def psi_mask(self, labeling: Labeling, psi: PsiExpr) -> np.ndarray:
        """Boolean vector over node order: does each location satisfy psi?

        Cached per (labeling, psi) by labeling identity; the cache only ever
        stores identical recomputable values, so concurrent readers are safe.
        """
        key = (labeling, psi)
        mask = self._psi_masks.get(key)
        if mask is None:
            mask = np.fromiter(
                (eval_psi(labeling, n, psi) for n in self.nodes), dtype=bool, count=len(self.nodes)
            )
            mask.flags.writeable = False
            self._psi_masks[key] = mask
        return mask


def build_index(graph: SpatialGraph) -> DistanceIndex:
    """All-pairs shortest paths under the edge weights (Dijkstra per source)."""
    n = graph.node_count
    ix = {node: i for i, node in enumerate(graph.nodes)}
    rows, cols, weights = [], [], []
    for a, b, w in graph.edges:
        ia, ib = ix[a], ix[b]
        rows.extend((ia, ib))
        cols.extend((ib, ia))
        weights.extend((w, w))
    adjacency = csr_matrix((weights, (rows, cols)), shape=(n, n))
    matrix = dijkstra(adjacency, directed=False)
    np.fill_diagonal(matrix, 0.0)
    # per-source runs can sum an identical path in different orders; take the
    # elementwise minimum with the transpose so d(a,b) == d(b,a) exactly
    matrix = np.minimum(matrix, matrix.T)
    return DistanceIndex(graph.nodes, matrix)


def eval_psi(labeling: Labeling, location: str, psi: PsiExpr) -> bool:
    """Propositional evaluation of psi over the location's label set."""
    if isinstance(psi, PsiTrue):
        return True
    if isinstance(psi, PsiProp):
        return psi.name in labeling.labels_for(location)
    if isinstance(psi, PsiNot):
        return not eval_psi(labeling, location, psi.child)
    if isinstance(psi, PsiOr):
        return eval_psi(labeling, location, psi.left) or eval_psi(labeling, location, psi.right)
    raise TypeError(f"not a psi node: {psi!r}")


def de_scan(
    index: DistanceIndex,
    labeling: Labeling,
    location: str,
    domain: SpatialDomain,
) -> list[str]:
    """Locations within [d1, d2] of the anchor whose labels satisfy psi.

    Ordered by ascending distance, ties broken by location id. The anchor
    itself is included when the band covers distance 0 and its labels pass.
    """
    ids = de_scan_ids(index, labeling, index.node_index(location), domain)
    return [index.nodes[i] for i in ids]


def de_scan_ids(
    index: DistanceIndex,
    labeling: Labeling,
    loc_index: int,
    domain: SpatialDomain,
) -> np.ndarray:
    candidates = index.band_ids(loc_index, domain.d1, domain.d2)
    if isinstance(domain.psi, PsiTrue):
        return candidates
    mask = index.psi_mask(labeling, domain.psi)
    return candidates[mask[candidates]]


# --- binary cache of the distance table -------------------------------------


def _cache_path(cache_dir: str, graph: SpatialGraph) -> str:
    digest = hashlib.sha256(graph.canonical_json().encode()).hexdigest()[:24]
    return os.path.join(cache_dir, f"distances-{digest}.npz")


def load_or_build_index(graph: SpatialGraph, cache_dir: str | None = None) -> DistanceIndex:
    """Build the index, reusing a cached distance table when the graph matches."""
    if cache_dir is None:
        return build_index(graph)
    path = _cache_path(cache_dir, graph)
    if os.path.exists(path):
        with np.load(path, allow_pickle=False) as data:
            matrix = data["matrix"].copy()
        return DistanceIndex(graph.nodes, matrix)
    index = build_index(graph)
    os.makedirs(cache_dir, exist_ok=True)
    tmp = path + ".tmp.npz"
    np.savez_compressed(tmp, matrix=index._matrix)
    os.replace(tmp, path)
    return index
