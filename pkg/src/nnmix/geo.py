"""Spatial primitives: site collections, orderings, and nearest-neighbor DAGs.

A reference set is an ordered list of planar sites in which every site after
the first keeps directed edges to its (at most) ``L`` nearest predecessors.
The resulting graph is acyclic by construction, which is what makes the
sequential factorization of the joint density well defined.

Distances are planar Euclidean throughout; lon/lat coordinates are treated
as planar. Ties in distance are broken by the lower reference index so that
structures are reproducible across platforms.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


def distance(a, b):
    """Euclidean distance between two coordinate pairs (or arrays of them)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.sqrt(np.sum((a - b) ** 2, axis=-1))


def _as_coords(sites):
    coords = np.asarray(sites, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ValueError(f"expected (n, 2) coordinate array, got shape {coords.shape}")
    if not np.all(np.isfinite(coords)):
        raise ValueError("site coordinates must be finite")
    return coords


@dataclass(frozen=True)
class SiteSet:
    """Ordered reference sites with their nearest-predecessor lists.

    ``coords[k]`` is row ``order[k]`` of the input. ``nbr_idx[k]`` holds the
    indices (into the ordered set) of the ``nbr_count[k] = min(k, L)``
    nearest predecessors of site ``k``, ascending by distance with ties
    broken by lower index; unused slots are ``-1`` with distance ``inf``.
    """

    coords: np.ndarray
    order: np.ndarray
    L: int
    nbr_idx: np.ndarray
    nbr_dist: np.ndarray
    nbr_count: np.ndarray
    ordering: str = "as-given"
    seed: int | None = None
    n_zero_distance: int = field(default=0)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def neighbors(self, i):
        """Neighbor indices of ordered site ``i`` (ascending by distance)."""
        return self.nbr_idx[i, : self.nbr_count[i]]

    def structure_report(self) -> dict:
        """Structure-quality summary (duplicate sites hit kernel boundaries)."""
        m = self.nbr_count.sum()
        return {
            "n_sites": self.n,
            "L": self.L,
            "n_edges": int(m),
            "n_zero_distance_edges": int(self.n_zero_distance),
            "max_neighbor_distance": float(
                np.max(self.nbr_dist[self.nbr_dist < np.inf], initial=0.0)
            ),
        }


@dataclass(frozen=True)
class QuerySite:
    """A non-reference location with its L nearest reference sites."""

    coords: np.ndarray
    nbr_idx: np.ndarray
    nbr_dist: np.ndarray


def _sorted_nearest(d, cap):
    """Indices of the `cap` smallest entries of d, distance then index order."""
    if d.shape[0] > cap:
        part = np.argpartition(d, cap - 1)[:cap]
    else:
        part = np.arange(d.shape[0])
    key = np.lexsort((part, d[part]))
    return part[key]


def build_reference(sites, L, ordering="random", seed=None):
    """Order sites and build the nearest-predecessor DAG.

    Parameters
    ----------
    sites : (n, 2) array-like
        Site coordinates. Duplicates are permitted but flagged in the
        structure report, since a zero distance pushes correlation kernels
        to their boundary value.
    L : int
        Neighbor-set cap; site ``i`` (0-based) keeps ``min(i, L)`` parents.
    ordering : {"as-given", "random", "coordinate-sum"}
        Row permutation applied before neighbor construction. ``random``
        uses ``seed`` and records it for reproducibility.
    """
    coords_in = _as_coords(sites)
    n = coords_in.shape[0]
    if n < 2:
        raise ValueError("need at least 2 sites to build a reference set")
    if not np.all(np.ptp(coords_in, axis=0) > 0) and np.unique(coords_in, axis=0).shape[0] < 2:
        raise ValueError("need at least 2 distinct sites")
    L = int(L)
    if L < 1:
        raise ValueError("neighbor cap L must be >= 1")

    if ordering == "as-given":
        order = np.arange(n)
    elif ordering == "random":
        rng = np.random.default_rng(seed)
        order = rng.permutation(n)
    elif ordering == "coordinate-sum":
        s = coords_in.sum(axis=1)
        order = np.lexsort((np.arange(n), s))
    else:
        raise ValueError(f"unknown ordering {ordering!r}")

    coords = coords_in[order]
    nbr_idx = np.full((n, L), -1, dtype=np.int64)
    nbr_dist = np.full((n, L), np.inf)
    nbr_count = np.minimum(np.arange(n), L).astype(np.int64)
    n_zero = 0
    for i in range(1, n):
        d = np.sqrt(np.sum((coords[:i] - coords[i]) ** 2, axis=1))
        sel = _sorted_nearest(d, min(i, L))
        k = sel.shape[0]
        nbr_idx[i, :k] = sel
        nbr_dist[i, :k] = d[sel]
        n_zero += int(np.count_nonzero(d[sel] == 0.0))
    if n_zero:
        warnings.warn(
            f"{n_zero} neighbor pairs at zero distance; correlation kernels "
            "will sit at their boundary value for those edges",
            stacklevel=2,
        )
    return SiteSet(
        coords=coords,
        order=order,
        L=L,
        nbr_idx=nbr_idx,
        nbr_dist=nbr_dist,
        nbr_count=nbr_count,
        ordering=ordering,
        seed=seed,
        n_zero_distance=n_zero,
    )


def neighbors_of_query(ref: SiteSet, q) -> QuerySite:
    """L nearest reference sites to a query location.

    Ascending by distance, ties broken by lower reference index. The query
    itself is never part of the reference set, so all L slots are filled
    (requires ``L <= ref.n``).
    """
    qc = np.asarray(q, dtype=float).reshape(2)
    if ref.L > ref.n:
        raise ValueError("neighbor cap exceeds reference-set size")
    d = np.sqrt(np.sum((ref.coords - qc) ** 2, axis=1))
    sel = _sorted_nearest(d, ref.L)
    return QuerySite(coords=qc, nbr_idx=sel, nbr_dist=d[sel])


def neighbors_of_queries(ref: SiteSet, coords) -> list[QuerySite]:
    """Vector version of :func:`neighbors_of_query` over many locations."""
    coords = _as_coords(coords)
    return [neighbors_of_query(ref, c) for c in coords]
