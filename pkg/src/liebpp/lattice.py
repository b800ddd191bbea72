"""Lattice geometries: open chains, quasi-1D Lieb chains, and 2D Lieb grids.

Site positions are stored at build time in units of the nearest-neighbor
spacing so downstream Fourier transforms have a single source of truth for
the sublattice offsets. The unit-cell pitch along a chain axis is d = 2
(twice the nearest-neighbor spacing): within cell j of a quasi-1D chain the
C and B sites sit at horizontal coordinate (j - 1/2) * d and the A site at
j * d.

Connectivity convention for Lieb geometries: B is the junction sublattice.
Each unit cell carries a vertical C-B rung; A sites bridge consecutive B's
along the chain axis (quasi-1D) or along rows (2D), and C sites bridge B's
along columns (2D). Edges therefore only ever connect B to A or B to C.
Smooth edges omit the dangling bridge sites of boundary cells: the final
A of a quasi-1D chain, and in 2D the A sites of the rightmost cell column
plus the C sites of the bottom cell row.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

UNIT_CELL_PITCH = 2.0  # chain-axis length of one unit cell, units of spacing

SUBLATTICES = ("A", "B", "C")


class LatticeError(ValueError):
    """Invalid lattice construction parameters."""


@dataclass(frozen=True)
class Site:
    """One lattice site: contiguous id, display name, cell coordinate,
    sublattice label, and spatial position in units of site spacing."""

    id: int
    name: str
    cell: tuple
    sublattice: str
    position: tuple


@dataclass
class Lattice:
    """Immutable site/edge container with convenience lookups.

    edges hold (site_id, site_id, hopping) with complex-capable hopping;
    duplicate unordered pairs and self-loops are rejected at construction.
    """

    kind: str
    sites: list
    edges: list
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.sites)
        seen = set()
        for i, j, _ in self.edges:
            if i == j:
                raise LatticeError(f"self-loop on site {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise LatticeError(f"edge ({i},{j}) out of range")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise LatticeError(f"duplicate edge {key}")
            seen.add(key)
        self._name_to_id = {s.name: s.id for s in self.sites}
        if len(self._name_to_id) != n:
            raise LatticeError("site names not unique")
        if n > 1 and not self._connected():
            raise LatticeError("lattice graph is not connected")

    # -- lookups ---------------------------------------------------------

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def names(self) -> list:
        return [s.name for s in self.sites]

    @property
    def sublattice_labels(self) -> list:
        return [s.sublattice for s in self.sites]

    @property
    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.sites], dtype=float)

    def site_id(self, site) -> int:
        """Resolve a site given as id or name; raise KeyError otherwise."""
        if isinstance(site, (int, np.integer)):
            if not 0 <= site < self.n_sites:
                raise KeyError(f"site id {site} out of range")
            return int(site)
        try:
            return self._name_to_id[site]
        except KeyError:
            raise KeyError(f"unknown site {site!r}") from None

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric hopping matrix J_{jj'} (Hermitian for complex J)."""
        n = self.n_sites
        mat = sp.lil_matrix((n, n), dtype=complex)
        for i, j, amp in self.edges:
            mat[i, j] = amp
            mat[j, i] = np.conj(amp)
        return mat.tocsr()

    def degree(self, site_id: int) -> int:
        return sum(1 for i, j, _ in self.edges if site_id in (i, j))

    def _connected(self) -> bool:
        adj = [[] for _ in range(self.n_sites)]
        for i, j, _ in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        seen = {0}
        stack = [0]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == self.n_sites


# -- builders ------------------------------------------------------------


def _chain_labels(n_sites: int) -> list:
    # 5-site chain: alternating labels around a driven central C site.
    if n_sites == 5:
        return ["C", "B", "C", "B", "C"]
    base = ["C", "B", "A"]
    return [base[i % 3] for i in range(n_sites)]


def build_chain(n_sites: int, hopping: complex = 1.0) -> Lattice:
    """Open-boundary path graph with Lieb-arm sublattice labels.

    Labels repeat (C, B, A, ...) from the first site; the 5-site variant
    uses the alternating pattern (C, B, C, B, C) so its driven central
    site carries the C label. Site names are 1-based position + label.
    """
    if n_sites < 2:
        raise LatticeError("chain needs n_sites >= 2")
    labels = _chain_labels(n_sites)
    sites = [
        Site(i, f"{i + 1}{labels[i]}", (i + 1,), labels[i], (float(i), 0.0))
        for i in range(n_sites)
    ]
    edges = [(i, i + 1, complex(hopping)) for i in range(n_sites - 1)]
    return Lattice(
        "chain", sites, edges, {"n_sites": n_sites, "hopping": hopping}
    )


def build_quasi1d_lieb(
    n_cells: int, hopping: complex = 1.0, smooth_edge: bool = True
) -> Lattice:
    """Quasi-1D Lieb chain of n_cells unit cells.

    Cell j contributes a bottom C at ((j - 1/2) d, 0), a B above it at
    ((j - 1/2) d, 1), and a bridging A at (j d, 1) linking B_j to B_{j+1}.
    With smooth_edge the final cell omits its A (no dangling bridge), for
    3 n - 1 sites total.
    """
    if n_cells < 1:
        raise LatticeError("quasi-1D lattice needs n_cells >= 1")
    d = UNIT_CELL_PITCH
    sites = []
    index = {}

    def add(name, cell, lab, pos):
        index[name] = len(sites)
        sites.append(Site(len(sites), name, cell, lab, pos))

    for j in range(1, n_cells + 1):
        x = (j - 0.5) * d
        add(f"{j}C", (j,), "C", (x, 0.0))
        add(f"{j}B", (j,), "B", (x, 1.0))
        if not (smooth_edge and j == n_cells):
            add(f"{j}A", (j,), "A", (j * d, 1.0))

    J = complex(hopping)
    edges = []
    for j in range(1, n_cells + 1):
        edges.append((index[f"{j}C"], index[f"{j}B"], J))
        if f"{j}A" in index:
            edges.append((index[f"{j}B"], index[f"{j}A"], J))
            if f"{j + 1}B" in index:
                edges.append((index[f"{j}A"], index[f"{j + 1}B"], J))
    return Lattice(
        "quasi1d",
        sites,
        edges,
        {
            "n_cells": n_cells,
            "smooth_edge": smooth_edge,
            "d": d,
            "hopping": hopping,
        },
    )


def build_lieb_2d(
    nx: int, ny: int, hopping: complex = 1.0, smooth_edges: bool = True
) -> Lattice:
    """2D Lieb lattice of nx x ny unit cells.

    Cell (x, y) contributes B at ((x-1/2)d, (y-1/2)d), A to its right at
    (x d, (y-1/2)d), and C below it at ((x-1/2)d, (y-1)d). A bridges B's
    along rows, C bridges B's along columns. With smooth_edges the
    rightmost cell column omits A and the bottom cell row omits C, for
    3 nx ny - nx - ny sites total.
    """
    if nx < 1 or ny < 1:
        raise LatticeError("2D lattice needs nx, ny >= 1")
    d = UNIT_CELL_PITCH
    sites = []
    index = {}

    def add(name, cell, lab, pos):
        index[name] = len(sites)
        sites.append(Site(len(sites), name, cell, lab, pos))

    for y in range(1, ny + 1):
        for x in range(1, nx + 1):
            px, py = (x - 0.5) * d, (y - 0.5) * d
            add(f"{x},{y}B", (x, y), "B", (px, py))
            if not (smooth_edges and x == nx):
                add(f"{x},{y}A", (x, y), "A", (x * d, py))
            if not (smooth_edges and y == 1):
                add(f"{x},{y}C", (x, y), "C", (px, (y - 1) * d))

    J = complex(hopping)
    edges = []
    for y in range(1, ny + 1):
        for x in range(1, nx + 1):
            b = index[f"{x},{y}B"]
            if f"{x},{y}A" in index:
                edges.append((b, index[f"{x},{y}A"], J))
                if f"{x + 1},{y}B" in index:
                    edges.append((index[f"{x},{y}A"], index[f"{x + 1},{y}B"], J))
            if f"{x},{y}C" in index:
                edges.append((b, index[f"{x},{y}C"], J))
                if f"{x},{y - 1}B" in index:
                    edges.append((index[f"{x},{y}C"], index[f"{x},{y - 1}B"], J))
    return Lattice(
        "lieb2d",
        sites,
        edges,
        {
            "nx": nx,
            "ny": ny,
            "smooth_edges": smooth_edges,
            "d": d,
            "hopping": hopping,
        },
    )


def lattice_hash(lattice: Lattice) -> str:
    """Stable content hash of the full geometry (sites, edges, hoppings)."""
    payload = {
        "kind": lattice.kind,
        "sites": [
            [s.id, s.name, list(s.cell), s.sublattice, list(s.position)]
            for s in lattice.sites
        ],
        "edges": [
            [i, j, float(np.real(a)), float(np.imag(a))]
            for i, j, a in lattice.edges
        ],
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
