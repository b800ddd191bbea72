"""Geometry builders: site counts, labels, connectivity, symmetry."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liebpp.lattice import (
    Lattice,
    LatticeError,
    Site,
    build_chain,
    build_lieb_2d,
    build_quasi1d_lieb,
    lattice_hash,
)


def _degree_map(lat):
    return {s.id: lat.degree(s.id) for s in lat.sites}


def _is_automorphism(lat, perm):
    """perm maps site id -> site id; check edges and sublattices survive."""
    for s in lat.sites:
        if lat.sites[perm[s.id]].sublattice != s.sublattice:
            return False
    edges = {(min(i, j), max(i, j)) for i, j, _ in lat.edges}
    mapped = {
        (min(perm[i], perm[j]), max(perm[i], perm[j])) for i, j, _ in lat.edges
    }
    return mapped == edges


# -- chains -------------------------------------------------------------


def test_chain_three_sites():
    lat = build_chain(3, hopping=2.775)
    assert lat.n_sites == 3
    assert len(lat.edges) == 2
    assert lat.names == ["1C", "2B", "3A"]
    assert lat.sublattice_labels == ["C", "B", "A"]


def test_chain_two_sites_minimal_path():
    lat = build_chain(2)
    assert lat.n_sites == 2
    assert len(lat.edges) == 1


def test_chain_five_sites_central_c():
    lat = build_chain(5)
    assert lat.n_sites == 5
    assert len(lat.edges) == 4
    assert lat.sites[2].sublattice == "C"
    assert lat.sites[2].name == "3C"


def test_chain_rejects_too_short():
    with pytest.raises(LatticeError):
        build_chain(1)


def test_chain_positions_are_collinear_unit_spaced():
    lat = build_chain(6)
    pos = lat.positions
    assert np.allclose(pos[:, 1], 0.0)
    assert np.allclose(np.diff(pos[:, 0]), 1.0)


# -- quasi-1D -----------------------------------------------------------


def test_quasi1d_five_cells_smooth_counts():
    lat = build_quasi1d_lieb(5, smooth_edge=True)
    assert lat.n_sites == 14
    labels = lat.sublattice_labels
    assert labels.count("B") == 5
    assert labels.count("C") == 5
    assert labels.count("A") == 4


def test_quasi1d_single_cell():
    lat = build_quasi1d_lieb(1, smooth_edge=True)
    assert lat.n_sites == 2
    assert len(lat.edges) == 1
    assert sorted(lat.sublattice_labels) == ["B", "C"]


def test_quasi1d_twenty_cells():
    assert build_quasi1d_lieb(20, smooth_edge=True).n_sites == 59


@pytest.mark.parametrize("n", range(1, 31))
def test_quasi1d_count_formula(n):
    assert build_quasi1d_lieb(n, smooth_edge=True).n_sites == 3 * n - 1
    assert build_quasi1d_lieb(n, smooth_edge=False).n_sites == 3 * n


def test_quasi1d_rejects_zero_cells():
    with pytest.raises(LatticeError):
        build_quasi1d_lieb(0)


def test_quasi1d_connectivity_roles():
    """C sites are pendants on their B, A sites bridge consecutive B's."""
    lat = build_quasi1d_lieb(4, smooth_edge=False)
    by_name = {s.name: s.id for s in lat.sites}
    edges = {(min(i, j), max(i, j)) for i, j, _ in lat.edges}

    def linked(a, b):
        i, j = by_name[a], by_name[b]
        return (min(i, j), max(i, j)) in edges

    for j in range(1, 5):
        assert linked(f"{j}C", f"{j}B")
        assert linked(f"{j}B", f"{j}A")
    for j in range(1, 4):
        assert linked(f"{j}A", f"{j + 1}B")
    # every edge touches a B site; A and C never couple directly
    for i, j, _ in lat.edges:
        assert "B" in (
            lat.sites[i].sublattice,
            lat.sites[j].sublattice,
        )
    deg = _degree_map(lat)
    for s in lat.sites:
        if s.sublattice == "C":
            assert deg[s.id] == 1
        elif s.sublattice == "A":
            assert deg[s.id] <= 2
        else:
            assert deg[s.id] <= 3


def test_quasi1d_positions_match_documented_offsets():
    lat = build_quasi1d_lieb(3, smooth_edge=False)
    d = lat.params["d"]
    for s in lat.sites:
        (j,) = s.cell
        if s.sublattice in ("B", "C"):
            assert s.position[0] == (j - 0.5) * d
        else:
            assert s.position[0] == j * d
        assert s.position[1] == (0.0 if s.sublattice == "C" else 1.0)


# -- 2D Lieb ------------------------------------------------------------


def test_lieb2d_5x5_smooth_count():
    lat = build_lieb_2d(5, 5, smooth_edges=True)
    assert lat.n_sites == 65


def test_lieb2d_single_cell_full():
    lat = build_lieb_2d(1, 1, smooth_edges=False)
    assert lat.n_sites == 3
    assert sorted(lat.sublattice_labels) == ["A", "B", "C"]


def test_lieb2d_2x2_smooth():
    assert build_lieb_2d(2, 2, smooth_edges=True).n_sites == 8


@pytest.mark.parametrize("nx", range(1, 8))
@pytest.mark.parametrize("ny", range(1, 8))
def test_lieb2d_count_formula(nx, ny):
    smooth = build_lieb_2d(nx, ny, smooth_edges=True)
    full = build_lieb_2d(nx, ny, smooth_edges=False)
    assert smooth.n_sites == 3 * nx * ny - nx - ny
    assert full.n_sites == 3 * nx * ny


def test_lieb2d_degree_bounds():
    lat = build_lieb_2d(4, 4, smooth_edges=False)
    deg = _degree_map(lat)
    assert max(deg.values()) <= 4
    for i, j, _ in lat.edges:
        assert "B" in (
            lat.sites[i].sublattice,
            lat.sites[j].sublattice,
        )
    # bulk junction sites reach the full 4-neighbor coordination
    by_name = {s.name: s.id for s in lat.sites}
    assert deg[by_name["2,2B"]] == 4
    assert deg[by_name["3,3B"]] == 4


def test_lieb2d_rejects_empty():
    with pytest.raises(LatticeError):
        build_lieb_2d(0, 3)


# -- generic container invariants ---------------------------------------


@pytest.mark.parametrize(
    "lat",
    [
        build_chain(7),
        build_quasi1d_lieb(6, smooth_edge=True),
        build_lieb_2d(3, 4, smooth_edges=True),
    ],
    ids=["chain", "quasi1d", "lieb2d"],
)
def test_adjacency_hermitian_and_matches_edges(lat):
    mat = lat.adjacency().toarray()
    assert np.allclose(mat, mat.conj().T)
    assert mat.shape == (lat.n_sites, lat.n_sites)
    assert np.count_nonzero(mat) == 2 * len(lat.edges)


def test_adjacency_complex_hopping_conjugated():
    lat = build_chain(3, hopping=1.0 + 0.5j)
    mat = lat.adjacency().toarray()
    assert mat[0, 1] == 1.0 + 0.5j
    assert mat[1, 0] == 1.0 - 0.5j


def test_site_id_lookup_and_errors():
    lat = build_quasi1d_lieb(3)
    assert lat.site_id("2B") == lat.site_id(4)
    with pytest.raises(KeyError):
        lat.site_id("9Z")
    with pytest.raises(KeyError):
        lat.site_id(99)


def test_names_unique_everywhere():
    for lat in (
        build_chain(12),
        build_quasi1d_lieb(9, smooth_edge=False),
        build_lieb_2d(4, 5, smooth_edges=True),
    ):
        assert len(set(lat.names)) == lat.n_sites


def test_positions_distinct():
    lat = build_lieb_2d(3, 3, smooth_edges=False)
    pos = [tuple(p) for p in lat.positions]
    assert len(set(pos)) == lat.n_sites


def test_container_rejects_bad_edges():
    sites = [
        Site(0, "1C", (1,), "C", (0.0, 0.0)),
        Site(1, "2B", (2,), "B", (1.0, 0.0)),
    ]
    with pytest.raises(LatticeError):
        Lattice("chain", sites, [(0, 0, 1.0)])
    with pytest.raises(LatticeError):
        Lattice("chain", sites, [(0, 1, 1.0), (1, 0, 1.0)])
    with pytest.raises(LatticeError):
        Lattice("chain", sites, [(0, 5, 1.0)])
    with pytest.raises(LatticeError):
        Lattice("chain", sites, [])  # disconnected


# -- mirror symmetry ----------------------------------------------------


def test_chain5_mirror_automorphism():
    lat = build_chain(5)
    n = lat.n_sites
    perm = {i: n - 1 - i for i in range(n)}
    assert _is_automorphism(lat, perm)


def test_quasi1d_5cell_mirror_automorphism():
    """Reflection about the central rung maps cell j to cell 6-j (B, C)
    and bridge j to bridge 5-j (A)."""
    lat = build_quasi1d_lieb(5, smooth_edge=True)
    by_name = {s.name: s.id for s in lat.sites}
    perm = {}
    for j in range(1, 6):
        perm[by_name[f"{j}B"]] = by_name[f"{6 - j}B"]
        perm[by_name[f"{j}C"]] = by_name[f"{6 - j}C"]
    for j in range(1, 5):
        perm[by_name[f"{j}A"]] = by_name[f"{5 - j}A"]
    assert _is_automorphism(lat, perm)


# -- hashing ------------------------------------------------------------


def test_lattice_hash_stable_and_discriminating():
    a = lattice_hash(build_quasi1d_lieb(5, hopping=3.0))
    b = lattice_hash(build_quasi1d_lieb(5, hopping=3.0))
    assert a == b
    assert len(a) == 64
    assert a != lattice_hash(build_quasi1d_lieb(5, hopping=1.5))
    assert a != lattice_hash(build_quasi1d_lieb(6, hopping=3.0))


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=12),
    smooth=st.booleans(),
    hop=st.floats(min_value=0.1, max_value=10.0, allow_nan=False),
)
def test_quasi1d_invariants_property(n, smooth, hop):
    lat = build_quasi1d_lieb(n, hopping=hop, smooth_edge=smooth)
    assert lat.n_sites == (3 * n - 1 if smooth else 3 * n)
    assert len(lat.edges) == lat.n_sites - 1  # tree: path plus pendants
    assert len(set(lat.names)) == lat.n_sites
    deg = _degree_map(lat)
    assert max(deg.values()) <= 3
