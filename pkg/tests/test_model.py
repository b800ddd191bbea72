"""Parameter containers and drive-scheme builders."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from liebpp.lattice import build_chain, build_lieb_2d, build_quasi1d_lieb
from liebpp.model import (
    DriveScheme,
    ModelError,
    ModelParams,
    drive_single,
    drive_two_site,
    drive_with_background,
    site_detunings,
)


# -- ModelParams ---------------------------------------------------------


def test_params_validation():
    with pytest.raises(ModelError):
        ModelParams(u=0.1, gamma=0.0)
    with pytest.raises(ModelError):
        ModelParams(u=0.1, gamma=-1.0)
    with pytest.raises(ModelError):
        ModelParams(u=-0.1)
    with pytest.raises(ModelError):
        ModelParams(u=0.1, detuning={"Q": 1.0})
    ModelParams(u=0.0)  # free gas allowed


def test_uniform_detuning_applies_everywhere():
    lat = build_quasi1d_lieb(3)
    model = ModelParams(u=0.1, detuning=-0.2)
    assert np.all(site_detunings(model, lat) == -0.2)


def test_sublattice_detuning_map():
    lat = build_quasi1d_lieb(3, smooth_edge=False)
    model = ModelParams(u=0.1, detuning={"A": -0.2, "B": -0.2, "C": -5.0})
    det = site_detunings(model, lat)
    for s in lat.sites:
        assert det[s.id] == (-5.0 if s.sublattice == "C" else -0.2)


def test_missing_sublattice_key_defaults_to_zero():
    lat = build_chain(3)
    det = site_detunings(ModelParams(u=0.1, detuning={"B": 1.5}), lat)
    assert det.tolist() == [0.0, 1.5, 0.0]


def test_per_site_override_wins():
    lat = build_quasi1d_lieb(2)
    model = ModelParams(
        u=0.1, detuning=-0.2, site_detuning={"1C": 3.0, "2B": -7.0}
    )
    det = site_detunings(model, lat)
    assert det[lat.site_id("1C")] == 3.0
    assert det[lat.site_id("2B")] == -7.0
    assert det[lat.site_id("1B")] == -0.2


# -- drive builders -------------------------------------------------------


def test_drive_single_support():
    lat = build_quasi1d_lieb(5)
    drive = drive_single(lat, "3C", 3.0)
    assert drive.support == (lat.site_id("3C"),)
    assert drive.array[lat.site_id("3C")] == 3.0


def test_drive_single_zero_amplitude_is_empty():
    lat = build_chain(3)
    drive = drive_single(lat, "1C", 0.0)
    assert drive.is_zero()
    assert drive.support == ()


def test_drive_single_unknown_site():
    lat = build_chain(3)
    with pytest.raises(KeyError):
        drive_single(lat, "4D", 1.0)


def test_drive_with_background_pattern():
    lat = build_quasi1d_lieb(5)
    drive = drive_with_background(lat, "3C", 1.5, 0.8)
    for s in lat.sites:
        amp = drive.amplitudes[s.id]
        if s.name == "3C":
            assert amp == 1.5
        elif s.sublattice == "C":
            assert amp == 0.8
        else:
            assert amp == 0.0


def test_drive_with_background_zero_background_matches_single():
    lat = build_quasi1d_lieb(5)
    assert drive_with_background(lat, "3C", 1.5, 0.0) == drive_single(
        lat, "3C", 1.5
    )


def test_drive_with_background_requires_c_target():
    lat = build_quasi1d_lieb(5)
    with pytest.raises(ModelError):
        drive_with_background(lat, "3B", 1.5, 0.8)


def test_drive_two_site_pattern():
    lat = build_lieb_2d(5, 5)
    drive = drive_two_site(lat, ["3,3C", "3,4C"], 3.0)
    ids = {lat.site_id("3,3C"), lat.site_id("3,4C")}
    assert set(drive.support) == ids
    assert all(drive.amplitudes[i] == 3.0 for i in ids)


def test_drive_two_site_errors():
    lat = build_chain(3)
    with pytest.raises(ModelError):
        drive_two_site(lat, ["1C", "1C"], 1.0)
    with pytest.raises(KeyError):
        drive_two_site(lat, ["1C", "9X"], 1.0)
    with pytest.raises(ModelError):
        drive_two_site(lat, ["1C"], 1.0)


def test_drive_two_site_on_chain_by_ids():
    lat = build_chain(3)
    drive = drive_two_site(lat, [0, 2], 1.0)
    assert drive.support == (0, 2)


def test_drive_accepts_complex_amplitude():
    lat = build_chain(3)
    drive = drive_single(lat, "1C", 1.0 + 2.0j)
    assert drive.array[0] == 1.0 + 2.0j


def test_drive_scheme_array_dtype():
    drive = DriveScheme((0j, 1.0 + 0j))
    assert drive.array.dtype == complex


# -- property: support equals construction rule ---------------------------


@settings(max_examples=30, deadline=None)
@given(n_cells=st.integers(min_value=2, max_value=8), data=st.data())
def test_background_drive_support_property(n_cells, data):
    lat = build_quasi1d_lieb(n_cells)
    c_sites = [s.name for s in lat.sites if s.sublattice == "C"]
    target = data.draw(st.sampled_from(c_sites))
    amp = data.draw(
        st.floats(min_value=0.1, max_value=5.0, allow_nan=False)
    )
    bg = data.draw(st.floats(min_value=0.0, max_value=5.0, allow_nan=False))
    drive = drive_with_background(lat, target, amp, bg)
    expected = {
        s.id
        for s in lat.sites
        if s.sublattice == "C" and (bg != 0 or s.name == target)
    }
    assert set(drive.support) == expected
