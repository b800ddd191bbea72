"""Named ready-to-run scenarios.

Each preset is a plain nested dict in the same layout as a user scenario
file, so preset and file configs flow through one resolver and one
validator. Values are in loss-rate units throughout.

Available presets:

fig3            three-site chain at the analytic antibunching optimum of
                the interaction u = 0.1, driven on the first site at unit
                amplitude, with delayed correlations on all three sites.
fig3-lowdrive   same at half drive amplitude.
fig4            five-site alternating chain driven at its central site.
fig6            five-cell quasi-1D lattice (14 sites, smooth edge) at
                equal hopping and drive 3, driven on the central bottom
                site, with a delayed-correlation grid on its junction.
fig8            same lattice at hopping = drive = 1.5 plus a background
                drive 0.8 on every other bottom site.
fig9-flat       twenty-cell quasi-1D lattice, uniform detuning, spectrum
                accumulation on (frequency-locked middle band).
fig9-dispersive same with the bottom sublattice detuned to -5, making the
                middle band dispersive.
fig10           5 x 5 two-dimensional lattice driven on two adjacent
                bottom sites of the central column.
"""

from __future__ import annotations

import copy

_FIG3_BASE = {
    "lattice": {"kind": "chain", "n_sites": 3, "hopping": 2.775},
    "model": {"u": 0.1, "gamma": 1.0, "detuning": -0.28},
    "drive": {"kind": "single", "target": "1C", "amplitude": 1.0},
    "integration": {},
    "observables": {
        "tau_max": 6.0,
        "tau_sites": ["1C", "2B", "3A"],
    },
}


def _fig3() -> dict:
    return copy.deepcopy(_FIG3_BASE)


def _fig3_lowdrive() -> dict:
    cfg = copy.deepcopy(_FIG3_BASE)
    cfg["drive"]["amplitude"] = 0.5
    return cfg


def _fig4() -> dict:
    return {
        "lattice": {"kind": "chain", "n_sites": 5, "hopping": 1.5},
        "model": {"u": 0.1, "gamma": 1.0, "detuning": -0.2},
        "drive": {"kind": "single", "target": "3C", "amplitude": 1.5},
        "integration": {},
        "observables": {},
    }


def _fig6() -> dict:
    return {
        "lattice": {
            "kind": "quasi1d",
            "n_cells": 5,
            "hopping": 3.0,
            "smooth_edge": True,
        },
        "model": {"u": 0.1, "gamma": 1.0, "detuning": -0.2},
        "drive": {"kind": "single", "target": "3C", "amplitude": 3.0},
        "integration": {},
        "observables": {"tau_max": 6.0, "tau_sites": ["3B"]},
    }


def _fig8() -> dict:
    return {
        "lattice": {
            "kind": "quasi1d",
            "n_cells": 5,
            "hopping": 1.5,
            "smooth_edge": True,
        },
        "model": {"u": 0.1, "gamma": 1.0, "detuning": -0.2},
        "drive": {
            "kind": "with_background",
            "target": "3C",
            "amplitude": 1.5,
            "background": 0.8,
        },
        "integration": {},
        "observables": {"tau_max": 6.0, "tau_sites": ["3B"]},
    }


def _fig9(flat: bool) -> dict:
    detuning = -0.2 if flat else {"A": -0.2, "B": -0.2, "C": -5.0}
    return {
        "lattice": {
            "kind": "quasi1d",
            "n_cells": 20,
            "hopping": 3.0,
            "smooth_edge": True,
        },
        "model": {"u": 0.1, "gamma": 1.0, "detuning": detuning},
        "drive": {"kind": "single", "target": "11C", "amplitude": 3.0},
        "integration": {},
        "observables": {"spectrum": True},
    }


def _fig10() -> dict:
    return {
        "lattice": {
            "kind": "lieb2d",
            "nx": 5,
            "ny": 5,
            "hopping": 3.0,
            "smooth_edges": True,
        },
        "model": {"u": 0.1, "gamma": 1.0, "detuning": -0.2},
        "drive": {
            "kind": "two_site",
            "targets": ["3,3C", "3,4C"],
            "amplitude": 3.0,
        },
        "integration": {},
        "observables": {},
    }


_BUILDERS = {
    "fig3": _fig3,
    "fig3-lowdrive": _fig3_lowdrive,
    "fig4": _fig4,
    "fig6": _fig6,
    "fig8": _fig8,
    "fig9-flat": lambda: _fig9(flat=True),
    "fig9-dispersive": lambda: _fig9(flat=False),
    "fig10": _fig10,
}

PRESET_NAMES = tuple(sorted(_BUILDERS))


def preset_scenario(name: str) -> dict:
    """Fresh scenario dict for a named preset."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}"
        ) from None
    return builder()
