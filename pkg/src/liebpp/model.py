"""Physical parameters and drive schemes.

All energies are expressed in units of the local dissipation rate gamma;
gamma itself is retained as a field so configs may set it to 1 (canonical)
or a physical value. Times are reported in units of 1/gamma throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import SUBLATTICES, Lattice


class ModelError(ValueError):
    """Invalid physical parameters or drive construction."""


@dataclass(frozen=True)
class ModelParams:
    """On-site interaction, dissipation, and detuning lookup.

    detuning is either a single number (uniform) or a map from sublattice
    label to energy; site_detuning optionally overrides individual sites by
    name and wins over the sublattice value.
    """

    u: float
    gamma: float = 1.0
    detuning: object = 0.0
    site_detuning: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.gamma <= 0:
            raise ModelError("gamma must be positive")
        if self.u < 0:
            raise ModelError("u must be non-negative")
        if isinstance(self.detuning, dict):
            bad = set(self.detuning) - set(SUBLATTICES)
            if bad:
                raise ModelError(f"unknown sublattice keys {sorted(bad)}")
            for label, value in self.detuning.items():
                if not isinstance(value, (int, float)):
                    raise ModelError(f"detuning[{label!r}] must be a number")
        elif not isinstance(self.detuning, (int, float)):
            raise ModelError("detuning must be a number or a sublattice map")

    def sublattice_detuning(self, label: str) -> float:
        if isinstance(self.detuning, dict):
            return float(self.detuning.get(label, 0.0))
        return float(self.detuning)


def site_detunings(model: ModelParams, lattice: Lattice) -> np.ndarray:
    """Per-site detuning array; per-site override wins over sublattice."""
    out = np.array(
        [model.sublattice_detuning(s.sublattice) for s in lattice.sites],
        dtype=float,
    )
    for site, value in model.site_detuning.items():
        out[lattice.site_id(site)] = float(value)
    return out


@dataclass(frozen=True)
class DriveScheme:
    """Per-site complex drive amplitudes; zero where absent."""

    amplitudes: tuple

    @property
    def array(self) -> np.ndarray:
        return np.array(self.amplitudes, dtype=complex)

    @property
    def support(self) -> tuple:
        return tuple(
            i for i, amp in enumerate(self.amplitudes) if amp != 0
        )

    def is_zero(self) -> bool:
        return not self.support


def _zero_amplitudes(lattice: Lattice) -> np.ndarray:
    return np.zeros(lattice.n_sites, dtype=complex)


def drive_single(lattice: Lattice, target, amplitude: complex) -> DriveScheme:
    """Coherent drive on a single site, zero elsewhere."""
    amps = _zero_amplitudes(lattice)
    amps[lattice.site_id(target)] = amplitude
    return DriveScheme(tuple(amps))


def drive_with_background(
    lattice: Lattice, target, amplitude: complex, background: complex
) -> DriveScheme:
    """Main drive on a target C site plus a background amplitude on every
    other C site; A and B sites stay undriven."""
    tid = lattice.site_id(target)
    if lattice.sites[tid].sublattice != "C":
        raise ModelError(
            f"background drive target {lattice.sites[tid].name} is not a C site"
        )
    amps = _zero_amplitudes(lattice)
    for s in lattice.sites:
        if s.sublattice == "C":
            amps[s.id] = background
    amps[tid] = amplitude
    return DriveScheme(tuple(amps))


def drive_two_site(lattice: Lattice, targets, amplitude: complex) -> DriveScheme:
    """Equal coherent drive on two distinct sites."""
    if len(targets) != 2:
        raise ModelError("drive_two_site needs exactly two targets")
    ids = [lattice.site_id(t) for t in targets]
    if ids[0] == ids[1]:
        raise ModelError("drive_two_site targets must be distinct")
    amps = _zero_amplitudes(lattice)
    for i in ids:
        amps[i] = amplitude
    return DriveScheme(tuple(amps))
