"""Closed-form optimal-antibunching parameters for the driven 3-site chain
and the weak-drive two-boson amplitude solver.

The optimality condition is the complex cubic

    4 z^3 - U z^2 - J^2 U = 0,      z = Delta + i gamma / 2,

whose real and imaginary parts must vanish simultaneously. Solving the
imaginary part for Delta gives a quadratic with one admissible (negative)
branch; substituting into the real part yields the hopping. The returned
pair makes both residuals vanish to machine precision.

The weak-drive solver expands the steady state over Fock states with at
most two bosons on the 3-site chain (drive on the C end), normalizes the
vacuum amplitude to 1, and solves the one-boson 3x3 system followed by the
two-boson 6x6 system sourced by the one-boson amplitudes. Second-order
correlations at leading order in the drive follow from the amplitude
ratios; corrections are O(F^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)


class AnalyticError(ValueError):
    """Invalid inputs or singular sector in the analytic solvers."""


# -- optimal parameters ----------------------------------------------------


def optimal_detuning(u: float, gamma: float = 1.0) -> float:
    """Detuning minimizing double occupation of the dark site.

    Negative branch of the quadratic from the imaginary part of the
    optimality cubic: (U - sqrt(U^2 + 12 gamma^2)) / 12, evaluated in the
    conjugate form -gamma^2 / (U + sqrt(U^2 + 12 gamma^2)) to avoid the
    cancellation of the direct difference at large U.
    """
    if u <= 0 or gamma <= 0:
        raise AnalyticError("optimal_detuning needs u > 0 and gamma > 0")
    g2 = gamma * gamma
    return -g2 / (u + math.sqrt(u * u + 12.0 * g2))


def optimal_hopping(u: float, gamma: float = 1.0) -> float:
    """Hopping amplitude paired with optimal_detuning.

    J = sqrt(gamma^2/4 - D^2 + 4 D^3 / U - 3 gamma^2 D / U) with
    D = optimal_detuning(u, gamma). The radicand is positive for all
    u > 0 (D < 0); a negative radicand signals invalid inputs.
    """
    d = optimal_detuning(u, gamma)
    radicand = (
        gamma * gamma / 4.0
        - d * d
        + 4.0 * d**3 / u
        - 3.0 * gamma * gamma * d / u
    )
    if radicand < 0:
        raise AnalyticError("negative radicand in optimal_hopping")
    return math.sqrt(radicand)


def optimality_residuals(
    delta: float, j: float, u: float, gamma: float = 1.0
) -> tuple:
    """(Re, Im) of 4 z^3 - U z^2 - J^2 U at z = delta + i gamma / 2.

    Both components vanish at (optimal_detuning, optimal_hopping); the
    magnitudes scale as gamma^3 away from the optimum.
    """
    z = complex(delta, gamma / 2.0)
    value = 4.0 * z**3 - u * z**2 - j * j * u
    return (value.real, value.imag)


# -- weak-drive amplitudes -------------------------------------------------


@dataclass(frozen=True)
class WeakDriveAmplitudes:
    """Fock amplitudes |n_1 n_2 n_3> of the weak-drive expansion on the
    3-site chain, vacuum normalized to 1. Site 1 carries the drive and the
    C label; site 2 is the dark B site; site 3 the far A site. The pump
    enters only through the detuning delta = omega_pump - omega."""

    c000: complex
    c100: complex
    c010: complex
    c001: complex
    c200: complex
    c020: complex
    c002: complex
    c110: complex
    c101: complex
    c011: complex
    delta: float
    u: float
    gamma: float
    j: float
    f: complex
    omega: float = 0.0

    @property
    def omega_pump(self) -> float:
        return self.omega + self.delta

    def singles(self) -> dict:
        return {"C": self.c100, "B": self.c010, "A": self.c001}

    def doubles(self) -> dict:
        return {"C": self.c200, "B": self.c020, "A": self.c002}

    def hierarchy_ok(self) -> bool:
        """Soft diagnostic: two-boson amplitudes well below one-boson ones,
        which in turn stay well below the vacuum, as expected for weak
        drives (|F| <= 0.01 gamma)."""
        one = max(abs(self.c100), abs(self.c010), abs(self.c001))
        two = max(
            abs(self.c200),
            abs(self.c020),
            abs(self.c002),
            abs(self.c110),
            abs(self.c101),
            abs(self.c011),
        )
        return two < 0.1 * one < 0.01 * abs(self.c000)


def _solve_sector(matrix: np.ndarray, rhs: np.ndarray, sector: str) -> np.ndarray:
    cond = np.linalg.cond(matrix)
    if not np.isfinite(cond) or cond > 1e13:
        raise AnalyticError(f"singular {sector} sector (resonance)")
    return np.linalg.solve(matrix, rhs)


def solve_weak_drive_3site(
    delta: float, u: float, gamma: float, j: float, f: complex
) -> WeakDriveAmplitudes:
    """Solve the truncated steady-state amplitude equations.

    One-boson sector (unknowns c100, c010, c001):
        L1 c100 + J c010           = -F
        L1 c010 + J (c100 + c001)  = 0
        L1 c001 + J c010           = 0
    with L1 = -delta - i gamma / 2. Two-boson sector (unknowns c200, c020,
    c002, c110, c101, c011) with L2 = 2 (-delta + U/2 - i gamma/2) and
    L11 = 2 (-delta - i gamma/2):
        L2 c200 + sqrt2 J c110                        = -sqrt2 F c100
        L2 c020 + sqrt2 J (c110 + c011)               = 0
        L2 c002 + sqrt2 J c011                        = 0
        L11 c110 + J (c101 + sqrt2 (c200 + c020))     = -F c010
        L11 c101 + J (c110 + c011)                    = -F c001
        L11 c011 + J (c101 + sqrt2 (c002 + c020))     = 0
    No constraint is imposed on c020; its suppression at the optimal
    parameters is an output, not an input.
    """
    l1 = -delta - 0.5j * gamma
    m1 = np.array(
        [[l1, j, 0.0], [j, l1, j], [0.0, j, l1]], dtype=complex
    )
    r1 = np.array([-f, 0.0, 0.0], dtype=complex)
    c100, c010, c001 = _solve_sector(m1, r1, "one-boson")

    l2 = 2.0 * (-delta + 0.5 * u - 0.5j * gamma)
    l11 = 2.0 * (-delta - 0.5j * gamma)
    m2 = np.array(
        [
            [l2, 0, 0, SQRT2 * j, 0, 0],
            [0, l2, 0, SQRT2 * j, 0, SQRT2 * j],
            [0, 0, l2, 0, 0, SQRT2 * j],
            [SQRT2 * j, SQRT2 * j, 0, l11, j, 0],
            [0, 0, 0, j, l11, j],
            [0, SQRT2 * j, SQRT2 * j, 0, j, l11],
        ],
        dtype=complex,
    )
    r2 = np.array(
        [-SQRT2 * f * c100, 0, 0, -f * c010, -f * c001, 0], dtype=complex
    )
    c200, c020, c002, c110, c101, c011 = _solve_sector(m2, r2, "two-boson")

    return WeakDriveAmplitudes(
        c000=1.0 + 0.0j,
        c100=c100,
        c010=c010,
        c001=c001,
        c200=c200,
        c020=c020,
        c002=c002,
        c110=c110,
        c101=c101,
        c011=c011,
        delta=delta,
        u=u,
        gamma=gamma,
        j=j,
        f=complex(f),
    )


def weak_drive_residuals(a: WeakDriveAmplitudes) -> np.ndarray:
    """Back-substitution residuals of all nine amplitude equations."""
    d, u, g, j, f = a.delta, a.u, a.gamma, a.j, a.f
    l1 = -d - 0.5j * g
    l2 = 2.0 * (-d + 0.5 * u - 0.5j * g)
    l11 = 2.0 * (-d - 0.5j * g)
    return np.array(
        [
            l1 * a.c100 + j * a.c010 + f * a.c000,
            l1 * a.c010 + j * (a.c100 + a.c001),
            l1 * a.c001 + j * a.c010,
            l2 * a.c200 + SQRT2 * j * a.c110 + SQRT2 * f * a.c100,
            l2 * a.c020 + SQRT2 * j * (a.c110 + a.c011),
            l2 * a.c002 + SQRT2 * j * a.c011,
            l11 * a.c110 + j * (a.c101 + SQRT2 * (a.c200 + a.c020)) + f * a.c010,
            l11 * a.c101 + j * (a.c110 + a.c011) + f * a.c001,
            l11 * a.c011 + j * (a.c101 + SQRT2 * (a.c002 + a.c020)),
        ],
        dtype=complex,
    )


def weak_drive_g2(amplitudes: WeakDriveAmplitudes) -> dict:
    """Leading-order g2(0) per site label from the amplitude ratios:
    2 |c_double|^2 / |c_single|^4. Valid only in the weak-drive regime;
    dropped corrections are O(F^2)."""
    singles = amplitudes.singles()
    doubles = amplitudes.doubles()
    out = {}
    for lab in ("C", "B", "A"):
        s = abs(singles[lab])
        if s == 0.0:
            raise AnalyticError(
                f"vanishing single-occupation amplitude on site {lab}"
            )
        out[lab] = 2.0 * abs(doubles[lab]) ** 2 / s**4
    return out
