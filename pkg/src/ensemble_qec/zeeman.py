"""Ground-state hyperfine Zeeman energies from the Breit-Rabi formula.

Energies are in Hz, fields in gauss.  ``g_I`` follows the sign convention in
which the nuclear term is ``+g_I mu_B m B`` (negative ``g_I`` for 87Rb and
133Cs).  Species constants are the standard alkali D-line reference values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.constants import physical_constants
from scipy.optimize import brentq

MU_B_HZ_PER_GAUSS = physical_constants["Bohr magneton in Hz/T"][0] * 1e-4


@dataclass(frozen=True)
class HyperfineSpecies:
    name: str
    nuclear_spin: float
    hyperfine_hz: float
    g_j: float
    g_i: float

    def __post_init__(self):
        if self.hyperfine_hz <= 0:
            raise ValueError("hyperfine splitting must be positive")
        if self.nuclear_spin <= 0 or (2 * self.nuclear_spin) % 1:
            raise ValueError("nuclear spin must be a positive multiple of 1/2")

    @property
    def f_lower(self) -> float:
        return self.nuclear_spin - 0.5

    @property
    def f_upper(self) -> float:
        return self.nuclear_spin + 0.5

    @property
    def nuclear_bound(self) -> float:
        """Relative linear mismatch ``|g_I (2I+1) / (g_J - g_I)|`` of a clock pair."""
        return abs(self.g_i * (2 * self.nuclear_spin + 1) / (self.g_j - self.g_i))


RB87 = HyperfineSpecies("rb87", 1.5, 6_834_682_610.904, 2.00233113, -0.0009951414)
CS133 = HyperfineSpecies("cs133", 3.5, 9_192_631_770.0, 2.00254032, -0.00039885395)
SPECIES = {s.name: s for s in (RB87, CS133)}


def _check(species: HyperfineSpecies, f: float, m: float):
    if f not in (species.f_lower, species.f_upper):
        raise ValueError(f"f={f} is not a ground hyperfine level of {species.name}")
    if abs(m) > f or (m - f) % 1:
        raise ValueError(f"invalid sublevel m={m} for f={f}")


def zeeman_energy(species: HyperfineSpecies, f: float, m: float, b_gauss):
    """Breit-Rabi energy of ``|f, m>`` in Hz (array-valued in ``b_gauss``)."""
    _check(species, f, m)
    b = np.asarray(b_gauss, dtype=float)
    two_i1 = 2 * species.nuclear_spin + 1
    dhf = species.hyperfine_hz
    x = (species.g_j - species.g_i) * MU_B_HZ_PER_GAUSS * b / dhf
    base = -dhf / (2 * two_i1) + species.g_i * MU_B_HZ_PER_GAUSS * m * b
    sign = 1.0 if f == species.f_upper else -1.0
    if abs(m) == species.f_upper:
        # stretched states: the square root is exactly 1 + sign(m) x
        root = 1 + np.sign(m) * x
    else:
        root = np.sqrt(1 + 4 * m * x / two_i1 + x**2)
    return base + sign * 0.5 * dhf * root


def zeeman_slope(species: HyperfineSpecies, f: float, m: float, b_gauss):
    """``dE/dB`` in Hz per gauss."""
    _check(species, f, m)
    b = np.asarray(b_gauss, dtype=float)
    two_i1 = 2 * species.nuclear_spin + 1
    dhf = species.hyperfine_hz
    k = (species.g_j - species.g_i) * MU_B_HZ_PER_GAUSS / dhf
    x = k * b
    sign = 1.0 if f == species.f_upper else -1.0
    if abs(m) == species.f_upper:
        droot = np.sign(m) * k * np.ones_like(b)
    else:
        droot = (2 * m / two_i1 + x) * k / np.sqrt(1 + 4 * m * x / two_i1 + x**2)
    return species.g_i * MU_B_HZ_PER_GAUSS * m + sign * 0.5 * dhf * droot


def zeeman_curvature(species: HyperfineSpecies, f: float, m: float) -> float:
    """Quadratic coefficient ``(1/2) d^2E/dB^2`` at zero field, Hz per gauss^2."""
    _check(species, f, m)
    if abs(m) == species.f_upper:
        return 0.0
    two_i1 = 2 * species.nuclear_spin + 1
    k = (species.g_j - species.g_i) * MU_B_HZ_PER_GAUSS / species.hyperfine_hz
    a = 4 * m / two_i1
    sign = 1.0 if f == species.f_upper else -1.0
    return sign * 0.5 * species.hyperfine_hz * (0.5 - a * a / 8) * k * k


@dataclass
class PairShift:
    m: float
    linear_low: float
    linear_high: float
    linear_difference: float
    relative_mismatch: float
    nuclear_bound: float
    quadratic_coefficient: float
    b_gauss: np.ndarray
    e_low: np.ndarray
    e_high: np.ndarray
    differential: np.ndarray
    magic_field: Optional[float]


def pair_shift_analysis(species: HyperfineSpecies, m: float, b_range=(0.0, 10.0), points: int = 201) -> PairShift:
    """Zeeman behaviour of the pair ``|f, m>``, ``|f+1, -m>`` with ``f = I - 1/2``.

    ``relative_mismatch`` is ``|a - b| / |a + b|`` for the zero-field slopes
    ``a, b`` (zero when both slopes vanish).  ``magic_field`` is a zero of the
    differential slope inside ``b_range``, if any.
    """
    f_lo, f_hi = species.f_lower, species.f_upper
    _check(species, f_lo, m)
    _check(species, f_hi, -m)
    a = float(zeeman_slope(species, f_lo, m, 0.0))
    b = float(zeeman_slope(species, f_hi, -m, 0.0))
    rel = abs(a - b) / abs(a + b) if a + b else 0.0
    quad = zeeman_curvature(species, f_hi, -m) - zeeman_curvature(species, f_lo, m)
    grid = np.linspace(b_range[0], b_range[1], points)
    e_lo = zeeman_energy(species, f_lo, m, grid)
    e_hi = zeeman_energy(species, f_hi, -m, grid)

    def dslope(x):
        return float(zeeman_slope(species, f_hi, -m, x) - zeeman_slope(species, f_lo, m, x))

    magic = None
    vals = [dslope(x) for x in grid]
    for x0, x1, v0, v1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if v0 == 0.0:
            magic = float(x0)
            break
        if v0 * v1 < 0:
            magic = brentq(dslope, x0, x1, xtol=1e-12)
            break
    return PairShift(m, a, b, b - a, rel, species.nuclear_bound, quad, grid, e_lo, e_hi, e_hi - e_lo, magic)
