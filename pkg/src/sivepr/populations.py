"""Ground-triplet population bookkeeping.

Thermal (Boltzmann) populations, EPR transition population differences, the
microwave-saturation rescaling of dark intensities, recovery of populations
under optical pumping from measured line intensities, and the optical
spin-polarization degree. Intensities carry spectrometer-arbitrary units and
enter only as ratios; their sign encodes phase (positive in absorption,
negative in emission).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .constants import KELVIN_PER_MHZ
from .errors import InconsistentInputError, PreconditionError

_RANGE_TOL = 1e-9  # tolerated excursion of a population beyond [0, 1]
_SUM_TOL = 1e-12

CONDITION_DARK = "dark"
CONDITION_LIGHT = "light"


@dataclass(frozen=True)
class LevelPopulations:
    """Fractional populations of the m_s = +1, 0, -1 sublevels (sum to one)."""

    p_plus1: float
    p_zero: float
    p_minus1: float

    def __post_init__(self):
        for name, p in (("p_plus1", self.p_plus1), ("p_zero", self.p_zero),
                        ("p_minus1", self.p_minus1)):
            if not (-_RANGE_TOL <= p <= 1.0 + _RANGE_TOL):
                raise PreconditionError(f"{name} = {p!r} is outside [0, 1]")
        total = self.p_plus1 + self.p_zero + self.p_minus1
        if abs(total - 1.0) > _SUM_TOL:
            raise PreconditionError(f"populations must sum to 1 within {_SUM_TOL:g}, got {total!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.p_plus1, self.p_zero, self.p_minus1])

    @classmethod
    def from_array(cls, values) -> "LevelPopulations":
        p = np.asarray(values, dtype=float)
        return cls(p_plus1=float(p[0]), p_zero=float(p[1]), p_minus1=float(p[2]))


@dataclass(frozen=True)
class TransitionIntensities:
    """Signed intensities of the two EPR lines under one condition.

    i_low is the 0<->+1 (low-field) line, i_high the 0<->-1 (high-field) line.
    """

    i_low: float
    i_high: float
    condition: str
    temperature_k: float

    def __post_init__(self):
        if self.condition not in (CONDITION_DARK, CONDITION_LIGHT):
            raise PreconditionError(
                f"condition must be '{CONDITION_DARK}' or '{CONDITION_LIGHT}', got {self.condition!r}"
            )
        if self.temperature_k <= 0.0:
            raise PreconditionError("temperature must be positive")


class PopulationDifferences(NamedTuple):
    eta_plus1_zero: float
    eta_zero_minus1: float


def thermal_populations(level_energies_mhz, t_k: float) -> LevelPopulations:
    """Boltzmann populations for level energies given in MHz, ordered (+1, 0, -1).

    Invariant under adding a constant to all energies.
    """
    if t_k <= 0.0:
        raise PreconditionError("temperature must be positive")
    e = np.asarray(level_energies_mhz, dtype=float)
    if e.shape != (3,):
        raise PreconditionError("expected exactly three level energies")
    x = -e * (KELVIN_PER_MHZ / t_k)
    x -= x.max()
    w = np.exp(x)
    return LevelPopulations.from_array(w / w.sum())


def population_differences(p: LevelPopulations) -> PopulationDifferences:
    """EPR-relevant differences: (p0 - p+1) for the low line, (p-1 - p0) for the high line."""
    return PopulationDifferences(
        eta_plus1_zero=p.p_zero - p.p_plus1,
        eta_zero_minus1=p.p_minus1 - p.p_zero,
    )


def unsaturated_dark_intensity(i_dark_rt: float, eta_dark_t: float, eta_dark_rt: float) -> float:
    """Dark intensity at temperature T, rescaled from the room-temperature
    reference by the ratio of thermal population differences."""
    if eta_dark_rt == 0.0:
        raise PreconditionError("reference population difference is zero; cannot rescale")
    return i_dark_rt * (eta_dark_t / eta_dark_rt)


def _pump_ratios(i_light: TransitionIntensities, i_dark_rt: TransitionIntensities,
                 eta_dark_rt) -> tuple[float, float]:
    if i_light.condition != CONDITION_LIGHT:
        raise PreconditionError("i_light must carry condition 'light'")
    if i_dark_rt.condition != CONDITION_DARK:
        raise PreconditionError("i_dark_rt must carry condition 'dark'")
    if i_dark_rt.i_low == 0.0 or i_dark_rt.i_high == 0.0:
        raise PreconditionError("dark reference intensities must be nonzero")
    eta_low, eta_high = float(eta_dark_rt[0]), float(eta_dark_rt[1])
    q_low = eta_low * i_light.i_low / i_dark_rt.i_low
    q_high = eta_high * i_light.i_high / i_dark_rt.i_high
    return q_low, q_high


def populations_under_light(
    i_light: TransitionIntensities,
    i_dark_rt: TransitionIntensities,
    eta_dark_rt,
) -> LevelPopulations:
    """Occupation probabilities under illumination from measured intensities.

    ``eta_dark_rt`` is the pair of thermal population differences at the dark
    reference temperature, ordered like PopulationDifferences. The result sums
    to one by construction; populations outside [0, 1] beyond 1e-9 indicate
    inconsistent (e.g. saturated) input and raise rather than clamp.
    """
    q_low, q_high = _pump_ratios(i_light, i_dark_rt, eta_dark_rt)
    p_plus1 = (1.0 - 2.0 * q_low - q_high) / 3.0
    p_zero = (1.0 + q_low - q_high) / 3.0
    p_minus1 = (1.0 + q_low + 2.0 * q_high) / 3.0
    for name, p in (("p_plus1", p_plus1), ("p_zero", p_zero), ("p_minus1", p_minus1)):
        if not (-_RANGE_TOL <= p <= 1.0 + _RANGE_TOL):
            raise InconsistentInputError(
                f"intensities imply {name} = {p!r} outside [0, 1]; "
                "input is likely saturated or mislabeled"
            )
    return LevelPopulations(p_plus1=p_plus1, p_zero=p_zero, p_minus1=p_minus1)


def polarization_degree(p_light: LevelPopulations, p_dark: LevelPopulations) -> float:
    """Optical spin polarization in percent.

    Zero when the m_s = 0 population is unchanged from the dark state; 100
    when every spin sits in m_s = 0.
    """
    denom = p_dark.p_plus1 + p_dark.p_minus1
    if denom <= 0.0:
        raise PreconditionError("dark state has no population outside m_s = 0")
    return 100.0 * (p_light.p_zero - p_dark.p_zero) / denom


def polarization_estimates(
    i_light: TransitionIntensities,
    i_dark_rt: TransitionIntensities,
    eta_dark_rt,
    p_dark: LevelPopulations,
) -> dict[str, float]:
    """Polarization degree from both lines and from each line alone.

    'combined' uses both measured lines (this equals the least-squares
    estimate under a symmetric-depletion model, since p0 depends only on the
    difference of the two pump ratios). 'low_line'/'high_line' assume the
    +1 and -1 sublevels deplete symmetrically and use a single line.
    """
    q_low, q_high = _pump_ratios(i_light, i_dark_rt, eta_dark_rt)
    denom = p_dark.p_plus1 + p_dark.p_minus1
    if denom <= 0.0:
        raise PreconditionError("dark state has no population outside m_s = 0")

    def xi(p_zero_light: float) -> float:
        return 100.0 * (p_zero_light - p_dark.p_zero) / denom

    return {
        "combined": xi((1.0 + q_low - q_high) / 3.0),
        "low_line": xi((1.0 + 2.0 * q_low) / 3.0),
        "high_line": xi((1.0 - 2.0 * q_high) / 3.0),
    }


def intensities_from_populations(
    p_light: LevelPopulations,
    i_dark_rt: TransitionIntensities,
    eta_dark_rt,
    temperature_k: float,
) -> TransitionIntensities:
    """Forward synthesis: light-condition intensities that a given population
    state would produce against the dark room-temperature reference. Inverse
    of populations_under_light; mainly for tests and synthetic data.
    """
    if i_dark_rt.i_low == 0.0 or i_dark_rt.i_high == 0.0:
        raise PreconditionError("dark reference intensities must be nonzero")
    eta_low, eta_high = float(eta_dark_rt[0]), float(eta_dark_rt[1])
    if eta_low == 0.0 or eta_high == 0.0:
        raise PreconditionError("reference population differences must be nonzero")
    diffs = population_differences(p_light)
    return TransitionIntensities(
        i_low=diffs.eta_plus1_zero * i_dark_rt.i_low / eta_low,
        i_high=diffs.eta_zero_minus1 * i_dark_rt.i_high / eta_high,
        condition=CONDITION_LIGHT,
        temperature_k=temperature_k,
    )
