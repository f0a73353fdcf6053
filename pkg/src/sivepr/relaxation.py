"""Spin-lattice relaxation: the 1/T1(T) model, its weighted fit, and the
conversion of high-temperature EPR linewidths into indirect 1/T1 estimates.

The rate model is a constant floor plus a two-phonon Raman term (T^7, as for
a non-Kramers doublet) plus an Orbach term through a phonon-accessible level
at energy delta_e:

    1/T1 = a_const + a_raman * T^7 + a_orbach / (exp(delta_e / kB T) - 1)
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import least_squares

from .constants import BOLTZMANN_MEV_PER_K, GAMMA_E_MHZ_PER_MT
from .errors import PreconditionError

PARAM_NAMES = ("a_const_per_s", "a_raman_per_s_k7", "a_orbach_per_s", "delta_e_mev")

SOURCE_DIRECT = "direct"
SOURCE_LINEWIDTH = "linewidth"

# Offset subtracted from linewidth-converted rates so indirect values match
# the directly measured T1 at room temperature (unresolved 13C couplings
# broaden the line without shortening T1).
DEFAULT_LINEWIDTH_OFFSET_MHZ = 0.250

_EXP_SWITCH = 50.0  # beyond this exponent, 1/(e^x - 1) == e^-x to double precision


@dataclass(frozen=True)
class RelaxationParams:
    """Coefficients of the 1/T1(T) model.

    Defaults are the fitted coefficients for SiV0 in diamond.
    """

    a_const_per_s: float = 0.036
    a_raman_per_s_k7: float = 5.0e-13
    a_orbach_per_s: float = 1.5e5
    delta_e_mev: float = 22.0

    def __post_init__(self):
        for name in ("a_const_per_s", "a_raman_per_s_k7", "a_orbach_per_s"):
            if getattr(self, name) < 0.0:
                raise PreconditionError(f"{name} must be >= 0")
        if self.delta_e_mev <= 0.0:
            raise PreconditionError("delta_e_mev must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES])

    @classmethod
    def from_array(cls, values) -> "RelaxationParams":
        return cls(**dict(zip(PARAM_NAMES, (float(v) for v in values))))


def _orbach_factor(x):
    """1/(exp(x) - 1), overflow-safe for large x (tends to exp(-x), never NaN)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < _EXP_SWITCH
    out[small] = 1.0 / np.expm1(x[small])
    out[~small] = np.exp(-x[~small])
    return out


def relaxation_rate(params: RelaxationParams, t_k):
    """1/T1 in s^-1 at temperature(s) t_k. Accepts scalars or arrays."""
    t = np.asarray(t_k, dtype=float)
    if np.any(t <= 0.0):
        raise PreconditionError("temperature must be positive")
    x = params.delta_e_mev / (BOLTZMANN_MEV_PER_K * t)
    rate = (
        params.a_const_per_s
        + params.a_raman_per_s_k7 * t**7
        + params.a_orbach_per_s * _orbach_factor(x)
    )
    return float(rate) if np.isscalar(t_k) else rate


def t1_time(params: RelaxationParams, t_k):
    """T1 in seconds at temperature(s) t_k."""
    rate = relaxation_rate(params, t_k)
    return 1.0 / rate


@dataclass(frozen=True)
class T1Point:
    temperature_k: float
    t1_s: float
    sigma_s: Optional[float] = None
    source: str = SOURCE_DIRECT

    def __post_init__(self):
        if self.temperature_k <= 0.0:
            raise PreconditionError("temperature must be positive")
        if self.t1_s <= 0.0:
            raise PreconditionError("t1 must be positive")
        if self.sigma_s is not None and self.sigma_s <= 0.0:
            raise PreconditionError("sigma must be positive when present")
        if self.source not in (SOURCE_DIRECT, SOURCE_LINEWIDTH):
            raise PreconditionError(f"unknown source tag {self.source!r}")


@dataclass(frozen=True)
class T1Dataset:
    points: tuple[T1Point, ...]

    def __len__(self):
        return len(self.points)

    def temperatures(self) -> np.ndarray:
        return np.array([p.temperature_k for p in self.points])

    def rates(self) -> np.ndarray:
        return np.array([1.0 / p.t1_s for p in self.points])


@dataclass(frozen=True)
class RelaxationFit:
    params: RelaxationParams
    covariance: np.ndarray  # 4x4, PARAM_NAMES order; zero rows/cols for fixed params
    residuals: np.ndarray  # weighted log-space residuals, dataset order
    converged: bool
    warnings: tuple[str, ...] = ()


def fit_relaxation(
    data: T1Dataset,
    init: RelaxationParams,
    fixed: Sequence[str] = (),
    linewidth_weight: float = 0.5,
) -> RelaxationFit:
    """Weighted nonlinear least squares on log(1/T1).

    The data span many decades of rate, so residuals are taken in log space,
    and the free parameters are fitted as logarithms, which keeps them
    positive and makes the solver's relative step criterion meaningful across
    very different coefficient scales. Rows tagged 'linewidth' are indirect
    measurements and enter with the given weight multiplier. ``fixed`` names
    parameters held at their init value; fixing a_orbach at zero also freezes
    delta_e, which is then unidentifiable.
    """
    fixed = tuple(fixed)
    for name in fixed:
        if name not in PARAM_NAMES:
            raise PreconditionError(f"unknown parameter name in fixed mask: {name!r}")
    if linewidth_weight <= 0.0:
        raise PreconditionError("linewidth_weight must be positive")

    warnings: list[str] = []
    if "a_orbach_per_s" in fixed and init.a_orbach_per_s == 0.0 and "delta_e_mev" not in fixed:
        fixed = fixed + ("delta_e_mev",)
        warnings.append("delta_e_mev frozen: unidentifiable while a_orbach_per_s is fixed at 0")

    free_idx = [i for i, n in enumerate(PARAM_NAMES) if n not in fixed]
    n_free = len(free_idx)
    if len(data) < max(n_free, 2):
        raise PreconditionError(
            f"need at least {max(n_free, 2)} data points for {n_free} free parameters, "
            f"got {len(data)}"
        )
    temps = data.temperatures()
    if temps.max() / temps.min() < 10.0:
        raise PreconditionError(
            "temperatures must span at least one decade "
            f"(got {temps.min():g} to {temps.max():g} K)"
        )

    full0 = init.as_array()
    for i in free_idx:
        if full0[i] <= 0.0:
            raise PreconditionError(
                f"free parameter {PARAM_NAMES[i]} needs a positive initial value "
                "(fix it instead to pin it at zero)"
            )

    log_rate_obs = np.log(data.rates())
    weights = np.ones(len(data))
    for i, p in enumerate(data.points):
        if p.sigma_s is not None:
            weights[i] = p.t1_s / p.sigma_s  # sigma of log(1/T1) is sigma_s/t1_s
        if p.source == SOURCE_LINEWIDTH:
            weights[i] *= math.sqrt(linewidth_weight)

    def expand(theta: np.ndarray) -> np.ndarray:
        full = full0.copy()
        full[free_idx] = np.exp(theta)
        return full

    def residual(theta: np.ndarray) -> np.ndarray:
        p = expand(theta)
        x = p[3] / (BOLTZMANN_MEV_PER_K * temps)
        rate = p[0] + p[1] * temps**7 + p[2] * _orbach_factor(x)
        rate = np.maximum(rate, 1e-300)
        return weights * (np.log(rate) - log_rate_obs)

    theta0 = np.log(full0[free_idx])
    result = least_squares(
        residual,
        theta0,
        method="lm",
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=10000,
    )
    converged = result.status > 0
    if not converged:
        warnings.append(f"fit did not converge: {result.message}")

    jac = result.jac
    sv = np.linalg.svd(jac, compute_uv=False) if jac.size else np.array([])
    if sv.size and (sv.min() == 0.0 or sv.min() / sv.max() < 1e-10):
        _, _, vt = np.linalg.svd(jac)
        null_vec = vt[-1]
        combo = ", ".join(
            PARAM_NAMES[free_idx[k]] for k in range(n_free) if abs(null_vec[k]) > 0.1
        )
        warnings.append(f"near-singular Jacobian; unidentifiable combination: {combo}")

    dof = len(data) - n_free
    s2 = 2.0 * result.cost / dof if dof > 0 else float("nan")
    cov_theta = s2 * np.linalg.pinv(jac.T @ jac)
    params = RelaxationParams.from_array(expand(result.x))
    # Delta method: covariance of p = diag(p) cov_log diag(p) for p = exp(theta).
    scale = params.as_array()[free_idx]
    cov_free = cov_theta * np.outer(scale, scale)
    cov = np.zeros((4, 4))
    for a, ia in enumerate(free_idx):
        for b, ib in enumerate(free_idx):
            cov[ia, ib] = cov_free[a, b]

    return RelaxationFit(
        params=params,
        covariance=cov,
        residuals=residual(result.x),
        converged=converged,
        warnings=tuple(warnings),
    )


def linewidth_to_rate(linewidth_pp_mt: float, offset_mhz: float = DEFAULT_LINEWIDTH_OFFSET_MHZ) -> float:
    """Indirect 1/T1 estimate in s^-1 from a peak-to-peak linewidth in mT.

    The width converts to frequency at 28.025 MHz/mT; the offset removes the
    temperature-independent contribution (e.g. unresolved hyperfine
    broadening). Valid only where coherence is lifetime-limited (T2 <= 2 T1),
    so results should be treated as estimates and tagged 'linewidth'.
    """
    if linewidth_pp_mt <= 0.0:
        raise PreconditionError("linewidth must be positive")
    rate_mhz = linewidth_pp_mt * GAMMA_E_MHZ_PER_MT - offset_mhz
    if rate_mhz <= 0.0:
        raise PreconditionError(
            f"converted linewidth ({linewidth_pp_mt * GAMMA_E_MHZ_PER_MT:g} MHz) does not "
            f"exceed the offset ({offset_mhz:g} MHz); below calibration floor"
        )
    return rate_mhz * 1e6
