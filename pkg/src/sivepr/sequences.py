"""Phenomenological pulse-sequence signal models.

Inversion recovery (single-exponential return of longitudinal polarization)
and Hahn echo decay (single-exponential loss of coherence against total
evolution time 2*tau). Includes seedable synthetic-noise generation and
decay-constant extraction by nonlinear least squares.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional

import numpy as np
from scipy.optimize import least_squares

from .errors import NumericalError, PreconditionError

KIND_INVERSION_RECOVERY = "inversion-recovery"
KIND_ECHO_DECAY = "echo-decay"
_KINDS = (KIND_INVERSION_RECOVERY, KIND_ECHO_DECAY)

_MIN_POINTS = 5


@dataclass(frozen=True)
class DecayCurve:
    """Sampled decay signal: delays in s (strictly increasing, >= 0).

    For echo decays the delay axis is the total evolution time 2*tau.
    """

    kind: str
    delays_s: np.ndarray
    amplitudes: np.ndarray
    sigmas: Optional[np.ndarray] = None
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise PreconditionError(f"unknown curve kind {self.kind!r}")
        delays = np.asarray(self.delays_s, dtype=float)
        amps = np.asarray(self.amplitudes, dtype=float)
        if delays.ndim != 1 or delays.shape != amps.shape:
            raise PreconditionError("delays and amplitudes must be 1-d arrays of equal length")
        if delays.size and delays[0] < 0.0:
            raise PreconditionError("delays must be >= 0")
        if np.any(np.diff(delays) <= 0.0):
            raise PreconditionError("delays must be strictly increasing")
        sig = self.sigmas
        if sig is not None:
            sig = np.asarray(sig, dtype=float)
            if sig.shape != delays.shape:
                raise PreconditionError("sigmas must match the delay grid")
            if np.any(sig <= 0.0):
                raise PreconditionError("sigmas must be strictly positive")
            sig = sig.copy()
            sig.setflags(write=False)
        delays = delays.copy()
        amps = amps.copy()
        delays.setflags(write=False)
        amps.setflags(write=False)
        object.__setattr__(self, "delays_s", delays)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "sigmas", sig)
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))


def simulate_inversion_recovery(t1_s: float, m_eq: float, m_init: float, tau_grid_s) -> DecayCurve:
    """M(tau) = m_eq - (m_eq - m_init) exp(-tau/t1)."""
    if t1_s <= 0.0:
        raise PreconditionError("t1 must be positive")
    tau = np.asarray(tau_grid_s, dtype=float)
    amps = m_eq - (m_eq - m_init) * np.exp(-tau / t1_s)
    return DecayCurve(
        kind=KIND_INVERSION_RECOVERY,
        delays_s=tau,
        amplitudes=amps,
        meta={"t1_s": t1_s, "m_eq": m_eq, "m_init": m_init},
    )


def simulate_echo_decay(t2_s: float, s0: float, tau_grid_s, total_time: bool = False) -> DecayCurve:
    """S(2 tau) = s0 exp(-2 tau / t2), stored against total evolution time.

    ``tau_grid_s`` is the single inter-pulse delay tau; pass total_time=True
    if the grid already holds 2*tau values.
    """
    if t2_s <= 0.0:
        raise PreconditionError("t2 must be positive")
    tau = np.asarray(tau_grid_s, dtype=float)
    t_total = tau if total_time else 2.0 * tau
    amps = s0 * np.exp(-t_total / t2_s)
    return DecayCurve(
        kind=KIND_ECHO_DECAY,
        delays_s=t_total,
        amplitudes=amps,
        meta={"t2_s": t2_s, "s0": s0, "abscissa": "total-evolution-time"},
    )


def add_noise(curve: DecayCurve, fraction: float, seed: int) -> DecayCurve:
    """Additive Gaussian noise with sigma = fraction * max|amplitude|.

    The seed is recorded in the curve metadata so synthetic datasets are
    reproducible.
    """
    if fraction < 0.0:
        raise PreconditionError("noise fraction must be >= 0")
    scale = float(np.max(np.abs(curve.amplitudes)))
    sigma = fraction * scale
    rng = np.random.default_rng(seed)
    noisy = curve.amplitudes + rng.normal(0.0, sigma, curve.amplitudes.shape)
    meta = dict(curve.meta)
    meta.update({"seed": seed, "noise_fraction": fraction, "noise_sigma": sigma})
    sigmas = np.full_like(curve.amplitudes, sigma) if sigma > 0.0 else None
    return DecayCurve(
        kind=curve.kind,
        delays_s=curve.delays_s,
        amplitudes=noisy,
        sigmas=sigmas,
        meta=meta,
    )


@dataclass(frozen=True)
class DecayFit:
    time_constant_s: float
    amplitudes: Mapping  # model-dependent: {m_eq, m_init} or {s0}
    covariance: np.ndarray  # parameter order as documented per kind
    stretch: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", MappingProxyType(dict(self.amplitudes)))


def _echo_initial_guess(t, a):
    positive = a > 0
    if positive.sum() >= 2:
        slope, intercept = np.polyfit(t[positive], np.log(a[positive]), 1)
        if slope < 0.0:
            return -1.0 / slope, math.exp(intercept)
    span = t[-1] - t[0] if t[-1] > t[0] else 1.0
    return span / 2.0, float(np.max(np.abs(a)))


def _ir_initial_guess(t, a):
    m_eq0 = float(a[-1])
    m_init0 = float(a[0])
    span = t[-1] - t[0] if t[-1] > t[0] else 1.0
    dev = np.abs(a - m_eq0)
    target = dev[0] / math.e
    below = np.nonzero(dev <= target)[0]
    t1_0 = float(t[below[0]]) if below.size and t[below[0]] > 0 else span / 3.0
    return t1_0, m_eq0, m_init0


def fit_decay(
    curve: DecayCurve,
    fix_equilibrium: Optional[float] = None,
    allow_stretch: bool = False,
) -> DecayFit:
    """Extract the decay constant of a curve by weighted least squares.

    The model follows the curve kind. For inversion recovery the equilibrium
    amplitude floats by default; pass ``fix_equilibrium`` to pin it. The
    stretching exponent is fixed to 1 unless ``allow_stretch`` is set (an
    exploratory option; these signals are single-exponential).
    """
    t = curve.delays_s
    a = curve.amplitudes
    if t.size < _MIN_POINTS:
        raise PreconditionError(f"need at least {_MIN_POINTS} points, got {t.size}")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale == 0.0 or float(np.ptp(a)) < 1e-12 * max(scale, 1.0):
        raise PreconditionError("degenerate decay: curve has no amplitude variation")
    w = 1.0 / curve.sigmas if curve.sigmas is not None else np.ones_like(a)

    if curve.kind == KIND_ECHO_DECAY:
        tc0, s00 = _echo_initial_guess(t, a)

        if allow_stretch:
            def model(p):
                return p[1] * np.exp(-((t / p[0]) ** p[2]))
            x0, lo, hi = [tc0, s00, 1.0], [1e-300, -np.inf, 0.1], [np.inf, np.inf, 3.0]
        else:
            def model(p):
                return p[1] * np.exp(-t / p[0])
            x0, lo, hi = [tc0, s00], [-np.inf, -np.inf], [np.inf, np.inf]
        param_doc = ("time_constant_s", "s0") + (("stretch",) if allow_stretch else ())
    else:
        if fix_equilibrium is None:
            tc0, m_eq0, m_init0 = _ir_initial_guess(t, a)

            def model(p):
                return p[1] - (p[1] - p[2]) * np.exp(-t / p[0])
            x0, lo, hi = [tc0, m_eq0, m_init0], [-np.inf] * 3, [np.inf] * 3
            param_doc = ("time_constant_s", "m_eq", "m_init")
        else:
            tc0, _, m_init0 = _ir_initial_guess(t, a)
            m_eq = float(fix_equilibrium)

            def model(p):
                return m_eq - (m_eq - p[1]) * np.exp(-t / p[0])
            x0, lo, hi = [tc0, m_init0], [-np.inf] * 2, [np.inf] * 2
            param_doc = ("time_constant_s", "m_init")
        if allow_stretch:
            raise PreconditionError("stretch fitting is only offered for echo decays")

    def residual(p):
        return w * (model(p) - a)

    bounded = np.any(np.isfinite(lo)) or np.any(np.isfinite(hi))
    kwargs = dict(xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=5000)
    if bounded:
        result = least_squares(residual, x0, bounds=(lo, hi), **kwargs)
    else:
        result = least_squares(residual, x0, method="lm", **kwargs)
    if result.status <= 0:
        raise NumericalError(f"decay fit did not converge: {result.message}")
    tc = float(result.x[0])
    if tc <= 0.0:
        raise NumericalError(f"fitted time constant is non-positive ({tc!r})")

    dof = t.size - len(result.x)
    s2 = 2.0 * result.cost / dof if dof > 0 else float("nan")
    cov = s2 * np.linalg.pinv(result.jac.T @ result.jac)

    amplitudes: dict[str, float] = {}
    stretch = None
    for name, value in zip(param_doc, result.x):
        if name == "time_constant_s":
            continue
        if name == "stretch":
            stretch = float(value)
        else:
            amplitudes[name] = float(value)
    if fix_equilibrium is not None:
        amplitudes["m_eq"] = float(fix_equilibrium)
    return DecayFit(time_constant_s=tc, amplitudes=amplitudes, covariance=cov, stretch=stretch)
