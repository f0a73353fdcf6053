"""Pydantic request/response models for the HTTP service.

The service layer is pure computation: requests carry data (never file
paths), responses carry tables, and all file handling stays in the clients.
"""
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class SlopeSegmentModel(BaseModel):
    t_low_k: float
    t_high_k: float
    slope_khz_per_k: float


class SpinSystemModel(BaseModel):
    d_ref_mhz: float = 1000.0
    t_ref_k: float = 300.0
    slope_segments: list[SlopeSegmentModel] = Field(
        default_factory=lambda: [
            SlopeSegmentModel(t_low_k=50.0, t_high_k=150.0, slope_khz_per_k=-337.0),
            SlopeSegmentModel(t_low_k=150.0, t_high_k=300.0, slope_khz_per_k=-202.0),
        ]
    )
    g: float = 2.0028
    axis: tuple[float, float, float] = (1.0, 1.0, 1.0)


class RelaxationParamsModel(BaseModel):
    a_const_per_s: float = 0.036
    a_raman_per_s_k7: float = 5.0e-13
    a_orbach_per_s: float = 1.5e5
    delta_e_mev: float = 22.0


class SchemeSpec(BaseModel):
    """Either a preset identifier or the text of a scheme definition file."""

    preset: Optional[str] = None
    text: Optional[str] = None
    temperature_k: float = 292.0
    relaxation: Optional[RelaxationParamsModel] = None


# --- resonance ---------------------------------------------------------------

class ResonanceRequest(BaseModel):
    spin: SpinSystemModel = SpinSystemModel()
    frequency_mhz: float = 9750.0
    temperatures_k: list[float] = Field(default_factory=lambda: [300.0])
    direction: tuple[float, float, float] = (1.0, 1.0, 1.0)
    orientations: Literal["aligned", "all"] = "aligned"
    b_max_mt: float = 1200.0
    b_step_mt: float = 0.1


class ResonanceRow(BaseModel):
    temperature_k: float
    frequency_mhz: float
    orientation: str
    b_low_mt: Optional[float]
    b_high_mt: Optional[float]
    n_lines: int


class ResonanceResponse(BaseModel):
    rows: list[ResonanceRow]
    warnings: list[str] = Field(default_factory=list)


# --- relaxation fit ----------------------------------------------------------

class T1RowModel(BaseModel):
    temperature_k: float
    t1_s: float
    sigma_s: Optional[float] = None
    source: Literal["direct", "linewidth"] = "direct"


class FitT1Request(BaseModel):
    rows: list[T1RowModel]
    init: RelaxationParamsModel = RelaxationParamsModel()
    fixed: list[str] = Field(default_factory=list)
    linewidth_weight: float = 0.5
    curve_points: int = 200


class FitT1Response(BaseModel):
    params: RelaxationParamsModel
    stderr: RelaxationParamsModel
    covariance: list[list[float]]
    converged: bool
    warnings: list[str]
    residuals: list[float]
    curve_temperature_k: list[float]
    curve_rate_per_s: list[float]


# --- linewidth pipeline ------------------------------------------------------

class LinewidthRowModel(BaseModel):
    temperature_k: float
    linewidth_pp_mt: float


class LinewidthRequest(BaseModel):
    rows: list[LinewidthRowModel]
    offset_mhz: float = 0.25


class LinewidthRow(BaseModel):
    temperature_k: float
    linewidth_pp_mt: float
    converted_mhz: float
    rate_per_s: Optional[float]
    t1_s: Optional[float]
    error: Optional[str] = None


class LinewidthResponse(BaseModel):
    rows: list[LinewidthRow]
    warnings: list[str] = Field(default_factory=list)


# --- decay fit ---------------------------------------------------------------

class DecayRowModel(BaseModel):
    delay_s: float
    amplitude: float
    sigma: Optional[float] = None


class FitDecayRequest(BaseModel):
    kind: Literal["inversion-recovery", "echo-decay"]
    rows: list[DecayRowModel]
    fix_equilibrium: Optional[float] = None
    allow_stretch: bool = False
    curve_points: int = 200


class FitDecayResponse(BaseModel):
    time_constant_s: float
    time_constant_stderr_s: float
    amplitudes: dict[str, float]
    covariance: list[list[float]]
    stretch: Optional[float]
    curve_delay_s: list[float]
    curve_amplitude: list[float]


# --- polarization ------------------------------------------------------------

class IntensityRowModel(BaseModel):
    label: str
    condition: Literal["dark", "light"]
    temperature_k: float
    i_low: float
    i_high: float


class PolarizationRequest(BaseModel):
    spin: SpinSystemModel = SpinSystemModel()
    frequency_mhz: float = 9750.0
    reference_temperature_k: float = 292.0
    rows: list[IntensityRowModel]


class PolarizationRow(BaseModel):
    label: str
    temperature_k: float
    p_plus1: Optional[float]
    p_zero: Optional[float]
    p_minus1: Optional[float]
    xi_percent: Optional[float]
    xi_low_line_percent: Optional[float]
    xi_high_line_percent: Optional[float]
    flag: Optional[str] = None


class PolarizationResponse(BaseModel):
    resonance_field_mt: float
    eta_dark_reference: tuple[float, float]
    rows: list[PolarizationRow]
    warnings: list[str] = Field(default_factory=list)


# --- pump sweep --------------------------------------------------------------

class PumpSweepRequest(BaseModel):
    scheme: SchemeSpec = SchemeSpec(preset="scheme-A")
    pump_grid: list[float] = Field(default_factory=list)
    pump_min: float = 1e-4
    pump_max: float = 10.0
    pump_points: int = 26


class PumpSweepRow(BaseModel):
    pump: float
    xi_percent: float


class PumpSweepResponse(BaseModel):
    rows: list[PumpSweepRow]
    linearity_score: float
    warnings: list[str] = Field(default_factory=list)


# --- simulation --------------------------------------------------------------

class SimulateSpectrumRequest(BaseModel):
    spin: SpinSystemModel = SpinSystemModel()
    populations: tuple[float, float, float] = (0.0, 1.0, 0.0)
    lineshape: Literal["lorentzian", "gaussian"] = "lorentzian"
    width_pp_mt: float = 0.2
    frequency_mhz: float = 9750.0
    field_min_mt: float = 300.0
    field_max_mt: float = 400.0
    field_points: int = Field(default=2000, ge=2)
    temperature_k: float = 300.0
    condition: str = "light"


class SimulateSpectrumResponse(BaseModel):
    field_mt: list[float]
    signal: list[float]
    metadata: dict[str, str]
    warnings: list[str]


class SimulateDecayRequest(BaseModel):
    kind: Literal["inversion-recovery", "echo-decay"]
    t1_s: float = 18.0
    t2_s: float = 103e-6
    m_eq: float = 1.0
    m_init: float = -1.0
    s0: float = 1.0
    tau_max_s: Optional[float] = None
    points: int = Field(default=41, ge=2)
    noise_fraction: float = 0.0
    seed: int = 0


class SimulateDecayResponse(BaseModel):
    kind: str
    delay_s: list[float]
    amplitude: list[float]
    sigma: list[float]
    meta: dict[str, str]


class SimulateTrajectoryRequest(BaseModel):
    scheme: SchemeSpec = SchemeSpec(preset="scheme-A")
    pump: float = 1.0
    t_max_s: float = 1e-6
    points: int = Field(default=200, ge=2)
    initial: Literal["uniform-ground", "steady-dark"] = "steady-dark"


class SimulateTrajectoryResponse(BaseModel):
    state_names: list[str]
    time_s: list[float]
    populations: list[list[float]]


class ErrorDetail(BaseModel):
    error_class: Literal["usage", "parse", "precondition", "numerical"]
    message: str
