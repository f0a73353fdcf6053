"""FastAPI service wrapping the core package.

Domain errors surface as HTTP 400/422 responses whose detail carries an
error class (usage, parse, precondition, numerical) that clients map to
process exit codes.
"""
from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import photodynamics, populations, relaxation, sequences, spectra, spincore
from ..errors import PreconditionError, SivEprError, UsageError
from . import models

STATUS_BY_CLASS = {"usage": 422, "parse": 400, "precondition": 409, "numerical": 500}

app = FastAPI(
    title="sivepr",
    description="EPR observables of an optically spin-polarized S=1 defect: "
    "forward simulation and parameter fitting.",
)


@app.exception_handler(SivEprError)
async def _domain_error_handler(_request: Request, exc: SivEprError):
    return JSONResponse(
        status_code=STATUS_BY_CLASS.get(exc.error_class, 500),
        content={"detail": {"error_class": exc.error_class, "message": str(exc)}},
    )


def _spin_system(model: models.SpinSystemModel) -> spincore.SpinSystem:
    return spincore.SpinSystem(
        zfs=spincore.ZfsModel(
            d_ref_mhz=model.d_ref_mhz,
            t_ref_k=model.t_ref_k,
            segments=tuple(
                spincore.SlopeSegment(s.t_low_k, s.t_high_k, s.slope_khz_per_k)
                for s in model.slope_segments
            ),
        ),
        g=model.g,
        axis=spincore.normalized(model.axis),
    )


def _relaxation_params(model: models.RelaxationParamsModel) -> relaxation.RelaxationParams:
    return relaxation.RelaxationParams(**model.model_dump())


def _scheme(spec: models.SchemeSpec) -> photodynamics.LevelScheme:
    if (spec.preset is None) == (spec.text is None):
        raise UsageError("scheme spec needs exactly one of 'preset' or 'text'")
    if spec.text is not None:
        return photodynamics.parse_scheme(spec.text)
    kwargs = {"temperature_k": spec.temperature_k}
    if spec.relaxation is not None:
        kwargs["relaxation"] = _relaxation_params(spec.relaxation)
    return photodynamics.preset_scheme(spec.preset, **kwargs)


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.post("/resonance", response_model=models.ResonanceResponse)
def resonance(req: models.ResonanceRequest) -> models.ResonanceResponse:
    sys = _spin_system(req.spin)
    direction = spincore.normalized(req.direction)
    if req.orientations == "aligned":
        axes = {"aligned": direction}
    else:
        axes = dict(spincore.ORIENTATION_AXES)
    rows = []
    warnings: list[str] = []
    for t_k in req.temperatures_k:
        for name, axis in axes.items():
            oriented = spincore.SpinSystem(zfs=sys.zfs, g=sys.g, axis=axis)
            found = spincore.resonance_fields(
                oriented,
                req.frequency_mhz,
                direction=direction,
                t_k=t_k,
                b_max_mt=req.b_max_mt,
                b_step_mt=req.b_step_mt,
            )
            lows = [r.field_mt for r in found if r.transition == spincore.LABEL_PLUS]
            highs = [r.field_mt for r in found if r.transition == spincore.LABEL_MINUS]
            if len(lows) > 1 or len(highs) > 1:
                warnings.append(
                    f"multiple resonances for orientation {name} at {t_k} K; "
                    "reporting the lowest field of each transition"
                )
            rows.append(
                models.ResonanceRow(
                    temperature_k=t_k,
                    frequency_mhz=req.frequency_mhz,
                    orientation=name,
                    b_low_mt=min(lows) if lows else None,
                    b_high_mt=min(highs) if highs else None,
                    n_lines=len(found),
                )
            )
    return models.ResonanceResponse(rows=rows, warnings=warnings)


@app.post("/relaxation/fit", response_model=models.FitT1Response)
def fit_t1(req: models.FitT1Request) -> models.FitT1Response:
    dataset = relaxation.T1Dataset(
        points=tuple(
            relaxation.T1Point(r.temperature_k, r.t1_s, r.sigma_s, r.source) for r in req.rows
        )
    )
    fit = relaxation.fit_relaxation(
        dataset,
        init=_relaxation_params(req.init),
        fixed=tuple(req.fixed),
        linewidth_weight=req.linewidth_weight,
    )
    temps = dataset.temperatures()
    curve_t = np.geomspace(temps.min(), temps.max(), req.curve_points)
    curve_rate = relaxation.relaxation_rate(fit.params, curve_t)
    stderr = np.sqrt(np.maximum(np.diag(fit.covariance), 0.0))
    return models.FitT1Response(
        params=models.RelaxationParamsModel(
            **dict(zip(relaxation.PARAM_NAMES, fit.params.as_array().tolist()))
        ),
        stderr=models.RelaxationParamsModel(
            **dict(zip(relaxation.PARAM_NAMES, stderr.tolist()))
        ),
        covariance=fit.covariance.tolist(),
        converged=fit.converged,
        warnings=list(fit.warnings),
        residuals=fit.residuals.tolist(),
        curve_temperature_k=curve_t.tolist(),
        curve_rate_per_s=np.asarray(curve_rate).tolist(),
    )


@app.post("/relaxation/linewidth", response_model=models.LinewidthResponse)
def linewidth(req: models.LinewidthRequest) -> models.LinewidthResponse:
    rows = []
    warnings = []
    for r in req.rows:
        converted = r.linewidth_pp_mt * spincore.GAMMA_E_MHZ_PER_MT if r.linewidth_pp_mt > 0 else 0.0
        try:
            rate = relaxation.linewidth_to_rate(r.linewidth_pp_mt, req.offset_mhz)
            rows.append(
                models.LinewidthRow(
                    temperature_k=r.temperature_k,
                    linewidth_pp_mt=r.linewidth_pp_mt,
                    converted_mhz=converted,
                    rate_per_s=rate,
                    t1_s=1.0 / rate,
                )
            )
        except PreconditionError as exc:
            rows.append(
                models.LinewidthRow(
                    temperature_k=r.temperature_k,
                    linewidth_pp_mt=r.linewidth_pp_mt,
                    converted_mhz=converted,
                    rate_per_s=None,
                    t1_s=None,
                    error=str(exc),
                )
            )
            warnings.append(f"row at {r.temperature_k} K rejected: {exc}")
    return models.LinewidthResponse(rows=rows, warnings=warnings)


@app.post("/decay/fit", response_model=models.FitDecayResponse)
def fit_decay(req: models.FitDecayRequest) -> models.FitDecayResponse:
    sigmas = [r.sigma for r in req.rows]
    has_sigmas = all(s is not None for s in sigmas) and len(sigmas) > 0
    curve = sequences.DecayCurve(
        kind=req.kind,
        delays_s=np.array([r.delay_s for r in req.rows]),
        amplitudes=np.array([r.amplitude for r in req.rows]),
        sigmas=np.array(sigmas, dtype=float) if has_sigmas else None,
    )
    fit = sequences.fit_decay(
        curve, fix_equilibrium=req.fix_equilibrium, allow_stretch=req.allow_stretch
    )
    dense_t = np.linspace(curve.delays_s[0], curve.delays_s[-1], req.curve_points)
    if req.kind == sequences.KIND_ECHO_DECAY:
        dense_a = fit.amplitudes["s0"] * np.exp(-dense_t / fit.time_constant_s)
        if fit.stretch is not None:
            dense_a = fit.amplitudes["s0"] * np.exp(
                -((dense_t / fit.time_constant_s) ** fit.stretch)
            )
    else:
        m_eq = fit.amplitudes["m_eq"]
        m_init = fit.amplitudes["m_init"]
        dense_a = m_eq - (m_eq - m_init) * np.exp(-dense_t / fit.time_constant_s)
    stderr = math.sqrt(max(float(fit.covariance[0, 0]), 0.0))
    return models.FitDecayResponse(
        time_constant_s=fit.time_constant_s,
        time_constant_stderr_s=stderr,
        amplitudes=dict(fit.amplitudes),
        covariance=fit.covariance.tolist(),
        stretch=fit.stretch,
        curve_delay_s=dense_t.tolist(),
        curve_amplitude=dense_a.tolist(),
    )


@app.post("/polarization", response_model=models.PolarizationResponse)
def polarization(req: models.PolarizationRequest) -> models.PolarizationResponse:
    sys = _spin_system(req.spin)
    dark_rows = [r for r in req.rows if r.condition == populations.CONDITION_DARK]
    light_rows = [r for r in req.rows if r.condition == populations.CONDITION_LIGHT]
    if len(dark_rows) != 1:
        raise PreconditionError(
            f"need exactly one dark reference row, got {len(dark_rows)}"
        )
    dark_ref = dark_rows[0]

    found = spincore.resonance_fields(
        sys, req.frequency_mhz, direction=sys.axis, t_k=req.reference_temperature_k
    )
    lows = [r.field_mt for r in found if r.transition == spincore.LABEL_PLUS]
    if not lows:
        raise PreconditionError(
            "no low-field resonance for the configured frequency; cannot place the spectrometer field"
        )
    b_res = min(lows)

    def eta_pair(t_k: float):
        h = spincore.build_hamiltonian(sys, spincore.FieldConfig(b_res, sys.axis), t_k)
        energies, _ = spincore._labeled_energies(h)
        therm = populations.thermal_populations(
            (energies[+1], energies[0], energies[-1]), t_k
        )
        return populations.population_differences(therm), therm

    eta_dark_rt, _ = eta_pair(req.reference_temperature_k)
    i_dark = populations.TransitionIntensities(
        i_low=dark_ref.i_low,
        i_high=dark_ref.i_high,
        condition=populations.CONDITION_DARK,
        temperature_k=dark_ref.temperature_k,
    )

    rows = []
    warnings: list[str] = []
    for r in light_rows:
        i_light = populations.TransitionIntensities(
            i_low=r.i_low,
            i_high=r.i_high,
            condition=populations.CONDITION_LIGHT,
            temperature_k=r.temperature_k,
        )
        _, p_dark = eta_pair(r.temperature_k)
        try:
            p_light = populations.populations_under_light(i_light, i_dark, eta_dark_rt)
            estimates = populations.polarization_estimates(
                i_light, i_dark, eta_dark_rt, p_dark
            )
            rows.append(
                models.PolarizationRow(
                    label=r.label,
                    temperature_k=r.temperature_k,
                    p_plus1=p_light.p_plus1,
                    p_zero=p_light.p_zero,
                    p_minus1=p_light.p_minus1,
                    xi_percent=populations.polarization_degree(p_light, p_dark),
                    xi_low_line_percent=estimates["low_line"],
                    xi_high_line_percent=estimates["high_line"],
                )
            )
        except populations.InconsistentInputError as exc:
            rows.append(
                models.PolarizationRow(
                    label=r.label,
                    temperature_k=r.temperature_k,
                    p_plus1=None,
                    p_zero=None,
                    p_minus1=None,
                    xi_percent=None,
                    xi_low_line_percent=None,
                    xi_high_line_percent=None,
                    flag=str(exc),
                )
            )
            warnings.append(f"row {r.label!r} flagged: {exc}")
    return models.PolarizationResponse(
        resonance_field_mt=b_res,
        eta_dark_reference=(eta_dark_rt.eta_plus1_zero, eta_dark_rt.eta_zero_minus1),
        rows=rows,
        warnings=warnings,
    )


@app.post("/pump-sweep", response_model=models.PumpSweepResponse)
def pump_sweep(req: models.PumpSweepRequest) -> models.PumpSweepResponse:
    scheme = _scheme(req.scheme)
    if req.pump_grid:
        grid = np.asarray(req.pump_grid, dtype=float)
    else:
        if req.pump_points < 3:
            raise PreconditionError("pump grid needs at least 3 points")
        if not (0.0 < req.pump_min < req.pump_max):
            raise PreconditionError("need 0 < pump_min < pump_max")
        grid = np.geomspace(req.pump_min, req.pump_max, req.pump_points)
    sweep = photodynamics.polarization_vs_pump(scheme, grid)
    score = photodynamics.linearity_score(sweep)
    return models.PumpSweepResponse(
        rows=[models.PumpSweepRow(pump=float(p), xi_percent=float(x)) for p, x in sweep],
        linearity_score=score,
    )


@app.post("/simulate/spectrum", response_model=models.SimulateSpectrumResponse)
def simulate_spectrum(req: models.SimulateSpectrumRequest) -> models.SimulateSpectrumResponse:
    sys = _spin_system(req.spin)
    pops = populations.LevelPopulations.from_array(np.asarray(req.populations))
    if req.field_max_mt <= req.field_min_mt:
        raise PreconditionError("field_max_mt must exceed field_min_mt")
    grid = np.linspace(req.field_min_mt, req.field_max_mt, req.field_points)
    spec = spectra.synthesize_cw_spectrum(
        sys,
        pops,
        spectra.Lineshape(req.lineshape, req.width_pp_mt),
        req.frequency_mhz,
        grid,
        req.temperature_k,
        condition=req.condition,
    )
    return models.SimulateSpectrumResponse(
        field_mt=spec.field_mt.tolist(),
        signal=spec.signal.tolist(),
        metadata={k: str(v) for k, v in spec.metadata.items()},
        warnings=list(spec.warnings),
    )


@app.post("/simulate/decay", response_model=models.SimulateDecayResponse)
def simulate_decay(req: models.SimulateDecayRequest) -> models.SimulateDecayResponse:
    if req.kind == sequences.KIND_INVERSION_RECOVERY:
        tau_max = req.tau_max_s if req.tau_max_s is not None else 5.0 * req.t1_s
        tau = np.linspace(0.0, tau_max, req.points)
        curve = sequences.simulate_inversion_recovery(req.t1_s, req.m_eq, req.m_init, tau)
    else:
        tau_max = req.tau_max_s if req.tau_max_s is not None else 2.5 * req.t2_s
        tau = np.linspace(0.0, tau_max, req.points)
        curve = sequences.simulate_echo_decay(req.t2_s, req.s0, tau)
    if req.noise_fraction > 0.0:
        curve = sequences.add_noise(curve, req.noise_fraction, req.seed)
    sigmas = curve.sigmas.tolist() if curve.sigmas is not None else []
    return models.SimulateDecayResponse(
        kind=curve.kind,
        delay_s=curve.delays_s.tolist(),
        amplitude=curve.amplitudes.tolist(),
        sigma=sigmas,
        meta={k: str(v) for k, v in curve.meta.items()},
    )


@app.post("/simulate/trajectory", response_model=models.SimulateTrajectoryResponse)
def simulate_trajectory(req: models.SimulateTrajectoryRequest) -> models.SimulateTrajectoryResponse:
    scheme = _scheme(req.scheme)
    if req.t_max_s <= 0.0:
        raise PreconditionError("t_max_s must be positive")
    if req.initial == "steady-dark":
        p0 = photodynamics.steady_state(scheme, 0.0)
    else:
        ms = scheme.ms_indices()
        p0 = np.zeros(scheme.size)
        for idx in ms.values():
            p0[idx] = 1.0 / 3.0
    t_grid = np.linspace(0.0, req.t_max_s, req.points)
    traj = photodynamics.time_evolve(scheme, req.pump, p0, t_grid)
    return models.SimulateTrajectoryResponse(
        state_names=[s.name for s in scheme.states],
        time_s=t_grid.tolist(),
        populations=traj.tolist(),
    )
