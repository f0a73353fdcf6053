"""Batch command-line front end.

The CLI is a thin client of the computation service: it reads local files,
sends data to the service (in-process by default, or a remote instance via
--server), and writes plot-ready CSV tables plus a JSON run report to the
output directory. Outputs are byte-identical for identical inputs and seed.

Exit codes: 0 success, 2 usage, 3 parse, 4 precondition, 5 numerical failure.
"""
from __future__ import annotations

import functools
import json
import os
import sys
from typing import Optional

import click

from . import datafiles
from .client import ServiceClient
from .config import ENV_CONFIG_PATH, RunConfig
from .errors import EXIT_CODES, ParseError, PreconditionError, SivEprError, UsageError


class AppContext:
    def __init__(self, config_path, out_dir, seed, fmt, server):
        self.config = RunConfig.load(config_path)
        self.config_path = config_path
        self.out_dir = out_dir
        if seed is not None:
            self.config.set("run", "seed", seed)
        self.fmt = fmt
        self.client = ServiceClient(server)
        self.input_digests: dict[str, str] = {}

    @property
    def seed(self) -> int:
        return self.config.seed()

    def register_input(self, path) -> None:
        self.input_digests[str(path)] = datafiles.sha256_of_file(path)

    def out_path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def finish(self, command: str, parameters: dict, tables: dict[str, str],
               warnings: list[str]) -> None:
        """Write the run report and echo a short summary."""
        report = {
            "command": command,
            "seed": self.seed,
            "inputs": self.input_digests,
            "parameters": parameters,
            "outputs": tables,
            "warnings": warnings,
        }
        payload = (json.dumps(report, indent=2, sort_keys=True) + "\n").encode("utf-8")
        report_path = self.out_path(f"{command.replace('-', '_')}_report.json")
        datafiles.write_bytes_atomic(report_path, payload)
        for warning in warnings:
            click.echo(f"warning: {warning}", err=True)
        for name in sorted(tables):
            click.echo(f"wrote {self.out_path(name)}")
        click.echo(f"wrote {report_path}")


pass_app = click.make_pass_decorator(AppContext)


def handle_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SivEprError as exc:
            click.echo(f"error ({exc.error_class}): {exc}", err=True)
            sys.exit(EXIT_CODES.get(exc.error_class, 1))

    return wrapper


@click.group()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    envvar=ENV_CONFIG_PATH,
    default=None,
    help=f"Config file (INI sections, key=value); also via ${ENV_CONFIG_PATH}.",
)
@click.option("--out-dir", default="sivepr_out", show_default=True, help="Output directory.")
@click.option("--seed", type=int, default=None, help="Random seed recorded in every output.")
@click.option("--format", "fmt", type=click.Choice(["csv"]), default="csv", show_default=True)
@click.option("--server", default=None, help="Remote service URL (default: run in-process).")
@click.pass_context
@handle_errors
def main(ctx, config_path, out_dir, seed, fmt, server):
    """EPR toolkit for an optically spin-polarized S=1 defect."""
    ctx.obj = AppContext(config_path, out_dir, seed, fmt, server)


def _spin_payload(cfg: RunConfig) -> dict:
    sys_obj = cfg.spin_system()
    return {
        "d_ref_mhz": sys_obj.zfs.d_ref_mhz,
        "t_ref_k": sys_obj.zfs.t_ref_k,
        "slope_segments": [
            {"t_low_k": s.t_low_k, "t_high_k": s.t_high_k, "slope_khz_per_k": s.slope_khz_per_k}
            for s in sys_obj.zfs.segments
        ],
        "g": sys_obj.g,
        "axis": list(sys_obj.axis),
    }


def _relaxation_payload(cfg: RunConfig) -> dict:
    return {
        "a_const_per_s": cfg.get_float("relaxation", "a_const_per_s"),
        "a_raman_per_s_k7": cfg.get_float("relaxation", "a_raman_per_s_k7"),
        "a_orbach_per_s": cfg.get_float("relaxation", "a_orbach_per_s"),
        "delta_e_mev": cfg.get_float("relaxation", "delta_e_mev"),
    }


def _scheme_payload(app: AppContext, scheme_value: str, temperature_k: float) -> dict:
    if scheme_value in ("scheme-A", "scheme-B"):
        return {
            "preset": scheme_value,
            "temperature_k": temperature_k,
            "relaxation": _relaxation_payload(app.config),
        }
    if not os.path.exists(scheme_value):
        raise UsageError(
            f"scheme {scheme_value!r} is neither a preset (scheme-A, scheme-B) nor a file"
        )
    app.register_input(scheme_value)
    with open(scheme_value, "r", encoding="utf-8") as fh:
        return {"text": fh.read(), "temperature_k": temperature_k}


def _optional_str(value) -> str:
    return "" if value is None else value


@main.command()
@click.option("--frequency-mhz", type=float, default=None, help="Microwave frequency.")
@click.option("--temperatures-k", default=None, help="Comma-separated temperature list.")
@click.option(
    "--orientations",
    type=click.Choice(["aligned", "all"]),
    default=None,
    help="Single aligned axis or all four trigonal orientations.",
)
@pass_app
@handle_errors
def resonance(app: AppContext, frequency_mhz, temperatures_k, orientations):
    """Resonance-field table for a frequency/temperature/orientation sweep."""
    cfg = app.config
    if frequency_mhz is not None:
        cfg.set("resonance", "frequency_mhz", frequency_mhz)
    if temperatures_k is not None:
        cfg.set("resonance", "temperatures_k", temperatures_k)
    if orientations is not None:
        cfg.set("resonance", "orientations", orientations)
    payload = {
        "spin": _spin_payload(cfg),
        "frequency_mhz": cfg.get_float("resonance", "frequency_mhz"),
        "temperatures_k": cfg.get_floats("resonance", "temperatures_k"),
        "direction": list(cfg.field_direction()),
        "orientations": cfg.get("resonance", "orientations"),
        "b_max_mt": cfg.get_float("field", "b_max_mt"),
        "b_step_mt": cfg.get_float("field", "b_step_mt"),
    }
    if payload["orientations"] not in ("aligned", "all"):
        raise UsageError("[resonance] orientations must be 'aligned' or 'all'")
    result = app.client.post("/resonance", payload)
    rows = result["rows"]
    digest = datafiles.write_table(
        app.out_path("resonance.csv"),
        [
            ("temperature_K", [r["temperature_k"] for r in rows]),
            ("frequency_MHz", [r["frequency_mhz"] for r in rows]),
            ("orientation", [r["orientation"] for r in rows]),
            ("b_low_mT", [_optional_str(r["b_low_mt"]) for r in rows]),
            ("b_high_mT", [_optional_str(r["b_high_mt"]) for r in rows]),
            ("n_lines", [r["n_lines"] for r in rows]),
        ],
        {"seed": app.seed},
    )
    for r in rows:
        click.echo(
            f"T={r['temperature_k']:g} K  nu={r['frequency_mhz']:g} MHz  "
            f"{r['orientation']}:  B_low={r['b_low_mt']}  B_high={r['b_high_mt']} mT"
        )
    app.finish("resonance", payload, {"resonance.csv": digest}, result["warnings"])


@main.command("fit-t1")
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--fix", "fixed", default=None, help="Comma-separated parameter names to fix.")
@click.option("--linewidth-weight", type=float, default=None, help="Weight multiplier for linewidth rows.")
@pass_app
@handle_errors
def fit_t1(app: AppContext, dataset, fixed, linewidth_weight):
    """Fit the relaxation model to a T1 dataset CSV."""
    cfg = app.config
    if fixed is not None:
        cfg.set("relaxation", "fixed", fixed)
    if linewidth_weight is not None:
        cfg.set("relaxation", "linewidth_weight", linewidth_weight)
    app.register_input(dataset)
    data = datafiles.read_t1_csv(dataset)
    fixed_names = [n for n in (cfg.get("relaxation", "fixed") or "").split(",") if n.strip()]
    payload = {
        "rows": [
            {
                "temperature_k": p.temperature_k,
                "t1_s": p.t1_s,
                "sigma_s": p.sigma_s,
                "source": p.source,
            }
            for p in data.points
        ],
        "init": _relaxation_payload(cfg),
        "fixed": [n.strip() for n in fixed_names],
        "linewidth_weight": cfg.get_float("relaxation", "linewidth_weight"),
        "curve_points": cfg.get_int("relaxation", "curve_points"),
    }
    result = app.client.post("/relaxation/fit", payload)
    params = result["params"]
    stderr = result["stderr"]
    names = list(params.keys())
    tables = {}
    tables["fit_t1_params.csv"] = datafiles.write_table(
        app.out_path("fit_t1_params.csv"),
        [
            ("parameter", names),
            ("value", [params[n] for n in names]),
            ("stderr", [stderr[n] for n in names]),
        ],
        {"seed": app.seed, "converged": result["converged"]},
    )
    tables["fit_t1_curve.csv"] = datafiles.write_table(
        app.out_path("fit_t1_curve.csv"),
        [
            ("temperature_K", result["curve_temperature_k"]),
            ("rate_per_s", result["curve_rate_per_s"]),
            ("t1_s", [1.0 / r for r in result["curve_rate_per_s"]]),
        ],
        {"seed": app.seed},
    )
    tables["fit_t1_residuals.csv"] = datafiles.write_table(
        app.out_path("fit_t1_residuals.csv"),
        [
            ("temperature_K", [p.temperature_k for p in data.points]),
            ("t1_s", [p.t1_s for p in data.points]),
            ("source", [p.source for p in data.points]),
            ("weighted_log_residual", result["residuals"]),
        ],
        {"seed": app.seed},
    )
    for name in names:
        click.echo(f"{name} = {params[name]:.6g} +/- {stderr[name]:.3g}")
    click.echo(f"converged: {result['converged']}")
    app.finish("fit-t1", {"init": payload["init"], "fixed": payload["fixed"],
                          "linewidth_weight": payload["linewidth_weight"]},
               tables, result["warnings"])


@main.command("fit-decay")
@click.argument("curve_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--fix-equilibrium", type=float, default=None,
              help="Pin the inversion-recovery equilibrium amplitude.")
@click.option("--allow-stretch", is_flag=True, default=False,
              help="Float a stretching exponent (exploratory, echo decays only).")
@pass_app
@handle_errors
def fit_decay_cmd(app: AppContext, curve_file, fix_equilibrium, allow_stretch):
    """Fit a decay-curve CSV and emit the fitted model curve."""
    app.register_input(curve_file)
    curve = datafiles.read_decay_csv(curve_file)
    payload = {
        "kind": curve.kind,
        "rows": [
            {
                "delay_s": float(d),
                "amplitude": float(a),
                "sigma": (float(curve.sigmas[i]) if curve.sigmas is not None else None),
            }
            for i, (d, a) in enumerate(zip(curve.delays_s, curve.amplitudes))
        ],
        "fix_equilibrium": fix_equilibrium,
        "allow_stretch": allow_stretch,
    }
    result = app.client.post("/decay/fit", payload)
    tables = {}
    amp_names = sorted(result["amplitudes"])
    tables["fit_decay_params.csv"] = datafiles.write_table(
        app.out_path("fit_decay_params.csv"),
        [
            ("parameter", ["time_constant_s"] + amp_names
             + (["stretch"] if result["stretch"] is not None else [])),
            ("value", [result["time_constant_s"]] + [result["amplitudes"][n] for n in amp_names]
             + ([result["stretch"]] if result["stretch"] is not None else [])),
        ],
        {"seed": app.seed, "kind": curve.kind,
         "time_constant_stderr_s": result["time_constant_stderr_s"]},
    )
    tables["fit_decay_curve.csv"] = datafiles.write_table(
        app.out_path("fit_decay_curve.csv"),
        [("delay_s", result["curve_delay_s"]), ("amplitude", result["curve_amplitude"])],
        {"seed": app.seed, "kind": curve.kind},
    )
    click.echo(
        f"time constant = {result['time_constant_s']:.6g} s "
        f"+/- {result['time_constant_stderr_s']:.3g} s"
    )
    app.finish("fit-decay", {"kind": curve.kind, "fix_equilibrium": fix_equilibrium,
                             "allow_stretch": allow_stretch}, tables, [])


@main.command()
@click.argument("intensities", type=click.Path(exists=True, dir_okay=False))
@click.option("--frequency-mhz", type=float, default=None)
@click.option("--reference-temperature-k", type=float, default=None)
@pass_app
@handle_errors
def polarization(app: AppContext, intensities, frequency_mhz, reference_temperature_k):
    """Per-row populations and polarization degree from line intensities."""
    cfg = app.config
    if frequency_mhz is not None:
        cfg.set("polarization", "frequency_mhz", frequency_mhz)
    if reference_temperature_k is not None:
        cfg.set("polarization", "reference_temperature_k", reference_temperature_k)
    app.register_input(intensities)
    rows = datafiles.read_intensity_csv(intensities)
    payload = {
        "spin": _spin_payload(cfg),
        "frequency_mhz": cfg.get_float("polarization", "frequency_mhz"),
        "reference_temperature_k": cfg.get_float("polarization", "reference_temperature_k"),
        "rows": [
            {
                "label": r.label,
                "condition": r.condition,
                "temperature_k": r.temperature_k,
                "i_low": r.i_low,
                "i_high": r.i_high,
            }
            for r in rows
        ],
    }
    result = app.client.post("/polarization", payload)
    out_rows = result["rows"]
    digest = datafiles.write_table(
        app.out_path("polarization.csv"),
        [
            ("label", [r["label"] for r in out_rows]),
            ("temperature_K", [r["temperature_k"] for r in out_rows]),
            ("p_plus1", [_optional_str(r["p_plus1"]) for r in out_rows]),
            ("p_zero", [_optional_str(r["p_zero"]) for r in out_rows]),
            ("p_minus1", [_optional_str(r["p_minus1"]) for r in out_rows]),
            ("xi_percent", [_optional_str(r["xi_percent"]) for r in out_rows]),
            ("xi_low_line_percent", [_optional_str(r["xi_low_line_percent"]) for r in out_rows]),
            ("xi_high_line_percent", [_optional_str(r["xi_high_line_percent"]) for r in out_rows]),
            ("flag", [_optional_str(r["flag"]) for r in out_rows]),
        ],
        {"seed": app.seed, "resonance_field_mT": result["resonance_field_mt"]},
    )
    for r in out_rows:
        if r["flag"]:
            click.echo(f"{r['label']}: flagged ({r['flag']})")
        else:
            click.echo(f"{r['label']}: xi = {r['xi_percent']:.4g} %")
    app.finish(
        "polarization",
        {"frequency_mhz": payload["frequency_mhz"],
         "reference_temperature_k": payload["reference_temperature_k"],
         "resonance_field_mt": result["resonance_field_mt"]},
        {"polarization.csv": digest},
        result["warnings"],
    )


@main.command("pump-sweep")
@click.option("--scheme", default=None, help="Preset name (scheme-A, scheme-B) or scheme file.")
@click.option("--pump-min", type=float, default=None)
@click.option("--pump-max", type=float, default=None)
@click.option("--pump-points", type=int, default=None)
@pass_app
@handle_errors
def pump_sweep(app: AppContext, scheme, pump_min, pump_max, pump_points):
    """Predicted polarization versus pump power for a level scheme."""
    cfg = app.config
    for key, value in (("scheme", scheme), ("pump_min", pump_min),
                       ("pump_max", pump_max), ("pump_points", pump_points)):
        if value is not None:
            cfg.set("pump-sweep", key, value)
    n_points = cfg.get_int("pump-sweep", "pump_points")
    if n_points < 2:
        raise PreconditionError("pump sweep needs at least 2 grid points (3+ for the linearity score)")
    payload = {
        "scheme": _scheme_payload(app, cfg.get("pump-sweep", "scheme"),
                                  cfg.get_float("pump-sweep", "temperature_k")),
        "pump_min": cfg.get_float("pump-sweep", "pump_min"),
        "pump_max": cfg.get_float("pump-sweep", "pump_max"),
        "pump_points": n_points,
    }
    result = app.client.post("/pump-sweep", payload)
    rows = result["rows"]
    digest = datafiles.write_table(
        app.out_path("pump_sweep.csv"),
        [("pump_P", [r["pump"] for r in rows]), ("xi_percent", [r["xi_percent"] for r in rows])],
        {"seed": app.seed, "linearity_score": result["linearity_score"]},
    )
    click.echo(f"linearity score over lowest decade: {result['linearity_score']:.3g}")
    click.echo(f"xi at max pump: {rows[-1]['xi_percent']:.4g} %")
    app.finish("pump-sweep",
               {"scheme": cfg.get("pump-sweep", "scheme"),
                "pump_min": payload["pump_min"], "pump_max": payload["pump_max"],
                "pump_points": payload["pump_points"],
                "linearity_score": result["linearity_score"]},
               {"pump_sweep.csv": digest}, result["warnings"])


@main.command()
@click.option("--kind", type=click.Choice(
    ["spectrum", "inversion-recovery", "echo-decay", "trajectory"]), default=None)
@pass_app
@handle_errors
def simulate(app: AppContext, kind):
    """Synthesize spectra, decay curves or pump trajectories to CSV."""
    cfg = app.config
    if kind is not None:
        cfg.set("simulate", "kind", kind)
    kind = cfg.get("simulate", "kind")
    if kind is None:
        raise UsageError("simulate needs --kind or [simulate] kind in the config")
    if kind == "spectrum":
        _simulate_spectrum(app)
    elif kind in ("inversion-recovery", "echo-decay"):
        _simulate_decay(app, kind)
    elif kind == "trajectory":
        _simulate_trajectory(app)
    else:
        raise UsageError(f"unknown simulate kind {kind!r}")


def _simulate_spectrum(app: AppContext):
    cfg = app.config
    pops = cfg.get_floats("simulate", "populations")
    if len(pops) != 3:
        raise UsageError("[simulate] populations: expected three values")
    payload = {
        "spin": _spin_payload(cfg),
        "populations": pops,
        "lineshape": cfg.get("simulate", "lineshape"),
        "width_pp_mt": cfg.get_float("simulate", "width_pp_mt"),
        "frequency_mhz": cfg.get_float("simulate", "frequency_mhz"),
        "field_min_mt": cfg.get_float("simulate", "field_min_mt"),
        "field_max_mt": cfg.get_float("simulate", "field_max_mt"),
        "field_points": cfg.get_int("simulate", "field_points"),
        "temperature_k": cfg.get_float("simulate", "temperature_k"),
        "condition": cfg.get("simulate", "condition"),
    }
    result = app.client.post("/simulate/spectrum", payload)
    comments = {"seed": app.seed}
    comments.update(result["metadata"])
    if result["warnings"]:
        comments["warnings"] = "; ".join(result["warnings"])
    digest = datafiles.write_table(
        app.out_path("spectrum.csv"),
        [("field_mT", result["field_mt"]), ("signal", result["signal"])],
        comments,
    )
    app.finish("simulate", payload, {"spectrum.csv": digest}, result["warnings"])


def _simulate_decay(app: AppContext, kind: str):
    cfg = app.config
    tau_max = cfg.get("simulate", "tau_max_s")
    payload = {
        "kind": kind,
        "t1_s": cfg.get_float("simulate", "t1_s"),
        "t2_s": cfg.get_float("simulate", "t2_s"),
        "m_eq": cfg.get_float("simulate", "m_eq"),
        "m_init": cfg.get_float("simulate", "m_init"),
        "s0": cfg.get_float("simulate", "s0"),
        "tau_max_s": float(tau_max) if tau_max is not None else None,
        "points": cfg.get_int("simulate", "points"),
        "noise_fraction": cfg.get_float("simulate", "noise_fraction"),
        "seed": app.seed,
    }
    result = app.client.post("/simulate/decay", payload)
    sigmas = result["sigma"] if result["sigma"] else [""] * len(result["delay_s"])
    comments = {"kind": result["kind"], "seed": app.seed}
    comments.update(result["meta"])
    digest = datafiles.write_table(
        app.out_path("decay.csv"),
        [
            ("delay_s", result["delay_s"]),
            ("amplitude", result["amplitude"]),
            ("sigma", sigmas),
        ],
        comments,
    )
    app.finish("simulate", payload, {"decay.csv": digest}, [])


def _simulate_trajectory(app: AppContext):
    cfg = app.config
    payload = {
        "scheme": _scheme_payload(app, cfg.get("simulate", "scheme"),
                                  cfg.get_float("simulate", "temperature_k")),
        "pump": cfg.get_float("simulate", "pump"),
        "t_max_s": cfg.get_float("simulate", "t_max_s"),
        "points": cfg.get_int("simulate", "points"),
    }
    result = app.client.post("/simulate/trajectory", payload)
    columns = [("time_s", result["time_s"])]
    for j, name in enumerate(result["state_names"]):
        columns.append((f"p_{name}", [row[j] for row in result["populations"]]))
    digest = datafiles.write_table(
        app.out_path("trajectory.csv"), columns, {"seed": app.seed}
    )
    app.finish("simulate", {"pump": payload["pump"], "t_max_s": payload["t_max_s"]},
               {"trajectory.csv": digest}, [])


@main.command()
@click.argument("widths", type=click.Path(exists=True, dir_okay=False))
@click.option("--offset-mhz", type=float, default=None,
              help="Frequency offset subtracted from converted widths.")
@click.option("--emit-t1-dataset/--no-emit-t1-dataset", default=True,
              help="Also write the valid rows as a linewidth-tagged T1 dataset CSV.")
@pass_app
@handle_errors
def linewidth(app: AppContext, widths, offset_mhz, emit_t1_dataset):
    """Convert peak-to-peak linewidths into indirect 1/T1 estimates."""
    cfg = app.config
    if offset_mhz is not None:
        cfg.set("linewidth", "offset_mhz", offset_mhz)
    app.register_input(widths)
    rows = datafiles.read_linewidth_csv(widths)
    payload = {
        "rows": [{"temperature_k": t, "linewidth_pp_mt": w} for t, w in rows],
        "offset_mhz": cfg.get_float("linewidth", "offset_mhz"),
    }
    result = app.client.post("/relaxation/linewidth", payload)
    out_rows = result["rows"]
    tables = {}
    tables["linewidth_rates.csv"] = datafiles.write_table(
        app.out_path("linewidth_rates.csv"),
        [
            ("temperature_K", [r["temperature_k"] for r in out_rows]),
            ("linewidth_pp_mT", [r["linewidth_pp_mt"] for r in out_rows]),
            ("converted_MHz", [r["converted_mhz"] for r in out_rows]),
            ("rate_per_s", [_optional_str(r["rate_per_s"]) for r in out_rows]),
            ("t1_s", [_optional_str(r["t1_s"]) for r in out_rows]),
            ("error", [_optional_str(r["error"]) for r in out_rows]),
        ],
        {"seed": app.seed, "offset_MHz": payload["offset_mhz"]},
    )
    valid = [r for r in out_rows if r["error"] is None]
    if not valid:
        raise PreconditionError("every linewidth row fell below the calibration floor")
    if emit_t1_dataset:
        from .relaxation import SOURCE_LINEWIDTH, T1Dataset, T1Point

        dataset = T1Dataset(points=tuple(
            T1Point(r["temperature_k"], r["t1_s"], None, SOURCE_LINEWIDTH) for r in valid
        ))
        tables["linewidth_t1.csv"] = datafiles.write_t1_csv(
            app.out_path("linewidth_t1.csv"), dataset, {"seed": app.seed}
        )
    for r in valid:
        click.echo(f"T={r['temperature_k']:g} K: 1/T1 = {r['rate_per_s']:.6g} s^-1 "
                   f"(T1 = {r['t1_s']:.4g} s)")
    app.finish("linewidth", {"offset_mhz": payload["offset_mhz"]}, tables, result["warnings"])


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@handle_errors
def serve(host, port):
    """Run the computation service."""
    import uvicorn

    uvicorn.run("sivepr.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
