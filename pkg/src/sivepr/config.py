"""Run configuration: flat key=value INI files with sections.

Every key is whitelisted; unknown sections or keys are usage errors reported
with their location so typos never silently fall back to defaults. CLI
options override config values, which override the built-in defaults.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field as dataclass_field
from typing import Optional

from .errors import UsageError
from .spincore import SlopeSegment, SpinSystem, ZfsModel, normalized

ENV_CONFIG_PATH = "SIVEPR_CONFIG"

# section -> {key: default-as-string}; None marks "no default, optional".
KNOWN_KEYS: dict[str, dict[str, Optional[str]]] = {
    "spin": {
        "d_ref_mhz": "1000.0",
        "t_ref_k": "300.0",
        "slope_segments_khz_per_k": "50:150:-337, 150:300:-202",
        "g": "2.0028",
        "axis": "1,1,1",
    },
    "field": {
        "direction": "1,1,1",
        "b_max_mt": "1200.0",
        "b_step_mt": "0.1",
    },
    "resonance": {
        "frequency_mhz": "9750.0",
        "temperatures_k": "300.0",
        "orientations": "aligned",
    },
    "relaxation": {
        "a_const_per_s": "0.036",
        "a_raman_per_s_k7": "5.0e-13",
        "a_orbach_per_s": "1.5e5",
        "delta_e_mev": "22.0",
        "fixed": "",
        "linewidth_weight": "0.5",
        "curve_points": "200",
    },
    "polarization": {
        "frequency_mhz": "9750.0",
        "reference_temperature_k": "292.0",
    },
    "pump-sweep": {
        "scheme": "scheme-A",
        "pump_min": "1e-4",
        "pump_max": "10.0",
        "pump_points": "26",
        "temperature_k": "292.0",
    },
    "simulate": {
        "kind": None,
        "t1_s": "18.0",
        "t2_s": "103e-6",
        "m_eq": "1.0",
        "m_init": "-1.0",
        "s0": "1.0",
        "tau_max_s": None,
        "points": "41",
        "noise_fraction": "0.0",
        "lineshape": "lorentzian",
        "width_pp_mt": "0.2",
        "populations": "0,1,0",
        "temperature_k": "300.0",
        "condition": "light",
        "field_min_mt": "300.0",
        "field_max_mt": "400.0",
        "field_points": "2000",
        "frequency_mhz": "9750.0",
        "scheme": "scheme-A",
        "pump": "1.0",
        "t_max_s": "1e-6",
    },
    "linewidth": {
        "offset_mhz": "0.25",
    },
    "run": {
        "seed": "0",
    },
}


def _parse_float_list(text: str, where: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise UsageError(f"{where}: expected comma-separated numbers, got {text!r}") from None


def _parse_segments(text: str, where: str) -> tuple[SlopeSegment, ...]:
    segments = []
    stripped = text.strip()
    if not stripped:
        return ()
    for part in stripped.split(","):
        pieces = part.strip().split(":")
        if len(pieces) != 3:
            raise UsageError(f"{where}: segment must be t_low:t_high:slope_khz_per_k, got {part!r}")
        try:
            segments.append(SlopeSegment(float(pieces[0]), float(pieces[1]), float(pieces[2])))
        except ValueError:
            raise UsageError(f"{where}: bad number in segment {part!r}") from None
    return tuple(segments)


@dataclass
class RunConfig:
    """Validated configuration values, seed included."""

    values: dict[str, dict[str, str]] = dataclass_field(default_factory=dict)

    @classmethod
    def load(cls, path: Optional[str]) -> "RunConfig":
        cfg = cls(values={s: dict() for s in KNOWN_KEYS})
        if path is None:
            return cfg
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh, source=str(path))
        except OSError as exc:
            raise UsageError(f"cannot read config file {path}: {exc}") from exc
        except configparser.Error as exc:
            raise UsageError(f"malformed config file: {exc}") from exc
        for section in parser.sections():
            if section not in KNOWN_KEYS:
                raise UsageError(f"unknown config section [{section}] in {path}")
            for key, value in parser.items(section):
                if key not in KNOWN_KEYS[section]:
                    raise UsageError(f"unknown config key [{section}] {key} in {path}")
                cfg.values[section][key] = value
        return cfg

    def set(self, section: str, key: str, value) -> None:
        if section not in KNOWN_KEYS or key not in KNOWN_KEYS[section]:
            raise UsageError(f"unknown config key [{section}] {key}")
        self.values.setdefault(section, {})[key] = str(value)

    def get(self, section: str, key: str) -> Optional[str]:
        if section not in KNOWN_KEYS or key not in KNOWN_KEYS[section]:
            raise UsageError(f"unknown config key [{section}] {key}")
        if key in self.values.get(section, {}):
            return self.values[section][key]
        return KNOWN_KEYS[section][key]

    def get_float(self, section: str, key: str) -> float:
        raw = self.get(section, key)
        if raw is None:
            raise UsageError(f"missing required config value [{section}] {key}")
        try:
            return float(raw)
        except ValueError:
            raise UsageError(f"[{section}] {key}: expected a number, got {raw!r}") from None

    def get_int(self, section: str, key: str) -> int:
        raw = self.get(section, key)
        if raw is None:
            raise UsageError(f"missing required config value [{section}] {key}")
        try:
            return int(raw)
        except ValueError:
            raise UsageError(f"[{section}] {key}: expected an integer, got {raw!r}") from None

    def get_floats(self, section: str, key: str) -> list[float]:
        raw = self.get(section, key)
        if raw is None:
            raise UsageError(f"missing required config value [{section}] {key}")
        return _parse_float_list(raw, f"[{section}] {key}")

    def seed(self) -> int:
        return self.get_int("run", "seed")

    def spin_system(self) -> SpinSystem:
        axis = _parse_float_list(self.get("spin", "axis"), "[spin] axis")
        if len(axis) != 3:
            raise UsageError("[spin] axis: expected three components")
        g = self.get_float("spin", "g")
        if not (1.0 < g < 3.0):
            raise UsageError(f"[spin] g: {g} outside the plausible range (1, 3)")
        zfs = ZfsModel(
            d_ref_mhz=self.get_float("spin", "d_ref_mhz"),
            t_ref_k=self.get_float("spin", "t_ref_k"),
            segments=_parse_segments(
                self.get("spin", "slope_segments_khz_per_k"),
                "[spin] slope_segments_khz_per_k",
            ),
        )
        return SpinSystem(zfs=zfs, g=g, axis=normalized(axis))

    def field_direction(self) -> tuple[float, float, float]:
        direction = _parse_float_list(self.get("field", "direction"), "[field] direction")
        if len(direction) != 3:
            raise UsageError("[field] direction: expected three components")
        return normalized(direction)
