"""Directed rate networks for optical spin-polarization dynamics.

Electronic states are nodes; radiative, non-radiative and optically pumped
transitions are directed edges with rate constants in s^-1. Pump edges scale
linearly with a dimensionless pump power P. The induced master equation
dp/dt = M p conserves probability (columns of M sum to zero).

Two preset topologies cover the candidate polarization mechanisms for an
S=1 defect with a high Debye-Waller factor: (A) spin-selective intersystem
crossing from the radiative excited triplet through a singlet shelving
cascade, with a weak direct ground-to-singlet pump path; (B) intersystem
crossing from an intermediate, optically dark triplet fed by the excited
state or by vibronic-sideband pumping. Preset rate constants are
order-of-magnitude placeholders: the presets fix topology, not calibration.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NumericalError, ParseError, PreconditionError
from .populations import LevelPopulations
from .relaxation import RelaxationParams, relaxation_rate

TAG_MS_PLUS = "ms=+1"
TAG_MS_ZERO = "ms=0"
TAG_MS_MINUS = "ms=-1"
TAG_EXCITED = "excited"
TAG_SINGLET = "singlet"
TAG_SHELVING = "shelving"
_TAGS = (TAG_MS_PLUS, TAG_MS_ZERO, TAG_MS_MINUS, TAG_EXCITED, TAG_SINGLET, TAG_SHELVING)
_MS_TAGS = (TAG_MS_PLUS, TAG_MS_ZERO, TAG_MS_MINUS)


@dataclass(frozen=True)
class SchemeState:
    name: str
    tag: str

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise PreconditionError(f"unknown state tag {self.tag!r} for state {self.name!r}")


@dataclass(frozen=True)
class RateEdge:
    source: str
    target: str
    rate_per_s: float
    pump: bool = False

    def __post_init__(self):
        if self.rate_per_s < 0.0:
            raise PreconditionError(
                f"negative rate on edge {self.source} -> {self.target}: {self.rate_per_s}"
            )
        if self.source == self.target:
            raise PreconditionError(f"self-loop on state {self.source!r}")


@dataclass(frozen=True)
class LevelScheme:
    """Validated rate network; state order defines the population vector."""

    states: tuple[SchemeState, ...]
    edges: tuple[RateEdge, ...]

    def __post_init__(self):
        names = [s.name for s in self.states]
        if len(set(names)) != len(names):
            raise PreconditionError("state names must be unique")
        for tag in _MS_TAGS:
            if sum(1 for s in self.states if s.tag == tag) > 1:
                raise PreconditionError(f"at most one state may carry tag {tag}")
        known = set(names)
        for e in self.edges:
            for end in (e.source, e.target):
                if end not in known:
                    raise PreconditionError(
                        f"edge {e.source} -> {e.target} references unknown state {end!r}"
                    )

    @property
    def size(self) -> int:
        return len(self.states)

    def index(self, name: str) -> int:
        for i, s in enumerate(self.states):
            if s.name == name:
                return i
        raise PreconditionError(f"unknown state {name!r}")

    def ms_indices(self) -> dict[int, int]:
        """Mapping m_s value -> state index; requires the full ground triplet."""
        found = {}
        for i, s in enumerate(self.states):
            if s.tag == TAG_MS_PLUS:
                found[+1] = i
            elif s.tag == TAG_MS_ZERO:
                found[0] = i
            elif s.tag == TAG_MS_MINUS:
                found[-1] = i
        if set(found) != {+1, 0, -1}:
            raise PreconditionError(
                "scheme must tag exactly one state with each of ms=+1, ms=0, ms=-1"
            )
        return found


@dataclass(frozen=True)
class SchemePreset:
    identifier: str
    description: str
    build: Callable[..., LevelScheme]


def build_rate_matrix(scheme: LevelScheme, pump: float) -> np.ndarray:
    """Master-equation generator M with M[i, j] = rate j -> i for i != j.

    Diagonal entries close each column so probability is conserved.
    """
    if pump < 0.0:
        raise PreconditionError("pump power must be >= 0")
    n = scheme.size
    idx = {s.name: i for i, s in enumerate(scheme.states)}
    m = np.zeros((n, n))
    for e in scheme.edges:
        rate = e.rate_per_s * (pump if e.pump else 1.0)
        j, i = idx[e.source], idx[e.target]
        m[i, j] += rate
        m[j, j] -= rate
    return m


def _communicating_classes(scheme: LevelScheme, pump: float) -> list[set[str]]:
    """Strongly connected components of the positive-rate digraph."""
    n = scheme.size
    idx = {s.name: i for i, s in enumerate(scheme.states)}
    adj = np.eye(n, dtype=bool)
    for e in scheme.edges:
        rate = e.rate_per_s * (pump if e.pump else 1.0)
        if rate > 0.0:
            adj[idx[e.source], idx[e.target]] = True
    reach = adj.copy()
    for _ in range(max(1, int(np.ceil(np.log2(n)))) + 1):
        reach = reach | (reach.astype(int) @ reach.astype(int) > 0)
    mutual = reach & reach.T
    seen: set[int] = set()
    classes = []
    for i in range(n):
        if i in seen:
            continue
        members = set(np.nonzero(mutual[i])[0].tolist())
        seen |= members
        classes.append({scheme.states[k].name for k in members})
    return classes


def _closed_classes(scheme: LevelScheme, pump: float) -> list[set[str]]:
    """Communicating classes with no escaping edge (recurrent classes)."""
    classes = _communicating_classes(scheme, pump)
    closed = []
    for cls in classes:
        escapes = any(
            e.source in cls
            and e.target not in cls
            and e.rate_per_s * (pump if e.pump else 1.0) > 0.0
            for e in scheme.edges
        )
        if not escapes:
            closed.append(cls)
    return closed


def steady_state(scheme: LevelScheme, pump: float) -> np.ndarray:
    """Stationary population vector (sums to one, entries >= -1e-12).

    Raises when the stationary distribution is not unique, reporting the
    disconnected recurrent classes; a degenerate network is a modeling error,
    never silently pseudo-inverted.
    """
    closed = _closed_classes(scheme, pump)
    if len(closed) != 1:
        detail = "; ".join(sorted("{" + ", ".join(sorted(c)) + "}" for c in closed))
        raise NumericalError(
            f"steady state is not unique: {len(closed)} disconnected recurrent classes: {detail}"
        )
    m = build_rate_matrix(scheme, pump)
    n = scheme.size
    a = np.vstack([m, np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    if sol.min() < -1e-12:
        raise NumericalError(f"steady state has a negative population: {sol.min()!r}")
    sol = np.maximum(sol, 0.0)
    return sol / sol.sum()


def time_evolve(scheme: LevelScheme, pump: float, p0, t_grid_s) -> np.ndarray:
    """Solve dp/dt = M p on the given time grid with an implicit stiff solver.

    Returns an array of shape (len(t_grid_s), n_states). Population sums are
    conserved to 1e-9 at every output point.
    """
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (scheme.size,):
        raise PreconditionError(f"p0 must have length {scheme.size}")
    if abs(p0.sum() - 1.0) > 1e-9:
        raise PreconditionError(f"p0 must sum to 1, got {p0.sum()!r}")
    t = np.asarray(t_grid_s, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(np.diff(t) <= 0.0) or t[0] < 0.0:
        raise PreconditionError("t_grid_s must be strictly increasing and non-negative")
    m = build_rate_matrix(scheme, pump)

    sol = solve_ivp(
        lambda _t, p: m @ p,
        t_span=(0.0, float(t[-1])),
        y0=p0,
        method="Radau",
        t_eval=t,
        jac=lambda _t, _p: m,
        rtol=1e-10,
        atol=1e-13,
    )
    if not sol.success:
        raise NumericalError(f"time evolution failed: {sol.message}")
    traj = sol.y.T
    drift = np.max(np.abs(traj.sum(axis=1) - 1.0))
    if drift > 1e-9:
        raise NumericalError(f"probability drifted by {drift:g} during integration")
    return traj


def ground_triplet_populations(scheme: LevelScheme, populations) -> LevelPopulations:
    """Populations of the ground triplet sublevels normalized within the triplet."""
    p = np.asarray(populations, dtype=float)
    ms = scheme.ms_indices()
    gs = np.array([p[ms[+1]], p[ms[0]], p[ms[-1]]])
    total = gs.sum()
    if total <= 0.0:
        raise PreconditionError("no population in the ground triplet")
    return LevelPopulations.from_array(gs / total)


def predicted_polarization(scheme: LevelScheme, pump: float) -> float:
    """Steady-state spin polarization in percent, dark state as reference."""
    dark = ground_triplet_populations(scheme, steady_state(scheme, 0.0))
    light = ground_triplet_populations(scheme, steady_state(scheme, pump))
    denom = dark.p_plus1 + dark.p_minus1
    if denom <= 0.0:
        raise PreconditionError("dark reference is fully polarized; polarization undefined")
    return 100.0 * (light.p_zero - dark.p_zero) / denom


def polarization_vs_pump(scheme: LevelScheme, pump_grid) -> np.ndarray:
    """Array of (P, xi_percent) rows over an ascending pump grid (P >= 0)."""
    grid = np.asarray(pump_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise PreconditionError("pump grid must be a non-empty 1-d array")
    if np.any(grid < 0.0) or np.any(np.diff(grid) <= 0.0):
        raise PreconditionError("pump grid must be non-negative and strictly ascending")
    dark = ground_triplet_populations(scheme, steady_state(scheme, 0.0))
    denom = dark.p_plus1 + dark.p_minus1
    if denom <= 0.0:
        raise PreconditionError("dark reference is fully polarized; polarization undefined")
    rows = np.empty((grid.size, 2))
    for k, p in enumerate(grid):
        light = ground_triplet_populations(scheme, steady_state(scheme, float(p)))
        rows[k] = (p, 100.0 * (light.p_zero - dark.p_zero) / denom)
    return rows


def linearity_score(sweep: np.ndarray, decades: float = 1.0) -> float:
    """Max relative deviation from the best-fit line over the lowest pump decade.

    Deviations are normalized by the largest |xi| in the window; a window of
    (numerically) zero polarization scores 0. Needs at least three points in
    the window.
    """
    sweep = np.asarray(sweep, dtype=float)
    pumps = sweep[:, 0]
    positive = pumps > 0.0
    if positive.sum() < 3:
        raise PreconditionError("need at least three positive pump points")
    p_min = pumps[positive].min()
    window = positive & (pumps <= p_min * 10.0**decades * (1.0 + 1e-12))
    if window.sum() < 3:
        raise PreconditionError("need at least three points in the lowest pump decade")
    x = pumps[window]
    y = sweep[window, 1]
    y_scale = np.max(np.abs(y))
    if y_scale < 1e-300:
        return 0.0
    coeffs = np.polyfit(x, y, 1)
    resid = y - np.polyval(coeffs, x)
    return float(np.max(np.abs(resid)) / y_scale)


def _triplet_states(prefix: str, tags: bool) -> list[SchemeState]:
    if tags:
        return [
            SchemeState(f"{prefix}_p1", TAG_MS_PLUS),
            SchemeState(f"{prefix}_0", TAG_MS_ZERO),
            SchemeState(f"{prefix}_m1", TAG_MS_MINUS),
        ]
    return [SchemeState(f"{prefix}_{suffix}", TAG_EXCITED) for suffix in ("p1", "0", "m1")]


def _spin_lattice_edges(t1_s: float) -> list[RateEdge]:
    """Symmetric ground-triplet relaxation: three edge pairs at 1/(3 T1)."""
    rate = 1.0 / (3.0 * t1_s)
    pairs = (("gs_p1", "gs_0"), ("gs_0", "gs_m1"), ("gs_p1", "gs_m1"))
    edges = []
    for a, b in pairs:
        edges.append(RateEdge(a, b, rate))
        edges.append(RateEdge(b, a, rate))
    return edges


def _ground_t1_seconds(temperature_k: float, relaxation: Optional[RelaxationParams]) -> float:
    params = relaxation if relaxation is not None else RelaxationParams()
    return 1.0 / relaxation_rate(params, temperature_k)


def scheme_a(
    *,
    pump_rate_per_s: float = 1.0e6,
    direct_singlet_pump_per_s: float = 1.0e4,
    radiative_rate_per_s: float = 1.0e8,
    isc_rate_pm_per_s: float = 1.0e7,
    isc_rate_zero_per_s: float = 1.0e6,
    singlet_cascade_rate_per_s: float = 1.0e7,
    return_rate_zero_per_s: float = 7.0e5,
    return_rate_pm_per_s: float = 1.5e5,
    temperature_k: float = 292.0,
    relaxation: Optional[RelaxationParams] = None,
) -> LevelScheme:
    """Mechanism A: selective crossing from the radiative excited triplet into
    a two-singlet shelving cascade that returns preferentially to m_s = 0,
    plus a weak direct ground-to-singlet pump path that is only weakly allowed.
    """
    states = _triplet_states("gs", tags=True) + _triplet_states("es", tags=False)
    states += [SchemeState("s_upper", TAG_SINGLET), SchemeState("s_lower", TAG_SINGLET)]
    edges: list[RateEdge] = []
    for suffix in ("p1", "0", "m1"):
        edges.append(RateEdge(f"gs_{suffix}", f"es_{suffix}", pump_rate_per_s, pump=True))
        edges.append(RateEdge(f"es_{suffix}", f"gs_{suffix}", radiative_rate_per_s))
    edges.append(RateEdge("gs_p1", "s_upper", direct_singlet_pump_per_s, pump=True))
    edges.append(RateEdge("gs_m1", "s_upper", direct_singlet_pump_per_s, pump=True))
    edges.append(RateEdge("es_p1", "s_upper", isc_rate_pm_per_s))
    edges.append(RateEdge("es_m1", "s_upper", isc_rate_pm_per_s))
    edges.append(RateEdge("es_0", "s_upper", isc_rate_zero_per_s))
    edges.append(RateEdge("s_upper", "s_lower", singlet_cascade_rate_per_s))
    edges.append(RateEdge("s_lower", "gs_0", return_rate_zero_per_s))
    edges.append(RateEdge("s_lower", "gs_p1", return_rate_pm_per_s))
    edges.append(RateEdge("s_lower", "gs_m1", return_rate_pm_per_s))
    edges += _spin_lattice_edges(_ground_t1_seconds(temperature_k, relaxation))
    return LevelScheme(states=tuple(states), edges=tuple(edges))


def scheme_b(
    *,
    pump_rate_per_s: float = 1.0e6,
    sideband_pump_rate_per_s: float = 1.0e5,
    radiative_rate_per_s: float = 1.0e8,
    internal_conversion_rate_per_s: float = 1.0e7,
    isc_rate_pm_per_s: float = 1.0e7,
    isc_rate_zero_per_s: float = 1.0e6,
    return_rate_zero_per_s: float = 7.0e5,
    return_rate_pm_per_s: float = 1.5e5,
    temperature_k: float = 292.0,
    relaxation: Optional[RelaxationParams] = None,
) -> LevelScheme:
    """Mechanism B: an intermediate dark triplet between the ground and
    radiative excited states is fed by internal conversion and by weak
    vibronic-sideband pumping; selective crossing from it into a singlet
    returns population preferentially to m_s = 0.
    """
    states = _triplet_states("gs", tags=True) + _triplet_states("es", tags=False)
    states += [SchemeState(f"t2_{s}", TAG_SHELVING) for s in ("p1", "0", "m1")]
    states.append(SchemeState("s1", TAG_SINGLET))
    edges = []
    for suffix in ("p1", "0", "m1"):
        edges.append(RateEdge(f"gs_{suffix}", f"es_{suffix}", pump_rate_per_s, pump=True))
        edges.append(RateEdge(f"es_{suffix}", f"gs_{suffix}", radiative_rate_per_s))
        edges.append(RateEdge(f"gs_{suffix}", f"t2_{suffix}", sideband_pump_rate_per_s, pump=True))
        edges.append(RateEdge(f"es_{suffix}", f"t2_{suffix}", internal_conversion_rate_per_s))
    edges.append(RateEdge("t2_p1", "s1", isc_rate_pm_per_s))
    edges.append(RateEdge("t2_m1", "s1", isc_rate_pm_per_s))
    edges.append(RateEdge("t2_0", "s1", isc_rate_zero_per_s))
    edges.append(RateEdge("s1", "gs_0", return_rate_zero_per_s))
    edges.append(RateEdge("s1", "gs_p1", return_rate_pm_per_s))
    edges.append(RateEdge("s1", "gs_m1", return_rate_pm_per_s))
    edges += _spin_lattice_edges(_ground_t1_seconds(temperature_k, relaxation))
    return LevelScheme(states=tuple(states), edges=tuple(edges))


def symmetric_reference_scheme(**kwargs) -> LevelScheme:
    """Mechanism A topology with all spin selectivity removed; its steady
    state carries zero polarization at any pump power (test reference)."""
    kwargs.setdefault("isc_rate_zero_per_s", kwargs.get("isc_rate_pm_per_s", 1.0e7))
    kwargs.setdefault("isc_rate_pm_per_s", kwargs["isc_rate_zero_per_s"])
    kwargs.setdefault("return_rate_zero_per_s", 3.0e5)
    kwargs.setdefault("return_rate_pm_per_s", kwargs["return_rate_zero_per_s"])
    kwargs.setdefault("direct_singlet_pump_per_s", 0.0)
    return scheme_a(**kwargs)


PRESETS = {
    "scheme-A": SchemePreset(
        identifier="scheme-A",
        description="singlet-mediated crossing from the radiative excited triplet",
        build=scheme_a,
    ),
    "scheme-B": SchemePreset(
        identifier="scheme-B",
        description="crossing from an intermediate dark triplet fed by internal conversion",
        build=scheme_b,
    ),
}


def preset_scheme(identifier: str, **kwargs) -> LevelScheme:
    if identifier not in PRESETS:
        raise PreconditionError(
            f"unknown scheme preset {identifier!r}; available: {', '.join(sorted(PRESETS))}"
        )
    return PRESETS[identifier].build(**kwargs)


# --- scheme definition files -------------------------------------------------
#
# Grammar (one directive per line, '#' starts a comment):
#   state <name> [ms=+1|ms=0|ms=-1|excited|singlet|shelving]
#   rate <from> <to> <value_s^-1> [pump]
# Untagged states default to 'excited'.

def parse_scheme(text: str, path=None) -> LevelScheme:
    states: list[SchemeState] = []
    edges: list[RateEdge] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "state":
            if len(tokens) == 2:
                states.append(SchemeState(tokens[1], TAG_EXCITED))
            elif len(tokens) == 3:
                try:
                    states.append(SchemeState(tokens[1], tokens[2]))
                except PreconditionError as exc:
                    raise ParseError(str(exc), line_number=lineno, path=path) from exc
            else:
                raise ParseError("state takes a name and an optional tag", lineno, path)
        elif tokens[0] == "rate":
            if len(tokens) not in (4, 5):
                raise ParseError("rate takes <from> <to> <value_s^-1> [pump]", lineno, path)
            pump = False
            if len(tokens) == 5:
                if tokens[4] != "pump":
                    raise ParseError(f"unknown rate modifier {tokens[4]!r}", lineno, path)
                pump = True
            try:
                value = float(tokens[3])
            except ValueError:
                raise ParseError(f"bad rate value {tokens[3]!r}", lineno, path) from None
            try:
                edges.append(RateEdge(tokens[1], tokens[2], value, pump=pump))
            except PreconditionError as exc:
                raise ParseError(str(exc), line_number=lineno, path=path) from exc
        else:
            raise ParseError(f"unknown directive {tokens[0]!r}", lineno, path)
    if not states:
        raise ParseError("scheme defines no states", None, path)
    try:
        return LevelScheme(states=tuple(states), edges=tuple(edges))
    except PreconditionError as exc:
        raise ParseError(str(exc), None, path) from exc


def load_scheme(path) -> LevelScheme:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scheme(fh.read(), path=str(path))


def scheme_to_text(scheme: LevelScheme) -> str:
    lines = [f"state {s.name} {s.tag}" for s in scheme.states]
    for e in scheme.edges:
        suffix = " pump" if e.pump else ""
        lines.append(f"rate {e.source} {e.target} {e.rate_per_s!r}{suffix}")
    return "\n".join(lines) + "\n"
