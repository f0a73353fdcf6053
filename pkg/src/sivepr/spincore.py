"""S=1 spin Hamiltonian with temperature-dependent axial zero-field splitting.

All matrices are expressed in the defect frame (z along the trigonal symmetry
axis). The zero-field splitting is axial, so the magnetic field can be placed
in the xz plane without loss of generality; only the angle between field and
axis matters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .constants import G_ELECTRON_REFERENCE, GAMMA_E_MHZ_PER_MT
from .errors import PreconditionError

LABEL_PLUS = "0<->+1"
LABEL_MINUS = "0<->-1"

_UNIT_TOL = 1e-12
_PERMS = tuple(permutations(range(3)))


def _as_unit(vector, what="direction"):
    v = np.asarray(vector, dtype=float)
    if v.shape != (3,):
        raise PreconditionError(f"{what} must be a 3-vector, got shape {v.shape}")
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise PreconditionError(f"{what} must be nonzero")
    if abs(norm - 1.0) > _UNIT_TOL:
        raise PreconditionError(
            f"{what} must have unit norm within {_UNIT_TOL:g} (|v| = {norm!r}); "
            "normalize before constructing"
        )
    return tuple(float(x) for x in v)


def normalized(vector):
    """Return ``vector`` scaled to unit norm (helper for constructing axes)."""
    v = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise PreconditionError("cannot normalize a zero vector")
    return tuple(float(x) for x in v / norm)


DEFAULT_AXIS = normalized((1.0, 1.0, 1.0))

# The four <111>-type trigonal axes of the diamond lattice.
ORIENTATION_AXES = {
    "[111]": normalized((1.0, 1.0, 1.0)),
    "[1-11]": normalized((1.0, -1.0, 1.0)),
    "[-111]": normalized((-1.0, 1.0, 1.0)),
    "[11-1]": normalized((1.0, 1.0, -1.0)),
}


@dataclass(frozen=True)
class SpinOperatorSet:
    """Dimensionless S=1 operators in the m_s = {+1, 0, -1} basis (hbar = 1)."""

    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray


def spin_matrices() -> SpinOperatorSet:
    """Standard S=1 angular-momentum matrices, basis ordered (+1, 0, -1)."""
    s = 1.0 / math.sqrt(2.0)
    sx = np.array([[0, s, 0], [s, 0, s], [0, s, 0]], dtype=complex)
    sy = np.array([[0, -1j * s, 0], [1j * s, 0, -1j * s], [0, 1j * s, 0]], dtype=complex)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return SpinOperatorSet(sx=sx, sy=sy, sz=sz)


@dataclass(frozen=True)
class SlopeSegment:
    """A temperature range with a constant dD/dT slope in kHz/K."""

    t_low_k: float
    t_high_k: float
    slope_khz_per_k: float

    def __post_init__(self):
        if not (0.0 < self.t_low_k < self.t_high_k):
            raise PreconditionError(
                f"slope segment needs 0 < t_low < t_high, got ({self.t_low_k}, {self.t_high_k})"
            )


# SiV0 default: strong linear softening between 50 and 150 K, a shallower
# average slope up to the 300 K anchor, constant outside the measured range.
DEFAULT_SLOPE_SEGMENTS = (
    SlopeSegment(50.0, 150.0, -337.0),
    SlopeSegment(150.0, 300.0, -202.0),
)


@dataclass(frozen=True)
class ZfsModel:
    """Piecewise-linear axial zero-field-splitting D(T), anchored at t_ref."""

    d_ref_mhz: float = 1000.0
    t_ref_k: float = 300.0
    segments: tuple[SlopeSegment, ...] = DEFAULT_SLOPE_SEGMENTS

    def __post_init__(self):
        if self.t_ref_k <= 0.0:
            raise PreconditionError("t_ref_k must be positive")
        segs = tuple(sorted(self.segments, key=lambda s: s.t_low_k))
        for a, b in zip(segs, segs[1:]):
            if b.t_low_k < a.t_high_k - 1e-12:
                raise PreconditionError(
                    f"slope segments overlap: ({a.t_low_k}, {a.t_high_k}) and "
                    f"({b.t_low_k}, {b.t_high_k})"
                )
        object.__setattr__(self, "segments", segs)

    def _slope_integral_mhz(self, t_from: float, t_to: float) -> float:
        """Integral of dD/dT (MHz/K) from t_from to t_to, zero outside segments."""
        if t_from > t_to:
            return -self._slope_integral_mhz(t_to, t_from)
        total = 0.0
        for seg in self.segments:
            lo = max(t_from, seg.t_low_k)
            hi = min(t_to, seg.t_high_k)
            if hi > lo:
                total += (seg.slope_khz_per_k * 1e-3) * (hi - lo)
        return total

    def evaluate(self, t_k: float) -> float:
        """D at temperature t_k in MHz; clamped constant outside all segments."""
        if t_k <= 0.0:
            raise PreconditionError(f"temperature must be positive, got {t_k}")
        return self.d_ref_mhz + self._slope_integral_mhz(self.t_ref_k, t_k)


def zfs_at_temperature(model: ZfsModel, t_k: float) -> float:
    """Zero-field splitting in MHz at temperature t_k."""
    return model.evaluate(t_k)


@dataclass(frozen=True)
class SpinSystem:
    """S=1 defect: ZFS model, g-factor and trigonal symmetry axis.

    The gyromagnetic ratio is derived from g so that g = 2.0028 reproduces
    28.025 MHz/mT exactly.
    """

    zfs: ZfsModel = ZfsModel()
    g: float = G_ELECTRON_REFERENCE
    axis: tuple[float, float, float] = DEFAULT_AXIS

    def __post_init__(self):
        if not (0.0 < self.g < 10.0):
            raise PreconditionError(f"g-factor out of range: {self.g}")
        object.__setattr__(self, "axis", _as_unit(self.axis, "axis"))

    @property
    def gyromagnetic_mhz_per_mt(self) -> float:
        return self.g * (GAMMA_E_MHZ_PER_MT / G_ELECTRON_REFERENCE)


@dataclass(frozen=True)
class FieldConfig:
    """Static magnetic field: magnitude in mT and unit direction."""

    magnitude_mt: float
    direction: tuple[float, float, float] = DEFAULT_AXIS

    def __post_init__(self):
        if self.magnitude_mt < 0.0:
            raise PreconditionError(f"field magnitude must be >= 0, got {self.magnitude_mt}")
        object.__setattr__(self, "direction", _as_unit(self.direction, "field direction"))

    @classmethod
    def aligned(cls, magnitude_mt: float, axis=DEFAULT_AXIS) -> "FieldConfig":
        return cls(magnitude_mt=magnitude_mt, direction=_as_unit(axis, "axis"))

    def misalignment_deg(self, axis) -> float:
        """Angle in degrees between the field direction and ``axis``."""
        a = np.asarray(_as_unit(axis, "axis"))
        c = float(np.clip(np.dot(self.direction, a), -1.0, 1.0))
        return math.degrees(math.acos(c))


def _field_components(sys: SpinSystem, direction) -> tuple[float, float]:
    """(parallel, perpendicular) unit-field components in the defect frame."""
    d = np.asarray(_as_unit(direction, "field direction"))
    c = float(np.clip(np.dot(d, np.asarray(sys.axis)), -1.0, 1.0))
    return c, math.sqrt(max(0.0, 1.0 - c * c))


def build_hamiltonian(sys: SpinSystem, field: FieldConfig, t_k: float) -> np.ndarray:
    """3x3 Hermitian spin Hamiltonian in MHz, defect frame, basis (+1, 0, -1).

    H = D(T) (Sz^2 - (2/3) I) + gamma (B_par Sz + B_perp Sx). Traceless and
    exactly Hermitian by construction.
    """
    d = zfs_at_temperature(sys.zfs, t_k)
    b_par_u, b_perp_u = _field_components(sys, field.direction)
    gam = sys.gyromagnetic_mhz_per_mt
    ops = spin_matrices()
    h = d * (ops.sz @ ops.sz - (2.0 / 3.0) * np.eye(3)) + gam * field.magnitude_mt * (
        b_par_u * ops.sz + b_perp_u * ops.sx
    )
    return h


def _labeled_energies(h: np.ndarray) -> tuple[dict, bool]:
    """Assign eigenvalues to m_s labels by dominant basis character.

    Returns ({+1: E, 0: E, -1: E}, ambiguous). The assignment maximizes the
    summed overlap over all bijections; it is flagged ambiguous when the
    weakest assigned overlap drops below 1/2 (strongly mixed states).
    """
    evals, evecs = np.linalg.eigh(h)
    overlap = np.abs(evecs) ** 2  # rows: basis (+1, 0, -1); columns: eigenvectors
    best_perm, best_score = None, -1.0
    for perm in _PERMS:
        score = overlap[0, perm[0]] + overlap[1, perm[1]] + overlap[2, perm[2]]
        if score > best_score:
            best_perm, best_score = perm, score
    energies = {
        +1: float(evals[best_perm[0]]),
        0: float(evals[best_perm[1]]),
        -1: float(evals[best_perm[2]]),
    }
    min_overlap = min(overlap[k, best_perm[k]] for k in range(3))
    return energies, bool(min_overlap < 0.5)


@dataclass(frozen=True)
class TransitionFrequencies:
    """|0 <-> +1| and |0 <-> -1| transition frequencies in MHz."""

    f_plus_mhz: float
    f_minus_mhz: float
    ambiguous: bool = False


def transition_frequencies(sys: SpinSystem, field: FieldConfig, t_k: float) -> TransitionFrequencies:
    """Both ground-triplet transition frequencies, labeled by m_s character.

    ``ambiguous`` is set instead of raising when the field is so strongly
    misaligned that eigenstates have no dominant m_s character.
    """
    energies, ambiguous = _labeled_energies(build_hamiltonian(sys, field, t_k))
    return TransitionFrequencies(
        f_plus_mhz=abs(energies[+1] - energies[0]),
        f_minus_mhz=abs(energies[0] - energies[-1]),
        ambiguous=ambiguous,
    )


@dataclass(frozen=True)
class Resonance:
    field_mt: float
    transition: str  # LABEL_PLUS or LABEL_MINUS


def _batched_transition_curves(sys, direction, t_k, fields_mt):
    """Vectorized (f_plus, f_minus) over a field grid, for bracketing."""
    d = zfs_at_temperature(sys.zfs, t_k)
    b_par_u, b_perp_u = _field_components(sys, direction)
    gam = sys.gyromagnetic_mhz_per_mt
    ops = spin_matrices()
    h_zfs = d * (ops.sz @ ops.sz - (2.0 / 3.0) * np.eye(3))
    h_zee = gam * (b_par_u * ops.sz + b_perp_u * ops.sx)
    h = h_zfs[None, :, :] + fields_mt[:, None, None] * h_zee[None, :, :]
    evals, evecs = np.linalg.eigh(h)
    overlap = np.abs(evecs) ** 2  # (n, basis, eigvec)
    scores = np.stack(
        [overlap[:, 0, p0] + overlap[:, 1, p1] + overlap[:, 2, p2] for (p0, p1, p2) in _PERMS],
        axis=1,
    )
    choice = np.argmax(scores, axis=1)
    perm_arr = np.asarray(_PERMS)[choice]  # (n, 3): eigencolumn per basis slot
    rows = np.arange(len(fields_mt))
    e_plus = evals[rows, perm_arr[:, 0]]
    e_zero = evals[rows, perm_arr[:, 1]]
    e_minus = evals[rows, perm_arr[:, 2]]
    return np.abs(e_plus - e_zero), np.abs(e_zero - e_minus)


def resonance_fields(
    sys: SpinSystem,
    microwave_freq_mhz: float,
    direction=DEFAULT_AXIS,
    t_k: float = 300.0,
    b_max_mt: float = 1200.0,
    b_step_mt: float = 0.1,
    freq_tol_mhz: float = 1e-6,
) -> list[Resonance]:
    """All fields in [0, b_max_mt] where a transition matches the microwave
    frequency, found by grid bracketing plus bisection on the exact
    eigen-differences. An empty list means no resonance in range.
    """
    if microwave_freq_mhz <= 0.0:
        raise PreconditionError("microwave frequency must be positive")
    if b_max_mt <= 0.0 or b_step_mt <= 0.0:
        raise PreconditionError("field search range and step must be positive")
    n = int(math.ceil(b_max_mt / b_step_mt)) + 1
    grid = np.linspace(0.0, b_max_mt, n)
    f_plus, f_minus = _batched_transition_curves(sys, direction, t_k, grid)

    def freq_at(b: float, which: int) -> float:
        fp, fm = _batched_transition_curves(sys, direction, t_k, np.array([b]))
        return float(fp[0]) if which == 0 else float(fm[0])

    found: list[Resonance] = []
    for which, (curve, label) in enumerate([(f_plus, LABEL_PLUS), (f_minus, LABEL_MINUS)]):
        g = curve - microwave_freq_mhz
        roots: list[float] = []
        for i in range(n - 1):
            if g[i] == 0.0:
                roots.append(float(grid[i]))
            if g[i] * g[i + 1] < 0.0:
                lo, hi = float(grid[i]), float(grid[i + 1])
                g_lo = float(g[i])
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    g_mid = freq_at(mid, which) - microwave_freq_mhz
                    if g_mid == 0.0 or (hi - lo) < 1e-11:
                        lo = hi = mid
                        break
                    if (g_mid > 0.0) == (g_lo > 0.0):
                        lo, g_lo = mid, g_mid
                    else:
                        hi = mid
                roots.append(0.5 * (lo + hi))
        if g[n - 1] == 0.0:
            roots.append(float(grid[n - 1]))
        for b in roots:
            if abs(freq_at(b, which) - microwave_freq_mhz) > freq_tol_mhz:
                continue
            if any(t.transition == label and abs(t.field_mt - b) < b_step_mt * 1e-6 for t in found):
                continue
            found.append(Resonance(field_mt=b, transition=label))
    found.sort(key=lambda r: (r.field_mt, r.transition))
    return found
