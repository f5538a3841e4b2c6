"""Detector scan protocols over a coincidence map, and profile analysis.

Scans only index the map; they never recompute physics. Positions must lie
on the map grid. Use :meth:`CoincidenceMap.snap` to pick on-grid values.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np

from .correlation import CoincidenceMap
from .errors import ConfigurationError, GridError
from .wavefield import IntensityProfile

__all__ = [
    "Protocol",
    "Extremum",
    "ScanProfile",
    "scan_fixed_d1",
    "scan_same_sense",
    "scan_opposite_sense",
    "singles_scan",
    "profile_extremum",
    "profile_width",
    "profile_center",
]


class Protocol(enum.Enum):
    FIXED_D1 = "FixedD1"
    SAME_SENSE = "SameSense"
    OPPOSITE_SENSE = "OppositeSense"
    SINGLES_CALIBRATION = "SinglesCalibration"


class Extremum(NamedTuple):
    position: float
    value: float


@dataclass(frozen=True)
class ScanProfile:
    """Values recorded while scanning, plotted against the D2 (or scanned) position.

    ``fixed_offset`` is the protocol's fixed parameter; each ``scan_*``
    function documents its meaning.
    """

    positions: np.ndarray
    values: np.ndarray
    protocol: Protocol
    fixed_offset: float = 0.0
    uncertainties: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        val = np.asarray(self.values, dtype=float)
        if pos.shape != val.shape or pos.ndim != 1:
            raise ConfigurationError("positions and values must be 1D arrays of equal length")
        if pos.size > 1 and np.any(np.diff(pos) <= 0):
            raise ConfigurationError("scan positions must be strictly increasing")
        if np.any(val < 0):
            raise ConfigurationError("scan values must be non-negative")
        unc = self.uncertainties
        if unc is None:
            unc = np.zeros_like(val)
        unc = np.asarray(unc, dtype=float)
        if unc.shape != val.shape:
            raise ConfigurationError("uncertainties must match values in length")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "uncertainties", unc)
        object.__setattr__(self, "protocol", Protocol(self.protocol))

    def __len__(self):
        return self.positions.size

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(f"# protocol={self.protocol.value}\n")
        buf.write(f"# fixed_offset_m={self.fixed_offset!r}\n")
        buf.write("position_m,value\n")
        for x, v in zip(self.positions, self.values):
            buf.write(f"{float(x)!r},{float(v)!r}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _span_indices(cmap: CoincidenceMap, span: Tuple[float, float]) -> np.ndarray:
    lo, hi = span
    if not hi > lo:
        raise ConfigurationError(f"scan range ({lo}, {hi}) is empty")
    return np.arange(cmap.index_of(lo), cmap.index_of(hi) + 1)


def scan_fixed_d1(cmap: CoincidenceMap, d1_position: float, span: Tuple[float, float]) -> ScanProfile:
    """Hold D1 at ``d1_position`` and scan D2 over ``span = (lo, hi)``."""
    j = cmap.index_of(d1_position)
    k = _span_indices(cmap, span)
    return ScanProfile(cmap.x[k], cmap.values[j, k], Protocol.FIXED_D1, float(d1_position))


def scan_same_sense(
    cmap: CoincidenceMap, span: Tuple[float, float], lag: float = 0.0
) -> ScanProfile:
    """Move both detectors together; D1 sits at D2 position + ``lag``."""
    k = _span_indices(cmap, span)
    shift = cmap.index_of(cmap.x0 + lag) if lag else 0
    j = k + shift
    if j.min() < 0 or j.max() >= cmap.size:
        raise GridError("same-sense scan with this lag leaves the map")
    return ScanProfile(cmap.x[k], cmap.values[j, k], Protocol.SAME_SENSE, float(lag))


def scan_opposite_sense(
    cmap: CoincidenceMap, center: float, span: Tuple[float, float]
) -> ScanProfile:
    """Move the detectors in opposite senses about ``center``.

    D1 sits at ``2*center - rho2``. Only the mirrored D1 positions must be
    on-grid, so a center halfway between samples (such as 0 on a symmetric
    grid) is accepted.
    """
    k = _span_indices(cmap, span)
    x2 = cmap.x[k]
    j = np.array([cmap.index_of(2 * center - x) for x in x2])
    return ScanProfile(x2, cmap.values[j, k], Protocol.OPPOSITE_SENSE, float(center))


def singles_scan(
    profile: IntensityProfile, span: Tuple[float, float]
) -> ScanProfile:
    """Single-detector scan of an intensity profile (calibration procedure)."""
    lo, hi = span
    x = profile.x
    keep = (x >= lo - 1e-9 * profile.dx) & (x <= hi + 1e-9 * profile.dx)
    if not np.any(keep):
        raise ConfigurationError(f"scan range ({lo}, {hi}) holds no samples")
    return ScanProfile(x[keep], profile.values[keep], Protocol.SINGLES_CALIBRATION, 0.0)


def profile_extremum(profile: ScanProfile, kind: str = "dip") -> Extremum:
    """Global minimum (``"dip"``) or maximum (``"peak"``) of a profile.

    Ties go to the position closest to 0, then to the negative side.
    """
    if len(profile) == 0:
        raise ConfigurationError("profile is empty")
    kind = kind.lower()
    if kind not in ("dip", "peak"):
        raise ConfigurationError(f"kind must be 'dip' or 'peak', got {kind!r}")
    v = profile.values
    target = v.min() if kind == "dip" else v.max()
    cand = np.flatnonzero(v == target)
    pos = profile.positions[cand]
    best = min(range(cand.size), key=lambda i: (abs(pos[i]), pos[i]))
    return Extremum(float(pos[best]), float(target))


def _plateau(values):
    n_edge = max(1, int(round(0.1 * values.size)))
    return float(np.median(np.concatenate([values[:n_edge], values[-n_edge:]])))


def _crossings(profile: ScanProfile, threshold_fraction: float, kind: str):
    if not 0 < threshold_fraction < 1:
        raise ConfigurationError("threshold_fraction must lie strictly between 0 and 1")
    if len(profile) < 3:
        raise ConfigurationError("profile too short for a width measurement")
    v = profile.values
    x = profile.positions
    plateau = _plateau(v)
    ext = profile_extremum(profile, kind)
    i0 = int(np.flatnonzero(x == ext.position)[0])
    level = ext.value + threshold_fraction * (plateau - ext.value)
    # inside(i): sample still belongs to the feature
    if kind == "dip":
        inside = v < level
    else:
        inside = v > level
    if not inside[i0]:
        raise ConfigurationError("profile has no feature relative to its plateau")

    def walk(step):
        i = i0
        while 0 <= i + step < v.size and inside[i + step]:
            i += step
        j = i + step
        if not 0 <= j < v.size:
            raise ConfigurationError("no threshold crossing found inside the scan range")
        # linear interpolation between the last inside sample i and first outside j
        t = (level - v[i]) / (v[j] - v[i])
        return x[i] + t * (x[j] - x[i])

    return walk(-1), walk(+1)


def profile_width(
    profile: ScanProfile, threshold_fraction: float = 0.5, kind: str = "dip"
) -> float:
    """Full width of the central dip or peak at ``threshold_fraction``.

    The level sits ``threshold_fraction`` of the way from the extremum to the
    plateau (median of the outer 20% of samples). Crossings are found by
    walking outward from the extremum and interpolating linearly.
    """
    left, right = _crossings(profile, threshold_fraction, kind)
    return float(right - left)


def profile_center(
    profile: ScanProfile, threshold_fraction: float = 0.5, kind: str = "dip"
) -> float:
    """Midpoint of the two threshold crossings that bound the feature.

    Far less sensitive than :func:`profile_extremum` to ripple at the bottom
    of a wide, flat dip.
    """
    left, right = _crossings(profile, threshold_fraction, kind)
    return float(0.5 * (left + right))
