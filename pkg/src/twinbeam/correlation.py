"""Fourth-order (coincidence) correlation maps and their analyses.

A :class:`CoincidenceMap` holds ``C(rho1, rho2)`` on a square grid of
detector-plane coordinates, with the time argument fixed at zero delay.
Entry ``[j, k]`` belongs to D1 at ``x[j]`` and D2 at ``x[k]``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import ndimage

from .bench import PreparedState
from .errors import ConfigurationError, GridError

__all__ = [
    "CoincidenceMap",
    "AntibunchReport",
    "DEFAULT_MAP_SIZE",
    "DEFAULT_WINDOW",
    "DEFAULT_SHIFTS",
    "HOMOGENEITY_TOL",
    "coincidence_map",
    "slit_kernel",
    "apply_detector_slits",
    "antibunch_test",
    "homogeneity_index",
]

DEFAULT_MAP_SIZE = 2048
DEFAULT_WINDOW = 4e-3
DEFAULT_SHIFTS = (-1e-3, -0.5e-3, -0.25e-3, 0.25e-3, 0.5e-3, 1e-3)
# Relative RMS change under a common shift below which a map counts as homogeneous.
HOMOGENEITY_TOL = 0.1

# Tolerance, in grid cells, for calling a coordinate "on grid".
_ON_GRID = 1e-6


@dataclass(frozen=True)
class CoincidenceMap:
    """Coincidence rate over pairs of detector positions (arbitrary units).

    Attributes
    ----------
    values : ndarray, shape (m, m)
        Non-negative rates, ``values[j, k] = C(x[j], x[k])``.
    dx, x0 : float
        Spacing and first coordinate of the (shared) axis grid [m].
    parity : int
        -1 for the difference-coordinate law, +1 for the sum law.
    mu_s, mu_i : float
        Coordinate scaling coefficients of the transfer law.
    slit_width : float
        Detector slit width already folded into ``values`` (0 if none) [m].
    """

    values: np.ndarray
    dx: float
    x0: float
    parity: int = -1
    mu_s: float = 2.0
    mu_i: float = 2.0
    slit_width: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ConfigurationError(f"coincidence map must be square, got shape {values.shape}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ConfigurationError("coincidence map values must be finite and non-negative")
        if not self.dx > 0:
            raise ConfigurationError("map spacing dx must be positive")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.x0 + np.arange(self.size) * self.dx

    @property
    def extent(self) -> float:
        """Full width covered by the axis grid [m]."""
        return self.size * self.dx

    def index_of(self, position: float) -> int:
        """Grid index of an on-grid ``position``; raises :class:`GridError` otherwise."""
        q = (position - self.x0) / self.dx
        k = int(round(q))
        if abs(q - k) > _ON_GRID:
            raise GridError(
                f"position {position:.9g} m is off-grid (nearest on-grid: {self.snap(position):.9g} m)"
            )
        if not 0 <= k < self.size:
            raise GridError(f"position {position:.9g} m lies outside the map")
        return k

    def snap(self, position: float) -> float:
        """Nearest on-grid coordinate (ties round up)."""
        # tolerance keeps exact ties from rounding down on float noise
        k = math.floor((position - self.x0) / self.dx + 0.5 + _ON_GRID)
        k = min(max(k, 0), self.size - 1)
        return self.x0 + k * self.dx

    def window_mask(self, window: Optional[float]) -> np.ndarray:
        """Boolean mask of axis samples with ``|x| <= window/2`` (all if None)."""
        if window is None:
            return np.ones(self.size, dtype=bool)
        return np.abs(self.x) <= window / 2 + _ON_GRID * self.dx

    def to_csv(self, path=None, window: Optional[float] = None) -> str:
        """Dense CSV: header row of rho2 coordinates, first column rho1.

        ``window`` crops to ``|x| <= window/2``. Returns the text and writes it
        to ``path`` when given.
        """
        keep = self.window_mask(window)
        x = self.x[keep]
        sub = self.values[np.ix_(keep, keep)]
        buf = io.StringIO()
        buf.write("rho1_m\\rho2_m," + ",".join(repr(float(v)) for v in x) + "\n")
        for xj, row in zip(x, sub):
            buf.write(repr(float(xj)) + "," + ",".join(repr(float(v)) for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _half_integer_snap(c):
    snapped = round(2 * c) / 2
    return snapped if abs(c - snapped) < 1e-6 else c


def _interp_complex(samples, q):
    """Linear interpolation of ``samples`` at fractional indices ``q``; 0 outside."""
    n = samples.size
    inside = (q >= 0) & (q <= n - 1)
    i = np.clip(np.floor(q).astype(np.int64), 0, n - 2)
    t = np.where(inside, q - i, 0.0)
    out = (1.0 - t) * samples[i] + t * samples[i + 1]
    return np.where(inside, out, 0.0)


def coincidence_map(state: PreparedState, size: Optional[int] = DEFAULT_MAP_SIZE) -> CoincidenceMap:
    """Coincidence map ``|W(rho1/mu_s + parity*rho2/mu_i)|**2`` on a centered sub-grid.

    Both split routings at the 50/50 beamsplitter are included: signal to D1
    with idler to D2, and the reverse, with equal weight. The map is therefore
    the mean of the transfer law and its transpose. The two coincide whenever
    ``mu_s == mu_i`` and ``|W|`` is even, which covers every centered wire.

    The pump is sampled by linear interpolation and taken as zero outside its
    window. Arguments are formed in grid units so that difference (sum)
    dependence is exact on-grid.

    Parameters
    ----------
    state : PreparedState
    size : int or None
        Number of axis samples, centered on the pump grid. ``None`` uses the
        full pump grid.
    """
    field = state.pump_at_detection
    n = field.n
    m = n if size is None else int(size)
    if not 2 <= m <= n:
        raise ConfigurationError(f"map size {m} must lie in [2, {n}]")
    i0 = (n - m) // 2
    c = _half_integer_snap(-field.x0 / field.dx)
    r = (i0 + np.arange(m)) - c
    p = state.parity
    if state.mu_s == state.mu_i:
        q = c + (r[:, None] + p * r[None, :]) / state.mu_s
    else:
        q = c + r[:, None] / state.mu_s + p * r[None, :] / state.mu_i
    direct = np.abs(_interp_complex(field.samples, q)) ** 2
    values = 0.5 * (direct + direct.T)
    return CoincidenceMap(
        values=values,
        dx=field.dx,
        x0=field.x0 + i0 * field.dx,
        parity=p,
        mu_s=state.mu_s,
        mu_i=state.mu_i,
    )


def slit_kernel(slit_width: float, dx: float) -> np.ndarray:
    """Normalized boxcar of width ``slit_width`` sampled on cells of size ``dx``.

    Each tap is the overlap of its cell with ``[-w/2, w/2]``, so partially
    covered edge cells get fractional weight and the kernel stays centered.
    """
    if not slit_width >= dx * (1 - 1e-12):
        raise ConfigurationError(
            f"slit width {slit_width:.6g} m is narrower than one grid cell ({dx:.6g} m)"
        )
    half = slit_width / (2 * dx)
    taps = int(math.ceil(half - 0.5 - 1e-9))
    t = np.arange(-taps, taps + 1)
    weights = np.clip(np.minimum(t + 0.5, half) - np.maximum(t - 0.5, -half), 0.0, None)
    return weights / weights.sum()


def apply_detector_slits(cmap: CoincidenceMap, slit_width: float) -> CoincidenceMap:
    """Average the map over a slit aperture along both detector axes.

    Borders use half-sample reflection, which keeps the total sum of a
    symmetric-kernel convolution exactly; it agrees with zero padding when the
    map vanishes near its border.
    """
    kernel = slit_kernel(slit_width, cmap.dx)
    values = ndimage.convolve1d(cmap.values, kernel, axis=0, mode="reflect")
    values = ndimage.convolve1d(values, kernel, axis=1, mode="reflect")
    return replace(cmap, values=np.clip(values, 0.0, None), slit_width=float(slit_width))


def _shift_cells(cmap, shift):
    q = shift / cmap.dx
    t = int(round(q))
    if abs(q - t) > _ON_GRID:
        raise GridError(f"shift {shift:.9g} m is not a whole number of grid cells ({cmap.dx:.6g} m)")
    return t


def homogeneity_index(
    cmap: CoincidenceMap, shifts: Iterable[float] = DEFAULT_SHIFTS, window: Optional[float] = None
) -> float:
    """Largest relative RMS change of the map under a common detector shift.

    For each shift ``t`` compares ``values[j, k]`` with ``values[j+t, k+t]``
    over the samples where both lie inside ``window`` (the whole map when
    None). 0 means the map depends only on ``rho1 - rho2``.
    """
    mask = cmap.window_mask(window)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ConfigurationError("homogeneity window contains no samples")
    lo, hi = idx[0], idx[-1] + 1
    span = hi - lo
    worst = 0.0
    for shift in shifts:
        t = _shift_cells(cmap, shift)
        if 2 * abs(t) > span:
            raise ConfigurationError(
                f"shift {shift:.6g} m exceeds half the analysis window ({span * cmap.dx / 2:.6g} m)"
            )
        if t == 0:
            continue
        a_lo, a_hi = (lo, hi - t) if t > 0 else (lo - t, hi)
        a = cmap.values[a_lo:a_hi, a_lo:a_hi]
        b = cmap.values[a_lo + t : a_hi + t, a_lo + t : a_hi + t]
        norm = math.sqrt(float(np.mean(a * a)))
        diff = math.sqrt(float(np.mean((a - b) ** 2)))
        if norm == 0:
            rel = 0.0 if diff == 0 else math.inf
        else:
            rel = diff / norm
        worst = max(worst, rel)
    return worst


@dataclass(frozen=True)
class AntibunchReport:
    """Outcome of the classical-inequality test on a coincidence map.

    ``violated`` is the bare inequality outcome ``gamma_max > gamma_zero``;
    ``antibunching`` additionally requires the map to be homogeneous, since a
    violation by an inhomogeneous field says nothing about antibunching.
    """

    gamma_zero: float
    gamma_max: float
    delta_star: float
    violated: bool
    contrast: float
    homogeneity: float = 0.0
    homogeneous: bool = True
    antibunching: bool = False

    def lines(self):
        def fmt(v):
            return repr(float(v))

        return [
            f"gamma_zero = {fmt(self.gamma_zero)}",
            f"gamma_max = {fmt(self.gamma_max)}",
            f"delta_star_m = {fmt(self.delta_star)}",
            f"violated = {str(self.violated).lower()}",
            f"contrast = {fmt(self.contrast)}",
            f"homogeneity_index = {fmt(self.homogeneity)}",
            f"homogeneous = {str(self.homogeneous).lower()}",
            f"antibunching = {str(self.antibunching).lower()}",
        ]


def _default_shifts(cmap, window):
    span = int(np.count_nonzero(cmap.window_mask(window)))
    cells = {int(round(s / cmap.dx)) or (1 if s > 0 else -1) for s in DEFAULT_SHIFTS}
    return [t * cmap.dx for t in sorted(cells) if 2 * abs(t) <= span]


def antibunch_test(
    cmap: CoincidenceMap,
    window: float = DEFAULT_WINDOW,
    shifts: Optional[Sequence[float]] = None,
    homogeneity_tol: float = HOMOGENEITY_TOL,
) -> AntibunchReport:
    """Test ``Gamma(delta) <= Gamma(0)`` inside ``|rho1|, |rho2| <= window/2``.

    ``gamma_zero`` is the mean of the aligned-detector diagonal; ``gamma_max``
    the largest displaced (off-diagonal) entry, found at ``delta_star =
    rho1 - rho2``. The homogeneity gate evaluates :func:`homogeneity_index`
    inside the same window, over ``shifts`` (default: ``DEFAULT_SHIFTS`` rounded
    to whole cells, dropping any beyond half the window).
    """
    if window > cmap.extent * (1 + 1e-12):
        raise ConfigurationError(
            f"analysis window {window:.6g} m exceeds the map extent {cmap.extent:.6g} m"
        )
    idx = np.flatnonzero(cmap.window_mask(window))
    if idx.size < 2:
        raise ConfigurationError(f"analysis window {window:.6g} m contains fewer than two samples")
    sub = cmap.values[np.ix_(idx, idx)]
    diag = np.diag(sub)
    gamma_zero = float(diag.mean())
    off = sub.copy()
    np.fill_diagonal(off, -np.inf)
    flat = int(np.argmax(off))
    j, k = np.unravel_index(flat, off.shape)
    gamma_max = float(off[j, k])
    x = cmap.x[idx]
    delta_star = float(x[j] - x[k])
    violated = gamma_max > gamma_zero
    if gamma_zero > 0:
        contrast = gamma_max / gamma_zero
    else:
        contrast = math.inf if gamma_max > 0 else 1.0
    if shifts is None:
        shifts = _default_shifts(cmap, window)
    homogeneity = homogeneity_index(cmap, shifts, window=window) if shifts else 0.0
    homogeneous = homogeneity < homogeneity_tol
    return AntibunchReport(
        gamma_zero=gamma_zero,
        gamma_max=gamma_max,
        delta_star=delta_star,
        violated=violated,
        contrast=contrast,
        homogeneity=homogeneity,
        homogeneous=homogeneous,
        antibunching=violated and homogeneous,
    )
