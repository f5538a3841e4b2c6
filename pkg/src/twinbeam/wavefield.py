"""Scalar paraxial Fourier optics on a uniform 1D transverse grid.

All operations return new fields; inputs are never modified. Sample ``k`` of a
grid sits at ``x0 + k*dx``. The default ``x0 = -(n - 1)*dx/2`` makes the grid
symmetric about zero, which is what :func:`invert_coordinate` requires.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError, GridError, SamplingGuardError

__all__ = [
    "GridSpec",
    "FieldGrid",
    "IntensityProfile",
    "make_gaussian",
    "apply_wire",
    "apply_thin_lens",
    "propagate",
    "max_propagation_distance",
    "invert_coordinate",
    "intensity",
]


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


def _symmetric_x0(n, dx):
    return -(n - 1) * dx / 2.0


class GridSpec(NamedTuple):
    """Sampling of a transverse grid: ``n`` samples spaced ``dx`` from ``x0``."""

    n: int
    dx: float
    x0: Optional[float] = None

    def resolved_x0(self) -> float:
        return _symmetric_x0(self.n, self.dx) if self.x0 is None else float(self.x0)


def _check_grid(n, dx):
    if n < 2 or (n & (n - 1)) != 0:
        raise ConfigurationError(f"grid size n={n} must be a power of two >= 2")
    if not dx > 0:
        raise ConfigurationError(f"grid spacing dx={dx} must be positive")


@dataclass(frozen=True)
class FieldGrid:
    """Complex scalar field sampled on a uniform transverse grid.

    Attributes
    ----------
    samples : ndarray of complex
        Field amplitude, arbitrary units. Stored read-only.
    dx : float
        Grid spacing [m].
    x0 : float
        Coordinate of the first sample [m].
    wavelength : float
        Vacuum wavelength [m].
    """

    samples: np.ndarray
    dx: float
    x0: float
    wavelength: float

    def __post_init__(self):
        samples = _frozen(self.samples, complex)
        if samples.ndim != 1:
            raise ConfigurationError("field samples must be one-dimensional")
        _check_grid(samples.size, self.dx)
        if not self.wavelength > 0:
            raise ConfigurationError(f"wavelength={self.wavelength} must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "dx", float(self.dx))
        object.__setattr__(self, "x0", float(self.x0))
        object.__setattr__(self, "wavelength", float(self.wavelength))

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def x(self) -> np.ndarray:
        """Sample coordinates [m]."""
        return self.x0 + np.arange(self.n) * self.dx

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n, self.dx, self.x0)

    @property
    def is_symmetric(self) -> bool:
        return abs(self.x0 - _symmetric_x0(self.n, self.dx)) <= 1e-9 * self.dx

    def power(self) -> float:
        """Total power ``sum(|samples|^2) * dx``."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.dx)

    def spectral_power(self) -> float:
        """Total power evaluated in the spatial-frequency domain."""
        spectrum = np.fft.fft(self.samples)
        return float(np.sum(np.abs(spectrum) ** 2) * self.dx / self.n)

    def with_samples(self, samples) -> "FieldGrid":
        return FieldGrid(samples, self.dx, self.x0, self.wavelength)


@dataclass(frozen=True)
class IntensityProfile:
    """Non-negative intensity on the same grid as the field it came from."""

    values: np.ndarray
    dx: float
    x0: float

    def __post_init__(self):
        values = _frozen(self.values, float)
        if np.any(values < 0):
            raise ConfigurationError("intensity values must be non-negative")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return self.x0 + np.arange(self.n) * self.dx


def make_gaussian(grid_spec, waist, wavelength) -> FieldGrid:
    """Flat-phase Gaussian ``exp(-x**2 / waist**2)``.

    Parameters
    ----------
    grid_spec : GridSpec or tuple
        ``(n, dx[, x0])``; ``x0`` defaults to the symmetric grid.
    waist : float
        1/e amplitude half-width [m]; must satisfy ``4*dx <= waist <= n*dx/4``.
    wavelength : float
        Vacuum wavelength [m].
    """
    grid = GridSpec(*grid_spec)
    _check_grid(grid.n, grid.dx)
    if not waist >= 4 * grid.dx:
        raise ConfigurationError(
            f"waist={waist:.6g} m is unresolvable: requires waist >= 4*dx = {4 * grid.dx:.6g} m"
        )
    if not waist <= grid.n * grid.dx / 4:
        raise ConfigurationError(
            f"waist={waist:.6g} m overflows the window: requires waist <= n*dx/4 = "
            f"{grid.n * grid.dx / 4:.6g} m"
        )
    x0 = grid.resolved_x0()
    x = x0 + np.arange(grid.n) * grid.dx
    return FieldGrid(np.exp(-(x**2) / waist**2).astype(complex), grid.dx, x0, wavelength)


def apply_wire(field: FieldGrid, center: float, width: float) -> FieldGrid:
    """Opaque wire: zero every sample with ``|x - center| <= width/2``."""
    if not width > 2 * field.dx:
        raise ConfigurationError(
            f"wire width={width:.6g} m is unresolvable: requires width > 2*dx = {2 * field.dx:.6g} m"
        )
    samples = field.samples.copy()
    samples[np.abs(field.x - center) <= width / 2] = 0
    return field.with_samples(samples)


def apply_thin_lens(field: FieldGrid, focal_length: float) -> FieldGrid:
    """Multiply by the paraxial lens phase ``exp(-i*pi*x**2/(wavelength*f))``."""
    if focal_length == 0:
        raise ConfigurationError("focal length must be non-zero")
    x = field.x
    phase = np.exp(-1j * np.pi * x**2 / (field.wavelength * focal_length))
    return field.with_samples(field.samples * phase)


def max_propagation_distance(n, dx, wavelength) -> float:
    """Largest |distance| for which the transfer function is Nyquist sampled.

    The transfer-function phase ``pi*wavelength*z*f**2`` may advance by at most
    pi between adjacent frequency samples up to ``f = 1/(2*dx)``, giving
    ``|z| <= n*dx**2/wavelength``.
    """
    return n * dx * dx / wavelength


def propagate(field: FieldGrid, distance: float, leg: Optional[str] = None) -> FieldGrid:
    """Paraxial angular-spectrum propagation over ``distance`` (may be negative).

    Raises
    ------
    SamplingGuardError
        When ``|distance|`` exceeds :func:`max_propagation_distance`. ``leg`` is
        only used to label the error.
    """
    limit = max_propagation_distance(field.n, field.dx, field.wavelength)
    if abs(distance) > limit:
        raise SamplingGuardError(distance, limit, leg)
    if distance == 0:
        return field
    fx = np.fft.fftfreq(field.n, field.dx)
    transfer = np.exp(-1j * np.pi * field.wavelength * distance * fx**2)
    return field.with_samples(np.fft.ifft(np.fft.fft(field.samples) * transfer))


def invert_coordinate(field: FieldGrid) -> FieldGrid:
    """Mirror the field, ``x -> -x``; an index reversal on a symmetric grid."""
    if not field.is_symmetric:
        raise GridError(
            f"grid with x0={field.x0:.6g} m is not symmetric about 0; -x is not representable"
        )
    return field.with_samples(field.samples[::-1])


def intensity(field: FieldGrid) -> IntensityProfile:
    """Pointwise ``|samples|**2``."""
    return IntensityProfile(np.abs(field.samples) ** 2, field.dx, field.x0)
