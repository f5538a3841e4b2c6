"""Apparatus description and the pump profile it prepares at the detectors.

The pump passes a thin wire on its way to an imaging lens. It then continues
through the (thin) crystal to the plane at the detectors' distance. The lens
is positioned so that this plane is conjugate to the wire, so the pump there
carries an inverted, magnified image of the wire. The Dove prism in the
signal arm only flips the sign that couples the two detector coordinates.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigurationError
from .wavefield import (
    FieldGrid,
    GridSpec,
    IntensityProfile,
    apply_thin_lens,
    apply_wire,
    intensity,
    make_gaussian,
    propagate,
)

__all__ = [
    "CalibrationWire",
    "BenchConfig",
    "PreparedState",
    "default_config",
    "image_distance",
    "with_conjugate_geometry",
    "prepare_state",
    "singles_envelope",
]

_CONJUGATE_RTOL = 1e-6


@dataclass(frozen=True)
class CalibrationWire:
    """Wire placed before the non-polarizing beamsplitter for detector calibration."""

    width: float = 500e-6
    center: float = 0.0
    distance_to_detectors: float = 0.10

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigurationError(f"calibration wire width={self.width} must be positive")
        if not self.distance_to_detectors >= 0:
            raise ConfigurationError("calibration wire distance_to_detectors must be >= 0")


def image_distance(focal_length: float, object_distance: float) -> float:
    """Thin-lens image distance; raises when no real image forms."""
    inverse = 1.0 / focal_length - 1.0 / object_distance
    if inverse <= 0:
        raise ConfigurationError(
            f"object at {object_distance:.6g} m in front of an f={focal_length:.6g} m lens "
            "forms no real image"
        )
    return 1.0 / inverse


@dataclass(frozen=True)
class BenchConfig:
    """Full description of the optical setup. Lengths in meters.

    ``wire_width = 0`` means no wire in the pump. ``lens_to_crystal`` may be 0
    (crystal directly behind the lens). The lens must image the wire onto the
    plane ``lens_to_crystal + crystal_to_detectors`` behind it.
    """

    pump_wavelength: float = 442e-9
    downconverted_wavelength: float = 884e-9
    pump_waist: float = 1e-3
    wire_width: float = 250e-6
    wire_center: float = 0.0
    wire_to_lens: float = 0.375
    lens_focal: float = 0.25
    lens_to_crystal: float = 0.0
    crystal_to_detectors: float = 0.75
    dove_prism: bool = True
    slit_width: float = 0.3e-3
    mu_s: float = 2.0
    mu_i: float = 2.0
    calibration_wire: Optional[CalibrationWire] = CalibrationWire()
    grid_n: int = 16384
    grid_dx: float = 5e-6

    def __post_init__(self):
        positive = (
            "pump_wavelength",
            "downconverted_wavelength",
            "pump_waist",
            "wire_to_lens",
            "lens_focal",
            "crystal_to_detectors",
            "slit_width",
            "mu_s",
            "mu_i",
            "grid_dx",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name}={getattr(self, name)} must be positive")
        if not self.wire_width >= 0:
            raise ConfigurationError(f"wire_width={self.wire_width} must be >= 0")
        if not self.lens_to_crystal >= 0:
            raise ConfigurationError(f"lens_to_crystal={self.lens_to_crystal} must be >= 0")
        n = self.grid_n
        if int(n) != n or n < 2 or (int(n) & (int(n) - 1)) != 0:
            raise ConfigurationError(f"grid_n={n} must be a power of two >= 2")
        if abs(self.downconverted_wavelength - 2 * self.pump_wavelength) > 1e-6 * self.pump_wavelength:
            warnings.warn(
                "downconverted_wavelength differs from 2*pump_wavelength (non-degenerate setup)",
                stacklevel=3,
            )
        z_i = image_distance(self.lens_focal, self.wire_to_lens)
        detection = self.lens_to_crystal + self.crystal_to_detectors
        if abs(z_i - detection) > _CONJUGATE_RTOL * z_i:
            raise ConfigurationError(
                f"wire image forms {z_i:.6g} m behind the lens but the detection plane is at "
                f"lens_to_crystal + crystal_to_detectors = {detection:.6g} m"
            )

    @property
    def grid(self) -> GridSpec:
        return GridSpec(int(self.grid_n), self.grid_dx)

    @property
    def magnification(self) -> float:
        """Lateral magnification of the wire image, ``-z_i/z_o``."""
        return -image_distance(self.lens_focal, self.wire_to_lens) / self.wire_to_lens

    def replace(self, **changes) -> "BenchConfig":
        return dataclasses.replace(self, **changes)


def with_conjugate_geometry(config: BenchConfig, wire_to_lens: float) -> BenchConfig:
    """Move the wire to ``wire_to_lens`` and re-solve ``lens_to_crystal``.

    The detector distance is kept; raises when the required crystal position
    would lie in front of the lens.
    """
    z_i = image_distance(config.lens_focal, wire_to_lens)
    lens_to_crystal = z_i - config.crystal_to_detectors
    if lens_to_crystal < -_CONJUGATE_RTOL * z_i:
        raise ConfigurationError(
            f"image distance {z_i:.6g} m is shorter than crystal_to_detectors "
            f"{config.crystal_to_detectors:.6g} m"
        )
    return config.replace(wire_to_lens=wire_to_lens, lens_to_crystal=max(lens_to_crystal, 0.0))


def default_config() -> BenchConfig:
    return BenchConfig()


@dataclass(frozen=True)
class PreparedState:
    """Pump field at the detection-equivalent plane plus the coupling sign.

    ``parity`` is -1 with the Dove prism (difference of detector coordinates)
    and +1 without (sum of detector coordinates).
    """

    pump_at_detection: FieldGrid
    parity: int
    mu_s: float
    mu_i: float
    magnification: float = float("nan")

    def __post_init__(self):
        if self.parity not in (-1, 1):
            raise ConfigurationError(f"parity must be +1 or -1, got {self.parity}")
        if not (self.mu_s > 0 and self.mu_i > 0):
            raise ConfigurationError("mu_s and mu_i must be positive")


def prepare_state(config: BenchConfig) -> PreparedState:
    """Run the pump-shaping pipeline and return W at the detection plane."""
    field = make_gaussian(config.grid, config.pump_waist, config.pump_wavelength)
    if config.wire_width > 0:
        field = apply_wire(field, config.wire_center, config.wire_width)
    field = propagate(field, config.wire_to_lens, leg="wire_to_lens")
    field = apply_thin_lens(field, config.lens_focal)
    field = propagate(
        field,
        config.lens_to_crystal + config.crystal_to_detectors,
        leg="lens_to_crystal + crystal_to_detectors",
    )
    return PreparedState(
        pump_at_detection=field,
        parity=-1 if config.dove_prism else 1,
        mu_s=config.mu_s,
        mu_i=config.mu_i,
        magnification=config.magnification,
    )


def singles_envelope(config: BenchConfig, envelope_factor: float = 3.0) -> IntensityProfile:
    """Single-detector intensity behind the calibration wire.

    The down-converted beam is modeled as a flat-phase Gaussian of waist
    ``envelope_factor * pump_waist`` at the down-converted wavelength.
    """
    wire = config.calibration_wire
    if wire is None:
        raise ConfigurationError("singles_envelope requires a calibration_wire in the config")
    field = make_gaussian(
        config.grid, envelope_factor * config.pump_waist, config.downconverted_wavelength
    )
    field = apply_wire(field, wire.center, wire.width)
    field = propagate(field, wire.distance_to_detectors, leg="calibration wire to detectors")
    return intensity(field)
