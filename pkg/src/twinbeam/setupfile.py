"""Flat ``key = value`` setup files describing a simulation run.

Lengths need an SI suffix such as ``um`` or ``cm``. Lists are comma
separated and ``#`` starts a comment. Every key is optional; unknown keys are
rejected.
"""

from __future__ import annotations

import dataclasses
import enum
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Dict, Tuple

from .bench import BenchConfig, CalibrationWire
from .errors import ConfigurationError, SetupError

__all__ = ["Experiment", "Mode", "RunSpec", "parse_setup", "serialize", "parse_length"]


class Experiment(enum.Enum):
    CALIBRATION = "Calibration"
    FIXED_D1 = "FixedD1"
    SAME_SENSE = "SameSense"
    OPPOSITE_SENSE = "OppositeSense"
    FULL_MAP = "FullMap"
    ANTIBUNCH_REPORT = "AntibunchReport"
    HOMOGENEITY_REPORT = "HomogeneityReport"

    @property
    def slug(self) -> str:
        return re.sub(r"(?<!^)(?=[A-Z])", "_", self.value).lower()

    @classmethod
    def from_token(cls, token: str) -> "Experiment":
        return _enum_from_token(cls, token)


class Mode(enum.Enum):
    ANALYTIC = "Analytic"
    MONTE_CARLO = "MonteCarlo"
    BOTH = "Both"

    @property
    def slug(self) -> str:
        return self.value.lower()

    @classmethod
    def from_token(cls, token: str) -> "Mode":
        return _enum_from_token(cls, token)


def _norm(token):
    return re.sub(r"[\s_\-]", "", token).lower()


def _enum_from_token(cls, token):
    wanted = _norm(token)
    for member in cls:
        if _norm(member.value) == wanted:
            return member
    choices = ", ".join(m.value for m in cls)
    raise ValueError(f"unknown {cls.__name__.lower()} {token!r}; expected one of {choices}")


@dataclass(frozen=True)
class RunSpec:
    bench: BenchConfig = field(default_factory=BenchConfig)
    experiment: Experiment = Experiment.FIXED_D1
    mode: Mode = Mode.ANALYTIC
    d1_offsets: Tuple[float, ...] = (0.0, 0.4e-3, -0.4e-3)
    n_pairs: int = 1_000_000
    seed: int = 0
    output_dir: str = "out"
    emit_svg: bool = False
    scan_half_range: float = 1.5e-3
    analysis_window: float = 4e-3

    def __post_init__(self):
        if self.mode is not Mode.ANALYTIC and self.n_pairs < 1:
            raise ConfigurationError("n_pairs must be >= 1 in Monte Carlo modes")
        if self.experiment is Experiment.FIXED_D1 and not self.d1_offsets:
            raise ConfigurationError("d1_offsets must not be empty for FixedD1")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        if not self.scan_half_range > 0:
            raise ConfigurationError("scan_half_range must be positive")
        if not self.analysis_window > 0:
            raise ConfigurationError("analysis_window must be positive")

    def replace(self, **changes) -> "RunSpec":
        return dataclasses.replace(self, **changes)


_UNITS = {"nm": -9, "um": -6, "µm": -6, "μm": -6, "mm": -3, "cm": -2, "m": 0}
_LENGTH_RE = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*([^\d\s.+-][^\s]*)?$")


def parse_length(token: str) -> float:
    """``'250um'`` -> ``2.5e-4``. Decimal arithmetic keeps the result correctly rounded."""
    match = _LENGTH_RE.match(token.strip())
    if not match:
        raise ValueError(f"malformed length {token!r}")
    number, unit = match.groups()
    if unit is None:
        raise ValueError(f"length {token!r} needs a unit (nm, um, mm, cm or m)")
    if unit not in _UNITS:
        raise ValueError(f"unknown length unit {unit!r} (expected nm, um, mm, cm or m)")
    try:
        return float(Decimal(number).scaleb(_UNITS[unit]))
    except InvalidOperation as exc:
        raise ValueError(f"malformed length {token!r}") from exc


def _parse_bool(token):
    low = token.lower()
    if low in ("true", "false"):
        return low == "true"
    raise ValueError(f"expected true or false, got {token!r}")


def _parse_int(token):
    try:
        return int(token.replace("_", ""))
    except ValueError:
        raise ValueError(f"expected an integer, got {token!r}") from None


def _parse_float(token):
    try:
        return float(token)
    except ValueError:
        raise ValueError(f"expected a number, got {token!r}") from None


def _parse_lengths(token):
    if token.strip().lower() == "none":
        return ()
    parts = [p for p in (s.strip() for s in token.split(",")) if p]
    return tuple(parse_length(p) for p in parts)


_BENCH_LENGTHS = (
    "pump_wavelength",
    "downconverted_wavelength",
    "pump_waist",
    "wire_width",
    "wire_center",
    "wire_to_lens",
    "lens_focal",
    "lens_to_crystal",
    "crystal_to_detectors",
    "slit_width",
    "grid_dx",
)
_CAL_KEYS = {
    "calibration_wire_width": "width",
    "calibration_wire_center": "center",
    "calibration_distance": "distance_to_detectors",
}

_PARSERS = {
    **{k: parse_length for k in _BENCH_LENGTHS},
    **{k: parse_length for k in _CAL_KEYS},
    "dove_prism": _parse_bool,
    "mu_s": _parse_float,
    "mu_i": _parse_float,
    "grid_n": _parse_int,
    "experiment": Experiment.from_token,
    "mode": Mode.from_token,
    "d1_offsets": _parse_lengths,
    "n_pairs": _parse_int,
    "seed": _parse_int,
    "output_dir": str,
    "emit_svg": _parse_bool,
    "scan_half_range": parse_length,
    "analysis_window": parse_length,
}


def parse_setup(text: str) -> RunSpec:
    """Parse setup-file text into a :class:`RunSpec`.

    Raises
    ------
    SetupError
        For any rejected line or violated invariant, with the line number and
        the offending token.
    """
    values: Dict[str, object] = {}
    lines: Dict[str, Tuple[int, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SetupError("expected 'key = value'", line=lineno, token=line)
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in _PARSERS:
            raise SetupError(f"unknown key {key!r}", line=lineno, token=key)
        if key in values:
            raise SetupError(f"duplicate key {key!r}", line=lineno, token=key)
        if not value:
            raise SetupError(f"missing value for {key!r}", line=lineno, token=line)
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise SetupError(str(exc), line=lineno, token=value) from None
        lines[key] = (lineno, value)
    return _build(values, lines)


def _blame(message, lines):
    for key, (lineno, token) in lines.items():
        if re.search(rf"\b{key}\b", message):
            return lineno, token
    # conjugate-plane errors involve the geometry keys as a group
    for key in ("wire_to_lens", "lens_focal", "lens_to_crystal", "crystal_to_detectors"):
        if key in lines:
            return lines[key]
    return None, None


def _build(values, lines):
    bench_kwargs = {}
    for key in (*_BENCH_LENGTHS, "dove_prism", "mu_s", "mu_i", "grid_n"):
        if key in values:
            bench_kwargs[key] = values[key]
    cal = {attr: values[key] for key, attr in _CAL_KEYS.items() if key in values}
    run_kwargs = {
        k: values[k]
        for k in (
            "experiment",
            "mode",
            "d1_offsets",
            "n_pairs",
            "seed",
            "output_dir",
            "emit_svg",
            "scan_half_range",
            "analysis_window",
        )
        if k in values
    }
    try:
        if cal:
            if cal.get("width", None) == 0:
                bench_kwargs["calibration_wire"] = None
            else:
                bench_kwargs["calibration_wire"] = CalibrationWire(**cal)
        bench = BenchConfig(**bench_kwargs)
        return RunSpec(bench=bench, **run_kwargs)
    except ConfigurationError as exc:
        lineno, token = _blame(str(exc), lines)
        raise SetupError(str(exc), line=lineno, token=token) from None


def _length(v):
    return f"{float(v)!r}m"


def serialize(run_spec: RunSpec) -> str:
    """Render ``run_spec`` in the setup-file format; :func:`parse_setup` inverts it."""
    b = run_spec.bench
    out = ["# twinbeam setup"]
    for key in _BENCH_LENGTHS:
        out.append(f"{key} = {_length(getattr(b, key))}")
    out.append(f"dove_prism = {str(b.dove_prism).lower()}")
    out.append(f"mu_s = {b.mu_s!r}")
    out.append(f"mu_i = {b.mu_i!r}")
    out.append(f"grid_n = {int(b.grid_n)}")
    cal = b.calibration_wire
    if cal is None:
        out.append("calibration_wire_width = 0m")
    else:
        out.append(f"calibration_wire_width = {_length(cal.width)}")
        out.append(f"calibration_wire_center = {_length(cal.center)}")
        out.append(f"calibration_distance = {_length(cal.distance_to_detectors)}")
    out.append(f"experiment = {run_spec.experiment.value}")
    out.append(f"mode = {run_spec.mode.value}")
    offsets = ", ".join(_length(v) for v in run_spec.d1_offsets) or "none"
    out.append(f"d1_offsets = {offsets}")
    out.append(f"n_pairs = {run_spec.n_pairs}")
    out.append(f"seed = {run_spec.seed}")
    out.append(f"output_dir = {run_spec.output_dir}")
    out.append(f"emit_svg = {str(run_spec.emit_svg).lower()}")
    out.append(f"scan_half_range = {_length(run_spec.scan_half_range)}")
    out.append(f"analysis_window = {_length(run_spec.analysis_window)}")
    return "\n".join(out) + "\n"
