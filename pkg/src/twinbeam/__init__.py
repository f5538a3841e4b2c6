"""Simulation of transverse fourth-order correlations of twin photon beams.

A pump shaped by a thin wire and imaged through a lens is transferred onto
the signal-idler coincidence map. The package builds that map and scans it
with two-detector protocols. Analyses test the classical inequality for
spatial antibunching, with Monte Carlo photon pairs as a cross-check.
"""

from .bench import (
    BenchConfig,
    CalibrationWire,
    PreparedState,
    default_config,
    image_distance,
    prepare_state,
    singles_envelope,
    with_conjugate_geometry,
)
from .correlation import (
    AntibunchReport,
    CoincidenceMap,
    antibunch_test,
    apply_detector_slits,
    coincidence_map,
    homogeneity_index,
    slit_kernel,
)
from .errors import ConfigurationError, GridError, SamplingGuardError, SetupError, TwinbeamError
from .montecarlo import (
    Comparison,
    CountsProfile,
    PairEventBatch,
    Route,
    binned_map,
    coincidence_counts,
    compare_profiles,
    sample_pairs,
)
from .scans import (
    Extremum,
    Protocol,
    ScanProfile,
    profile_center,
    profile_extremum,
    profile_width,
    scan_fixed_d1,
    scan_opposite_sense,
    scan_same_sense,
    singles_scan,
)
from .setupfile import Experiment, Mode, RunSpec, parse_setup, serialize
from .wavefield import (
    FieldGrid,
    GridSpec,
    IntensityProfile,
    apply_thin_lens,
    apply_wire,
    intensity,
    invert_coordinate,
    make_gaussian,
    max_propagation_distance,
    propagate,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
