import math
import warnings

import numpy as np
import pytest

from twinbeam import (
    BenchConfig,
    CalibrationWire,
    ConfigurationError,
    Protocol,
    SamplingGuardError,
    ScanProfile,
    apply_thin_lens,
    apply_wire,
    default_config,
    image_distance,
    intensity,
    make_gaussian,
    prepare_state,
    profile_center,
    profile_width,
    propagate,
    singles_envelope,
    with_conjugate_geometry,
)


def notch(field, expected_center, half_span):
    """Dip profile of |field|^2 in a window around ``expected_center``."""
    prof = intensity(field)
    keep = np.abs(prof.x - expected_center) <= half_span
    return ScanProfile(prof.x[keep], prof.values[keep], Protocol.SINGLES_CALIBRATION)


def null_contrast(field, center, null_half_width, rim):
    """Mean intensity inside the null relative to the surrounding plateau."""
    v = intensity(field).values
    d = np.abs(field.x - center)
    core = v[d <= 0.5 * null_half_width].mean()
    plateau = v[(d >= rim) & (d <= 2 * rim)].mean()
    return core / plateau


def test_defaults_match_apparatus():
    cfg = default_config()
    assert cfg.lens_focal == 0.25
    assert cfg.crystal_to_detectors == 0.75
    assert cfg.pump_wavelength == 442e-9
    assert cfg.downconverted_wavelength == 2 * cfg.pump_wavelength
    assert cfg.calibration_wire.width == 500e-6
    assert cfg.calibration_wire.distance_to_detectors == 0.10
    assert cfg.magnification == pytest.approx(-2.0)
    assert image_distance(0.25, 0.375) == pytest.approx(0.75)


def test_image_distance_requires_real_image():
    assert image_distance(0.25, 0.5) == pytest.approx(0.5)
    with pytest.raises(ConfigurationError):
        image_distance(0.25, 0.2)


def test_conjugate_condition_enforced():
    with pytest.raises(ConfigurationError, match="detection plane"):
        BenchConfig(wire_to_lens=0.5)
    assert BenchConfig(wire_to_lens=0.5, crystal_to_detectors=0.5).magnification == pytest.approx(-1)


def test_with_conjugate_geometry():
    cfg = with_conjugate_geometry(default_config(), 0.35)
    assert cfg.lens_to_crystal + cfg.crystal_to_detectors == pytest.approx(image_distance(0.25, 0.35))
    with pytest.raises(ConfigurationError):
        with_conjugate_geometry(default_config(), 0.6)


@pytest.mark.parametrize(
    "field, value",
    [("pump_waist", 0.0), ("slit_width", -1e-4), ("mu_s", 0.0), ("wire_width", -1e-6), ("grid_n", 3000)],
)
def test_invalid_values_rejected(field, value):
    with pytest.raises(ConfigurationError):
        default_config().replace(**{field: value})


def test_non_degenerate_warns():
    with pytest.warns(UserWarning, match="non-degenerate"):
        default_config().replace(downconverted_wavelength=900e-9)


def test_default_grid_passes_guard_and_small_grid_fails():
    prepare_state(default_config())
    with pytest.raises(SamplingGuardError, match="wire_to_lens"):
        prepare_state(default_config().replace(grid_n=4096))


def test_dove_toggle_changes_only_parity(dove_state, nodove_state):
    assert dove_state.parity == -1 and nodove_state.parity == 1
    assert np.array_equal(dove_state.pump_at_detection.samples, nodove_state.pump_at_detection.samples)


def test_imaging_unit_magnification():
    # object 50 cm, f 25 cm -> image 50 cm, m = -1: the wire shadow re-forms inverted
    f = make_gaussian((16384, 5e-6), 1e-3, 442e-9)
    f = apply_wire(f, 0.2e-3, 250e-6)
    f = propagate(apply_thin_lens(propagate(f, 0.5), 0.25), 0.5)
    prof = notch(f, -0.2e-3, 0.6e-3)
    assert profile_center(prof) == pytest.approx(-0.2e-3, abs=5e-6)
    assert profile_width(prof) == pytest.approx(250e-6, rel=0.05)
    assert null_contrast(f, -0.2e-3, 125e-6, 0.4e-3) < 0.05


def test_default_pipeline_null(dove_state):
    # |m| = 2: a 250 um wire gives a 500 um null centered at 0
    w = dove_state.pump_at_detection
    prof = notch(w, 0.0, 1.0e-3)
    assert profile_center(prof) == pytest.approx(0.0, abs=5e-6)
    assert profile_width(prof) == pytest.approx(500e-6, rel=0.05)
    assert null_contrast(w, 0.0, 250e-6, 0.6e-3) < 0.05


def test_notch_tracks_wire_with_magnification():
    cfg = default_config()
    centers = np.array([-0.2e-3, 0.0, 0.2e-3])
    found = []
    for c in centers:
        st = prepare_state(cfg.replace(wire_center=float(c)))
        found.append(profile_center(notch(st.pump_at_detection, cfg.magnification * c, 1.0e-3)))
    slope = np.polyfit(centers, found, 1)[0]
    assert slope == pytest.approx(cfg.magnification, rel=0.02)


@pytest.mark.parametrize(
    "cfg",
    [
        BenchConfig(wire_to_lens=0.5, crystal_to_detectors=0.5),
        with_conjugate_geometry(default_config(), 0.35),
    ],
    ids=["m=-1", "m=-2.5"],
)
def test_imaging_condition_controls_notch(cfg):
    st = prepare_state(cfg)
    m = cfg.magnification
    prof = notch(st.pump_at_detection, 0.0, abs(m) * cfg.wire_width * 2)
    assert profile_width(prof) == pytest.approx(abs(m) * cfg.wire_width, rel=0.05)


def test_no_wire_gives_smooth_beam():
    st = prepare_state(default_config().replace(wire_width=0.0))
    v = intensity(st.pump_at_detection).values
    assert np.argmax(v) in (v.size // 2 - 1, v.size // 2)


def test_singles_envelope_dip_at_calibration_center():
    for center in (0.0, 0.3e-3):
        cfg = default_config().replace(calibration_wire=CalibrationWire(center=center))
        prof = singles_envelope(cfg)
        keep = np.abs(prof.x - center) <= 1.5e-3
        scan = ScanProfile(prof.x[keep], prof.values[keep], Protocol.SINGLES_CALIBRATION)
        assert profile_center(scan) == pytest.approx(center, abs=cfg.grid_dx)


def test_singles_geometric_shadow_at_zero_distance():
    cfg = default_config().replace(calibration_wire=CalibrationWire(distance_to_detectors=0.0))
    prof = singles_envelope(cfg)
    assert np.all(prof.values[np.abs(prof.x) <= 250e-6] == 0)
    rim = (np.abs(prof.x) > 250e-6) & (np.abs(prof.x) < 300e-6)
    assert np.all(prof.values[rim] > 0.98)


def test_singles_envelope_needs_wire():
    with pytest.raises(ConfigurationError):
        singles_envelope(default_config().replace(calibration_wire=None))


def test_config_is_immutable():
    cfg = default_config()
    with pytest.raises(Exception):
        cfg.wire_width = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert cfg.replace(slit_width=0.2e-3).slit_width == 0.2e-3
    assert math.isclose(cfg.slit_width, 0.3e-3)
