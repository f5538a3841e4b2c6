"""Batch front-end: run one experiment from a setup file and write its outputs.

Every run writes ``report.txt`` next to its CSV (and optional SVG) files. The
process exits with 0 exactly when every ``check`` line of the report reads
PASS. A failed check gives 1; an aborted run gives 2.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .bench import prepare_state, singles_envelope
from .correlation import (
    DEFAULT_SHIFTS,
    HOMOGENEITY_TOL,
    antibunch_test,
    apply_detector_slits,
    coincidence_map,
    homogeneity_index,
)
from .errors import ConfigurationError, TwinbeamError
from .montecarlo import binned_map, coincidence_counts, compare_profiles, sample_pairs
from .scans import (
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
from .setupfile import Experiment, Mode, RunSpec, parse_setup
from .svgplot import emit_svg

__all__ = ["run", "main", "RunResult"]

log = logging.getLogger(__name__)

CONSTANCY_TOL = 1e-9
WIDTH_RATIO_TOL = 0.10


@dataclass
class RunResult:
    status: int
    files: List[Path] = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    report: str = ""


def _offset_tag(offset):
    return f"{offset * 1e3:+.3f}mm"


def _relative_spread(values):
    top = float(np.max(np.abs(values)))
    return 0.0 if top == 0 else float(np.ptp(values)) / top


def _grid_shifts(cmap, shifts, window):
    span = int(np.count_nonzero(cmap.window_mask(window)))
    cells = {int(round(s / cmap.dx)) for s in shifts}
    return sorted(t * cmap.dx for t in cells if t and 2 * abs(t) <= span)


class _Writer:
    """Tracks written files so a failed run can remove its partial outputs."""

    def __init__(self, out_dir: Path, svg: bool):
        self.out_dir = out_dir
        self.svg = svg
        self.files: List[Path] = []

    def text(self, name, text):
        path = self.out_dir / name
        self.files.append(path)
        path.write_text(text, encoding="utf-8")
        return path

    def profile(self, name, profile, expected=None):
        if expected is None:
            self.text(name + ".csv", profile.to_csv())
        else:
            self.text(name + ".csv", profile.to_csv(expected=expected))
        if self.svg:
            path = self.out_dir / (name + ".svg")
            self.files.append(path)
            emit_svg(profile, path)

    def cleanup(self):
        for path in self.files:
            try:
                path.unlink()
            except FileNotFoundError:
                pass
        self.files.clear()


def _mc_bins(cmap, run_spec):
    cells = max(1, int(round(run_spec.bench.slit_width / cmap.dx)))
    step = cells * cmap.dx
    lo = cmap.snap(-run_spec.scan_half_range)
    hi = cmap.snap(run_spec.scan_half_range)
    n = int(math.floor((hi - lo) / step + 1e-9))
    return lo, lo + n * step, step, cells


def _subsample(profile, cells):
    return ScanProfile(
        profile.positions[::cells],
        profile.values[::cells],
        profile.protocol,
        profile.fixed_offset,
    )


def _analytic_scan(cmap, protocol, d1, span):
    if protocol is Protocol.FIXED_D1:
        return scan_fixed_d1(cmap, d1, span)
    if protocol is Protocol.SAME_SENSE:
        return scan_same_sense(cmap, span, lag=d1)
    return scan_opposite_sense(cmap, d1, span)


def run(run_spec: RunSpec, output_dir: Optional[os.PathLike] = None) -> RunResult:
    """Execute ``run_spec`` and write its datasets and ``report.txt``.

    Output names follow ``<experiment>_<mode>_<offset>.csv``. A module error
    removes anything already written and returns status 2.
    """
    out_dir = Path(output_dir if output_dir is not None else run_spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    writer = _Writer(out_dir, run_spec.emit_svg)
    try:
        result = _run(run_spec, writer)
    except (TwinbeamError, OSError) as exc:
        writer.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return RunResult(status=2)
    return result


def _run(run_spec: RunSpec, writer: _Writer) -> RunResult:
    bench = run_spec.bench
    dove = bench.dove_prism
    exp = run_spec.experiment
    mode = run_spec.mode
    analytic_out = mode in (Mode.ANALYTIC, Mode.BOTH)
    mc_out = mode in (Mode.MONTE_CARLO, Mode.BOTH)

    state = prepare_state(bench)
    raw = coincidence_map(state)
    slit = apply_detector_slits(raw, bench.slit_width)
    span = (raw.snap(-run_spec.scan_half_range), raw.snap(run_spec.scan_half_range))
    center = 0.0
    checks = {}
    report = [
        "# twinbeam run report",
        f"experiment = {exp.value}",
        f"mode = {mode.value}",
        f"dove_prism = {str(dove).lower()}",
        f"parity = {state.parity:+d}",
        f"magnification = {state.magnification!r}",
        f"slit_width_m = {bench.slit_width!r}",
        "",
    ]

    # classical inequality on the slit-averaged map
    ab = antibunch_test(slit, run_spec.analysis_window)
    report.append(f"[antibunch] slit-averaged map, window {run_spec.analysis_window * 1e3:g} mm")
    report.extend(ab.lines())
    report.append("")

    # homogeneity on the bare analytic map
    shifts = _grid_shifts(raw, DEFAULT_SHIFTS, run_spec.analysis_window)
    if not shifts:
        raise ConfigurationError("analysis window too small for any homogeneity shift")
    h_index = homogeneity_index(raw, shifts, window=run_spec.analysis_window)
    homogeneous = h_index < HOMOGENEITY_TOL
    report.append(
        f"[homogeneity] analytic map, common shifts up to {max(shifts) * 1e3:.3f} mm"
    )
    report.append(f"homogeneity_index = {h_index!r}")
    report.append(f"homogeneity: {'PASS' if homogeneous else 'FAIL'}")
    report.append(
        f"spatial_antibunching = {str(ab.violated and homogeneous).lower()}"
    )
    report.append("")

    # conditional shifts
    offsets = run_spec.d1_offsets or (0.0,)
    fixed = {}
    for off in offsets:
        d1 = raw.snap(off)
        fixed[off] = (d1, scan_fixed_d1(raw, d1, span), scan_fixed_d1(slit, d1, span))
    report.append("[shifts] fixed-D1 scans; center = midpoint of half-depth crossings")
    report.append("offset_m,d1_m,dip_center_m,dip_minimum_m")
    centers = {}
    for off, (d1, praw, pslit) in fixed.items():
        try:
            c = profile_center(praw)
        except TwinbeamError as exc:
            c = math.nan
            log.warning("no dip for offset %s: %s", off, exc)
        centers[off] = (d1, c)
        report.append(f"{off!r},{d1!r},{c!r},{profile_extremum(pslit).position!r}")
    ref_d1, ref_c = centers.get(0.0, next(iter(centers.values())))
    expected_slope = -state.parity * state.mu_i / state.mu_s
    moves = [
        (d1 - ref_d1, c - ref_c) for d1, c in centers.values() if abs(d1 - ref_d1) > raw.dx / 2
    ]
    if not moves:
        sense = "undetermined"
        magnitude_ok = None
    elif all(np.isfinite(m) for _, m in moves):
        if all(m * a > 0 for a, m in moves):
            sense = "same"
        elif all(m * a < 0 for a, m in moves):
            sense = "opposite"
        else:
            sense = "none"
        magnitude_ok = all(abs(m - expected_slope * a) <= raw.dx for a, m in moves)
    else:
        sense = "undetermined"
        magnitude_ok = False
    want = "same" if expected_slope > 0 else "opposite"
    report.append(f"shift_sense = {sense}")
    report.append(f"expected_shift_sense = {want}")
    # a single offset cannot show a shift, so the check is not run
    if magnitude_ok is not None:
        checks["shift_signs"] = sense == want and magnitude_ok
    report.append("")

    # constancy and width compression
    same = scan_same_sense(raw, span)
    opposite = scan_opposite_sense(raw, center, span)
    flat, structured = (same, opposite) if dove else (opposite, same)
    spread = _relative_spread(flat.values)
    checks["constancy"] = spread < CONSTANCY_TOL
    report.append("[protocols] analytic map")
    report.append(f"same_sense_relative_spread = {_relative_spread(same.values)!r}")
    report.append(f"opposite_sense_relative_spread = {_relative_spread(opposite.values)!r}")
    ref_fixed = fixed.get(0.0, fixed[offsets[0]])[1]
    expected_ratio = state.mu_s / (state.mu_s + state.mu_i)
    try:
        w_fixed = profile_width(ref_fixed)
        w_partner = profile_width(structured)
        ratio = w_partner / w_fixed
    except TwinbeamError as exc:
        log.warning("width measurement failed: %s", exc)
        w_fixed = w_partner = ratio = math.nan
    report.append(f"fixed_d1_fwhm_m = {w_fixed!r}")
    report.append(f"{'opposite' if dove else 'same'}_sense_fwhm_m = {w_partner!r}")
    report.append(f"width_ratio = {ratio!r}")
    report.append(f"expected_width_ratio = {expected_ratio!r}")
    checks["factor_two"] = bool(abs(ratio - expected_ratio) <= WIDTH_RATIO_TOL * expected_ratio)
    report.append("")

    # datasets
    if exp is Experiment.CALIBRATION:
        singles = singles_envelope(bench)
        wire = bench.calibration_wire
        cal_span = (wire.center - run_spec.scan_half_range, wire.center + run_spec.scan_half_range)
        report.append("[calibration] singles behind the calibration wire")
        minima = []
        for det in ("d1", "d2"):
            prof = singles_scan(singles, cal_span)
            writer.profile(f"{exp.slug}_analytic_{det}", prof)
            c = profile_center(prof)
            minima.append(c)
            report.append(f"{det}_dip_center_m = {c!r}")
        checks["calibration"] = all(abs(c - wire.center) <= bench.grid_dx for c in minima)
        report.append("")
    else:
        if exp is Experiment.FIXED_D1:
            scans = [(Protocol.FIXED_D1, fixed[off][0], _offset_tag(off)) for off in offsets]
        elif exp is Experiment.SAME_SENSE:
            scans = [(Protocol.SAME_SENSE, 0.0, _offset_tag(0.0))]
        elif exp is Experiment.OPPOSITE_SENSE:
            scans = [(Protocol.OPPOSITE_SENSE, center, _offset_tag(center))]
        else:
            scans = []
        if analytic_out:
            for protocol, d1, tag in scans:
                writer.profile(f"{exp.slug}_analytic_{tag}", _analytic_scan(slit, protocol, d1, span))
            if exp is Experiment.FULL_MAP:
                writer.text(
                    f"{exp.slug}_analytic_{_offset_tag(0.0)}.csv",
                    slit.to_csv(window=run_spec.analysis_window),
                )
        if mc_out:
            report.extend(_montecarlo(run_spec, raw, slit, scans, writer, mode))

    for name, ok in checks.items():
        report.append(f"check {name}: {'PASS' if ok else 'FAIL'}")
    text = "\n".join(report) + "\n"
    writer.text("report.txt", text)
    status = 0 if all(checks.values()) else 1
    return RunResult(status=status, files=list(writer.files), checks=checks, report=text)


def _montecarlo(run_spec, raw, slit, scans, writer, mode):
    bench = run_spec.bench
    exp = run_spec.experiment
    lines = [f"[montecarlo] n_pairs = {run_spec.n_pairs}, seed = {run_spec.seed}"]
    batch = sample_pairs(raw, run_spec.n_pairs, run_spec.seed)
    lo, hi, step, cells = _mc_bins(raw, run_spec)
    for protocol, d1, tag in scans:
        analytic = _subsample(_analytic_scan(slit, protocol, d1, (lo, hi)), cells)
        counts = coincidence_counts(batch, protocol, bench.slit_width, (lo, hi, step), d1)
        cmp = compare_profiles(counts, analytic)
        writer.profile(f"{exp.slug}_montecarlo_{tag}", counts, expected=cmp.expected)
        if mode is Mode.BOTH:
            lines.append(
                f"{tag}: chi2 = {cmp.chi2!r}, dof = {cmp.dof}, p_value = {cmp.p_value!r}, "
                f"max_sigma = {cmp.max_sigma!r}"
            )
    if exp is Experiment.FULL_MAP or exp is Experiment.ANTIBUNCH_REPORT:
        half = run_spec.analysis_window / 2
        bm = binned_map(batch, -half, half, step)
        if exp is Experiment.FULL_MAP:
            writer.text(f"{exp.slug}_montecarlo_{_offset_tag(0.0)}.csv", bm.to_csv())
        mc_ab = antibunch_test(bm, window=bm.extent)
        lines.append("binned-count antibunch test:")
        lines.extend("  " + ln for ln in mc_ab.lines())
    lines.append("")
    return lines


def _build_parser():
    p = argparse.ArgumentParser(
        prog="twinbeam",
        description="Simulate transverse coincidence scans of down-converted twin beams.",
    )
    p.add_argument("--setup", required=True, help="setup file (key = value lines)")
    p.add_argument(
        "--experiment",
        help="override the experiment (Calibration, FixedD1, SameSense, OppositeSense, "
        "FullMap, AntibunchReport, HomogeneityReport)",
    )
    p.add_argument("--mode", choices=["analytic", "montecarlo", "both"], help="override the mode")
    p.add_argument("--seed", type=int, help="override the Monte Carlo seed (unsigned 64-bit)")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--svg", action="store_true", help="also write SVG plots")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        text = Path(args.setup).read_text(encoding="utf-8")
        run_spec = parse_setup(text)
        changes = {}
        if args.experiment:
            changes["experiment"] = Experiment.from_token(args.experiment)
        if args.mode:
            changes["mode"] = Mode.from_token(args.mode)
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.out:
            changes["output_dir"] = args.out
        if args.svg:
            changes["emit_svg"] = True
        run_spec = run_spec.replace(**changes)
    except (TwinbeamError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(run_spec).status


if __name__ == "__main__":
    sys.exit(main())
