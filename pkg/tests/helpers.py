"""Shared plumbing for Monte Carlo versus analytic comparisons."""

import numpy as np

from twinbeam import Protocol, ScanProfile, coincidence_counts, compare_profiles, scan_fixed_d1


def lattice(cmap, slit_width, half_range):
    """Bins ``(lo, hi, step)`` one slit apart, on the map grid; also the stride in cells."""
    cells = int(round(slit_width / cmap.dx))
    step = cells * cmap.dx
    lo = cmap.snap(-half_range)
    n = int(np.floor((cmap.snap(half_range) - lo) / step + 1e-9))
    return (lo, lo + n * step, step), cells


def analytic_on_lattice(slit_map, d1, bins, cells):
    lo, hi, _ = bins
    full = scan_fixed_d1(slit_map, d1, (lo, hi))
    return ScanProfile(full.positions[::cells], full.values[::cells], Protocol.FIXED_D1, d1)


def fixed_d1_comparison(batch, slit_map, slit_width, d1, half_range=3e-3):
    bins, cells = lattice(slit_map, slit_width, half_range)
    counts = coincidence_counts(batch, Protocol.FIXED_D1, slit_width, bins, d1)
    return counts, compare_profiles(counts, analytic_on_lattice(slit_map, d1, bins, cells))


# One line per acceptance criterion, echoed in the pytest terminal summary.
ACCEPTANCE_LINES = []
