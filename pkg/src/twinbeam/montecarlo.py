"""Monte Carlo photon-pair sampling and slit-windowed coincidence counting.

Pairs are drawn from a coincidence map treated as the joint detection
density. Each photon independently leaves the 50/50 beamsplitter through
either port (signal and idler are distinguishable by polarization, so there
is no two-photon interference); only split pairs give a coincidence.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy import stats

from .correlation import CoincidenceMap
from .errors import ConfigurationError
from .scans import Protocol, ScanProfile

__all__ = [
    "Route",
    "PairEventBatch",
    "CountsProfile",
    "Comparison",
    "CHUNK_PAIRS",
    "sample_pairs",
    "coincidence_counts",
    "compare_profiles",
    "binned_map",
]

# Pairs drawn per sub-batch; each sub-batch has its own derived seed.
CHUNK_PAIRS = 1 << 20


class Route(enum.IntEnum):
    BOTH_TO_D1 = 0
    BOTH_TO_D2 = 1
    SPLIT_12 = 2
    SPLIT_21 = 3


@dataclass(frozen=True)
class PairEventBatch:
    """Sampled pair positions at the detector plane and their beamsplitter routes."""

    rho1: np.ndarray
    rho2: np.ndarray
    route: np.ndarray
    seed: int
    parity: int = -1
    mu_s: float = 2.0
    mu_i: float = 2.0

    def __post_init__(self):
        if not (self.rho1.shape == self.rho2.shape == self.route.shape) or self.rho1.ndim != 1:
            raise ConfigurationError("rho1, rho2 and route must be 1D arrays of equal length")

    @property
    def n_pairs(self) -> int:
        return self.rho1.size

    @property
    def coincident(self) -> np.ndarray:
        """Mask of pairs split across the two detectors."""
        return self.route >= Route.SPLIT_12


def _chunk_rng(seed, index):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(index,))))


def sample_pairs(cmap: CoincidenceMap, n_pairs: int, seed: int) -> PairEventBatch:
    """Draw ``n_pairs`` i.i.d. pairs from the normalized map.

    Cells are chosen by inverse CDF over the flattened map and positions are
    jittered uniformly inside the chosen cell. Work is split into sub-batches
    of :data:`CHUNK_PAIRS` seeded by ``(seed, sub-batch index)``, so the
    result depends only on ``seed`` and ``n_pairs``.
    """
    if n_pairs < 1:
        raise ConfigurationError(f"n_pairs={n_pairs} must be >= 1")
    if not 0 <= seed < 2**64:
        raise ConfigurationError(f"seed={seed} must be an unsigned 64-bit integer")
    flat = cmap.values.ravel()
    cdf = np.cumsum(flat)
    total = cdf[-1]
    if not total > 0:
        raise ConfigurationError("cannot sample from a map with zero total mass")
    m = cmap.size
    rho1 = np.empty(n_pairs)
    rho2 = np.empty(n_pairs)
    route = np.empty(n_pairs, dtype=np.int8)
    for index, start in enumerate(range(0, n_pairs, CHUNK_PAIRS)):
        stop = min(start + CHUNK_PAIRS, n_pairs)
        rng = _chunk_rng(seed, index)
        size = stop - start
        # sorted keys keep searchsorted cache-friendly; pairs are i.i.d. so order is free
        u = np.sort(rng.random(size)) * total
        cell = np.minimum(np.searchsorted(cdf, u, side="right"), flat.size - 1)
        j, k = np.divmod(cell, m)
        jitter = rng.random((2, size)) - 0.5
        rho1[start:stop] = cmap.x0 + (j + jitter[0]) * cmap.dx
        rho2[start:stop] = cmap.x0 + (k + jitter[1]) * cmap.dx
        route[start:stop] = rng.integers(0, 4, size=size)
    return PairEventBatch(rho1, rho2, route, int(seed), cmap.parity, cmap.mu_s, cmap.mu_i)


@dataclass(frozen=True)
class CountsProfile:
    """Integer coincidence counts per D2 bin for one scan protocol.

    Bins are independent detector placements; when ``step < slit_width``
    windows overlap and one event can be counted in several bins.
    """

    positions: np.ndarray
    counts: np.ndarray
    n_pairs_total: int
    protocol: Protocol
    fixed_offset: float = 0.0
    slit_width: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if not np.issubdtype(counts.dtype, np.integer) or np.any(counts < 0):
            raise ConfigurationError("counts must be non-negative integers")
        pos = np.asarray(self.positions, dtype=float)
        if pos.shape != counts.shape:
            raise ConfigurationError("positions and counts must have equal length")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "counts", counts.astype(np.int64))
        object.__setattr__(self, "protocol", Protocol(self.protocol))

    def __len__(self):
        return self.positions.size

    def to_csv(self, path=None, expected=None) -> str:
        """CSV ``position_m,counts,expected`` with run metadata as comments."""
        if expected is None:
            expected = np.full(len(self), np.nan)
        buf = io.StringIO()
        buf.write(f"# protocol={self.protocol.value}\n")
        buf.write(f"# seed={self.seed}\n")
        buf.write(f"# n_pairs={self.n_pairs_total}\n")
        buf.write(f"# fixed_offset_m={self.fixed_offset!r}\n")
        buf.write(f"# slit_width_m={self.slit_width!r}\n")
        buf.write("position_m,counts,expected\n")
        for x, c, e in zip(self.positions, self.counts, expected):
            buf.write(f"{float(x)!r},{int(c)},{float(e)!r}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _bin_centers(bins):
    lo, hi, step = bins
    if not step > 0 or not hi >= lo:
        raise ConfigurationError(f"degenerate bin range lo={lo}, hi={hi}, step={step}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + np.arange(n) * step


def _d1_target(protocol, centers, d1_position):
    if protocol is Protocol.FIXED_D1:
        return np.full_like(centers, d1_position)
    if protocol is Protocol.SAME_SENSE:
        return centers + d1_position
    if protocol is Protocol.OPPOSITE_SENSE:
        return 2 * d1_position - centers
    raise ConfigurationError(f"protocol {protocol} has no coincidence scan")


def coincidence_counts(
    batch: PairEventBatch,
    protocol,
    slit_width: float,
    bins: Tuple[float, float, float],
    d1_position: float = 0.0,
    accidental_rate: float = 0.0,
) -> CountsProfile:
    """Count split pairs seen through both detector slits at each scan step.

    ``bins = (lo, hi, step)`` places D2 at ``lo, lo+step, ..., <= hi``. For
    FixedD1, D1 stays at ``d1_position``; the moving protocols put it at
    ``D2 + d1_position`` (SameSense) or ``2*d1_position - D2`` (OppositeSense).
    ``accidental_rate`` adds a Poisson background with that mean to every bin.
    """
    protocol = Protocol(protocol)
    if not slit_width > 0:
        raise ConfigurationError("slit_width must be positive")
    centers = _bin_centers(bins)
    lo, _, step = bins
    half = slit_width / 2
    target = _d1_target(protocol, centers, d1_position)

    sel = batch.coincident
    r1 = batch.rho1[sel]
    r2 = batch.rho2[sel]
    keep = (r2 >= centers[0] - half) & (r2 <= centers[-1] + half)
    r1, r2 = r1[keep], r2[keep]

    counts = np.zeros(centers.size, dtype=np.int64)
    first = np.ceil((r2 - half - lo) / step).astype(np.int64)
    first = np.maximum(first, 0)
    reach = int(math.ceil(slit_width / step)) + 1
    for offset in range(reach):
        b = first + offset
        ok = b < centers.size
        b_ok = b[ok]
        hit = (np.abs(r2[ok] - centers[b_ok]) <= half) & (np.abs(r1[ok] - target[b_ok]) <= half)
        counts += np.bincount(b_ok[hit], minlength=centers.size)
    if accidental_rate > 0:
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=batch.seed, spawn_key=(2**32 - 1,)))
        )
        counts += rng.poisson(accidental_rate, size=centers.size)
    return CountsProfile(
        positions=centers,
        counts=counts,
        n_pairs_total=batch.n_pairs,
        protocol=protocol,
        fixed_offset=float(d1_position),
        slit_width=float(slit_width),
        seed=batch.seed,
    )


class Comparison(NamedTuple):
    chi2: float
    dof: int
    p_value: float
    max_sigma: float
    expected: np.ndarray


def _merge_small(observed, expected, minimum=5.0):
    groups_o, groups_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= minimum:
            groups_o.append(acc_o)
            groups_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if groups_e:
            groups_o[-1] += acc_o
            groups_e[-1] += acc_e
        else:
            groups_o.append(acc_o)
            groups_e.append(acc_e)
    return np.array(groups_o), np.array(groups_e)


def compare_profiles(mc: CountsProfile, analytic: ScanProfile) -> Comparison:
    """Pearson chi-square of Monte Carlo counts against an analytic scan.

    The analytic profile is scaled to the total observed counts; variance is
    ``max(expected, 1)``; neighboring bins are merged until each holds an
    expectation of at least 5. One degree of freedom goes to the scale.
    """
    if len(mc) != len(analytic):
        raise ConfigurationError(f"lattice mismatch: {len(mc)} MC bins vs {len(analytic)} analytic")
    tol = 1e-6 * (np.min(np.diff(mc.positions)) if len(mc) > 1 else 1.0)
    if np.any(np.abs(mc.positions - analytic.positions) > tol):
        raise ConfigurationError("lattice mismatch: MC and analytic positions differ")
    observed = mc.counts.astype(float)
    mass = float(analytic.values.sum())
    total = float(observed.sum())
    if mass == 0:
        if total == 0:
            return Comparison(0.0, 0, 1.0, 0.0, np.zeros_like(observed))
        return Comparison(math.inf, 0, 0.0, math.inf, np.zeros_like(observed))
    expected = analytic.values * (total / mass)
    sigma = np.abs(observed - expected) / np.sqrt(np.maximum(expected, 1.0))
    go, ge = _merge_small(observed, expected)
    chi2 = float(np.sum((go - ge) ** 2 / np.maximum(ge, 1.0)))
    dof = max(ge.size - 1, 0)
    p = float(stats.chi2.sf(chi2, dof)) if dof > 0 else (1.0 if chi2 == 0 else 0.0)
    return Comparison(chi2, dof, p, float(sigma.max()) if sigma.size else 0.0, expected)


def binned_map(batch: PairEventBatch, lo: float, hi: float, step: float) -> CoincidenceMap:
    """Histogram split pairs into a square map of ``step``-wide bins.

    Bin edges start at ``lo``; the last edge is the first one at or beyond
    ``hi``. The result feeds :func:`antibunch_test` directly.
    """
    if not (step > 0 and hi > lo):
        raise ConfigurationError(f"degenerate bin range lo={lo}, hi={hi}, step={step}")
    n = int(math.ceil((hi - lo) / step - 1e-9))
    edges = lo + np.arange(n + 1) * step
    sel = batch.coincident
    hist, _, _ = np.histogram2d(batch.rho1[sel], batch.rho2[sel], bins=(edges, edges))
    return CoincidenceMap(
        values=hist,
        dx=step,
        x0=lo + step / 2,
        parity=batch.parity,
        mu_s=batch.mu_s,
        mu_i=batch.mu_i,
    )
