"""Level-spacing statistics and the ratio of consecutive spacings."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from adicke.model import ModelParams
from adicke.spectra import SpectralData

POISSON_R = 2 * math.log(2) - 1
GOE_R = 0.5307


@dataclass(frozen=True)
class LevelWindow:
    """Level indices ``lo <= n < hi`` plus an optional energy ceiling."""

    lo: int = 200
    hi: int = 1000
    ceiling: float | None = None

    def __post_init__(self):
        if not 0 <= self.lo < self.hi:
            raise ValueError(f"need 0 <= lo < hi, got {self.lo}:{self.hi}")

    @classmethod
    def parse(cls, text: str, ceiling=None) -> "LevelWindow":
        lo, hi = text.split(":")
        return cls(int(lo), int(hi), ceiling)

    def select(self, spec: SpectralData) -> np.ndarray:
        available = spec.converged_count or len(spec)
        if self.hi > available:
            raise ValueError(f"window {self.lo}:{self.hi} exceeds the {available} converged levels")
        levels = spec.eigenvalues[self.lo:self.hi]
        if self.ceiling is not None:
            levels = levels[levels <= self.ceiling]
        return levels


@dataclass(frozen=True)
class SpacingSeries:
    raw: np.ndarray
    normalized: np.ndarray

    def __len__(self):
        return len(self.raw)


def _as_levels(spec) -> SpectralData:
    if isinstance(spec, SpectralData):
        return spec
    levels = np.sort(np.asarray(spec, dtype=float))
    return SpectralData(None, None, levels, converged_count=len(levels))


def spacing_series(spec, window: LevelWindow | None = None, local_unfolding: int | None = None) -> SpacingSeries:
    """Nearest-neighbour spacings over ``window``, normalized to unit mean.

    By default every spacing is divided by the mean over the window.  With
    ``local_unfolding=w`` each spacing is instead divided by the mean of the
    2w+1 spacings centred on it (clipped at the window edges).
    """
    spec = _as_levels(spec)
    levels = window.select(spec) if window else spec.eigenvalues
    raw = np.diff(levels)
    if len(raw) == 0:
        raise ValueError("window holds fewer than two levels")
    if local_unfolding:
        w = int(local_unfolding)
        csum = np.concatenate([[0.0], np.cumsum(raw)])
        idx = np.arange(len(raw))
        lo = np.clip(idx - w, 0, len(raw))
        hi = np.clip(idx + w + 1, 0, len(raw))
        local = (csum[hi] - csum[lo]) / (hi - lo)
        normalized = raw / local
    else:
        normalized = raw / raw.mean()
    return SpacingSeries(raw, normalized)


def reference_pdf(kind: str, s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("spacing must be non-negative")
    if kind == "poisson":
        out = np.exp(-s)
    elif kind == "wigner_dyson":
        out = 0.5 * np.pi * s * np.exp(-0.25 * np.pi * s**2)
    else:
        raise ValueError(f"unknown reference distribution {kind!r}")
    return out if out.ndim else float(out)


def reference_cdf(kind: str, s):
    s = np.asarray(s, dtype=float)
    if kind == "poisson":
        return -np.expm1(-s)
    if kind == "wigner_dyson":
        return -np.expm1(-0.25 * np.pi * s**2)
    raise ValueError(f"unknown reference distribution {kind!r}")


@dataclass(frozen=True)
class HistogramResult:
    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self):
        return np.diff(self.edges)


def histogram(series, bins: int = 30, range: tuple[float, float] = (0.0, 4.0)) -> HistogramResult:
    """Unit-area histogram of normalized spacings.

    Bins are left-closed except the last, which is closed on both sides;
    samples outside ``range`` are dropped before normalizing.
    """
    data = series.normalized if isinstance(series, SpacingSeries) else np.asarray(series, dtype=float)
    if len(data) == 0:
        raise ValueError("cannot histogram an empty series")
    counts, edges = np.histogram(data, bins=bins, range=range)
    total = counts.sum()
    if total == 0:
        raise ValueError(f"no samples fall inside {range}")
    density = counts / (total * np.diff(edges))
    return HistogramResult(edges, counts, density)


def ks_distances(series) -> dict[str, float]:
    """Kolmogorov-Smirnov distance of the normalized spacings to both references."""
    data = series.normalized if isinstance(series, SpacingSeries) else np.asarray(series, dtype=float)
    return {kind: float(stats.kstest(data, lambda s, k=kind: reference_cdf(k, s)).statistic)
            for kind in ("poisson", "wigner_dyson")}


@dataclass(frozen=True)
class RStatResult:
    ratios: np.ndarray
    mean: float
    zero_spacings: int = 0

    @property
    def count(self) -> int:
        return len(self.ratios)


def spacing_ratios(spacings) -> tuple[np.ndarray, int]:
    """min(s_n/s_{n-1}, s_{n-1}/s_n); a ratio touching a zero spacing is 0."""
    s = np.asarray(spacings, dtype=float)
    if len(s) < 2:
        raise ValueError("need at least two spacings for a ratio")
    a, b = s[1:], s[:-1]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    degenerate = lo <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(degenerate, 0.0, lo / np.where(hi > 0, hi, 1.0))
    return r, int(np.count_nonzero(degenerate))


def r_statistic(spec, window: LevelWindow | None = None) -> RStatResult:
    spec = _as_levels(spec)
    levels = window.select(spec) if window else spec.eigenvalues
    r, zeros = spacing_ratios(np.diff(levels))
    return RStatResult(r, float(r.mean()), zeros)


def cluster_splitting(params: ModelParams, n: int, m: float) -> float:
    """Half-width g1 sqrt(...)/sqrt(2j) of the first-order cluster at (n, m)."""
    j = params.j
    radicand = j + j * j + m - m * m + 2 * (j + j * j - m * m) * n
    return params.g1 * math.sqrt(max(radicand, 0.0)) / math.sqrt(2 * j)


def perturbative_cluster_energies(params: ModelParams, n: int, m: float) -> tuple[float, float, float]:
    """First-order energies of |n, m> and its partners |n +/- 1, m -/+ 1>.

    Only meaningful on resonance (omega == omega0) and for g1 = g2 small.
    """
    if not math.isclose(params.omega, params.omega0, rel_tol=0, abs_tol=1e-14):
        raise ValueError("cluster formula holds only for omega == omega0")
    j = params.j
    if n < 0 or abs(m) > j or abs((m + j) - round(m + j)) > 1e-12:
        raise ValueError(f"invalid basis label (n={n}, m={m}) for j={j}")
    centre = params.omega * (n + m)
    delta = cluster_splitting(params, n, m)
    return centre - delta, centre, centre + delta


def sample_poisson_spacings(count: int, rng) -> np.ndarray:
    return rng.exponential(1.0, size=count)


def sample_goe(dim: int, rng) -> np.ndarray:
    """GOE matrix: diagonal variance 1, off-diagonal variance 1/2."""
    a = rng.standard_normal((dim, dim))
    return (a + a.T) / 2


def goe_bulk_ratios(dim: int, samples: int, rng, bulk: float = 0.5) -> np.ndarray:
    """Spacing ratios from the central ``bulk`` fraction of GOE spectra."""
    out = []
    cut = int(round(dim * (1 - bulk) / 2))
    for _ in range(samples):
        ev = np.linalg.eigvalsh(sample_goe(dim, rng))
        out.append(spacing_ratios(np.diff(ev[cut:dim - cut]))[0])
    return np.concatenate(out)
