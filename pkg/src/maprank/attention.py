"""Map attention surfaces, click logs and click-through-rate curves.

A surface is a square grid of click-through rates indexed by the offset of a
pin from the map center, in normalized viewport units.  ``ctr[ix, iy]`` is
the cell whose center sits at ``((ix - h) * cell, (iy - h) * cell)`` with
``h = resolution // 2``.
"""

from __future__ import annotations

import math
import zlib
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import SurfaceCoverageError, check_odd_resolution, check_positive

VIEWPORT_HALF_WIDTH = 0.5
_EDGE_TOL = 1e-12


@dataclass(frozen=True)
class ClickRecord:
    query_id: str
    dx: float
    dy: float
    clicked: bool
    tier: str = "regular"
    rank: int = 1
    distance_rank: int = 1

    def __post_init__(self):
        if abs(self.dx) > VIEWPORT_HALF_WIDTH or abs(self.dy) > VIEWPORT_HALF_WIDTH:
            raise ValueError(f"offset ({self.dx}, {self.dy}) lies outside the viewport")
        if self.tier not in ("regular", "mini"):
            raise ValueError(f"click record tier must be regular or mini, got {self.tier!r}")
        if self.rank < 1 or self.distance_rank < 1:
            raise ValueError("ranks must be >= 1")


class ClickLog:
    """Column-oriented click log; the fast path for large simulated logs."""

    columns = ("query_id", "dx", "dy", "clicked", "tier", "rank", "distance_rank")

    def __init__(self, query_id, dx, dy, clicked, tier, rank, distance_rank):
        self.query_id = np.asarray(query_id, dtype=str)
        self.dx = np.asarray(dx, dtype=float)
        self.dy = np.asarray(dy, dtype=float)
        self.clicked = np.asarray(clicked, dtype=bool)
        self.tier = np.asarray(tier, dtype=str)
        self.rank = np.asarray(rank, dtype=np.int64)
        self.distance_rank = np.asarray(distance_rank, dtype=np.int64)
        n = len(self.dx)
        if any(len(getattr(self, c)) != n for c in self.columns):
            raise ValueError("click log columns must have equal length")
        if n:
            if np.abs(self.dx).max() > VIEWPORT_HALF_WIDTH or np.abs(self.dy).max() > VIEWPORT_HALF_WIDTH:
                raise ValueError("click log offsets must lie inside the viewport")
            if self.rank.min() < 1 or self.distance_rank.min() < 1:
                raise ValueError("ranks must be >= 1")
            if not np.all(np.isin(self.tier, ("regular", "mini"))):
                raise ValueError("tier must be regular or mini")

    def __len__(self):
        return len(self.dx)

    @classmethod
    def from_records(cls, records: Iterable[ClickRecord]) -> "ClickLog":
        records = list(records)
        cols = {c: [getattr(r, c) for r in records] for c in cls.columns}
        if not records:
            cols["query_id"] = np.array([], dtype=str)
            cols["tier"] = np.array([], dtype=str)
        return cls(**cols)

    @classmethod
    def concatenate(cls, logs: Iterable["ClickLog"]) -> "ClickLog":
        logs = list(logs)
        if not logs:
            return cls.from_records([])
        return cls(**{c: np.concatenate([getattr(log, c) for log in logs]) for c in cls.columns})

    def records(self):
        for i in range(len(self)):
            yield ClickRecord(
                str(self.query_id[i]),
                float(self.dx[i]),
                float(self.dy[i]),
                bool(self.clicked[i]),
                str(self.tier[i]),
                int(self.rank[i]),
                int(self.distance_rank[i]),
            )

    def subset(self, mask) -> "ClickLog":
        return ClickLog(**{c: getattr(self, c)[mask] for c in self.columns})


def as_click_log(logs) -> ClickLog:
    if isinstance(logs, ClickLog):
        return logs
    return ClickLog.from_records(logs)


def _cell_indices(dx, dy, resolution: int, half_width: float):
    h = resolution // 2
    cs = 2.0 * half_width / resolution
    ix = np.clip(np.floor(np.asarray(dx, dtype=float) / cs + 0.5).astype(np.int64) + h, 0, resolution - 1)
    iy = np.clip(np.floor(np.asarray(dy, dtype=float) / cs + 0.5).astype(np.int64) + h, 0, resolution - 1)
    return ix, iy


def _freeze(arr):
    if arr is not None:
        arr.setflags(write=False)
    return arr


class AttentionSurface:
    """Immutable grid of click-through rates around the map center."""

    def __init__(self, ctr, impressions=None, imputed=None, uncovered=None, half_width=VIEWPORT_HALF_WIDTH):
        ctr = np.array(ctr, dtype=float)
        if ctr.ndim != 2 or ctr.shape[0] != ctr.shape[1]:
            raise ValueError("ctr grid must be square")
        self.resolution = check_odd_resolution(ctr.shape[0])
        self.half_width = check_positive(half_width, "half_width")
        if not np.all(np.isfinite(ctr)) or np.any(ctr < 0):
            raise ValueError("ctr values must be finite and >= 0")
        h = self.resolution // 2
        if not ctr[h, h] > 0:
            raise SurfaceCoverageError("center cell ctr must be positive")
        self.ctr = _freeze(ctr)
        self.impressions = _freeze(None if impressions is None else np.array(impressions, dtype=np.int64))
        shape = ctr.shape
        self.imputed = _freeze(np.zeros(shape, bool) if imputed is None else np.array(imputed, dtype=bool))
        self.uncovered = _freeze(np.zeros(shape, bool) if uncovered is None else np.array(uncovered, dtype=bool))

    @property
    def cell_size(self) -> float:
        return 2.0 * self.half_width / self.resolution

    @property
    def center_ctr(self) -> float:
        h = self.resolution // 2
        return float(self.ctr[h, h])

    def cell_offsets(self) -> np.ndarray:
        """Offsets of the cell centers along one axis."""
        h = self.resolution // 2
        return (np.arange(self.resolution) - h) * self.cell_size

    def contains(self, dx, dy):
        limit = self.half_width + _EDGE_TOL
        return (np.abs(dx) <= limit) & (np.abs(dy) <= limit)

    def cell_index(self, dx, dy):
        """Nearest-cell indices ``(ix, iy, inside)``; indices are clipped."""
        dx = np.asarray(dx, dtype=float)
        dy = np.asarray(dy, dtype=float)
        ix, iy = _cell_indices(dx, dy, self.resolution, self.half_width)
        return ix, iy, self.contains(dx, dy)

    def ctr_at(self, dx, dy):
        """Absolute click-through rate at an offset; zero outside the grid."""
        ix, iy, inside = self.cell_index(dx, dy)
        out = np.where(inside, self.ctr[ix, iy], 0.0)
        return float(out) if out.ndim == 0 else out

    def relative(self) -> np.ndarray:
        return self.ctr / self.center_ctr

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "half_width": self.half_width,
            "ctr": self.ctr.ravel().tolist(),
            "impressions": None if self.impressions is None else self.impressions.ravel().tolist(),
            "imputed": self.imputed.ravel().tolist(),
            "uncovered": self.uncovered.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AttentionSurface":
        res = check_odd_resolution(data["resolution"])
        shape = (res, res)

        def grid(key, dtype):
            values = data.get(key)
            return None if values is None else np.asarray(values, dtype=dtype).reshape(shape)

        return cls(
            grid("ctr", float),
            impressions=grid("impressions", np.int64),
            imputed=grid("imputed", bool),
            uncovered=grid("uncovered", bool),
            half_width=data.get("half_width", VIEWPORT_HALF_WIDTH),
        )

    def __eq__(self, other):
        if not isinstance(other, AttentionSurface):
            return NotImplemented
        same_impressions = (self.impressions is None) == (other.impressions is None) and (
            self.impressions is None or np.array_equal(self.impressions, other.impressions)
        )
        return (
            self.half_width == other.half_width
            and np.array_equal(self.ctr, other.ctr)
            and same_impressions
            and np.array_equal(self.imputed, other.imputed)
            and np.array_equal(self.uncovered, other.uncovered)
        )

    def __hash__(self):
        return hash((self.resolution, self.half_width, self.ctr.tobytes()))

    def __repr__(self):
        return f"AttentionSurface(resolution={self.resolution}, center_ctr={self.center_ctr:.4g})"


def relative_attention(surface: AttentionSurface, dx, dy, reference: Optional[AttentionSurface] = None):
    """Nearest-cell ctr at the offset divided by the center-cell ctr.

    ``reference`` supplies the normalizing center ctr when comparing
    surfaces estimated for different pin tiers.  Offsets outside the grid
    get zero attention.
    """
    center = (reference if reference is not None else surface).center_ctr
    value = surface.ctr_at(dx, dy)
    return value / center


def synthetic_radial_surface(
    peak_ctr: float,
    decay_scale: float,
    horizontal_shift: float = 0.0,
    resolution: int = 21,
    half_width: float = VIEWPORT_HALF_WIDTH,
) -> AttentionSurface:
    """Gaussian bump of click-through rate, optionally pulled sideways."""
    if not 0.0 < peak_ctr <= 1.0:
        raise ValueError("peak_ctr must be in (0, 1]")
    check_positive(decay_scale, "decay_scale")
    resolution = check_odd_resolution(resolution)
    cs = 2.0 * half_width / resolution
    offsets = (np.arange(resolution) - resolution // 2) * cs
    gx, gy = np.meshgrid(offsets, offsets, indexing="ij")
    ctr = peak_ctr * np.exp(-((gx - horizontal_shift) ** 2 + gy**2) / (2.0 * decay_scale**2))
    return AttentionSurface(ctr, half_width=half_width)


class SurfaceCounts:
    """Additive per-cell click and impression counts.

    Counts from disjoint partitions of a log merge exactly, so estimation can
    be split across workers without changing the result.
    """

    def __init__(self, resolution: int = 21, half_width: float = VIEWPORT_HALF_WIDTH):
        self.resolution = check_odd_resolution(resolution)
        self.half_width = half_width
        self.clicks = np.zeros((resolution, resolution), dtype=np.int64)
        self.impressions = np.zeros((resolution, resolution), dtype=np.int64)

    def update(self, log: ClickLog) -> "SurfaceCounts":
        limit = self.half_width + _EDGE_TOL
        keep = (np.abs(log.dx) <= limit) & (np.abs(log.dy) <= limit)
        ix, iy = _cell_indices(log.dx[keep], log.dy[keep], self.resolution, self.half_width)
        np.add.at(self.impressions, (ix, iy), 1)
        np.add.at(self.clicks, (ix, iy), log.clicked[keep].astype(np.int64))
        return self

    def merge(self, other: "SurfaceCounts") -> "SurfaceCounts":
        if (other.resolution, other.half_width) != (self.resolution, self.half_width):
            raise ValueError("cannot merge counts over different grids")
        self.clicks += other.clicks
        self.impressions += other.impressions
        return self

    def to_surface(self, min_impressions: int = 1) -> AttentionSurface:
        min_impressions = max(int(min_impressions), 1)
        res = self.resolution
        h = res // 2
        covered = self.impressions >= min_impressions
        if not covered[h, h]:
            raise SurfaceCoverageError(
                f"center cell has {self.impressions[h, h]} impressions, need {min_impressions}"
            )
        ctr = np.zeros((res, res))
        ctr[covered] = self.clicks[covered] / self.impressions[covered]
        if ctr[h, h] <= 0:
            raise SurfaceCoverageError("center cell has no clicks; cannot normalize")
        imputed = np.zeros((res, res), bool)
        uncovered = np.zeros((res, res), bool)
        direct = ctr.copy()
        for ix, iy in zip(*np.nonzero(~covered)):
            lo_x, hi_x = max(ix - 1, 0), min(ix + 2, res)
            lo_y, hi_y = max(iy - 1, 0), min(iy + 2, res)
            mask = covered[lo_x:hi_x, lo_y:hi_y]
            if mask.any():
                ctr[ix, iy] = direct[lo_x:hi_x, lo_y:hi_y][mask].mean()
                imputed[ix, iy] = True
            else:
                uncovered[ix, iy] = True
        return AttentionSurface(
            ctr, impressions=self.impressions.copy(), imputed=imputed, uncovered=uncovered, half_width=self.half_width
        )


def _partition(log: ClickLog, n_parts: int) -> list[ClickLog]:
    if n_parts <= 1 or len(log) == 0:
        return [log]
    uniq, inverse = np.unique(log.query_id, return_inverse=True)
    bucket = np.array([zlib.crc32(q.encode("utf-8")) % n_parts for q in uniq], dtype=np.int64)[inverse]
    return [log.subset(bucket == p) for p in range(n_parts)]


def estimate_surface(
    logs,
    resolution: int = 21,
    min_impressions: int = 1,
    half_width: float = VIEWPORT_HALF_WIDTH,
    tier: Optional[str] = None,
    n_jobs: int = 1,
) -> AttentionSurface:
    """Estimate per-cell click-through rates from a click log.

    Cells below ``min_impressions`` take the mean of their directly estimated
    neighbours (Chebyshev distance 1), or zero when none exist; the center
    cell must be estimated directly.
    """
    log = as_click_log(logs)
    if tier is not None:
        log = log.subset(log.tier == tier)
    parts = _partition(log, n_jobs)

    def count(part):
        return SurfaceCounts(resolution, half_width).update(part)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            partials = list(pool.map(count, parts))
    else:
        partials = [count(p) for p in parts]
    total = SurfaceCounts(resolution, half_width)
    for partial in partials:
        total.merge(partial)
    return total.to_surface(min_impressions)


# --- curves -----------------------------------------------------------------


def rank_ctr_counts(logs, key: str = "rank"):
    """Per-rank ``(ranks, clicks, impressions)`` arrays for ``rank`` or ``distance_rank``."""
    key = {"search_rank": "rank"}.get(key, key)
    if key not in ("rank", "distance_rank"):
        raise ValueError(f"unknown rank key {key!r}")
    log = as_click_log(logs)
    ranks = getattr(log, key)
    if len(ranks) == 0:
        return np.array([], np.int64), np.array([], np.int64), np.array([], np.int64)
    uniq, inverse = np.unique(ranks, return_inverse=True)
    impressions = np.bincount(inverse, minlength=len(uniq))
    clicks = np.bincount(inverse, weights=log.clicked.astype(float), minlength=len(uniq)).astype(np.int64)
    return uniq, clicks, impressions


def ctr_by_rank_curve(logs, key: str = "rank") -> list[tuple[int, float]]:
    """Click-through rate per rank divided by the rank-1 click-through rate."""
    ranks, clicks, impressions = rank_ctr_counts(logs, key)
    if len(ranks) == 0 or ranks[0] != 1:
        raise ValueError("the log has no impressions at rank 1")
    ctr = clicks / impressions
    if ctr[0] <= 0:
        raise ValueError("rank 1 has no clicks; the curve cannot be normalized")
    return [(int(r), float(c / ctr[0])) for r, c in zip(ranks, ctr)]


def rank_distance_transform(avg_rank):
    """``log(2) / log(2 + avg_rank)``, a discount-style view of rank."""
    arr = np.asarray(avg_rank, dtype=float)
    if np.any(arr < 0):
        raise ValueError("average rank must be >= 0")
    out = math.log(2.0) / np.log(2.0 + arr)
    return float(out) if out.ndim == 0 else out


def rank_distance_curve(logs, n_bins: int = 10) -> list[tuple[float, float, float, int]]:
    """Average search rank by distance from the map center.

    Returns ``(normalized distance, avg rank, transform, count)`` per
    non-empty bin, distance scaled so a viewport corner is 1.
    """
    log = as_click_log(logs)
    if len(log) == 0:
        return []
    dist = np.hypot(log.dx, log.dy) / math.hypot(VIEWPORT_HALF_WIDTH, VIEWPORT_HALF_WIDTH)
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, dist, side="right") - 1, 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    sums = np.bincount(idx, weights=log.rank.astype(float), minlength=n_bins)
    rows = []
    for b in np.nonzero(counts)[0]:
        avg = sums[b] / counts[b]
        rows.append((float((edges[b] + edges[b + 1]) / 2), float(avg), rank_distance_transform(avg), int(counts[b])))
    return rows


class SurfaceEstimator(BaseEstimator):
    """Estimator wrapper around :func:`estimate_surface`.

    ``fit`` takes a click log; ``predict`` maps an ``(n, 2)`` array of
    offsets to relative attention.
    """

    def __init__(self, resolution=21, min_impressions=1, half_width=VIEWPORT_HALF_WIDTH, tier=None, n_jobs=1):
        self.resolution = resolution
        self.min_impressions = min_impressions
        self.half_width = half_width
        self.tier = tier
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        self.surface_ = estimate_surface(
            X,
            resolution=self.resolution,
            min_impressions=self.min_impressions,
            half_width=self.half_width,
            tier=self.tier,
            n_jobs=self.n_jobs,
        )
        return self

    def predict(self, X):
        check_is_fitted(self, "surface_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise ValueError("expected an (n, 2) array of offsets")
        return np.atleast_1d(relative_attention(self.surface_, X[:, 0], X[:, 1]))
