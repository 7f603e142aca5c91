"""Greedy map-center search.

Pins are fixed first (top ``n_pins`` by logit); the center is then chosen by
scanning a grid of step ``epsilon`` over the pins' bounding box and keeping
the first candidate with the highest attention-weighted booking sum.

By default the scan starts from the pins' centroid as the incumbent, so the
result is never worse than the naive center; grid points must beat it
strictly.  ``seed_with_centroid=False`` starts from ``-inf`` instead.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_listings, check_positive
from .attention import AttentionSurface, relative_attention
from .core import DisplaySet, Listing, sort_listings


@dataclass(frozen=True)
class PlacementConfig:
    n_pins: int
    epsilon: float
    surface: AttentionSurface

    def __post_init__(self):
        if int(self.n_pins) != self.n_pins or self.n_pins < 1:
            raise ValueError("n_pins must be an integer >= 1")
        check_positive(self.epsilon, "epsilon")


class PlacementResult(NamedTuple):
    pins: list[Listing]
    center: tuple[float, float]
    objective: float
    n_candidates: int


def objective(pins: Sequence[Listing], center: tuple[float, float], surface: AttentionSurface) -> float:
    """Sum of relative attention times booking probability (not normalized).

    Accumulates in pin order, one pin at a time, so it reproduces the grid
    evaluation in :func:`optimize_center` bit for bit.
    """
    if not pins:
        raise ValueError("objective needs at least one pin")
    cx, cy = center
    total = 0.0
    for pin in pins:
        total += relative_attention(surface, pin.x - cx, pin.y - cy) * math.exp(pin.logit)
    return total


def candidate_axis(lo: float, hi: float, epsilon: float) -> np.ndarray:
    """``lo, lo + eps, lo + 2 eps, ...`` strictly below ``hi``; ``[lo]`` if the span is empty."""
    if not hi > lo:
        return np.array([lo])
    n = int(math.ceil((hi - lo) / epsilon))
    values = lo + epsilon * np.arange(n + 1)
    return values[values < hi]


def centroid(pins: Sequence[Listing]) -> tuple[float, float]:
    return (float(np.mean([p.x for p in pins])), float(np.mean([p.y for p in pins])))


_CHUNK_CELLS = 1 << 15


def _grid_objective(xs, ys, pins, surface) -> np.ndarray:
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    total = np.zeros(gx.shape)
    for pin in pins:
        total += relative_attention(surface, pin.x - gx, pin.y - gy) * math.exp(pin.logit)
    return total


def optimize_center(
    listings: Iterable[Listing], cfg: PlacementConfig, n_jobs: int = 1, seed_with_centroid: bool = True
) -> PlacementResult:
    """Fix the pins by booking probability, then grid-search the map center.

    Candidates run x-outer, y-inner from the bounding-box minimum; ties keep
    the earliest candidate (the centroid, when seeded).  ``n_jobs`` splits
    the x rows across threads and does not change the result.
    """
    listings = check_listings(listings)
    pins = sort_listings(listings)[: cfg.n_pins]
    xs = candidate_axis(min(p.x for p in pins), max(p.x for p in pins), cfg.epsilon)
    ys = candidate_axis(min(p.y for p in pins), max(p.y for p in pins), cfg.epsilon)

    # cache-sized chunks keep the cost per candidate flat as the grid grows
    rows_per_chunk = max(1, _CHUNK_CELLS // len(ys))
    n_chunks = max(n_jobs, math.ceil(len(xs) / rows_per_chunk))
    chunks = [c for c in np.array_split(np.arange(len(xs)), n_chunks) if len(c)]

    def best_in(rows):
        values = _grid_objective(xs[rows], ys, pins, cfg.surface)
        flat = int(np.argmax(values))
        ix, iy = divmod(flat, len(ys))
        return float(values[ix, iy]), int(rows[ix]), iy

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            partial = list(pool.map(best_in, chunks))
    else:
        partial = [best_in(rows) for rows in chunks]

    n_candidates = len(xs) * len(ys)
    best, center = -math.inf, None
    if seed_with_centroid:
        center = centroid(pins)
        best = objective(pins, center, cfg.surface)
        n_candidates += 1
    for value, ix, iy in partial:
        if best < value:
            best, center = value, (float(xs[ix]), float(ys[iy]))
    return PlacementResult(pins, center, best, n_candidates)


class MapCenterOptimizer(BaseEstimator):
    """Estimator wrapper for :func:`optimize_center`.

    After ``fit(listings)``: ``pins_``, ``center_`` and ``objective_``.
    """

    def __init__(self, surface=None, n_pins=18, epsilon=0.02, seed_with_centroid=True, n_jobs=1):
        self.surface = surface
        self.n_pins = n_pins
        self.epsilon = epsilon
        self.seed_with_centroid = seed_with_centroid
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        if self.surface is None:
            raise ValueError("MapCenterOptimizer needs an attention surface")
        result = optimize_center(
            X,
            PlacementConfig(self.n_pins, self.epsilon, self.surface),
            n_jobs=self.n_jobs,
            seed_with_centroid=self.seed_with_centroid,
        )
        self.pins_ = result.pins
        self.center_ = result.center
        self.objective_ = result.objective
        self.n_candidates_ = result.n_candidates
        return self

    def transform(self, X=None) -> DisplaySet:
        check_is_fitted(self, "center_")
        return DisplaySet.as_pins(self.pins_, center=self.center_)

    def score(self, X, y=None) -> float:
        """Objective of the fitted center for the pins selected from ``X``."""
        check_is_fitted(self, "center_")
        pins = sort_listings(check_listings(X))[: self.n_pins]
        return objective(pins, self.center_, self.surface)
