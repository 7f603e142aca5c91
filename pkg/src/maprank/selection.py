"""Pin selection: the bookability filter, its anchor strategies, and pin tiers.

A listing is admitted when ``anchor_logit - logit < alpha``, i.e. when its
booking probability exceeds the anchor probability divided by ``e**alpha``.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_listings, check_non_increasing, check_positive
from .core import MINI, REGULAR, DisplayItem, DisplaySet, Listing, sort_listings

DEFAULT_MAX_PINS = 18


@dataclass(frozen=True)
class Topmost:
    pass


@dataclass(frozen=True)
class MedianTop3:
    pass


# (largest total covered, anchor rank); totals beyond the last row use its rank
DEFAULT_ADAPTIVE_TABLE = ((30, 1), (100, 2), (300, 3), (math.inf, 4))


@dataclass(frozen=True)
class AdaptiveRank:
    """Anchor rank chosen from the number of listings ranked for the query."""

    table: tuple[tuple[float, int], ...] = DEFAULT_ADAPTIVE_TABLE

    def __post_init__(self):
        table = tuple((float(t), int(r)) for t, r in self.table)
        if not table:
            raise ValueError("adaptive anchor table is empty")
        thresholds = [t for t, _ in table]
        ranks = [r for _, r in table]
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("adaptive anchor thresholds must be strictly increasing")
        if ranks[0] < 1 or any(b < a for a, b in zip(ranks, ranks[1:])):
            raise ValueError("adaptive anchor ranks must be >= 1 and non-decreasing")
        object.__setattr__(self, "table", table)

    def rank_for(self, total_ranked: int) -> int:
        for threshold, rank in self.table:
            if total_ranked <= threshold:
                return rank
        return self.table[-1][1]


AnchorStrategy = Union[Topmost, MedianTop3, AdaptiveRank]

_ANCHOR_NAMES = {
    "topmost": Topmost,
    "median3": MedianTop3,
    "median_top3": MedianTop3,
    "adaptive": AdaptiveRank,
}


def parse_anchor(anchor) -> AnchorStrategy:
    if isinstance(anchor, (Topmost, MedianTop3, AdaptiveRank)):
        return anchor
    try:
        return _ANCHOR_NAMES[str(anchor).lower()]()
    except KeyError:
        raise ValueError(f"unknown anchor strategy {anchor!r}; choose from {sorted(_ANCHOR_NAMES)}") from None


@dataclass(frozen=True)
class FilterConfig:
    alpha: float = 1.0
    anchor: AnchorStrategy = Topmost()
    max_pins: int = DEFAULT_MAX_PINS

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_positive(self.alpha, "alpha", allow_inf=True))
        object.__setattr__(self, "anchor", parse_anchor(self.anchor))
        if int(self.max_pins) != self.max_pins or self.max_pins < 1:
            raise ValueError("max_pins must be an integer >= 1")


NO_FILTER = math.inf


def anchor_logit(sorted_logits: Sequence[float], strategy: AnchorStrategy, total_ranked: Optional[int] = None) -> float:
    """Logit supplying the anchor booking probability.

    ``sorted_logits`` must be non-increasing.  ``total_ranked`` (defaults to
    the sequence length) only matters for :class:`AdaptiveRank`.
    """
    logits = check_non_increasing(sorted_logits, "sorted_logits")
    strategy = parse_anchor(strategy)
    if isinstance(strategy, Topmost):
        return float(logits[0])
    if isinstance(strategy, MedianTop3):
        return float(np.median(logits[:3]))
    total = len(logits) if total_ranked is None else int(total_ranked)
    rank = min(strategy.rank_for(total), len(logits))
    return float(logits[rank - 1])


def _admitted(ranked: list[Listing], cfg: FilterConfig, total_ranked: Optional[int]) -> np.ndarray:
    logits = [l.logit for l in ranked]
    anchor = anchor_logit(logits, cfg.anchor, total_ranked)
    return np.array([anchor - lg < cfg.alpha for lg in logits], dtype=bool)


def bookability_filter(listings: Iterable[Listing], cfg: FilterConfig, total_ranked: Optional[int] = None) -> DisplaySet:
    """Select map pins: top ``max_pins`` by logit, then the anchor filter.

    ``total_ranked`` defaults to the number of listings passed in.
    """
    listings = check_listings(listings)
    total = len(listings) if total_ranked is None else total_ranked
    top = sort_listings(listings)[: cfg.max_pins]
    keep = _admitted(top, cfg, total)
    return DisplaySet.as_pins([l for l, k in zip(top, keep) if k])


def assign_tiers(listings: Sequence[Listing], cfg: FilterConfig, total_ranked: Optional[int] = None) -> DisplaySet:
    """Regular pins for listings passing the filter, mini pins for the rest.

    Every listing of the list-result keeps its list rank and gets a pin.
    """
    listings = check_listings(listings)
    if len(listings) != cfg.max_pins:
        raise ValueError(f"expected exactly {cfg.max_pins} listings, got {len(listings)}")
    ranked = sort_listings(listings)
    keep = _admitted(ranked, cfg, len(ranked) if total_ranked is None else total_ranked)
    return DisplaySet(
        tuple(DisplayItem(l, rank=i + 1, tier=REGULAR if k else MINI) for i, (l, k) in enumerate(zip(ranked, keep)))
    )


class BookabilityFilter(TransformerMixin, BaseEstimator):
    """Estimator-style wrapper for :func:`bookability_filter`.

    Stateless: ``fit`` only validates parameters.  ``transform`` maps a
    collection of listings (one query) to a pin :class:`DisplaySet`.
    """

    def __init__(self, alpha=1.0, anchor="topmost", max_pins=DEFAULT_MAX_PINS):
        self.alpha = alpha
        self.anchor = anchor
        self.max_pins = max_pins

    def _config(self) -> FilterConfig:
        return FilterConfig(self.alpha, parse_anchor(self.anchor), self.max_pins)

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        return self

    def transform(self, X) -> DisplaySet:
        return bookability_filter(X, self._config())

    def get_support(self, X) -> np.ndarray:
        """Boolean mask over ``X`` (input order) of the admitted listings."""
        listings = check_listings(X)
        pinned = {l.id for l in self.transform(listings).listings}
        return np.array([l.id in pinned for l in listings], dtype=bool)


class TierAssigner(TransformerMixin, BaseEstimator):
    def __init__(self, alpha=1.0, anchor="topmost", max_pins=DEFAULT_MAX_PINS):
        self.alpha = alpha
        self.anchor = anchor
        self.max_pins = max_pins

    def fit(self, X=None, y=None):
        self.config_ = FilterConfig(self.alpha, parse_anchor(self.anchor), self.max_pins)
        return self

    def transform(self, X) -> DisplaySet:
        return assign_tiers(X, FilterConfig(self.alpha, parse_anchor(self.anchor), self.max_pins))
