"""Listings, display sets, attention models and the expected-booking evaluator.

Logits are natural-log booking probabilities, so ``exp(logit)`` is the
probability and logit differences are exact log probability ratios.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from ._validation import (
    DomainError,
    EmptyInputError,
    check_listings,
    check_logit,
)
from .attention import AttentionSurface, relative_attention

REGULAR = "regular"
MINI = "mini"
NONE = "none"
TIERS = (REGULAR, MINI, NONE)


@dataclass(frozen=True)
class Listing:
    id: str
    x: float
    y: float
    logit: float
    price: Optional[float] = None
    reviews: Optional[int] = None
    rating: Optional[float] = None

    def __post_init__(self):
        check_logit(self.logit)
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("listing id must be a non-empty string")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"listing {self.id!r} has non-finite coordinates")
        if self.price is not None and not self.price > 0:
            raise ValueError(f"listing {self.id!r}: price must be positive")
        if self.reviews is not None and self.reviews < 0:
            raise ValueError(f"listing {self.id!r}: reviews must be non-negative")
        if self.rating is not None and not 0.0 <= self.rating <= 5.0:
            raise ValueError(f"listing {self.id!r}: rating must be in [0, 5]")

    @property
    def probability(self) -> float:
        return math.exp(self.logit)


def booking_probability(logit: float) -> float:
    """Booking probability for a calibrated logit, ``exp(logit)``.

    Raises DomainError for positive logits, which indicate an uncalibrated
    score rather than a log probability.
    """
    return math.exp(check_logit(logit))


def sort_key(listing: Listing):
    """Descending logit, ascending id."""
    return (-listing.logit, listing.id)


def sort_listings(listings: Iterable[Listing]) -> list[Listing]:
    return sorted(listings, key=sort_key)


@dataclass(frozen=True)
class RankedResult:
    ids: tuple[str, ...]
    logits: tuple[float, ...]

    def __post_init__(self):
        if len(self.ids) != len(self.logits):
            raise ValueError("ids and logits must have the same length")
        for i in range(1, len(self.logits)):
            prev, cur = self.logits[i - 1], self.logits[i]
            if cur > prev or (cur == prev and self.ids[i] < self.ids[i - 1]):
                raise ValueError("RankedResult must be ordered by descending logit, then id")

    def __len__(self):
        return len(self.ids)


def rank_by_logit(listings: Iterable[Listing]) -> RankedResult:
    listings = check_listings(listings)
    ordered = sort_listings(listings)
    return RankedResult(tuple(l.id for l in ordered), tuple(l.logit for l in ordered))


# --- attention models -------------------------------------------------------


@dataclass(frozen=True)
class ListPositional:
    """Attention by list rank; ``weights[i]`` applies to rank ``i + 1``."""

    weights: tuple[float, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("ListPositional needs at least one weight")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("ListPositional weights must be strictly positive")
        if np.any(np.diff(w) > 0):
            raise ValueError("ListPositional weights must be non-increasing")
        object.__setattr__(self, "weights", tuple(float(v) for v in w))

    @classmethod
    def harmonic(cls, n: int, power: float = 1.0) -> "ListPositional":
        """Weights ``1 / i**power`` for ranks 1..n."""
        return cls(tuple(1.0 / (i**power) for i in range(1, n + 1)))


@dataclass(frozen=True)
class MapUniform:
    pass


@dataclass(frozen=True)
class MapTiered:
    regular: float = 1.0
    mini: float = 1.0 / 8.0
    hidden: float = 0.0

    def __post_init__(self):
        for name in ("regular", "mini", "hidden"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"tier weight {name} must be finite and >= 0")

    def weight(self, tier: str) -> float:
        return {REGULAR: self.regular, MINI: self.mini, NONE: self.hidden}[tier]


@dataclass(frozen=True)
class MapContinuous:
    """Attention read from a 2-D surface relative to the map center.

    With ``center=None`` the center of the display being evaluated is used.
    """

    surface: AttentionSurface
    center: Optional[tuple[float, float]] = None


AttentionModel = Union[ListPositional, MapUniform, MapTiered, MapContinuous]


# --- display sets -----------------------------------------------------------


@dataclass(frozen=True)
class DisplayItem:
    listing: Listing
    rank: Optional[int] = None
    tier: str = NONE

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")
        if self.rank is not None and self.rank < 1:
            raise ValueError("list rank must be >= 1")
        if self.rank is None and self.tier == NONE:
            raise ValueError(f"listing {self.listing.id!r} is neither ranked nor pinned")

    @property
    def pinned(self) -> bool:
        return self.tier != NONE


@dataclass(frozen=True)
class DisplaySet:
    items: tuple[DisplayItem, ...]
    center: Optional[tuple[float, float]] = None

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise EmptyInputError("a display set needs at least one item")
        check_listings(item.listing for item in items)
        ranks = [item.rank for item in items if item.rank is not None]
        if len(set(ranks)) != len(ranks):
            raise ValueError("list ranks must be unique")
        object.__setattr__(self, "items", items)
        if self.center is not None:
            object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @classmethod
    def as_list(cls, listings: Sequence[Listing]) -> "DisplaySet":
        """List-result: ranks 1..N in the given order, no pins."""
        return cls(tuple(DisplayItem(l, rank=i + 1) for i, l in enumerate(listings)))

    @classmethod
    def as_pins(cls, listings: Sequence[Listing], tiers=None, center=None) -> "DisplaySet":
        tiers = [REGULAR] * len(listings) if tiers is None else list(tiers)
        return cls(tuple(DisplayItem(l, tier=t) for l, t in zip(listings, tiers, strict=True)), center)

    @property
    def listings(self) -> list[Listing]:
        return [item.listing for item in self.items]

    @property
    def pins(self) -> list[Listing]:
        return [item.listing for item in self.items if item.pinned]

    def with_tier(self, tier: str) -> list[Listing]:
        return [item.listing for item in self.items if item.tier == tier]

    def __len__(self):
        return len(self.items)

    def logits(self) -> np.ndarray:
        return np.array([item.listing.logit for item in self.items], dtype=float)

    def probabilities(self) -> np.ndarray:
        return np.exp(self.logits())


class AttentionWeights(NamedTuple):
    raw: np.ndarray
    normalized: np.ndarray
    outside_support: int


def attention_weights(display: DisplaySet, attn: AttentionModel) -> AttentionWeights:
    """Raw and normalized attention per displayed item.

    Normalized weights sum to one (single-examination distribution) unless
    every raw weight is zero, in which case they are all zero.
    """
    outside = 0
    if isinstance(attn, ListPositional):
        raw = np.empty(len(display))
        for i, item in enumerate(display.items):
            if item.rank is None:
                raise ValueError(f"listing {item.listing.id!r} has no list rank")
            if item.rank > len(attn.weights):
                raise ValueError(f"no attention weight for rank {item.rank}")
            raw[i] = attn.weights[item.rank - 1]
    elif isinstance(attn, MapUniform):
        raw = np.array([1.0 if item.pinned else 0.0 for item in display.items])
    elif isinstance(attn, MapTiered):
        raw = np.array([attn.weight(item.tier) for item in display.items])
    elif isinstance(attn, MapContinuous):
        center = attn.center if attn.center is not None else display.center
        if center is None:
            raise ValueError("MapContinuous attention needs a map center")
        x0, y0 = center
        dx = np.array([item.listing.x - x0 for item in display.items])
        dy = np.array([item.listing.y - y0 for item in display.items])
        pinned = np.array([item.pinned for item in display.items])
        inside = attn.surface.contains(dx, dy)
        raw = np.where(pinned, relative_attention(attn.surface, dx, dy), 0.0)
        outside = int(np.count_nonzero(pinned & ~inside))
    else:
        raise TypeError(f"unsupported attention model {type(attn).__name__}")
    total = raw.sum()
    normalized = raw / total if total > 0 else np.zeros_like(raw)
    return AttentionWeights(raw, normalized, outside)


def expected_booking(display: DisplaySet, attn: AttentionModel) -> float:
    """Probability that a query served with ``display`` ends in a booking.

    The attention-weighted sum of booking probabilities with weights
    normalized over the displayed items; with uniform map attention this is
    the plain average of the pins' probabilities.
    """
    weights = attention_weights(display, attn)
    return float(np.dot(weights.normalized, display.probabilities()))


def ndcg(ranked: Union[RankedResult, Sequence[str]], relevance: Mapping[str, float], k: int) -> float:
    """NDCG@k with linear gains and ``1/log2(rank + 1)`` discounts.

    ``ranked`` is a :class:`RankedResult` or any display order of ids.  A
    query whose ideal DCG is zero scores 1.0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = ranked.ids if isinstance(ranked, RankedResult) else list(ranked)
    if not ids:
        raise EmptyInputError("cannot score an empty ranking")
    try:
        gains = np.array([float(relevance[i]) for i in ids])
    except KeyError as exc:
        raise ValueError(f"no relevance for id {exc.args[0]!r}") from None
    if np.any(gains < 0) or np.any(~np.isfinite(gains)):
        raise DomainError("relevance must be finite and non-negative")
    k = min(k, len(gains))
    discounts = 1.0 / np.log2(np.arange(2, k + 2))
    dcg = float(np.dot(gains[:k], discounts))
    ideal = float(np.dot(np.sort(gains)[::-1][:k], discounts))
    if ideal == 0.0:
        return 1.0
    return min(1.0, dcg / ideal)
