"""Input validation helpers shared across the package."""

import math
from collections.abc import Iterable, Sequence

import numpy as np


class MapRankError(Exception):
    """Base class for errors raised by maprank."""


class DomainError(MapRankError, ValueError):
    """A value lies outside the domain an operation is defined on."""


class EmptyInputError(MapRankError, ValueError):
    pass


class SurfaceCoverageError(MapRankError, ValueError):
    """The center cell of an attention surface cannot be estimated."""


def check_logit(logit: float) -> float:
    logit = float(logit)
    if math.isnan(logit) or logit > 0.0:
        raise DomainError(f"logit must be <= 0 (log booking probability), got {logit!r}")
    return logit


def check_positive(value, name: str, allow_inf: bool = False) -> float:
    value = float(value)
    if math.isnan(value) or value <= 0.0 or (math.isinf(value) and not allow_inf):
        raise ValueError(f"{name} must be > 0, got {value!r}")
    return value


def check_odd_resolution(resolution) -> int:
    if int(resolution) != resolution or resolution < 1 or resolution % 2 == 0:
        raise ValueError(f"resolution must be a positive odd integer, got {resolution!r}")
    return int(resolution)


def check_listings(listings: Iterable, allow_empty: bool = False) -> list:
    """Materialize ``listings`` and check ids are unique.

    Returns a list so callers can iterate more than once.
    """
    listings = list(listings)
    if not listings and not allow_empty:
        raise EmptyInputError("at least one listing is required")
    seen = set()
    for listing in listings:
        if listing.id in seen:
            raise ValueError(f"duplicate listing id {listing.id!r}")
        seen.add(listing.id)
    return listings


def check_non_increasing(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise EmptyInputError(f"{name} must be a non-empty 1-D sequence")
    if np.any(np.diff(arr) > 0):
        raise ValueError(f"{name} must be non-increasing")
    return arr
