"""Synthetic inventories, simulated users and the experiment harness.

Booking follows a single-examination model: a session attends to one
displayed item drawn from the normalized attention distribution and books it
with that listing's probability, so the booking rate of a display is exactly
:func:`maprank.core.expected_booking`.  Clicks are drawn independently per
item and only feed click-through-rate curves and discovery counters.

Sessions run in fixed-size blocks, each seeded from ``(seed, arm, block)``,
so results do not depend on how blocks are scheduled across threads.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .attention import (
    VIEWPORT_HALF_WIDTH,
    AttentionSurface,
    ClickLog,
    synthetic_radial_surface,
)
from .core import (
    MINI,
    NONE,
    REGULAR,
    AttentionModel,
    DisplayItem,
    DisplaySet,
    Listing,
    ListPositional,
    MapContinuous,
    MapTiered,
    MapUniform,
    attention_weights,
    expected_booking,
    sort_listings,
)
from .placement import PlacementConfig, centroid, objective, optimize_center
from .selection import FilterConfig, assign_tiers, bookability_filter, parse_anchor

BLOCK_SIZE = 8192
EXPERIMENTS = ("shuffle_map", "shuffle_list", "alpha_sweep", "urgency_3arm", "minipin", "center_opt")
Z95 = 1.959963984540054


def _sig9(value: float) -> float:
    return float(f"{value:.9g}")


# --- inventory --------------------------------------------------------------


@dataclass(frozen=True)
class InventoryConfig:
    n_listings: int = 200
    spatial: str = "uniform"
    n_clusters: int = 3
    cluster_spread: float = 0.1
    base_logit: float = math.log(0.3)
    distance_coeff: float = 0.0
    noise_sd: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_listings < 0:
            raise ValueError("n_listings must be >= 0")
        if self.spatial not in ("uniform", "clustered"):
            raise ValueError(f"unknown spatial distribution {self.spatial!r}")
        if self.base_logit > 0:
            raise ValueError("base_logit must be <= 0")
        if self.distance_coeff < 0 or self.noise_sd < 0:
            raise ValueError("distance_coeff and noise_sd must be >= 0")
        if self.spatial == "clustered" and (self.n_clusters < 1 or self.cluster_spread <= 0):
            raise ValueError("clustered inventories need n_clusters >= 1 and cluster_spread > 0")


def generate_inventory(cfg: InventoryConfig) -> list[Listing]:
    """Random listings in the unit viewport, sorted by id.

    ``logit = min(0, base - distance_coeff * distance + noise)``.  Values are
    kept to 9 significant digits so written inventories round-trip exactly.
    """
    n = cfg.n_listings
    rng = np.random.default_rng(cfg.seed)
    hw = VIEWPORT_HALF_WIDTH
    if cfg.spatial == "uniform":
        xy = rng.uniform(-hw, hw, size=(n, 2))
    else:
        centers = rng.uniform(-0.7 * hw, 0.7 * hw, size=(cfg.n_clusters, 2))
        members = rng.integers(0, cfg.n_clusters, size=n)
        xy = np.clip(centers[members] + rng.normal(0.0, cfg.cluster_spread, size=(n, 2)), -hw, hw)
    dist = np.hypot(xy[:, 0], xy[:, 1])
    logits = np.minimum(0.0, cfg.base_logit - cfg.distance_coeff * dist + cfg.noise_sd * rng.standard_normal(n))
    # better-ranked listings skew cheaper and better reviewed
    lift = logits - cfg.base_logit
    prices = 150.0 * np.exp(-0.2 * lift + 0.25 * rng.standard_normal(n))
    reviews = rng.poisson(20.0 * np.exp(np.clip(0.3 * lift, -5, 5)))
    ratings = np.clip(4.5 + 0.1 * lift + 0.2 * rng.standard_normal(n), 0.0, 5.0)
    width = max(len(str(max(n - 1, 0))), 5)
    return [
        Listing(
            id=f"L{i:0{width}d}",
            x=_sig9(xy[i, 0]),
            y=_sig9(xy[i, 1]),
            logit=min(0.0, _sig9(logits[i])),
            price=_sig9(prices[i]),
            reviews=int(reviews[i]),
            rating=_sig9(ratings[i]),
        )
        for i in range(n)
    ]


# --- users and sessions -----------------------------------------------------


@dataclass(frozen=True)
class UserModel:
    """Simulated searcher.

    ``attention`` drives booking; ``click_attention`` (defaults to
    ``attention``) drives clicks, which are drawn independently per item with
    probability ``click_propensity * attention * n_displayed`` capped at 1.
    """

    attention: AttentionModel
    click_propensity: float = 0.1
    examination_order: Optional[str] = None
    click_attention: Optional[AttentionModel] = None

    def __post_init__(self):
        if not 0.0 < self.click_propensity <= 1.0:
            raise ValueError("click_propensity must be in (0, 1]")
        if self.examination_order is None:
            rule = "by_rank" if isinstance(self.attention, ListPositional) else "by_attention_desc"
            object.__setattr__(self, "examination_order", rule)
        if self.examination_order not in ("by_rank", "by_attention_desc"):
            raise ValueError(f"unknown examination order {self.examination_order!r}")


@dataclass(frozen=True)
class SessionOutcome:
    displayed: tuple[str, ...]
    clicked: tuple[str, ...]
    booked: Optional[str]
    impressions_before_booking: int
    clicks_before_booking: int


class _Arm:
    """A base display plus the rule that turns it into per-session displays.

    ``fixed`` shows the base display as is, ``shuffle`` permutes which
    listing occupies which slot, ``subset`` shows a uniformly random
    ``subset_size`` listings.
    """

    def __init__(self, name: str, display: DisplaySet, mode: str = "fixed", subset_size: Optional[int] = None):
        self.name = name
        self.display = display
        self.mode = mode
        self.size = len(display) if subset_size is None else subset_size
        listings = display.listings
        self.n = len(listings)
        self.probs = display.probabilities()
        self.id_rank = np.argsort(np.argsort([l.id for l in listings], kind="stable"), kind="stable")
        order = sorted(range(self.n), key=lambda i: (-listings[i].logit, listings[i].id))
        self.search_rank = np.empty(self.n, np.int64)
        self.search_rank[order] = np.arange(1, self.n + 1)
        cx, cy = display.center if display.center is not None else (0.0, 0.0)
        self.dist = np.array([math.hypot(l.x - cx, l.y - cy) for l in listings])
        self.tier_code = np.array([{REGULAR: 0, MINI: 1, NONE: 2}[item.tier] for item in display.items])
        self.ranked = all(item.rank is not None for item in display.items)
        self.pinned = any(item.pinned for item in display.items)
        self.price = np.array([np.nan if l.price is None else l.price for l in listings])
        self.reviews = np.array([np.nan if l.reviews is None else l.reviews for l in listings], dtype=float)
        self.rating = np.array([np.nan if l.rating is None else l.rating for l in listings])

    def sample(self, rng, n_sessions: int) -> np.ndarray:
        base = np.arange(self.n)
        if self.mode == "fixed":
            return np.broadcast_to(base, (n_sessions, self.n))
        keys = rng.random((n_sessions, self.n))
        perm = np.argsort(keys, axis=1, kind="stable")
        if self.mode == "shuffle":
            return perm
        return np.sort(perm[:, : self.size], axis=1)

    def raw_attention(self, attn: AttentionModel):
        """``("position", w)`` for rank-based models, ``("item", r)`` otherwise."""
        if isinstance(attn, ListPositional):
            return "position", attention_weights(self.display, attn).raw
        weights = attention_weights(self.display, attn)
        return "item", weights.raw

    def outside_support(self, attn: AttentionModel) -> int:
        return attention_weights(self.display, attn).outside_support


def _gather(kind_values, idx):
    kind, values = kind_values
    if kind == "position":
        return np.broadcast_to(values[: idx.shape[1]], idx.shape)
    return values[idx]


def _normalize_rows(raw):
    total = raw.sum(axis=1, keepdims=True)
    return np.divide(raw, total, out=np.zeros_like(raw, dtype=float), where=total > 0)


def _simulate_block(arm: _Arm, user: UserModel, rng, n_sessions: int):
    idx = arm.sample(rng, n_sessions)
    S, m = idx.shape
    rows = np.arange(S)
    p = arm.probs[idx]
    book_raw = _gather(arm.raw_attention(user.attention), idx)
    a = _normalize_rows(book_raw)
    click_model = user.click_attention if user.click_attention is not None else user.attention
    click_a = a if user.click_attention is None else _normalize_rows(_gather(arm.raw_attention(click_model), idx))

    cum = np.cumsum(a, axis=1)
    attended = cum[:, -1] > 0
    threshold = rng.random(S) * cum[:, -1]
    choice = np.minimum((cum <= threshold[:, None]).sum(axis=1), m - 1)
    booked = attended & (rng.random(S) < p[rows, choice])
    clicks = rng.random((S, m)) < np.minimum(1.0, user.click_propensity * click_a * m)

    if user.examination_order == "by_rank":
        pos = np.broadcast_to(np.arange(m), (S, m))
    else:
        order = np.lexsort((arm.id_rank[idx], -book_raw), axis=1)
        pos = np.empty((S, m), np.int64)
        np.put_along_axis(pos, order, np.broadcast_to(np.arange(m), (S, m)), axis=1)
    booked_pos = pos[rows, choice]
    impressions_before = np.where(booked, booked_pos, 0)
    clicks_before = np.where(booked, (clicks & (pos < booked_pos[:, None])).sum(axis=1), 0)
    return idx, p, choice, booked, clicks, impressions_before, clicks_before


def _block_rng(seed: int, arm_index: int, block: int):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(arm_index, block)))


def simulate_session(display: DisplaySet, user: UserModel, seed) -> SessionOutcome:
    """Simulate one searcher facing ``display``.

    ``seed`` may be an int or a :class:`numpy.random.Generator`.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    arm = _Arm("session", display)
    idx, _, choice, booked, clicks, imp_before, clk_before = _simulate_block(arm, user, rng, 1)
    ids = [l.id for l in display.listings]
    if user.examination_order == "by_rank":
        exam = list(range(len(ids)))
    else:
        raw = _gather(arm.raw_attention(user.attention), idx)[0]
        exam = sorted(range(len(ids)), key=lambda i: (-raw[i], ids[i]))
    return SessionOutcome(
        displayed=tuple(ids),
        clicked=tuple(ids[i] for i in exam if clicks[0, i]),
        booked=ids[int(choice[0])] if booked[0] else None,
        impressions_before_booking=int(imp_before[0]),
        clicks_before_booking=int(clk_before[0]),
    )


# --- reports ----------------------------------------------------------------


@dataclass
class ArmReport:
    arm: str
    sessions: int
    bookings: int
    booking_rate: float
    ci_low: float
    ci_high: float
    analytic_expected: float
    ndcg: Optional[float]
    pins_mean: float
    avg_pin_prob: float
    impressions_to_discovery: Optional[float]
    clicks_to_discovery: Optional[float]
    price_mean: Optional[float] = None
    reviews_mean: Optional[float] = None
    rating_mean: Optional[float] = None
    clicks_p95: Optional[int] = None
    outside_support: int = 0
    analytic_objective: Optional[float] = None
    center: Optional[tuple[float, float]] = None
    rank_clicks: list[int] = field(default_factory=list)
    rank_impressions: list[int] = field(default_factory=list)
    distance_rank_clicks: list[int] = field(default_factory=list)
    distance_rank_impressions: list[int] = field(default_factory=list)
    tier_clicks: dict[str, int] = field(default_factory=dict)
    tier_impressions: dict[str, int] = field(default_factory=dict)
    distinct_clicks_hist: list[int] = field(default_factory=list)

    @property
    def standard_error(self) -> float:
        p = self.booking_rate
        return math.sqrt(p * (1.0 - p) / self.sessions)

    def rank_ctr(self, key: str = "rank") -> list[tuple[int, float]]:
        """Click-through rate per rank (1-based), ranks without impressions skipped."""
        clicks, imps = (
            (self.rank_clicks, self.rank_impressions)
            if key in ("rank", "search_rank")
            else (self.distance_rank_clicks, self.distance_rank_impressions)
        )
        return [(r + 1, c / i) for r, (c, i) in enumerate(zip(clicks, imps)) if i > 0]


CSV_COLUMNS = (
    "arm",
    "sessions",
    "bookings",
    "booking_rate",
    "ci_low",
    "ci_high",
    "analytic_expected",
    "ndcg",
    "pins_mean",
    "avg_pin_prob",
    "impressions_to_discovery",
    "clicks_to_discovery",
)


@dataclass
class ExperimentReport:
    experiment: str
    seed: int
    sessions: int
    config: dict
    arms: list[ArmReport]

    def arm(self, name: str) -> ArmReport:
        for arm in self.arms:
            if arm.arm == name:
                return arm
        raise KeyError(name)

    def rows(self) -> list[dict]:
        return [{c: getattr(arm, c) for c in CSV_COLUMNS} for arm in self.arms]

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "sessions": self.sessions,
            "config": self.config,
            "arms": [asdict(arm) for arm in self.arms],
        }


def _wald_ci(bookings: int, n: int) -> tuple[float, float]:
    p = bookings / n
    half = Z95 * math.sqrt(p * (1.0 - p) / n)
    return max(0.0, p - half), min(1.0, p + half)


def _analytic(arm: _Arm, user: UserModel) -> float:
    """Exact expected booking rate of the arm's randomized display policy."""
    if arm.mode == "fixed":
        return expected_booking(arm.display, user.attention)
    kind, raw = arm.raw_attention(user.attention)
    p = arm.probs
    if arm.mode == "shuffle":
        # the normalizer is permutation invariant; each listing visits each slot w.p. 1/n
        total = raw.sum()
        if total == 0:
            return 0.0
        if kind == "position":
            return float(p.mean() * raw.sum() / total)
        return float(np.dot(raw / total, p))
    subsets = np.array(list(itertools.combinations(range(arm.n), arm.size)))
    sub_raw = _gather((kind, raw), subsets)
    return float(np.mean(np.sum(_normalize_rows(sub_raw) * p[subsets], axis=1)))


def _run_arm(arm: _Arm, arm_index: int, user: UserModel, sessions: int, seed: int, n_jobs: int) -> ArmReport:
    n_blocks = math.ceil(sessions / BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, sessions - b * BLOCK_SIZE) for b in range(n_blocks)]
    discounts = 1.0 / np.log2(np.arange(2, arm.size + 2))

    def block(b):
        rng = _block_rng(seed, arm_index, b)
        idx, p, _, booked, clicks, imp_before, clk_before = _simulate_block(arm, user, rng, sizes[b])
        S, m = idx.shape
        stats = {
            "bookings": int(booked.sum()),
            "imp_before": int(imp_before.sum()),
            "clk_before": int(clk_before.sum()),
            "pin_prob": float(p.mean(axis=1).sum()),
            "pins": S * m,
        }
        if arm.ranked:
            dcg = p @ discounts[:m]
            ideal = -np.sort(-p, axis=1) @ discounts[:m]
            stats["ndcg"] = float((dcg / ideal).sum())
        for name in ("price", "reviews", "rating"):
            vals = getattr(arm, name)[idx]
            stats[name] = (float(np.nansum(vals)), int(np.count_nonzero(~np.isnan(vals))))
        search_rank = arm.search_rank[idx]
        stats["rank_clicks"] = np.bincount(search_rank[clicks], minlength=arm.n + 1)[1:]
        stats["rank_imps"] = np.bincount(search_rank.ravel(), minlength=arm.n + 1)[1:]
        order = np.lexsort((arm.id_rank[idx], arm.dist[idx]), axis=1)
        drank = np.empty((S, m), np.int64)
        np.put_along_axis(drank, order, np.broadcast_to(np.arange(m), (S, m)), axis=1)
        stats["drank_clicks"] = np.bincount(drank[clicks], minlength=m)
        stats["drank_imps"] = np.full(m, S, np.int64)
        tiers = arm.tier_code[idx]
        stats["tier_clicks"] = np.bincount(tiers[clicks], minlength=3)
        stats["tier_imps"] = np.bincount(tiers.ravel(), minlength=3)
        stats["click_hist"] = np.bincount(clicks.sum(axis=1), minlength=arm.n + 1)
        return stats

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(block, range(n_blocks)))
    else:
        results = [block(b) for b in range(n_blocks)]

    def total(key):
        out = results[0][key]
        for r in results[1:]:
            out = out + r[key]
        return out

    bookings = total("bookings")
    ci_low, ci_high = _wald_ci(bookings, sessions)

    def mean_of(name):
        s = sum(r[name][0] for r in results)
        c = sum(r[name][1] for r in results)
        return s / c if c else None

    hist = total("click_hist")
    clickers = hist[1:].sum()
    p95 = None
    if clickers:
        covered = np.cumsum(hist[1:]) / clickers
        p95 = int(np.argmax(covered >= 0.95 - 1e-12) + 1)
    tiers = ("regular", "mini", "none")
    return ArmReport(
        arm=arm.name,
        sessions=sessions,
        bookings=bookings,
        booking_rate=bookings / sessions,
        ci_low=ci_low,
        ci_high=ci_high,
        analytic_expected=_analytic(arm, user),
        ndcg=total("ndcg") / sessions if arm.ranked else None,
        pins_mean=total("pins") / sessions,
        avg_pin_prob=total("pin_prob") / sessions,
        impressions_to_discovery=total("imp_before") / bookings if bookings else None,
        clicks_to_discovery=total("clk_before") / bookings if bookings else None,
        price_mean=mean_of("price"),
        reviews_mean=mean_of("reviews"),
        rating_mean=mean_of("rating"),
        clicks_p95=p95,
        outside_support=arm.outside_support(user.attention),
        center=arm.display.center,
        rank_clicks=total("rank_clicks").tolist(),
        rank_impressions=total("rank_imps").tolist(),
        distance_rank_clicks=total("drank_clicks").tolist(),
        distance_rank_impressions=total("drank_imps").tolist(),
        tier_clicks={t: int(v) for t, v in zip(tiers, total("tier_clicks"))},
        tier_impressions={t: int(v) for t, v in zip(tiers, total("tier_imps"))},
        distinct_clicks_hist=hist.tolist(),
    )


def default_surface() -> AttentionSurface:
    return synthetic_radial_surface(peak_ctr=0.3, decay_scale=0.2)


def default_user(name: str, max_pins: int = 18, click_propensity: float = 0.1, surface=None) -> UserModel:
    if name == "shuffle_list":
        return UserModel(ListPositional.harmonic(max_pins), click_propensity)
    if name == "minipin":
        return UserModel(MapTiered(), click_propensity)
    if name == "center_opt":
        return UserModel(MapContinuous(surface if surface is not None else default_surface()), click_propensity)
    if name in EXPERIMENTS:
        return UserModel(MapUniform(), click_propensity)
    raise ValueError(f"unknown experiment {name!r}")


# inventory coordinates are relative to the viewport center
VIEWPORT_CENTER = (0.0, 0.0)


def _centered(display: DisplaySet) -> DisplaySet:
    return DisplaySet(display.items, VIEWPORT_CENTER)


def _ranked_pins(listings: Sequence[Listing], center=VIEWPORT_CENTER) -> DisplaySet:
    return DisplaySet(tuple(DisplayItem(l, rank=i + 1, tier=REGULAR) for i, l in enumerate(listings)), center)


def run_experiment(
    name: str,
    inventory: Sequence[Listing],
    user: Optional[UserModel] = None,
    sessions: int = 10_000,
    seed: int = 0,
    *,
    max_pins: int = 18,
    alpha: float = 1.0,
    alphas: Sequence[float] = (1.0, 2.0, 4.0, 8.0),
    anchor="topmost",
    click_propensity: float = 0.1,
    surface: Optional[AttentionSurface] = None,
    epsilon: float = 0.02,
    n_jobs: int = 1,
) -> ExperimentReport:
    """Simulate one of the map-ranking experiments.

    Arms by experiment:

    * ``shuffle_map`` / ``shuffle_list``: top ``max_pins`` in ranked order
      vs. the same listings reshuffled per session.
    * ``alpha_sweep``: no filtering vs. the bookability filter at each alpha.
    * ``urgency_3arm``: ``max_pins`` pins vs. the filtered subset (T1) vs. a
      random subset of the same size drawn per session (T2).
    * ``minipin``: all regular pins vs. regular/mini tiers from the filter.
    * ``center_opt``: centroid map center vs. the optimized center.

    Without ``user`` each experiment uses its natural user model.
    """
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    if sessions < 1:
        raise ValueError("sessions must be >= 1")
    inventory = list(inventory)
    if not inventory:
        raise ValueError("inventory is empty")
    anchor = parse_anchor(anchor)
    if surface is None and user is not None and isinstance(user.attention, MapContinuous):
        surface = user.attention.surface
    surface = surface if surface is not None else default_surface()
    if user is None:
        user = default_user(name, max_pins, click_propensity, surface)
    top = sort_listings(inventory)[:max_pins]
    total_ranked = len(inventory)
    objectives = {}

    if name in ("shuffle_map", "shuffle_list"):
        base = _ranked_pins(top)
        arms = [_Arm("control", base), _Arm("treatment", base, mode="shuffle")]
    elif name == "alpha_sweep":
        arms = [_Arm("control", DisplaySet.as_pins(top, center=VIEWPORT_CENTER))]
        for a in alphas:
            pins = bookability_filter(inventory, FilterConfig(a, anchor, max_pins), total_ranked)
            arms.append(_Arm(f"alpha={a:g}", _centered(pins)))
    elif name == "urgency_3arm":
        t1 = _centered(bookability_filter(inventory, FilterConfig(alpha, anchor, max_pins), total_ranked))
        base = DisplaySet.as_pins(top, center=VIEWPORT_CENTER)
        arms = [_Arm("control", base), _Arm("T1", t1), _Arm("T2", base, mode="subset", subset_size=len(t1))]
    elif name == "minipin":
        tiered = _centered(assign_tiers(top, FilterConfig(alpha, anchor, len(top)), total_ranked))
        arms = [_Arm("control", _ranked_pins(top)), _Arm("treatment", tiered)]
    else:
        control_center = centroid(top)
        placed = optimize_center(inventory, PlacementConfig(max_pins, epsilon, surface), n_jobs=n_jobs)
        arms = [
            _Arm("control", DisplaySet.as_pins(top, center=control_center)),
            _Arm("treatment", DisplaySet.as_pins(placed.pins, center=placed.center)),
        ]
        objectives = {
            "control": objective(top, control_center, surface),
            "treatment": placed.objective,
        }

    reports = []
    for i, arm in enumerate(arms):
        report = _run_arm(arm, i, user, sessions, seed, n_jobs)
        report.analytic_objective = objectives.get(arm.name)
        reports.append(report)
    config = {
        "experiment": name,
        "sessions": sessions,
        "seed": seed,
        "max_pins": max_pins,
        "alpha": alpha,
        "alphas": [float(a) for a in alphas] if name == "alpha_sweep" else None,
        "anchor": type(anchor).__name__,
        "epsilon": epsilon if name == "center_opt" else None,
        "inventory_size": total_ranked,
        "user": describe_user(user),
        "block_size": BLOCK_SIZE,
    }
    return ExperimentReport(name, seed, sessions, config, reports)


def describe_attention(attn: Optional[AttentionModel]) -> Optional[dict]:
    if attn is None:
        return None
    if isinstance(attn, ListPositional):
        return {"model": "ListPositional", "weights": list(attn.weights)}
    if isinstance(attn, MapTiered):
        return {"model": "MapTiered", "regular": attn.regular, "mini": attn.mini, "hidden": attn.hidden}
    if isinstance(attn, MapContinuous):
        return {"model": "MapContinuous", "center": attn.center, "surface": attn.surface.to_dict()}
    return {"model": type(attn).__name__}


def describe_user(user: UserModel) -> dict:
    return {
        "attention": describe_attention(user.attention),
        "click_attention": describe_attention(user.click_attention),
        "click_propensity": user.click_propensity,
        "examination_order": user.examination_order,
    }


# --- click logs -------------------------------------------------------------


def simulate_click_log(display: DisplaySet, user: UserModel, sessions: int, seed: int, n_jobs: int = 1) -> ClickLog:
    """One record per displayed pin per session, offsets from the map center.

    Pins outside the viewport are not visible and are left out.
    """
    arm = _Arm("log", display)
    center = display.center if display.center is not None else (0.0, 0.0)
    dx_all = np.array([l.x - center[0] for l in display.listings])
    dy_all = np.array([l.y - center[1] for l in display.listings])
    n_blocks = math.ceil(sessions / BLOCK_SIZE)

    visible = (np.abs(dx_all) <= VIEWPORT_HALF_WIDTH) & (np.abs(dy_all) <= VIEWPORT_HALF_WIDTH)
    tier_names = np.array(["regular", "mini", "regular"])

    def block(b):
        rng = _block_rng(seed, 0, b)
        size = min(BLOCK_SIZE, sessions - b * BLOCK_SIZE)
        idx, _, _, _, clicks, _, _ = _simulate_block(arm, user, rng, size)
        S, m = idx.shape
        order = np.lexsort((arm.id_rank[idx], arm.dist[idx]), axis=1)
        drank = np.empty((S, m), np.int64)
        np.put_along_axis(drank, order, np.broadcast_to(np.arange(1, m + 1), (S, m)), axis=1)
        keep = visible[idx].ravel()
        session_ids = np.repeat(np.arange(b * BLOCK_SIZE, b * BLOCK_SIZE + S), m)[keep]
        return ClickLog(
            query_id=np.char.add("q", session_ids.astype(str)),
            dx=dx_all[idx].ravel()[keep],
            dy=dy_all[idx].ravel()[keep],
            clicked=clicks.ravel()[keep],
            tier=tier_names[arm.tier_code[idx]].ravel()[keep],
            rank=arm.search_rank[idx].ravel()[keep],
            distance_rank=drank.ravel()[keep],
        )

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(block, range(n_blocks)))
    else:
        parts = [block(b) for b in range(n_blocks)]
    return ClickLog.concatenate(parts)


def surface_click_log(
    surface: AttentionSurface,
    n_impressions: int,
    seed: int,
    tier: str = "regular",
    pins_per_query: int = 18,
) -> ClickLog:
    """Pins dropped uniformly over the viewport, clicked with the surface's ctr.

    Click probability is the absolute ctr of the pin's nearest cell.
    """
    rng = np.random.default_rng(seed)
    hw = VIEWPORT_HALF_WIDTH
    dx = rng.uniform(-hw, hw, n_impressions)
    dy = rng.uniform(-hw, hw, n_impressions)
    clicked = rng.random(n_impressions) < surface.ctr_at(dx, dy)
    query = np.arange(n_impressions) // pins_per_query
    rank = np.arange(n_impressions) % pins_per_query + 1
    # queries are contiguous runs of pins_per_query impressions
    order = np.lexsort((np.arange(n_impressions), np.hypot(dx, dy), query))
    distance_rank = np.empty(n_impressions, np.int64)
    distance_rank[order] = np.arange(n_impressions) - query[order] * pins_per_query + 1
    return ClickLog(
        query_id=np.char.add("q", query.astype(str)),
        dx=dx,
        dy=dy,
        clicked=clicked,
        tier=np.full(n_impressions, tier),
        rank=rank,
        distance_rank=distance_rank,
    )
