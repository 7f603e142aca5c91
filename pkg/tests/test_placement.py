import math
import time

import numpy as np
import pytest
from conftest import make_listings, random_listings
from hypothesis import given, settings
from hypothesis import strategies as st

from maprank import MapCenterOptimizer, PlacementConfig, objective, optimize_center, synthetic_radial_surface
from maprank.placement import candidate_axis, centroid

SURFACE = synthetic_radial_surface(0.3, 0.2)


def oracle_center(listings, n_pins, epsilon, surface, seed_with_centroid=True):
    """Plain scalar scan of the candidate set, first strict maximum wins."""
    pins = sorted(listings, key=lambda l: (-l.logit, l.id))[:n_pins]
    x_lo, x_hi = min(p.x for p in pins), max(p.x for p in pins)
    y_lo, y_hi = min(p.y for p in pins), max(p.y for p in pins)

    def axis(lo, hi):
        if hi <= lo:
            return [lo]
        out, k = [], 0
        while lo + epsilon * k < hi:
            out.append(lo + epsilon * k)
            k += 1
        return out

    candidates = [(x, y) for x in axis(x_lo, x_hi) for y in axis(y_lo, y_hi)]
    if seed_with_centroid:
        candidates.insert(0, (sum(p.x for p in pins) / len(pins), sum(p.y for p in pins) / len(pins)))
    best, where = -math.inf, None
    for c in candidates:
        value = objective(pins, c, surface)
        if value > best:
            best, where = value, c
    return where, best, len(candidates)


def test_single_listing_centers_on_it():
    listing = make_listings([-1.0], xs=[0.3], ys=[0.4])
    result = optimize_center(listing, PlacementConfig(18, 0.02, SURFACE))
    assert result.center == pytest.approx((0.3, 0.4))
    assert result.objective == pytest.approx(math.exp(-1.0))
    pure = optimize_center(listing, PlacementConfig(18, 0.02, SURFACE), seed_with_centroid=False)
    assert pure.center == (0.3, 0.4) and pure.n_candidates == 1


def test_symmetric_pair_centers_between():
    listings = make_listings([-1.0, -1.0], xs=[-0.1, 0.1], ys=[0.0, 0.0])
    for seeded in (True, False):
        result = optimize_center(listings, PlacementConfig(18, 0.01, SURFACE), seed_with_centroid=seeded)
        assert abs(result.center[0]) <= 0.01 + 1e-12
        assert result.center[1] == 0.0


def test_dominant_listing_attracts_center():
    listings = make_listings([-0.05, -6.0, -6.0], xs=[0.0, 0.4, 0.4], ys=[0.0, 0.4, -0.4])
    result = optimize_center(listings, PlacementConfig(18, 0.01, SURFACE), seed_with_centroid=False)
    assert math.hypot(*result.center) <= 0.01 * math.sqrt(2) + 1e-12


def test_objective_examples():
    pins = make_listings([-0.5, -1.0, -2.0], xs=[0.2, 0.2, 0.2], ys=[0.1, 0.1, 0.1])
    assert objective(pins, (0.2, 0.1), SURFACE) == pytest.approx(sum(math.exp(l) for l in (-0.5, -1.0, -2.0)))
    assert objective(pins, (-0.5, -0.5), SURFACE) == 0.0

    pins = make_listings([-0.5, -1.0, -2.0], xs=[0.0, 0.1, -0.3], ys=[0.0, -0.2, 0.45])
    manual = 0.0
    for x, y, lg in [(0.0, 0.0, -0.5), (0.1, -0.2, -1.0), (-0.3, 0.45, -2.0)]:
        ix, iy = int(math.floor(x * 21 + 0.5)) + 10, int(math.floor(y * 21 + 0.5)) + 10
        manual += SURFACE.ctr[ix, iy] / SURFACE.center_ctr * math.exp(lg)
    assert objective(pins, (0.0, 0.0), SURFACE) == pytest.approx(manual, rel=1e-12)
    with pytest.raises(ValueError):
        objective([], (0.0, 0.0), SURFACE)


def test_candidate_axis():
    np.testing.assert_allclose(candidate_axis(0.0, 0.1, 0.025), [0.0, 0.025, 0.05, 0.075])
    np.testing.assert_allclose(candidate_axis(0.0, 0.1, 0.03), [0.0, 0.03, 0.06, 0.09])
    np.testing.assert_array_equal(candidate_axis(0.2, 0.2, 0.01), [0.2])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 25), st.sampled_from([0.031, 0.05, 0.07]), st.booleans())
def test_matches_scalar_oracle(seed, n, epsilon, seeded):
    rng = np.random.default_rng(seed)
    listings = random_listings(rng, n, spread=1.5)
    result = optimize_center(listings, PlacementConfig(18, epsilon, SURFACE), seed_with_centroid=seeded)
    where, best, count = oracle_center(listings, 18, epsilon, SURFACE, seed_with_centroid=seeded)
    assert result.center == pytest.approx(where, abs=1e-12)
    assert result.objective == best
    assert result.n_candidates == count


def test_seeded_never_worse_than_centroid(rng):
    for _ in range(200):
        listings = random_listings(rng, int(rng.integers(1, 30)), spread=1.5)
        result = optimize_center(listings, PlacementConfig(18, 0.02, SURFACE))
        assert result.objective >= objective(result.pins, centroid(result.pins), SURFACE)


def test_pins_are_top_by_logit(rng):
    listings = random_listings(rng, 40, spread=1.5)
    result = optimize_center(listings, PlacementConfig(5, 0.05, SURFACE))
    assert [p.id for p in result.pins] == [l.id for l in sorted(listings, key=lambda l: (-l.logit, l.id))[:5]]


def test_thread_count_does_not_change_result(rng, monkeypatch):
    import maprank.placement as placement

    listings = random_listings(rng, 18, spread=1.5)
    cfg = PlacementConfig(18, 0.005, SURFACE)
    base = optimize_center(listings, cfg)
    for n_jobs in (2, 4, 7):
        assert optimize_center(listings, cfg, n_jobs=n_jobs) == base
    monkeypatch.setattr(placement, "_CHUNK_CELLS", 64)
    assert optimize_center(listings, cfg, n_jobs=3) == base


def test_degenerate_box_on_one_axis():
    listings = make_listings([-1.0, -1.2], xs=[-0.1, 0.1], ys=[0.2, 0.2])
    result = optimize_center(listings, PlacementConfig(18, 0.05, SURFACE), seed_with_centroid=False)
    assert result.center[1] == 0.2 and result.n_candidates == 4


def test_config_validation():
    with pytest.raises(ValueError):
        PlacementConfig(0, 0.1, SURFACE)
    with pytest.raises(ValueError):
        PlacementConfig(5, 0.0, SURFACE)
    with pytest.raises(ValueError):
        optimize_center([], PlacementConfig(5, 0.1, SURFACE))


def test_estimator(rng):
    listings = random_listings(rng, 20, spread=1.0)
    est = MapCenterOptimizer(surface=SURFACE, n_pins=10, epsilon=0.05).fit(listings)
    direct = optimize_center(listings, PlacementConfig(10, 0.05, SURFACE))
    assert est.center_ == direct.center and est.objective_ == direct.objective
    display = est.transform()
    assert display.center == direct.center and len(display) == 10
    assert est.score(listings) == direct.objective
    with pytest.raises(ValueError):
        MapCenterOptimizer().fit(listings)


def _best_time(fn, repeats=7):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def test_cost_scales_with_grid_and_pin_count(rng):
    listings = make_listings(
        np.r_[0.0, 0.0, -rng.uniform(0.01, 1, 18)], xs=np.r_[0.0, 1.0, rng.uniform(0, 1, 18)], ys=np.r_[0.0, 1.0, rng.uniform(0, 1, 18)]
    )
    coarse = _best_time(lambda: optimize_center(listings, PlacementConfig(20, 1 / 300, SURFACE)))
    fine = _best_time(lambda: optimize_center(listings, PlacementConfig(20, 1 / 600, SURFACE)))
    # halving epsilon quadruples the candidate count
    assert 2.0 <= fine / coarse <= 8.0

    # the two corner pins rank first, so both runs scan the same box
    few = _best_time(lambda: optimize_center(listings, PlacementConfig(10, 1 / 300, SURFACE)))
    assert 1.0 <= coarse / few <= 4.0
