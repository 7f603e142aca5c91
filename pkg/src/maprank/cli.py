"""Command-line entry point: ``maprank <subcommand> [--flags]``.

Records are line-delimited JSON, tables are CSV; every number is written with
9 significant digits.  Exit codes: 2 unwritable output or bad usage, 3
malformed input, 4 unknown experiment, 5 surface center not covered.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from ._validation import SurfaceCoverageError
from .attention import (
    AttentionSurface,
    ClickLog,
    ClickRecord,
    estimate_surface,
    rank_ctr_counts,
    rank_distance_curve,
    synthetic_radial_surface,
)
from .core import Listing, ListPositional, MapContinuous, MapTiered, MapUniform, DisplaySet, sort_listings
from .placement import PlacementConfig, optimize_center
from .selection import FilterConfig, assign_tiers, parse_anchor
from .sim import (
    CSV_COLUMNS,
    EXPERIMENTS,
    InventoryConfig,
    UserModel,
    generate_inventory,
    run_experiment,
    simulate_click_log,
    surface_click_log,
)

EXIT_OUTPUT = 2
EXIT_INPUT = 3
EXIT_EXPERIMENT = 4
EXIT_COVERAGE = 5

INVENTORY_KEYS = ("id", "x", "y", "logit", "price", "reviews", "rating")
CLICK_KEYS = ("query_id", "dx", "dy", "clicked", "tier", "rank", "distance_rank")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# --- formatting -------------------------------------------------------------


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    return str(value)


def to_jsonable(value):
    """Recursively round floats to 9 significant digits; non-finite become strings."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return fmt(value)
        return float(f"{value:.9g}")
    return value


def dumps(obj, indent=None) -> str:
    return json.dumps(to_jsonable(obj), indent=indent, ensure_ascii=False)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", EXIT_OUTPUT) from None


# --- file formats -----------------------------------------------------------


def listing_to_json(listing: Listing) -> str:
    return dumps({k: getattr(listing, k) for k in INVENTORY_KEYS})


def _read_lines(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().split("\n")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_INPUT) from None


def read_inventory(path: str) -> list[Listing]:
    listings, seen = [], set()
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            missing = [k for k in ("id", "x", "y", "logit") if k not in obj]
            if missing:
                raise ValueError(f"missing keys {missing}")
            listing = Listing(
                id=str(obj["id"]),
                x=float(obj["x"]),
                y=float(obj["y"]),
                logit=float(obj["logit"]),
                price=None if obj.get("price") is None else float(obj["price"]),
                reviews=None if obj.get("reviews") is None else int(obj["reviews"]),
                rating=None if obj.get("rating") is None else float(obj["rating"]),
            )
            if listing.id in seen:
                raise ValueError(f"duplicate id {listing.id!r}")
        except (ValueError, TypeError, AttributeError) as exc:
            raise CliError(f"{path}: malformed inventory line {lineno}: {exc}", EXIT_INPUT) from None
        seen.add(listing.id)
        listings.append(listing)
    return listings


def read_click_log(path: str, required=CLICK_KEYS) -> ClickLog:
    records = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            missing = [k for k in required if k not in obj]
            if missing:
                raise KeyError(", ".join(missing))
            records.append(
                ClickRecord(
                    query_id=str(obj.get("query_id", "")),
                    dx=float(obj.get("dx", 0.0)),
                    dy=float(obj.get("dy", 0.0)),
                    clicked=bool(obj["clicked"]),
                    tier=str(obj.get("tier", "regular")),
                    rank=int(obj.get("rank", 1)),
                    distance_rank=int(obj.get("distance_rank", 1)),
                )
            )
        except KeyError as exc:
            raise CliError(f"{path}: line {lineno} is missing key column(s) {exc.args[0]}", EXIT_INPUT) from None
        except (ValueError, TypeError, AttributeError) as exc:
            raise CliError(f"{path}: malformed click-log line {lineno}: {exc}", EXIT_INPUT) from None
    return ClickLog.from_records(records)


def click_log_lines(log: ClickLog) -> str:
    out = []
    for i in range(len(log)):
        out.append(
            dumps(
                {
                    "query_id": str(log.query_id[i]),
                    "dx": float(log.dx[i]),
                    "dy": float(log.dy[i]),
                    "clicked": bool(log.clicked[i]),
                    "tier": str(log.tier[i]),
                    "rank": int(log.rank[i]),
                    "distance_rank": int(log.distance_rank[i]),
                }
            )
        )
    return "".join(line + "\n" for line in out)


def read_surface(path: str) -> AttentionSurface:
    try:
        with open(path, encoding="utf-8") as fh:
            return AttentionSurface.from_dict(json.load(fh))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_INPUT) from None
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"{path}: malformed surface file: {exc}", EXIT_INPUT) from None


def _surface_from_args(args) -> AttentionSurface:
    if args.surface:
        return read_surface(args.surface)
    return synthetic_radial_surface(args.peak_ctr, args.decay, args.shift, args.resolution)


def _sidecar_path(out: str) -> str:
    p = Path(out)
    return str(p.with_suffix(".json")) if p.suffix == ".csv" else out + ".json"


# --- subcommands ------------------------------------------------------------


def cmd_gen_inventory(args) -> int:
    cfg = InventoryConfig(
        n_listings=args.n,
        spatial=args.spatial,
        n_clusters=args.clusters,
        cluster_spread=args.spread,
        base_logit=args.base,
        distance_coeff=args.beta,
        noise_sd=args.noise,
        seed=args.seed,
    )
    listings = generate_inventory(cfg)
    write_text(args.out, "".join(listing_to_json(l) + "\n" for l in listings))
    return 0


def _user_from_args(args, surface):
    if args.user is None:
        return None
    attention = {
        "uniform": MapUniform(),
        "list": ListPositional.harmonic(args.max_pins),
        "tiered": MapTiered(),
        "continuous": MapContinuous(surface),
    }[args.user]
    click = MapContinuous(surface, center=(0.0, 0.0)) if args.click_attention == "continuous" else None
    return UserModel(attention, args.click_propensity, click_attention=click)


def cmd_run_exp(args) -> int:
    if args.experiment not in EXPERIMENTS:
        raise CliError(f"unknown experiment {args.experiment!r}; choose from {', '.join(EXPERIMENTS)}", EXIT_EXPERIMENT)
    inventory = read_inventory(args.inventory)
    if not inventory:
        raise CliError(f"{args.inventory}: inventory is empty", EXIT_INPUT)
    surface = _surface_from_args(args)
    report = run_experiment(
        args.experiment,
        inventory,
        user=_user_from_args(args, surface),
        sessions=args.sessions,
        seed=args.seed,
        max_pins=args.max_pins,
        alpha=args.alpha,
        alphas=[float(a) for a in args.alphas.split(",")],
        anchor=args.anchor,
        click_propensity=args.click_propensity,
        surface=surface,
        epsilon=args.epsilon,
        n_jobs=args.threads,
    )
    full = report.to_dict()
    full["config"]["inventory"] = os.path.basename(args.inventory)
    if args.format == "json":
        write_text(args.out, dumps(full, indent=2) + "\n")
        return 0
    rows = [[row[c] for c in CSV_COLUMNS] for row in report.rows()]
    write_text(args.out, csv_text(CSV_COLUMNS, rows))
    if args.out != "-":
        write_text(_sidecar_path(args.out), dumps(full, indent=2) + "\n")
    return 0


def cmd_estimate_surface(args) -> int:
    log = read_click_log(args.log)
    try:
        surface = estimate_surface(
            log, resolution=args.resolution, min_impressions=args.min_impressions, tier=args.tier, n_jobs=args.threads
        )
    except SurfaceCoverageError as exc:
        raise CliError(f"surface unusable: {exc}", EXIT_COVERAGE) from None
    write_text(args.out, dumps(surface.to_dict()) + "\n")
    offsets = surface.cell_offsets()
    rel = surface.relative()
    rows = [
        (offsets[ix], offsets[iy], rel[ix, iy])
        for ix in range(surface.resolution)
        for iy in range(surface.resolution)
    ]
    csv_path = args.csv or (str(Path(args.out).with_suffix(".csv")) if args.out != "-" else None)
    if csv_path:
        write_text(csv_path, csv_text(("dx_cell", "dy_cell", "relative_attention"), rows))
    return 0


def cmd_curves(args) -> int:
    log = read_click_log(args.log, required=("clicked", *args.require))
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out_dir}: {exc.strerror or exc}", EXIT_OUTPUT) from None
    for key, name in (("rank", "search_rank"), ("distance_rank", "distance_rank")):
        ranks, clicks, imps = rank_ctr_counts(log, key)
        ctr = clicks / np.maximum(imps, 1)
        base = ctr[0] if len(ranks) and ranks[0] == 1 and ctr[0] > 0 else None
        rows = [(r, i, c, c / i, None if base is None else (c / i) / base) for r, c, i in zip(ranks, clicks, imps)]
        write_text(str(out_dir / f"ctr_by_{name}.csv"), csv_text((name, "impressions", "clicks", "ctr", "normalized_ctr"), rows))
    rows = rank_distance_curve(log, n_bins=args.bins)
    write_text(
        str(out_dir / "rank_distance.csv"),
        csv_text(("normalized_distance", "avg_rank", "rank_transform", "impressions"), rows),
    )
    return 0


def cmd_optimize_center(args) -> int:
    inventory = read_inventory(args.inventory)
    if not inventory:
        raise CliError(f"{args.inventory}: inventory is empty", EXIT_INPUT)
    surface = _surface_from_args(args)
    result = optimize_center(inventory, PlacementConfig(args.n_pins, args.epsilon, surface), n_jobs=args.threads)
    payload = {
        "center": list(result.center),
        "objective": result.objective,
        "n_candidates": result.n_candidates,
        "epsilon": args.epsilon,
        "pins": [l.id for l in result.pins],
    }
    write_text(args.out, dumps(payload, indent=2) + "\n")
    return 0


def cmd_gen_clicks(args) -> int:
    surface = _surface_from_args(args)
    if args.mode == "surface":
        if args.tier == "mini":
            surface = AttentionSurface(surface.ctr / 8.0, half_width=surface.half_width)
        log = surface_click_log(surface, args.impressions, args.seed, tier=args.tier)
    else:
        if not args.inventory:
            raise CliError("--inventory is required with --mode session", EXIT_INPUT)
        top = sort_listings(read_inventory(args.inventory))[: args.max_pins]
        if not top:
            raise CliError(f"{args.inventory}: inventory is empty", EXIT_INPUT)
        user_kind = args.user or "uniform"
        if user_kind == "list":
            display, attention = DisplaySet.as_list(top), ListPositional.harmonic(len(top))
        elif user_kind == "tiered":
            display = assign_tiers(top, FilterConfig(args.alpha, parse_anchor(args.anchor), len(top)))
            attention = MapTiered()
        else:
            display = DisplaySet.as_pins(top, center=(0.0, 0.0))
            attention = MapUniform() if user_kind == "uniform" else MapContinuous(surface)
        click = MapContinuous(surface, center=(0.0, 0.0)) if args.click_attention == "continuous" else None
        user = UserModel(attention, args.click_propensity, click_attention=click)
        log = simulate_click_log(display, user, args.sessions, args.seed, n_jobs=args.threads)
    write_text(args.out, click_log_lines(log))
    return 0


# --- parser -----------------------------------------------------------------


def _add_surface_flags(p):
    p.add_argument("--surface", help="surface JSON file (default: synthetic radial surface)")
    p.add_argument("--peak-ctr", type=float, default=0.3)
    p.add_argument("--decay", type=float, default=0.2, help="radial decay scale")
    p.add_argument("--shift", type=float, default=0.0, help="horizontal shift of the attention peak")
    p.add_argument("--resolution", type=int, default=21)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maprank", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-inventory", help="write a synthetic inventory", allow_abbrev=False)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spatial", choices=("uniform", "clustered"), default="uniform")
    p.add_argument("--clusters", type=int, default=3)
    p.add_argument("--spread", type=float, default=0.1)
    p.add_argument("--base", type=float, default=math.log(0.3), help="base logit (<= 0)")
    p.add_argument("--beta", type=float, default=0.0, help="logit decrease per unit distance from center")
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_gen_inventory)

    p = sub.add_parser("run-exp", help="simulate an experiment and write a report", allow_abbrev=False)
    p.add_argument("--inventory", required=True)
    p.add_argument("--experiment", required=True, help=", ".join(EXPERIMENTS))
    p.add_argument("--sessions", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--max-pins", type=int, default=18)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--alphas", default="1,2,4,8")
    p.add_argument("--anchor", default="topmost", help="topmost, median3 or adaptive")
    p.add_argument("--click-propensity", type=float, default=0.1)
    p.add_argument("--user", choices=("uniform", "list", "tiered", "continuous"))
    p.add_argument("--click-attention", choices=("same", "continuous"), default="same")
    p.add_argument("--epsilon", type=float, default=0.02)
    p.add_argument("--threads", type=int, default=1)
    _add_surface_flags(p)
    p.set_defaults(func=cmd_run_exp)

    p = sub.add_parser("estimate-surface", help="estimate an attention surface from a click log", allow_abbrev=False)
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="relative-attention CSV (default: --out with .csv suffix)")
    p.add_argument("--resolution", type=int, default=21)
    p.add_argument("--min-impressions", type=int, default=1)
    p.add_argument("--tier", choices=("regular", "mini"))
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_estimate_surface)

    p = sub.add_parser("curves", help="write rank-vs-ctr and rank-distance curves", allow_abbrev=False)
    p.add_argument("--log", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_curves, require=("dx", "dy", "rank", "distance_rank"))

    p = sub.add_parser("optimize-center", help="grid-search the map center for an inventory", allow_abbrev=False)
    p.add_argument("--inventory", required=True)
    p.add_argument("--n-pins", type=int, default=18)
    p.add_argument("--epsilon", type=float, default=0.02)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="-")
    _add_surface_flags(p)
    p.set_defaults(func=cmd_optimize_center)

    p = sub.add_parser("gen-clicks", help="write a simulated click log", allow_abbrev=False)
    p.add_argument("--mode", choices=("surface", "session"), default="surface")
    p.add_argument("--impressions", type=int, default=100_000)
    p.add_argument("--tier", choices=("regular", "mini"), default="regular")
    p.add_argument("--inventory")
    p.add_argument("--user", choices=("uniform", "list", "tiered", "continuous"))
    p.add_argument("--click-attention", choices=("same", "continuous"), default="same")
    p.add_argument("--sessions", type=int, default=10_000)
    p.add_argument("--max-pins", type=int, default=18)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--anchor", default="topmost")
    p.add_argument("--click-propensity", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="-")
    _add_surface_flags(p)
    p.set_defaults(func=cmd_gen_clicks)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("maprank: --threads must be >= 1", file=sys.stderr)
        return EXIT_OUTPUT
    try:
        return args.func(args)
    except CliError as exc:
        print(f"maprank: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"maprank: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
