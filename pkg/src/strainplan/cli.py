"""Command-line entry points.

Subcommands: build-maps, export-grid, run, serve, replay, baseline.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .baseline import astar_plan, upsample_grid_path
from .errors import StrainPlanError
from .maps import build_library, export_grid, load_library, load_map, save_library
from .scenario import SessionRunner, replay_metrics, run_scenario
from .shoulder import AGGREGATE


def _load_model_and_settings(path: str | None):
    if path:
        data = cfgmod._load_yaml(Path(path))
        cfgmod._check_version(data, path)
        return cfgmod.model_from_dict(data), cfgmod.map_settings_from_dict(data)
    from .shoulder import default_model

    return default_model(), cfgmod.MapBuildSettings()


def cmd_build_maps(args) -> int:
    model, settings = _load_model_and_settings(args.config)
    start = time.perf_counter()
    library = build_library(
        model,
        tendons=settings.tendons,
        ar_bins=settings.ar_bins(model.bounds),
        activation_bins=settings.activation_bins(),
        resolution=settings.resolution,
        n_centers=settings.n_centers,
        regularization=settings.regularization,
    )
    index = save_library(library, Path(args.out))
    print(
        f"built {len(library.maps)} maps "
        f"({len(library.tendons)} tendons x {len(library.ar_bins)} AR bins x "
        f"{len(library.activation_bins)} activation bins) "
        f"in {time.perf_counter() - start:.1f}s -> {index}"
    )
    return 0


def cmd_export_grid(args) -> int:
    lib_dir = Path(args.maps)
    index = json.loads((lib_dir / "index.json").read_text())
    keys = {entry["key"]: entry["file"] for entry in index["maps"]}
    if args.map not in keys:
        print(f"unknown map key {args.map!r}; available keys:", file=sys.stderr)
        for key in sorted(keys):
            print(f"  {key}", file=sys.stderr)
        return 2
    smap = load_map(lib_dir / keys[args.map])
    text = export_grid(smap, args.format, resolution=args.resolution)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def _make_runner(args) -> SessionRunner:
    bundle = cfgmod.load_scenario(Path(args.scenario))
    model = cfgmod.model_from_dict(bundle.model_data)
    library = load_library(Path(args.maps))
    session_cfg = cfgmod.session_config_from_bundle(bundle, model, library)
    out_dir = Path(args.out) if getattr(args, "out", None) else None
    return SessionRunner(session_cfg, out_dir=out_dir)


def cmd_run(args) -> int:
    runner = _make_runner(args)
    if args.live:
        # live mode paces to the wall clock and exposes the streaming API
        # for the operator console
        from .service import serve

        serve(runner, host="127.0.0.1", port=args.port, live=True)
        result = runner.finish()
    else:
        result = runner.run()
    print(json.dumps(result.metrics, indent=1, sort_keys=True))
    return 1 if result.faulted else 0


def cmd_serve(args) -> int:
    from .service import serve

    runner = _make_runner(args)
    serve(runner, host=args.host, port=args.port, live=args.live)
    return 0


def cmd_replay(args) -> int:
    session = Path(args.session)
    recomputed = replay_metrics(session)
    original = (session / "metrics.json").read_text()
    if recomputed == original:
        print("replay OK: metrics.json reproduced byte-identically")
        return 0
    print("replay MISMATCH:")
    print(recomputed)
    return 1


def cmd_baseline(args) -> int:
    blob = json.loads(Path(args.grid).read_text())
    from .maps import StrainGrid

    grid = StrainGrid(
        pe_axis=np.asarray(blob["pe_axis"]),
        se_axis=np.asarray(blob["se_axis"]),
        ar=float(blob.get("ar", 0.0)),
        activation_level=float(blob.get("activation", 0.0)),
        values=np.asarray(blob["values"], dtype=float),
        tendon_id=blob.get("tendon", AGGREGATE),
    )
    start = tuple(math.radians(float(v)) for v in args.start.split(","))
    goal = tuple(math.radians(float(v)) for v in args.goal.split(","))
    path = astar_plan(grid, start, goal, strain_weight=args.weight,
                      max_strain=args.ceiling)
    dense = upsample_grid_path(path, rate=args.rate, duration=args.duration)
    out = {
        "waypoints_deg": [[math.degrees(pe), math.degrees(se)]
                          for pe, se in path.waypoints],
        "cumulative_strain": path.cumulative_strain,
        "cost": path.cost,
        "samples": len(dense.times),
    }
    text = json.dumps(out, indent=1)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strainplan",
        description="Strain-map-aware trajectory optimization sandbox",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-maps", help="sample and fit the map library")
    p.add_argument("--config", help="model/maps YAML (defaults when omitted)")
    p.add_argument("--out", required=True, help="output library directory")
    p.set_defaults(func=cmd_build_maps)

    p = sub.add_parser("export-grid", help="dense grid of one stored map")
    p.add_argument("--maps", required=True, help="library directory")
    p.add_argument("--map", required=True, help="map key from index.json")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--resolution", type=int, default=60)
    p.add_argument("--out", help="output file (stdout when omitted)")
    p.set_defaults(func=cmd_export_grid)

    p = sub.add_parser("run", help="run a scenario headless")
    p.add_argument("--scenario", required=True)
    p.add_argument("--maps", required=True)
    p.add_argument("--out", help="session log directory")
    p.add_argument("--live", action="store_true",
                   help="pace to wall clock and expose the stream API")
    p.add_argument("--port", type=int, default=8787)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="run a scenario behind the stream API")
    p.add_argument("--scenario", required=True)
    p.add_argument("--maps", required=True)
    p.add_argument("--out", help="session log directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--live", action="store_true")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="recompute metrics from a session log")
    p.add_argument("--session", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("baseline", help="grid planner on an exported grid")
    p.add_argument("--grid", required=True, help="JSON grid (export-grid output)")
    p.add_argument("--start", required=True, help="pe,se in degrees")
    p.add_argument("--goal", required=True, help="pe,se in degrees")
    p.add_argument("--weight", type=float, default=1.0)
    p.add_argument("--ceiling", type=float, default=None)
    p.add_argument("--rate", type=float, default=200.0)
    p.add_argument("--duration", type=float, default=5.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_baseline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StrainPlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
