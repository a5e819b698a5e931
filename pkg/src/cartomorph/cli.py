"""Command-line frontend: static cartograms, animations, sweeps, metrics, serving.

Every flag has a twin key in a JSON config file (--config); flags given on
the command line override file values.  Outputs are deterministic: the same
config yields byte-identical GeoJSON.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import CartogramEngine, StoppingCriteria
from .errors import CartomorphError, IngestionError, NumericError, RegionCollapsedError
from .geomodel import MapModel, attach_statistics, densify, normalize, parse_map, to_geojson
from .engine import DENSIFY_EDGE_PIXELS
from .metrics import full_report
from .render import render_svg
from .temporal import (
    AreaFractionPolicy,
    TimeSeriesDataset,
    interpolate_frames,
    run_cumulative,
    run_direct,
)

EXIT_INPUT = 1
EXIT_NUMERIC = 2
EXIT_NOT_CONVERGED = 3


@dataclass
class RunConfig:
    map: str | None = None
    stats: str | None = None
    key: str = "statistic"
    id_column: str = "id"
    time_column: str | None = None
    texture_k: int = 10
    scale: float = 0.9
    bdv_multiplier: float = 1.0
    max_iter: int = 512
    threshold: float = 0.01
    stagnation: int = 32
    strategy: str = "direct"
    amin: float | None = None
    amax: float | None = None
    window: str | None = None  # "t0:t1" as time indices
    frames_per_step: int = 10
    out_dir: str = "out"
    format: str = "both"  # geojson | svg | both
    color_by: str = "shape_distortion"
    strict: bool = False
    seedless: bool = True  # deterministic mode; the only mode
    hamming_k: int = 7

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise IngestionError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def criteria(self) -> StoppingCriteria:
        return StoppingCriteria(
            error_threshold=self.threshold,
            stagnation_window=self.stagnation,
            max_iterations=self.max_iter,
        )

    def policy(self) -> AreaFractionPolicy | None:
        if self.amin is None or self.amax is None:
            return None
        window = None
        if self.window:
            t0, t1 = self.window.split(":")
            window = (int(t0), int(t1))
        return AreaFractionPolicy(a_min=self.amin, a_max=self.amax, window=window)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--map", help="input GeoJSON FeatureCollection")
    p.add_argument("--stats", help="statistics CSV (id column + value column(s))")
    p.add_argument("--key", help="statistic property name in the GeoJSON / CSV value column")
    p.add_argument("--id-column", dest="id_column", help="region-id column name in the CSV")
    p.add_argument("--time-column", dest="time_column", help="time column for long-format CSV")
    p.add_argument("--texture-k", dest="texture_k", type=int, help="texture exponent (size 2^k)")
    p.add_argument("--scale", type=float, help="initial scaling fraction s in (0,1)")
    p.add_argument("--bdv-multiplier", dest="bdv_multiplier", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--threshold", type=float, help="max cartographic error stopping threshold")
    p.add_argument("--stagnation", type=int, help="stagnation window in iterations")
    p.add_argument("--strategy", choices=["direct", "cumulative"])
    p.add_argument("--amin", type=float, help="area fraction at the window's minimum mass")
    p.add_argument("--amax", type=float, help="area fraction at the window's maximum mass")
    p.add_argument("--window", help="time-index window 't0:t1' for the area schedule")
    p.add_argument("--frames-per-step", dest="frames_per_step", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--format", choices=["geojson", "svg", "both"])
    p.add_argument("--color-by", dest="color_by", choices=["shape_distortion", "cartographic_error", "none"])
    p.add_argument("--strict", action="store_true", default=None)
    p.add_argument("--seedless", action="store_true", default=None, help="deterministic mode (default and only mode)")
    p.add_argument("--hamming-k", dest="hamming_k", type=int, help="shape-distortion raster exponent")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    for f in dataclasses.fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is not None:
            setattr(cfg, f.name, val)
    return cfg


def _load_inputs(cfg: RunConfig):
    if not cfg.map:
        raise IngestionError("--map is required")
    geo = Path(cfg.map).read_bytes()
    has_property_stats = cfg.stats is None
    mapmodel = parse_map(geo, statistic_key=cfg.key if has_property_stats else None)
    mapmodel = normalize(mapmodel, cfg.scale)
    if cfg.stats is None:
        return mapmodel
    joined = attach_statistics(
        mapmodel,
        Path(cfg.stats).read_bytes(),
        id_column=cfg.id_column,
        time_column=cfg.time_column,
    )
    return joined


def _static_map(loaded) -> MapModel:
    if isinstance(loaded, TimeSeriesDataset):
        raise IngestionError("temporal statistics supplied; use the animate command")
    return loaded


def _engine_weights(engine: CartogramEngine, mapmodel: MapModel) -> np.ndarray:
    total_mass = engine.total_statistic + engine.background_mass
    return mapmodel.statistics() / total_mass


def _region_values(report, which: str):
    if which == "none":
        return None
    key = "shape_distortion" if which == "shape_distortion" else "cartographic_error"
    return {rid: vals[key] for rid, vals in report.per_region.items()}


def _write_outputs(out_dir: Path, stem: str, mapmodel, report, cfg: RunConfig):
    if cfg.format in ("geojson", "both"):
        per_region = {
            rid: vals for rid, vals in (report.per_region if report else {}).items()
        }
        (out_dir / f"{stem}.geojson").write_bytes(to_geojson(mapmodel, per_region))
    if cfg.format in ("svg", "both"):
        values = _region_values(report, cfg.color_by) if report else None
        label = cfg.color_by.replace("_", " ") if cfg.color_by != "none" else ""
        (out_dir / f"{stem}.svg").write_text(
            render_svg(mapmodel, values, value_label=label)
        )


def cmd_cartogram(cfg: RunConfig) -> int:
    mapmodel = _static_map(_load_inputs(cfg))
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    began = time.perf_counter()
    engine = CartogramEngine(
        mapmodel,
        criteria=cfg.criteria(),
        k=cfg.texture_k,
        bdv_multiplier=cfg.bdv_multiplier,
    )
    result = engine.run()
    wall_ms = (time.perf_counter() - began) * 1e3
    carto = result.state.mapmodel
    report = full_report(
        engine.initial_map,
        carto,
        weights=_engine_weights(engine, mapmodel),
        raster_k=cfg.hamming_k,
        wall_ms=wall_ms,
    )
    (out_dir / "trace.csv").write_text(result.trace_csv())
    (out_dir / "report.json").write_text(report.to_json() + "\n")
    (out_dir / "report.csv").write_text(report.to_csv())
    _write_outputs(out_dir, "cartogram", carto, report, cfg)
    print(
        f"{result.stop_reason} after {result.state.iteration} iterations: "
        f"xi={result.state.xi:.5f} epsilon={result.state.epsilon:.5f}"
    )
    if cfg.strict and result.stop_reason != "converged":
        return EXIT_NOT_CONVERGED
    return 0


def cmd_animate(cfg: RunConfig) -> int:
    loaded = _load_inputs(cfg)
    if isinstance(loaded, MapModel):
        raise IngestionError("animate needs temporal statistics (several value columns)")
    dataset: TimeSeriesDataset = loaded
    out_dir = Path(cfg.out_dir)
    frames_dir = out_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    runner = run_cumulative if cfg.strategy == "cumulative" else run_direct
    seq = runner(
        dataset,
        criteria=cfg.criteria(),
        policy=cfg.policy(),
        k=cfg.texture_k,
        bdv_multiplier=cfg.bdv_multiplier,
        report_raster_k=cfg.hamming_k,
    )
    frame_files = []
    for frame in seq.frames:
        stem = f"frame_{frame.time_index:03d}"
        if frame.mapmodel is not None:
            _write_outputs(frames_dir, stem, frame.mapmodel, frame.report, cfg)
            frame_files.append(f"frames/{stem}.geojson")
        else:
            frame_files.append(None)
    dense_files = []
    if cfg.frames_per_step > 1:
        for idx, (label, blended) in enumerate(interpolate_frames(seq, cfg.frames_per_step)):
            name = f"dense_{idx:04d}.geojson"
            (frames_dir / name).write_bytes(to_geojson(blended))
            dense_files.append({"label": label, "file": f"frames/{name}"})

    manifest = {
        "strategy": seq.strategy,
        "frames_per_step": cfg.frames_per_step,
        "series": seq.series(),
        "frames": frame_files,
        "dense_frames": dense_files,
        "reports": [f.report.to_dict() if f.report else None for f in seq.frames],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    failed = sum(1 for f in seq.frames if f.error)
    print(f"{seq.strategy}: {len(seq.frames)} frames, {failed} failed")
    if cfg.strict and failed:
        return EXIT_NOT_CONVERGED
    return 0


def cmd_sweep_bdv(cfg: RunConfig, multipliers: list[float]) -> int:
    if any(not (0.5 <= m <= 2.0) for m in multipliers):
        raise IngestionError("multipliers must lie in [0.5, 2]")
    mapmodel = _static_map(_load_inputs(cfg))
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [
        "multiplier,stop_reason,iterations,xi,epsilon,tau,hamming_avg,hamming_max,position_error,wall_ms,error"
    ]
    for mult in sorted(multipliers):
        began = time.perf_counter()
        try:
            engine = CartogramEngine(
                mapmodel, criteria=cfg.criteria(), k=cfg.texture_k, bdv_multiplier=mult
            )
            result = engine.run()
            wall_ms = (time.perf_counter() - began) * 1e3
            report = full_report(
                engine.initial_map,
                result.state.mapmodel,
                weights=_engine_weights(engine, mapmodel),
                raster_k=cfg.hamming_k,
                wall_ms=wall_ms,
            )
            rows.append(
                f"{mult:.6g},{result.stop_reason},{result.state.iteration},"
                f"{result.state.xi:.9g},{result.state.epsilon:.9g},{report.tau:.9g},"
                f"{report.hamming_avg:.9g},{report.hamming_max:.9g},"
                f"{report.position_error:.9g},{wall_ms:.3f},"
            )
        except CartomorphError as exc:
            wall_ms = (time.perf_counter() - began) * 1e3
            rows.append(f"{mult:.6g},failed,,,,,,,,{wall_ms:.3f},{exc}")
    (out_dir / "bdv_sweep.csv").write_text("\n".join(rows) + "\n")
    print(f"swept {len(multipliers)} multipliers -> {out_dir / 'bdv_sweep.csv'}")
    return 0


def cmd_metrics(cfg: RunConfig, carto_path: str, out_path: str | None) -> int:
    if not cfg.map:
        raise IngestionError("--map is required")
    original = parse_map(Path(cfg.map).read_bytes(), statistic_key=None)
    carto = parse_map(Path(carto_path).read_bytes(), statistic_key=None)
    if cfg.stats:
        joined = attach_statistics(
            original, Path(cfg.stats).read_bytes(), id_column=cfg.id_column
        )
        original = _static_map(joined)
    else:
        original = parse_map(Path(cfg.map).read_bytes(), statistic_key=cfg.key)
    report = full_report(original, carto, raster_k=cfg.hamming_k)
    text = report.to_json() + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_serve(cfg: RunConfig, host: str, port: int) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port, log_level="info")
    return 0


def _parse_multipliers(spec: str) -> list[float]:
    """'0.95:1.05:0.01' range or '0.98,1.0,1.02' list."""
    if ":" in spec:
        lo, hi, step = (float(p) for p in spec.split(":"))
        count = int(round((hi - lo) / step)) + 1
        return [round(lo + i * step, 10) for i in range(count)]
    return [float(p) for p in spec.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cartomorph",
        description="Contiguous cartograms via integral-image density equalization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_cart = sub.add_parser("cartogram", help="compute one static cartogram")
    _add_common_flags(p_cart)
    p_cart.add_argument("--iterations", type=int, default=None, help="alias: cap max iterations")

    p_anim = sub.add_parser("animate", help="compute a time-varying sequence")
    _add_common_flags(p_anim)

    p_sweep = sub.add_parser("sweep-bdv", help="quality measures over a background-density sweep")
    _add_common_flags(p_sweep)
    p_sweep.add_argument(
        "--multipliers", default="0.95:1.05:0.01", help="range lo:hi:step or comma list"
    )

    p_metrics = sub.add_parser("metrics", help="score an externally produced cartogram")
    _add_common_flags(p_metrics)
    p_metrics.add_argument("--carto", required=True, help="cartogram GeoJSON to score")
    p_metrics.add_argument("--out", help="write report JSON here instead of stdout")

    p_serve = sub.add_parser("serve", help="run the interactive steering service")
    _add_common_flags(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        if args.command == "cartogram":
            if args.iterations is not None:
                cfg.max_iter = max(args.iterations, 1)
                if args.iterations == 0:
                    # choropleth baseline: emit the undeformed map
                    return _cmd_identity(cfg)
            return cmd_cartogram(cfg)
        if args.command == "animate":
            return cmd_animate(cfg)
        if args.command == "sweep-bdv":
            return cmd_sweep_bdv(cfg, _parse_multipliers(args.multipliers))
        if args.command == "metrics":
            return cmd_metrics(cfg, args.carto, args.out)
        if args.command == "serve":
            return cmd_serve(cfg, args.host, args.port)
        parser.error(f"unknown command {args.command}")
    except (IngestionError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericError, RegionCollapsedError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


def _cmd_identity(cfg: RunConfig) -> int:
    """--iterations 0: write the normalized input back out (choropleth baseline)."""
    mapmodel = _static_map(_load_inputs(cfg))
    mapmodel = densify(mapmodel, DENSIFY_EDGE_PIXELS / (1 << cfg.texture_k))
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trace.csv").write_text("iteration,epsilon,xi,millis\n")
    _write_outputs(out_dir, "cartogram", mapmodel, None, cfg)
    print("identity output (0 iterations)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
