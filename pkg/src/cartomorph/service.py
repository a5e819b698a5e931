"""HTTP service for interactive steering sessions.

A session holds an uploaded dataset plus the current parameter set.  Frames
compute asynchronously in a per-session worker thread, nearest to the
playhead first (sequentially for the cumulative strategy).  Computed frames
are cached by a per-frame key derived from everything that determines the
frame — dataset hash, geometry parameters, that step's statistics and
scheduled background mass, and (for cumulative frames) the predecessor's
key — so a parameter change invalidates exactly the frames it affects and
can never serve stale geometry.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, File, HTTPException, Request, UploadFile
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .engine import CartogramEngine, DENSIFY_EDGE_PIXELS, StoppingCriteria
from .errors import CartomorphError, IngestionError
from .geomodel import MapModel, attach_statistics, densify, normalize, parse_map, to_geojson
from .metrics import full_report
from .render import load_ramp
from .temporal import TimeSeriesDataset, background_mass_schedule, AreaFractionPolicy, interpolate_vertices

DEFAULT_SERVICE_K = 9  # CPU-friendly default for interactive sessions


class SteeringParams(BaseModel):
    texture_k: int = DEFAULT_SERVICE_K
    scale: float = 0.9
    bdv_multiplier: float = 1.0
    amin: float | None = None
    amax: float | None = None
    window: tuple[int, int] | None = None
    strategy: str = "direct"
    threshold: float = 0.01
    stagnation: int = 32
    max_iter: int = 256
    hamming_k: int = 6

    def validate_ranges(self, step_count: int) -> None:
        if not (4 <= self.texture_k <= 13):
            raise HTTPException(400, "texture_k must be in [4, 13]")
        if not (0.0 < self.scale < 1.0):
            raise HTTPException(400, "scale must be in (0, 1)")
        if self.bdv_multiplier <= 0:
            raise HTTPException(400, "bdv_multiplier must be positive")
        if (self.amin is None) != (self.amax is None):
            raise HTTPException(400, "amin and amax must be given together")
        if self.amin is not None and not (0.0 < self.amin < self.amax < 1.0):
            raise HTTPException(400, "need 0 < amin < amax < 1")
        if self.strategy not in ("direct", "cumulative"):
            raise HTTPException(400, "strategy must be direct or cumulative")
        if self.window is not None:
            t0, t1 = self.window
            if not (0 <= t0 <= t1 < step_count):
                raise HTTPException(400, f"window must lie within [0, {step_count - 1}]")

    def canonical(self) -> str:
        return json.dumps(self.model_dump(), sort_keys=True)


@dataclass
class ComputedFrame:
    mapmodel: MapModel | None
    geojson: dict | None
    report: dict | None
    background_mass: float
    area_fraction: float | None
    wall_ms: float
    stop_reason: str | None = None
    error: str | None = None


@dataclass
class Session:
    session_id: str
    dataset: TimeSeriesDataset
    dataset_hash: str
    params: SteeringParams
    param_hash: str = ""
    frame_keys: list[str] = field(default_factory=list)
    masses: np.ndarray | None = None
    fractions: np.ndarray | None = None
    base_map: MapModel | None = None
    cache: dict[str, ComputedFrame] = field(default_factory=dict)
    status: dict[str, str] = field(default_factory=dict)  # frame key -> state
    playhead: int = 0
    generation: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)
    wake: threading.Condition = field(default=None)
    worker: threading.Thread | None = None
    stopping: bool = False

    def __post_init__(self):
        self.wake = threading.Condition(self.lock)


def _hash(*parts: str) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p.encode())
        h.update(b"\x00")
    return h.hexdigest()[:24]


def _apply_params(session: Session) -> None:
    """Recompute the schedule and per-frame keys for the current params (lock held)."""
    p = session.params
    ds = session.dataset
    session.param_hash = _hash(session.dataset_hash, p.canonical())
    if p.amin is not None:
        policy = AreaFractionPolicy(p.amin, p.amax, p.window)
        masses, fractions = background_mass_schedule(ds, policy)
        session.fractions = fractions
    else:
        from .temporal import _default_background_masses

        base_for_split = normalize(ds.mapmodel, p.scale)
        tmp = TimeSeriesDataset(base_for_split, ds.times, ds.statistics)
        masses = _default_background_masses(tmp, p.texture_k, p.bdv_multiplier)
        session.fractions = None
    session.masses = masses

    normalized = normalize(ds.mapmodel, p.scale)
    session.base_map = densify(normalized, DENSIFY_EDGE_PIXELS / (1 << p.texture_k))

    geometry_key = _hash(
        session.dataset_hash,
        f"k={p.texture_k};s={p.scale};thr={p.threshold};stag={p.stagnation};"
        f"max={p.max_iter};strat={p.strategy};ham={p.hamming_k}",
    )
    keys = []
    prev = ""
    for t in range(ds.step_count):
        stats_sig = _hash(*(f"{v!r}" for v in ds.statistics[t]))
        key = _hash(geometry_key, stats_sig, f"mb={masses[t]!r}", prev)
        keys.append(key)
        if p.strategy == "cumulative":
            prev = key
    session.frame_keys = keys
    for key in keys:
        self_status = session.status.get(key)
        if key in session.cache:
            session.status[key] = "failed" if session.cache[key].error else "done"
        elif self_status != "running":
            session.status[key] = "pending"
    session.generation += 1
    session.wake.notify_all()


def _pick_next(session: Session) -> int | None:
    """Next frame index to compute under the current params (lock held)."""
    keys = session.frame_keys
    missing = [
        t
        for t, key in enumerate(keys)
        if key not in session.cache and session.status.get(key) != "running"
    ]
    if not missing:
        return None
    if session.params.strategy == "cumulative":
        # respect sequential dependencies: earliest missing first
        for t in range(len(keys)):
            if keys[t] not in session.cache:
                return t if t in missing else None
        return None
    return min(missing, key=lambda t: (abs(t - session.playhead), t))


def _compute_frame(session: Session, t: int, generation: int) -> None:
    """Compute one frame outside the lock and store it by its frame key."""
    with session.lock:
        if generation != session.generation:
            return
        key = session.frame_keys[t]
        p = session.params
        mass = float(session.masses[t])
        fraction = None if session.fractions is None else float(session.fractions[t])
        stats_t = session.dataset.statistics[t]
        if p.strategy == "cumulative" and t > 0:
            prev = session.cache.get(session.frame_keys[t - 1])
            if prev is None or prev.mapmodel is None:
                session.status[key] = "failed"
                session.cache[key] = ComputedFrame(
                    None, None, None, mass, fraction, 0.0, error="predecessor frame unavailable"
                )
                return
            start_geometry = prev.mapmodel
        else:
            start_geometry = session.base_map
        session.status[key] = "running"
        base_map = session.base_map
    began = time.perf_counter()
    try:
        start_map = start_geometry.with_statistics(stats_t)
        engine = CartogramEngine(
            start_map,
            criteria=StoppingCriteria(p.threshold, p.stagnation, p.max_iter),
            k=p.texture_k,
            background_mass=mass,
            apply_densify=False,
        )
        result = engine.run()
        wall_ms = (time.perf_counter() - began) * 1e3
        carto = result.state.mapmodel
        weights = stats_t / (float(stats_t.sum()) + mass)
        report = full_report(
            base_map.with_statistics(stats_t),
            carto,
            weights=weights,
            raster_k=p.hamming_k,
            wall_ms=wall_ms,
        )
        frame = ComputedFrame(
            mapmodel=carto,
            geojson=json.loads(to_geojson(carto, report.per_region)),
            report=report.to_dict(),
            background_mass=mass,
            area_fraction=fraction,
            wall_ms=wall_ms,
            stop_reason=result.stop_reason,
        )
    except CartomorphError as exc:
        frame = ComputedFrame(
            None, None, None, mass, fraction, (time.perf_counter() - began) * 1e3, error=str(exc)
        )
    with session.lock:
        session.cache[key] = frame
        session.status[key] = "failed" if frame.error else "done"
        session.wake.notify_all()


def _worker_loop(session: Session) -> None:
    while True:
        with session.lock:
            if session.stopping:
                return
            t = _pick_next(session)
            generation = session.generation
            if t is None:
                session.wake.wait(timeout=0.5)
                continue
        _compute_frame(session, t, generation)


def _frame_payload(session: Session, t: int, frame: ComputedFrame) -> dict:
    p = session.params
    return {
        "status": "failed" if frame.error else "done",
        "time_index": t,
        "time": session.dataset.times[t],
        "param_hash": session.param_hash,
        "frame_key": session.frame_keys[t],
        "strategy": p.strategy,
        "background_mass": frame.background_mass,
        "area_fraction": frame.area_fraction,
        "wall_ms": frame.wall_ms,
        "stop_reason": frame.stop_reason,
        "error": frame.error,
        "geojson": frame.geojson,
        "report": frame.report,
        "regions": _region_rows(session, t, frame),
    }


def _region_rows(session: Session, t: int, frame: ComputedFrame) -> list[dict]:
    if frame.mapmodel is None:
        return []
    per_region = (frame.report or {}).get("per_region", {})
    rows = []
    for reg in frame.mapmodel.regions:
        entry = per_region.get(reg.region_id, {})
        rows.append(
            {
                "id": reg.region_id,
                "name": reg.name,
                "statistic": reg.statistic,
                "area": reg.area(),
                "cartographic_error": entry.get("cartographic_error"),
                "shape_distortion": entry.get("shape_distortion"),
            }
        )
    return rows


def create_app(frontend_dir: str | None = None) -> FastAPI:
    app = FastAPI(
        title="cartomorph steering service",
        description="Interactive steering of contiguous-cartogram construction",
        version="0.1.0",
    )
    sessions: dict[str, Session] = {}
    app.state.sessions = sessions

    @app.exception_handler(HTTPException)
    async def _http_error(_request: Request, exc: HTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={"code": exc.status_code, "message": "request failed", "detail": exc.detail},
        )

    def _session(session_id: str) -> Session:
        try:
            return sessions[session_id]
        except KeyError:
            raise HTTPException(404, f"unknown session {session_id!r}") from None

    @app.post("/sessions")
    async def create_session(map: UploadFile = File(...), stats: UploadFile = File(...)):
        map_bytes = await map.read()
        stats_bytes = await stats.read()
        try:
            parsed = parse_map(map_bytes, statistic_key=None)
            joined = attach_statistics(parsed, stats_bytes)
        except IngestionError as exc:
            raise HTTPException(422, str(exc)) from exc
        if isinstance(joined, MapModel):
            dataset = TimeSeriesDataset(
                joined, ("t0",), joined.statistics()[None, :]
            )
        else:
            dataset = joined
        dataset_hash = _hash(map_bytes.decode("utf-8", "replace"), stats_bytes.decode("utf-8", "replace"))
        session = Session(
            session_id=uuid.uuid4().hex[:12],
            dataset=dataset,
            dataset_hash=dataset_hash,
            params=SteeringParams(),
        )
        with session.lock:
            _apply_params(session)
        session.worker = threading.Thread(target=_worker_loop, args=(session,), daemon=True)
        session.worker.start()
        sessions[session.session_id] = session
        return {
            "session_id": session.session_id,
            "dataset_hash": dataset_hash,
            "times": list(dataset.times),
            "M_i": [float(v) for v in dataset.totals()],
            "regions": [
                {"id": r.region_id, "name": r.name} for r in dataset.mapmodel.regions
            ],
            "params": session.params.model_dump(),
            "param_hash": session.param_hash,
        }

    @app.post("/sessions/{session_id}/params")
    def set_params(session_id: str, params: SteeringParams):
        session = _session(session_id)
        params.validate_ranges(session.dataset.step_count)
        with session.lock:
            session.params = params
            _apply_params(session)
            invalidated = [
                t
                for t, key in enumerate(session.frame_keys)
                if key not in session.cache
            ]
            return {
                "params": params.model_dump(),
                "param_hash": session.param_hash,
                "invalidated": invalidated,
            }

    @app.get("/sessions/{session_id}/frames/{t}")
    def get_frame(session_id: str, t: int, u: float = 0.0):
        session = _session(session_id)
        with session.lock:
            count = session.dataset.step_count
            if not (0 <= t < count):
                raise HTTPException(404, f"time index {t} outside [0, {count - 1}]")
            if not (0.0 <= u < 1.0):
                raise HTTPException(400, "interpolation fraction u must be in [0, 1)")
            session.playhead = t
            session.wake.notify_all()
            key = session.frame_keys[t]
            frame = session.cache.get(key)
            state = session.status.get(key, "pending")
            if frame is None:
                return JSONResponse(
                    {"status": state, "time_index": t, "param_hash": session.param_hash}
                )
            if u == 0.0:
                payload = _frame_payload(session, t, frame)
                return JSONResponse(payload, headers={"ETag": f'"{key}"'})
            if t + 1 >= count:
                raise HTTPException(400, "cannot interpolate past the last frame")
            nxt = session.cache.get(session.frame_keys[t + 1])
            if frame.error or nxt is None or nxt.error:
                return JSONResponse(
                    {
                        "status": "pending",
                        "time_index": t,
                        "u": u,
                        "param_hash": session.param_hash,
                    }
                )
            blended = interpolate_vertices(frame.mapmodel, nxt.mapmodel, u)
            payload = {
                "status": "done",
                "time_index": t,
                "u": u,
                "param_hash": session.param_hash,
                "geojson": json.loads(to_geojson(blended)),
                "background_mass": (1 - u) * frame.background_mass + u * nxt.background_mass,
            }
            etag = f'"{key}:{session.frame_keys[t + 1]}:{u:.6f}"'
            return JSONResponse(payload, headers={"ETag": etag})

    @app.get("/sessions/{session_id}/series")
    def get_series(session_id: str):
        session = _session(session_id)
        with session.lock:
            totals = session.dataset.totals()
            frames = [session.cache.get(key) for key in session.frame_keys]
            reports = [f.report if f else None for f in frames]
            return {
                "param_hash": session.param_hash,
                "times": list(session.dataset.times),
                "M_i": [float(v) for v in totals],
                "M_b": [float(v) for v in session.masses],
                "A_i": [
                    float(m / (m + b)) for m, b in zip(totals, session.masses)
                ],
                "status": [session.status.get(key, "pending") for key in session.frame_keys],
                "epsilon": [r["epsilon"] if r else None for r in reports],
                "xi": [r["xi"] if r else None for r in reports],
                "hamming_avg": [r["hamming_avg"] if r else None for r in reports],
                "position_error": [r["position_error"] if r else None for r in reports],
                "wall_ms": [f.wall_ms if f else None for f in frames],
            }

    @app.get("/sessions/{session_id}/status")
    def get_status(session_id: str):
        session = _session(session_id)
        with session.lock:
            states = [session.status.get(key, "pending") for key in session.frame_keys]
            return {
                "param_hash": session.param_hash,
                "frames": states,
                "computing": any(s in ("pending", "running") for s in states),
            }

    @app.get("/ramp")
    def get_ramp():
        return load_ramp()

    if frontend_dir:
        from pathlib import Path as _Path

        index = _Path(frontend_dir) / "index.html"

        @app.get("/")
        def root():
            return FileResponse(index)

        app.mount("/static", StaticFiles(directory=frontend_dir), name="static")

    @app.on_event("shutdown")
    def _shutdown():
        for session in sessions.values():
            with session.lock:
                session.stopping = True
                session.wake.notify_all()

    return app
