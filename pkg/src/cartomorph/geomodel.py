"""Polygonal map model: ingestion, validation, normalization.

Coordinates are stored y-down (x right, y down) throughout the package;
GeoJSON input/output is y-up and gets flipped at the boundary.  Outer rings
carry positive shoelace area in the stored frame, holes negative.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace

import numpy as np
from shapely.geometry import LineString

from .errors import IngestionError

DEFAULT_SCALING_FRACTION = 0.9


def shoelace_area(ring: np.ndarray) -> float:
    """Signed shoelace area of a ring given as an (V, 2) open vertex list."""
    ring = np.asarray(ring, dtype=float)
    if ring.shape[0] < 3:
        return 0.0
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def ring_centroid(ring: np.ndarray) -> np.ndarray:
    """Area-weighted centroid of a single ring (shoelace moments)."""
    ring = np.asarray(ring, dtype=float)
    x = ring[:, 0]
    y = ring[:, 1]
    xn = np.roll(x, -1)
    yn = np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * float(np.sum(cross))
    if area == 0.0:
        return ring.mean(axis=0)
    cx = float(np.sum((x + xn) * cross)) / (6.0 * area)
    cy = float(np.sum((y + yn) * cross)) / (6.0 * area)
    return np.array([cx, cy])


@dataclass(frozen=True)
class Region:
    """One statistical region: id, display name, rings, positive statistic.

    ``rings`` is a tuple of (V, 2) float arrays, open (no repeated closing
    vertex).  Outer rings have positive shoelace area, holes negative.
    """

    region_id: str
    name: str
    rings: tuple[np.ndarray, ...]
    statistic: float

    def area(self) -> float:
        """Signed area over all rings; holes subtract."""
        return sum(shoelace_area(r) for r in self.rings)

    def centroid(self) -> np.ndarray:
        """Area-weighted centroid over all rings (holes subtract)."""
        total = 0.0
        acc = np.zeros(2)
        for ring in self.rings:
            a = shoelace_area(ring)
            acc += a * ring_centroid(ring)
            total += a
        if total == 0.0:
            return np.vstack(self.rings).mean(axis=0)
        return acc / total

    def vertex_count(self) -> int:
        return sum(r.shape[0] for r in self.rings)


@dataclass(frozen=True)
class NormalizationTransform:
    """Isotropic scale + offset fitting a map into the unit texture square."""

    scale: float
    offset: tuple[float, float]
    scaling_fraction: float

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points * self.scale + np.asarray(self.offset)


@dataclass(frozen=True)
class MapModel:
    """A set of regions plus their adjacency relation."""

    regions: tuple[Region, ...]
    adjacency: frozenset[tuple[str, str]] = frozenset()
    normalization: NormalizationTransform | None = None

    def region_ids(self) -> list[str]:
        return [r.region_id for r in self.regions]

    def statistics(self) -> np.ndarray:
        return np.array([r.statistic for r in self.regions])

    def total_statistic(self) -> float:
        return float(self.statistics().sum())

    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) over all vertices."""
        pts = np.vstack([r for reg in self.regions for r in reg.rings])
        return (
            float(pts[:, 0].min()),
            float(pts[:, 1].min()),
            float(pts[:, 0].max()),
            float(pts[:, 1].max()),
        )

    def with_statistics(self, values: np.ndarray) -> "MapModel":
        regions = tuple(
            replace(r, statistic=float(v)) for r, v in zip(self.regions, values)
        )
        return replace(self, regions=regions)

    def vertex_array(self) -> np.ndarray:
        """All vertices stacked as (N, 2) in region/ring order."""
        return np.vstack([ring for reg in self.regions for ring in reg.rings])

    def with_vertex_array(self, verts: np.ndarray) -> "MapModel":
        """Rebuild the model from a stacked vertex array (inverse of vertex_array)."""
        out = []
        pos = 0
        for reg in self.regions:
            rings = []
            for ring in reg.rings:
                k = ring.shape[0]
                rings.append(np.array(verts[pos : pos + k], dtype=float))
                pos += k
            out.append(replace(reg, rings=tuple(rings)))
        if pos != verts.shape[0]:
            raise ValueError("vertex array length mismatch")
        return replace(self, regions=tuple(out))


def _validate_ring(ring: np.ndarray, region_id: str) -> None:
    if ring.shape[0] < 3:
        raise IngestionError(f"region {region_id!r}: ring with fewer than 3 vertices")
    closed = np.vstack([ring, ring[:1]])
    if not LineString(closed).is_simple:
        raise IngestionError(f"region {region_id!r}: self-intersecting ring")


def _orient(ring: np.ndarray, outer: bool) -> np.ndarray:
    """Flip vertex order so outer rings get positive shoelace area, holes negative."""
    a = shoelace_area(ring)
    if (a < 0) == outer and a != 0:
        return ring[::-1].copy()
    return ring


def parse_map(
    geojson_bytes: bytes,
    statistic_key: str | None = None,
    id_key: str = "id",
    name_key: str = "name",
) -> MapModel:
    """Parse a GeoJSON FeatureCollection of (Multi)Polygons into a MapModel.

    The y axis is flipped so y grows downward and ring orientations are
    canonicalized.  When ``statistic_key`` is None statistics default to 1.0
    and are expected to be joined later via attach_statistics.
    """
    try:
        doc = json.loads(geojson_bytes)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise IngestionError(f"malformed GeoJSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise IngestionError("expected a GeoJSON FeatureCollection")

    regions: list[Region] = []
    seen: set[str] = set()
    for idx, feat in enumerate(doc.get("features", [])):
        props = feat.get("properties") or {}
        rid = feat.get("id", props.get(id_key))
        if rid is None:
            raise IngestionError(f"feature {idx}: missing id")
        rid = str(rid)
        if rid in seen:
            raise IngestionError(f"duplicate region id {rid!r}")
        seen.add(rid)
        name = str(props.get(name_key, rid))

        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        if gtype == "Polygon":
            polys = [geom["coordinates"]]
        elif gtype == "MultiPolygon":
            polys = geom["coordinates"]
        else:
            raise IngestionError(f"region {rid!r}: non-polygonal geometry {gtype!r}")

        if statistic_key is None:
            stat = 1.0
        else:
            if statistic_key not in props:
                raise IngestionError(f"region {rid!r}: missing statistic {statistic_key!r}")
            try:
                stat = float(props[statistic_key])
            except (TypeError, ValueError) as exc:
                raise IngestionError(f"region {rid!r}: non-numeric statistic") from exc
            if stat <= 0 or not math.isfinite(stat):
                raise IngestionError(f"region {rid!r}: non-positive statistic")

        rings: list[np.ndarray] = []
        for poly in polys:
            for ring_idx, coords in enumerate(poly):
                ring = np.asarray(coords, dtype=float)
                if ring.ndim != 2 or ring.shape[1] < 2:
                    raise IngestionError(f"region {rid!r}: malformed ring")
                ring = ring[:, :2].copy()
                # GeoJSON rings repeat the first vertex; store them open.
                if ring.shape[0] > 1 and np.allclose(ring[0], ring[-1]):
                    ring = ring[:-1]
                ring[:, 1] = -ring[:, 1]  # y-up -> y-down
                _validate_ring(ring, rid)
                rings.append(_orient(ring, outer=(ring_idx == 0)))
        if not rings:
            raise IngestionError(f"region {rid!r}: empty geometry")
        regions.append(Region(rid, name, tuple(rings), stat))

    if not regions:
        raise IngestionError("FeatureCollection contains no features")
    return MapModel(regions=tuple(regions))


def attach_statistics(
    mapmodel: MapModel,
    csv_bytes: bytes,
    id_column: str = "id",
    time_column: str | None = None,
):
    """Join a statistics CSV onto a map.

    Three layouts are accepted:
      * static: the id column plus exactly one value column;
      * wide temporal: the id column plus one column per time label;
      * long temporal: id, ``time_column`` and a single value column.

    Returns a MapModel for static data, otherwise a
    :class:`cartomorph.temporal.TimeSeriesDataset`.
    """
    from .temporal import TimeSeriesDataset  # local import to avoid a cycle

    text = csv_bytes.decode("utf-8-sig")
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise IngestionError("statistics CSV has no data rows")
    header = list(rows[0].keys())
    if id_column not in header:
        raise IngestionError(f"statistics CSV missing id column {id_column!r}")

    ids = mapmodel.region_ids()
    known = set(ids)

    def parse_value(raw, context):
        try:
            v = float(raw)
        except (TypeError, ValueError) as exc:
            raise IngestionError(f"non-numeric cell at {context}") from exc
        if v <= 0 or not math.isfinite(v):
            raise IngestionError(f"non-positive statistic at {context}")
        return v

    if time_column is not None:
        if time_column not in header:
            raise IngestionError(f"statistics CSV missing time column {time_column!r}")
        value_cols = [c for c in header if c not in (id_column, time_column)]
        if len(value_cols) != 1:
            raise IngestionError("long-format CSV needs exactly one value column")
        vcol = value_cols[0]
        table: dict[str, dict[str, float]] = {}
        times_order: list[str] = []
        for row in rows:
            rid = row[id_column]
            if rid not in known:
                raise IngestionError(f"unknown region id {rid!r} in statistics CSV")
            t = row[time_column]
            if t not in times_order:
                times_order.append(t)
            table.setdefault(rid, {})[t] = parse_value(row[vcol], f"({rid}, {t})")
        for rid in ids:
            missing = [t for t in times_order if t not in table.get(rid, {})]
            if rid not in table or missing:
                raise IngestionError(f"region {rid!r}: missing time steps {missing or times_order}")
        values = np.array([[table[rid][t] for rid in ids] for t in times_order])
        return TimeSeriesDataset(mapmodel, tuple(times_order), values)

    value_cols = [c for c in header if c != id_column]
    if not value_cols:
        raise IngestionError("statistics CSV has no value columns")
    by_id = {}
    for row in rows:
        rid = row[id_column]
        if rid not in known:
            raise IngestionError(f"unknown region id {rid!r} in statistics CSV")
        by_id[rid] = row
    missing = [rid for rid in ids if rid not in by_id]
    if missing:
        raise IngestionError(f"statistics CSV missing regions {missing}")

    if len(value_cols) == 1:
        col = value_cols[0]
        vals = np.array([parse_value(by_id[rid][col], f"({rid}, {col})") for rid in ids])
        return mapmodel.with_statistics(vals)

    values = np.array(
        [[parse_value(by_id[rid][col], f"({rid}, {col})") for rid in ids] for col in value_cols]
    )
    return TimeSeriesDataset(mapmodel, tuple(value_cols), values)


def normalize(mapmodel: MapModel, s: float = DEFAULT_SCALING_FRACTION, flip_y: bool = False) -> MapModel:
    """Fit the map isotropically into the unit square.

    The larger bounding-box dimension spans [0.5 - s/2, 0.5 + s/2]; the other
    dimension is centered.  ``flip_y`` negates y first, for callers that built
    models directly in a y-up frame.
    """
    if not (0.0 < s < 1.0):
        raise ValueError("scaling fraction s must be in (0, 1)")
    verts = mapmodel.vertex_array()
    if flip_y:
        verts = verts * np.array([1.0, -1.0])
        mapmodel = mapmodel.with_vertex_array(verts)
    xmin, ymin = verts.min(axis=0)
    xmax, ymax = verts.max(axis=0)
    extent = max(xmax - xmin, ymax - ymin)
    if extent <= 0:
        raise IngestionError("degenerate bounding box (zero extent)")
    scale = s / extent
    cx = 0.5 * (xmin + xmax)
    cy = 0.5 * (ymin + ymax)
    offset = (0.5 - scale * cx, 0.5 - scale * cy)
    transform = NormalizationTransform(scale=scale, offset=offset, scaling_fraction=s)
    new_verts = transform.apply(verts)
    out = mapmodel.with_vertex_array(new_verts)
    return replace(out, normalization=transform)


def densify(mapmodel: MapModel, max_edge: float) -> MapModel:
    """Subdivide every ring edge longer than ``max_edge`` with equidistant points.

    Applied once, before any deformation, so long straight boundaries can
    bend under a smooth displacement field.
    """
    if max_edge <= 0:
        raise ValueError("max_edge must be positive")
    regions = []
    for reg in mapmodel.regions:
        rings = []
        for ring in reg.rings:
            nxt = np.roll(ring, -1, axis=0)
            lengths = np.hypot(*(nxt - ring).T)
            pieces = np.maximum(1, np.ceil(lengths / max_edge).astype(int))
            if pieces.max() == 1:
                rings.append(ring)
                continue
            chunks = []
            for p0, p1, k in zip(ring, nxt, pieces):
                ts = np.arange(k) / k
                chunks.append(p0 + ts[:, None] * (p1 - p0))
            rings.append(np.vstack(chunks))
        regions.append(replace(reg, rings=tuple(rings)))
    return replace(mapmodel, regions=tuple(regions))


def detect_adjacencies(mapmodel: MapModel, epsilon: float) -> frozenset[tuple[str, str]]:
    """Region pairs sharing a boundary: at least two coincident vertices within epsilon.

    Vertices are matched through a uniform grid of cell size epsilon with a
    3x3 neighborhood probe, so the result is independent of ring vertex order.
    A single shared corner does not make two regions adjacent.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    cell_sets: list[set[tuple[int, int]]] = []
    cell_owners: dict[tuple[int, int], set[int]] = {}
    for ridx, reg in enumerate(mapmodel.regions):
        q = np.round(np.vstack(reg.rings) / epsilon).astype(np.int64)
        cs = set(map(tuple, q))
        cell_sets.append(cs)
        for c in cs:
            cell_owners.setdefault(c, set()).add(ridx)

    neighborhood = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)]
    shared_cells: dict[tuple[int, int], int] = {}
    for a, cs in enumerate(cell_sets):
        for cx, cy in cs:
            partners: set[int] = set()
            for dx, dy in neighborhood:
                partners.update(cell_owners.get((cx + dx, cy + dy), ()))
            for b in partners:
                if b > a:
                    key = (a, b)
                    shared_cells[key] = shared_cells.get(key, 0) + 1

    ids = mapmodel.region_ids()
    return frozenset(
        tuple(sorted((ids[a], ids[b])))
        for (a, b), count in shared_cells.items()
        if count >= 2
    )


def with_adjacency(mapmodel: MapModel, epsilon: float) -> MapModel:
    return replace(mapmodel, adjacency=detect_adjacencies(mapmodel, epsilon))


def to_geojson(mapmodel: MapModel, extra_properties: dict | None = None) -> bytes:
    """Serialize back to GeoJSON, flipping to the conventional y-up frame.

    Emission uses y -> 1 - y so normalized maps stay inside [0, 1]^2 and
    render upright in standard viewers.
    """
    features = []
    for reg in mapmodel.regions:
        outers = [(i, r) for i, r in enumerate(reg.rings) if shoelace_area(r) >= 0]
        holes = [(i, r) for i, r in enumerate(reg.rings) if shoelace_area(r) < 0]
        if not outers:
            raise ValueError(f"region {reg.region_id!r} has no positively oriented ring")
        # assign each hole to the outer ring that contains its first vertex
        polys: list[list[np.ndarray]] = [[r] for _, r in outers]
        for _, hole in holes:
            placed = False
            for pi, (_, outer) in enumerate(outers):
                if _point_in_ring(hole[0], outer):
                    polys[pi].append(hole)
                    placed = True
                    break
            if not placed and polys:
                polys[0].append(hole)

        def emit_ring(r: np.ndarray) -> list[list[float]]:
            closed = np.vstack([r, r[:1]])
            return [[float(x), float(1.0 - y)] for x, y in closed]

        coords = [[emit_ring(r) for r in poly] for poly in polys]
        geometry = (
            {"type": "Polygon", "coordinates": coords[0]}
            if len(coords) == 1
            else {"type": "MultiPolygon", "coordinates": coords}
        )
        props = {"name": reg.name, "statistic": reg.statistic}
        if extra_properties and reg.region_id in extra_properties:
            props.update(extra_properties[reg.region_id])
        features.append(
            {"type": "Feature", "id": reg.region_id, "properties": props, "geometry": geometry}
        )
    doc = {"type": "FeatureCollection", "features": features}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def _point_in_ring(point: np.ndarray, ring: np.ndarray) -> bool:
    """Even-odd point-in-polygon test for a single ring."""
    x, y = point
    inside = False
    v = ring
    nxt = np.roll(v, -1, axis=0)
    for (x0, y0), (x1, y1) in zip(v, nxt):
        if (y0 <= y) != (y1 <= y):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if xc > x:
                inside = not inside
    return inside
