import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cartomorph.errors import IngestionError
from cartomorph.geomodel import (
    MapModel,
    Region,
    attach_statistics,
    densify,
    detect_adjacencies,
    normalize,
    parse_map,
    shoelace_area,
    to_geojson,
)
from cartomorph.raster import region_mask
from cartomorph.temporal import TimeSeriesDataset

EPS = 0.5 / 1024


def feature(fid, coords, stat=1.0, geom_type="Polygon"):
    return {
        "type": "Feature",
        "id": fid,
        "properties": {"name": fid, "value": stat},
        "geometry": {"type": geom_type, "coordinates": coords},
    }


def collection(*features):
    return json.dumps({"type": "FeatureCollection", "features": list(features)}).encode()


def unit_square(x0=0.0, y0=0.0, w=1.0, h=1.0):
    return [[[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h], [x0, y0]]]


class TestParse:
    def test_single_feature_identity(self):
        m = parse_map(collection(feature("A", unit_square(), 5.0)), "value")
        assert len(m.regions) == 1
        assert m.regions[0].statistic == 5.0
        assert m.regions[0].region_id == "A"

    def test_non_positive_statistic_rejected(self):
        with pytest.raises(IngestionError, match="non-positive statistic"):
            parse_map(collection(feature("A", unit_square(), 0.0)), "value")

    def test_duplicate_ids_rejected(self):
        doc = collection(feature("A", unit_square()), feature("A", unit_square(1.5)))
        with pytest.raises(IngestionError, match="duplicate"):
            parse_map(doc, "value")

    def test_non_polygonal_rejected(self):
        bad = feature("A", [[0, 0], [1, 1]], geom_type="LineString")
        with pytest.raises(IngestionError, match="non-polygonal"):
            parse_map(collection(bad), "value")

    def test_malformed_json(self):
        with pytest.raises(IngestionError, match="malformed"):
            parse_map(b"{not json", "value")

    def test_y_axis_flipped_down(self):
        m = parse_map(collection(feature("A", unit_square(), 1.0)), "value")
        ys = m.regions[0].rings[0][:, 1]
        assert ys.min() == -1.0 and ys.max() == 0.0

    def test_ring_orientation_canonicalized(self):
        # clockwise input ring still yields a positive stored area
        cw = [[[0, 0], [0, 1], [1, 1], [1, 0], [0, 0]]]
        m = parse_map(collection(feature("A", cw, 1.0)), "value")
        assert m.regions[0].area() > 0

    def test_self_intersecting_ring_rejected(self):
        bowtie = [[[0, 0], [1, 1], [1, 0], [0, 1], [0, 0]]]
        with pytest.raises(IngestionError, match="self-intersecting"):
            parse_map(collection(feature("A", bowtie)), "value")

    def test_too_few_vertices_rejected(self):
        with pytest.raises(IngestionError, match="fewer than 3"):
            parse_map(collection(feature("A", [[[0, 0], [1, 0], [0, 0]]])), "value")

    def test_multipolygon_and_holes(self):
        outer = [[0, 0], [4, 0], [4, 4], [0, 4], [0, 0]]
        hole = [[1, 1], [2, 1], [2, 2], [1, 2], [1, 1]]
        m = parse_map(
            collection(feature("A", [outer, hole], 2.0)), "value"
        )
        region = m.regions[0]
        assert len(region.rings) == 2
        # hole subtracts: 16 - 1
        assert region.area() == pytest.approx(15.0)


class TestStatistics:
    def _two_region_map(self):
        doc = collection(
            feature("A", unit_square(0, 0)), feature("B", unit_square(1, 0))
        )
        return parse_map(doc, "value")

    def test_static_join(self):
        m = self._two_region_map()
        out = attach_statistics(m, b"id,value\nA,3\nB,7\n")
        assert isinstance(out, MapModel)
        assert list(out.statistics()) == [3.0, 7.0]

    def test_temporal_wide_column_sums(self):
        m = self._two_region_map()
        out = attach_statistics(m, b"id,t0,t1,t2\nA,1,2,3\nB,10,20,30\n")
        assert isinstance(out, TimeSeriesDataset)
        np.testing.assert_allclose(out.totals(), [11.0, 22.0, 33.0])

    def test_temporal_long_format(self):
        m = self._two_region_map()
        csv = b"id,week,cases\nA,w1,1\nB,w1,2\nA,w2,5\nB,w2,6\n"
        out = attach_statistics(m, csv, time_column="week")
        assert out.times == ("w1", "w2")
        np.testing.assert_allclose(out.statistics, [[1, 2], [5, 6]])

    def test_unknown_id_named_in_error(self):
        m = self._two_region_map()
        with pytest.raises(IngestionError, match="XX"):
            attach_statistics(m, b"id,value\nA,3\nXX,7\n")

    def test_missing_time_step(self):
        m = self._two_region_map()
        csv = b"id,week,cases\nA,w1,1\nB,w1,2\nA,w2,5\n"
        with pytest.raises(IngestionError, match="missing time steps"):
            attach_statistics(m, csv, time_column="week")

    def test_non_numeric_cell(self):
        m = self._two_region_map()
        with pytest.raises(IngestionError, match="non-numeric"):
            attach_statistics(m, b"id,value\nA,x\nB,7\n")


class TestNormalize:
    def _square(self):
        ring = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]])
        return MapModel(regions=(Region("A", "A", (ring,), 1.0),))

    def test_square_default_scaling(self):
        m = normalize(self._square(), 0.9)
        xmin, ymin, xmax, ymax = m.bounds()
        assert (xmin, ymin, xmax, ymax) == pytest.approx((0.05, 0.05, 0.95, 0.95))

    def test_half_scaling(self):
        m = normalize(self._square(), 0.5)
        xmin, _, xmax, _ = m.bounds()
        assert (xmin, xmax) == pytest.approx((0.25, 0.75))

    def test_two_to_one_aspect_centered(self):
        ring = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]])
        m = normalize(MapModel(regions=(Region("A", "A", (ring,), 1.0),)), 0.9)
        xmin, ymin, xmax, ymax = m.bounds()
        assert (xmin, xmax) == pytest.approx((0.05, 0.95))
        assert (ymin, ymax) == pytest.approx((0.275, 0.725))

    def test_idempotent(self):
        m1 = normalize(self._square(), 0.9)
        m2 = normalize(m1, 0.9)
        np.testing.assert_allclose(m1.vertex_array(), m2.vertex_array(), atol=1e-12)

    def test_degenerate_bbox(self):
        ring = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]])
        with pytest.raises(IngestionError, match="degenerate"):
            normalize(MapModel(regions=(Region("A", "A", (ring,), 1.0),)), 0.9)

    @given(st.floats(max_value=0.0) | st.floats(min_value=1.0))
    def test_invalid_fraction_rejected(self, s):
        with pytest.raises(ValueError):
            normalize(self._square(), s)


class TestShoelace:
    def test_unit_square_ccw(self):
        ring = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        assert shoelace_area(ring) == pytest.approx(1.0)

    def test_unit_square_cw(self):
        ring = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=float)
        assert shoelace_area(ring) == pytest.approx(-1.0)

    def test_triangle_half(self):
        ring = np.array([[0, 0], [1, 0], [0, 1]], dtype=float)
        assert abs(shoelace_area(ring)) == pytest.approx(0.5)

    def test_degenerate(self):
        assert shoelace_area(np.array([[0.0, 0.0], [1.0, 1.0]])) == 0.0

    @pytest.mark.parametrize("k", [6, 7, 8])
    def test_raster_consistency(self, k):
        # vector area matches pixel count within 2/sqrt(m) relative
        n = 1 << k
        ring = np.array([[0.1, 0.2], [0.8, 0.15], [0.9, 0.8], [0.25, 0.85]])
        area = shoelace_area(ring)
        count = region_mask([ring], n).sum()
        rel = abs(count / (n * n) - area) / area
        assert rel <= 2.0 / np.sqrt(n * n)


class TestAdjacency:
    def _shared_edge_map(self):
        a = np.array([[0.0, 0.0], [0.5, 0.0], [0.5, 1.0], [0.0, 1.0]])
        b = np.array([[0.5, 0.0], [1.0, 0.0], [1.0, 1.0], [0.5, 1.0]])
        return MapModel(
            regions=(Region("A", "A", (a,), 1.0), Region("B", "B", (b,), 1.0))
        )

    def test_shared_edge_detected(self):
        assert detect_adjacencies(self._shared_edge_map(), EPS) == {("A", "B")}

    def test_corner_touch_is_not_adjacency(self):
        a = np.array([[0.0, 0.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
        b = np.array([[0.5, 0.5], [1.0, 0.5], [1.0, 1.0], [0.5, 1.0]])
        m = MapModel(regions=(Region("A", "A", (a,), 1.0), Region("B", "B", (b,), 1.0)))
        assert detect_adjacencies(m, EPS) == frozenset()

    def test_island_has_no_pairs(self):
        a = np.array([[0.0, 0.0], [0.4, 0.0], [0.4, 0.4], [0.0, 0.4]])
        b = np.array([[0.6, 0.6], [0.9, 0.6], [0.9, 0.9], [0.6, 0.9]])
        m = MapModel(regions=(Region("A", "A", (a,), 1.0), Region("B", "B", (b,), 1.0)))
        assert detect_adjacencies(m, EPS) == frozenset()

    @given(st.integers(0, 3), st.integers(0, 3))
    @settings(max_examples=16, deadline=None)
    def test_rotation_invariance(self, ra, rb):
        m = self._shared_edge_map()
        rotated = MapModel(
            regions=(
                Region("A", "A", (np.roll(m.regions[0].rings[0], ra, axis=0),), 1.0),
                Region("B", "B", (np.roll(m.regions[1].rings[0], rb, axis=0),), 1.0),
            )
        )
        assert detect_adjacencies(rotated, EPS) == {("A", "B")}


class TestDensify:
    def test_edges_subdivided(self):
        ring = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        m = MapModel(regions=(Region("A", "A", (ring,), 1.0),))
        dense = densify(m, 0.1)
        out = dense.regions[0].rings[0]
        assert out.shape[0] == 40  # 4 edges of length 1.0 -> 10 pieces each
        seg = np.hypot(*np.diff(np.vstack([out, out[:1]]), axis=0).T)
        assert seg.max() <= 0.1 + 1e-12

    def test_geometry_preserved(self):
        ring = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        m = MapModel(regions=(Region("A", "A", (ring,), 1.0),))
        dense = densify(m, 0.25)
        assert shoelace_area(dense.regions[0].rings[0]) == pytest.approx(1.0)


class TestRoundTrip:
    def test_geojson_round_trip(self):
        doc = collection(
            feature("A", unit_square(0, 0), 2.0), feature("B", unit_square(1, 0), 5.0)
        )
        m = normalize(parse_map(doc, "value"), 0.9)
        emitted = to_geojson(m)
        parsed = normalize(parse_map(emitted, "statistic"), 0.9)
        np.testing.assert_allclose(
            m.vertex_array(), parsed.vertex_array(), atol=1e-12
        )
        assert list(parsed.statistics()) == [2.0, 5.0]

    def test_emitted_geojson_closes_rings(self):
        m = normalize(parse_map(collection(feature("A", unit_square())), None), 0.9)
        doc = json.loads(to_geojson(m))
        ring = doc["features"][0]["geometry"]["coordinates"][0]
        assert ring[0] == ring[-1]
