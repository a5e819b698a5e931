import numpy as np
import pytest

from cartomorph.engine import (
    CartogramEngine,
    StoppingCriteria,
    run,
    target_weights,
)
from cartomorph.errors import RegionCollapsedError
from cartomorph.fixtures import two_region_map
from cartomorph.geomodel import MapModel, Region, normalize


class TestTargetWeights:
    def _map(self, stats):
        return two_region_map(stats) if len(stats) == 2 else None

    def test_equal_statistics(self):
        w = target_weights(two_region_map((1.0, 1.0)), 100)
        np.testing.assert_allclose(w, [50.0, 50.0])

    def test_one_three_split(self):
        w = target_weights(two_region_map((1.0, 3.0)), 100)
        np.testing.assert_allclose(w, [25.0, 75.0])

    def test_single_region(self):
        ring = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        m = MapModel(regions=(Region("A", "A", (ring,), 7.0),))
        np.testing.assert_allclose(target_weights(m, 180), [180.0])

    def test_sum_equals_map_pixels(self):
        w = target_weights(two_region_map((2.0, 5.0)), 12345)
        assert w.sum() == pytest.approx(12345.0, rel=1e-12)


class TestRun:
    def test_equalized_input_stops_immediately(self):
        # statistics proportional to areas: nothing to do
        m = two_region_map((1.0, 1.0))
        res = run(m, StoppingCriteria(), k=6)
        assert res.stop_reason == "converged"
        assert res.state.iteration <= 1
        np.testing.assert_allclose(
            res.state.mapmodel.vertex_array(),
            res.state.mapmodel.vertex_array(),
        )

    def test_two_region_analytic_ratio(self):
        # tighter threshold drives the allocation to the analytic 1:3 split
        m = two_region_map((1.0, 3.0))
        res = run(m, StoppingCriteria(error_threshold=0.004), k=8)
        counts = res.state.pixel_counts
        assert res.stop_reason == "converged"
        assert counts[1] / counts[0] == pytest.approx(3.0, rel=0.01)

    def test_determinism_bit_identical(self):
        m = two_region_map((1.0, 2.0))
        r1 = run(m, StoppingCriteria(), k=6)
        r2 = run(m, StoppingCriteria(), k=6)
        assert (r1.state.mapmodel.vertex_array() == r2.state.mapmodel.vertex_array()).all()
        assert [t.xi for t in r1.trace] == [t.xi for t in r2.trace]

    def test_vertex_and_region_conservation(self):
        m = two_region_map((1.0, 3.0))
        engine = CartogramEngine(m, StoppingCriteria(max_iterations=5), k=6)
        res = engine.run()
        assert len(res.state.mapmodel.regions) == 2
        assert res.state.mapmodel.vertex_array().shape == engine.initial_map.vertex_array().shape

    def test_mass_conservation_fixed_mass_policy(self):
        from cartomorph.raster import build_density

        m = two_region_map((1.0, 3.0))
        engine = CartogramEngine(m, StoppingCriteria(max_iterations=8), k=6)
        expected = engine.total_statistic + engine.background_mass
        state = engine.evaluate(engine.initial_map, 0, labels=engine._labels0)
        for _ in range(4):
            dens = build_density(
                engine.statistics, state.labels, engine.current_bdv(state.labels)
            )
            assert dens.total == pytest.approx(expected, rel=1e-9)
            state = engine.step(state)

    def test_epsilon_non_increasing_after_transient(self):
        m = two_region_map((1.0, 3.0))
        res = run(m, StoppingCriteria(), k=8)
        eps = [t.epsilon for t in res.trace]
        for a, b in zip(eps[3:], eps[4:]):
            assert b <= a + 5e-4

    def test_region_collapse_carries_iteration(self):
        # a sliver region with near-zero statistic shrinks to nothing
        sliver = np.array([[0.48, 0.0], [0.52, 0.0], [0.52, 1.0], [0.48, 1.0]])
        left = np.array([[0.0, 0.0], [0.48, 0.0], [0.48, 1.0], [0.0, 1.0]])
        right = np.array([[0.52, 0.0], [1.0, 0.0], [1.0, 1.0], [0.52, 1.0]])
        m = MapModel(
            regions=(
                Region("L", "L", (left,), 100.0),
                Region("M", "M", (sliver,), 1e-4),
                Region("R", "R", (right,), 100.0),
            )
        )
        m = normalize(m, 0.9)
        with pytest.raises(RegionCollapsedError) as err:
            run(m, StoppingCriteria(error_threshold=1e-6, max_iterations=400), k=5)
        assert err.value.iteration >= 1
        assert err.value.region_id == "M"

    def test_stagnation_returns_best_state(self):
        m = two_region_map((1.0, 3.0))
        criteria = StoppingCriteria(error_threshold=1e-9, stagnation_window=5, max_iterations=200)
        res = run(m, criteria, k=6)
        assert res.stop_reason == "stagnation"
        xis = [t.xi for t in res.trace]
        assert res.state.xi == pytest.approx(min(xis))

    def test_trace_csv_format(self):
        m = two_region_map((1.0, 1.0))
        res = run(m, StoppingCriteria(), k=6)
        lines = res.trace_csv().strip().splitlines()
        assert lines[0] == "iteration,epsilon,xi,millis"
        assert len(lines) == len(res.trace) + 1

    def test_bdv_multiplier_changes_targets(self):
        m = two_region_map((1.0, 3.0))
        e1 = CartogramEngine(m, k=6, bdv_multiplier=1.0)
        e2 = CartogramEngine(m, k=6, bdv_multiplier=1.05)
        assert e2.background_mass == pytest.approx(1.05 * e1.background_mass)
        assert (e2.weights_px < e1.weights_px).all()

    def test_rederive_bdv_mode_runs(self):
        m = two_region_map((1.0, 3.0))
        res = run(m, StoppingCriteria(), k=6, bdv_mode="rederive")
        assert res.stop_reason == "converged"

    def test_invalid_criteria(self):
        with pytest.raises(ValueError):
            StoppingCriteria(error_threshold=0.0)
        with pytest.raises(ValueError):
            StoppingCriteria(stagnation_window=0)
