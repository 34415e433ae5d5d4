import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chirpbeam.codebook import (CodebookGrid, TriangleRegion, angular_span, child_codewords,
                                chirp_codeword, chirp_vectors, dft_codebook,
                                distance_ring_codebook, elementary_codebook, hierarchy_depth,
                                intercept_grid, layer_codewords, read_codebook,
                                top_layer_codebook, top_layer_count, wrap_intercept,
                                write_codebook)
from chirpbeam.core import KbPoint, SystemConfig, kb_to_params, nearfield_steering

CFG = SystemConfig(512, 50e9)


def depth_by_halving(cfg):
    span, layers = angular_span(cfg), 1
    while span > 2.0 / cfg.n_bs * (1 + 1e-9):
        span /= 2
        layers += 1
    return layers


def descend_all(cfg, region, parent, depth):
    """Every leaf region below ``region`` after ``depth`` subdivisions."""
    if depth == 0:
        return [region]
    sub = child_codewords(cfg, region, parent)
    out = []
    for r, o in zip(sub.regions, sub.owners):
        out.extend(descend_all(cfg, r, o, depth - 1))
    return out


class TestChirpCodeword:
    def test_center_entry(self):
        cw = chirp_codeword(CFG, KbPoint(1e-4, 0.3))
        assert cw.vector[CFG.n_bs // 2 - 1] == pytest.approx(1 / math.sqrt(CFG.n_bs))

    @given(st.floats(0, 1.22e-4), st.floats(-1, 1))
    @settings(max_examples=200, deadline=None)
    def test_unit_norm_equal_modulus(self, k, b):
        v = chirp_codeword(CFG, KbPoint(k, b)).vector
        np.testing.assert_allclose(np.abs(v), 1 / math.sqrt(CFG.n_bs), rtol=1e-12)
        assert np.vdot(v, v).real == pytest.approx(1.0, abs=1e-12)

    def test_zero_slope_is_dft_column(self):
        b = -1 + 2 * 37 / 512
        v = chirp_codeword(CFG, KbPoint(0.0, b)).vector
        np.testing.assert_allclose(v, np.exp(-1j * np.pi * b * CFG.indices) / math.sqrt(512),
                                   atol=1e-13)

    def test_matched_coherence(self):
        p = KbPoint(6e-5, 0.25)
        a = nearfield_steering(CFG, kb_to_params(CFG, p), "taylor")
        w = chirp_codeword(CFG, p).vector
        assert abs(np.vdot(w, a)) == pytest.approx(math.sqrt(CFG.n_bs), rel=1e-12)

    def test_intercept_periodicity(self):
        a = chirp_vectors(CFG, 3e-5, 0.9)
        b = chirp_vectors(CFG, 3e-5, 0.9 - 2.0)
        np.testing.assert_allclose(a, b, atol=1e-12)
        assert wrap_intercept(1.0) == -1.0
        assert wrap_intercept(1.25) == pytest.approx(-0.75)

    def test_beamformer_is_conjugate(self):
        cw = chirp_codeword(CFG, KbPoint(2e-5, 0.1))
        np.testing.assert_array_equal(cw.beamformer, np.conj(cw.vector))


class TestParseval:
    @pytest.mark.parametrize("n_bs", [64, 256, 512])
    def test_column_sum_constant(self, n_bs):
        cfg = SystemConfig(n_bs, 50e9)
        rng = np.random.default_rng(n_bs)
        bq = intercept_grid(n_bs)
        for _ in range(50):
            v = np.exp(2j * np.pi * rng.random(n_bs))
            k0 = rng.uniform(0, cfg.k_max)
            w = chirp_vectors(cfg, np.full(n_bs, k0), bq)
            total = np.sum(np.abs(w.conj() @ v) ** 2)
            assert total == pytest.approx(n_bs, rel=1e-6)


class TestHierarchyConstants:
    def test_reference_values(self):
        assert angular_span(CFG) == pytest.approx(0.0625, rel=1e-12)
        assert top_layer_count(CFG) == 64
        assert hierarchy_depth(CFG) == 5

    def test_small_array_single_layer(self):
        assert hierarchy_depth(SystemConfig(2, 50e9)) == 1

    @pytest.mark.parametrize("n_bs", [4, 8, 16, 64, 128, 256, 384, 512, 1000, 1024, 2048])
    def test_depth_matches_halving_oracle(self, n_bs):
        cfg = SystemConfig(n_bs, 50e9)
        assert hierarchy_depth(cfg) == depth_by_halving(cfg)

    def test_n128(self):
        cfg = SystemConfig(128, 50e9)
        assert angular_span(cfg) == pytest.approx(math.sqrt(2 / 128))
        assert top_layer_count(cfg) == 2 * math.ceil(2 / math.sqrt(2 / 128)) == 32


class TestTopLayer:
    def test_layout(self):
        cws, regions = top_layer_codebook(CFG)
        assert len(cws) == len(regions) == 64
        left, right = cws[:32], cws[32:]
        assert all(c.point.k == 0.0 for c in left)
        assert all(c.point.k == CFG.k_max for c in right)
        np.testing.assert_allclose([c.point.b for c in left], -1 + 0.0625 * np.arange(32))
        np.testing.assert_allclose([c.point.b for c in right],
                                   -1 + 0.0625 * np.arange(32) + 0.03125)
        assert len({c.id for c in cws}) == 64

    def test_tiling_area(self):
        _, regions = top_layer_codebook(CFG)
        assert sum(r.area for r in regions) == pytest.approx(2 * CFG.k_max, rel=1e-12)

    def test_points_covered_once(self):
        _, regions = top_layer_codebook(CFG)
        rng = np.random.default_rng(0)
        for _ in range(300):
            p = KbPoint(rng.uniform(0, CFG.k_max), rng.uniform(-1, 1))
            hits = sum(r.contains(p, tol=0.0) for r in regions)
            assert hits == 1

    def test_regions_have_apex_at_owner(self):
        cws, regions = top_layer_codebook(CFG)
        for c, r in zip(cws, regions):
            assert r.apex.k == c.point.k
            assert wrap_intercept(r.apex.b) == pytest.approx(c.point.b)
        assert {r.orientation for r in regions} == {"left", "right"}

    def test_non_power_of_two_full_coverage(self):
        cfg = SystemConfig(384, 50e9)
        _, regions = top_layer_codebook(cfg)
        assert sum(r.area for r in regions) == pytest.approx(2 * cfg.k_max, rel=1e-12)


class TestSubdivision:
    def test_case1_midpoints(self):
        cws, regions = top_layer_codebook(CFG)
        parent, region = cws[2], regions[2]
        sub = child_codewords(CFG, region, parent)
        b = parent.point.b
        bm = angular_span(CFG)
        got = sorted((c.point.k, c.point.b) for c in sub.children)
        want = sorted([(CFG.k_max / 2, b - bm / 4), (CFG.k_max / 2, b + bm / 4), (CFG.k_max, b)])
        np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-15)

    def test_children_tile_parent(self):
        cws, regions = top_layer_codebook(CFG)
        for j in (0, 5, 40, 63):
            sub = child_codewords(CFG, regions[j], cws[j])
            assert len(sub.children) == 3 and len(sub.regions) == 4
            assert sub.owners[0] is cws[j]
            total = sum(r.area for r in sub.regions)
            assert total == pytest.approx(regions[j].area, rel=1e-12)
            for r in sub.regions:
                assert r.k_extent == pytest.approx(regions[j].k_extent / 2)
                assert r.b_extent == pytest.approx(regions[j].b_extent / 2)

    def test_owner_at_child_apex(self):
        cws, regions = top_layer_codebook(CFG)
        sub = child_codewords(CFG, regions[3], cws[3])
        for r, o in zip(sub.regions, sub.owners):
            assert r.apex.k == pytest.approx(o.point.k)
            assert wrap_intercept(r.apex.b) == pytest.approx(o.point.b)

    def test_bottom_cells_match_dft_resolution(self):
        cws, regions = top_layer_codebook(CFG)
        leaves = descend_all(CFG, regions[7], cws[7], hierarchy_depth(CFG) - 1)
        assert len(leaves) == 4 ** 4
        assert all(r.b_extent == pytest.approx(2 / CFG.n_bs) for r in leaves)
        assert sum(r.area for r in leaves) == pytest.approx(regions[7].area, rel=1e-12)

    def test_apex_mismatch_rejected(self):
        cws, regions = top_layer_codebook(CFG)
        with pytest.raises(ValueError):
            child_codewords(CFG, regions[0], cws[1])

    def test_degenerate_region_rejected(self):
        p = KbPoint(0.0, 0.0)
        with pytest.raises(ValueError):
            TriangleRegion((p, KbPoint(1e-5, 0.1), KbPoint(2e-5, 0.2)))

    def test_layer_codeword_counts(self):
        assert len(layer_codewords(CFG, 1)) == 64
        assert len(layer_codewords(CFG, 2)) == 64 * 3


class TestGrids:
    def test_elementary_size(self):
        cb = elementary_codebook(CFG)
        assert len(cb) == 8192
        assert isinstance(cb, CodebookGrid)
        assert len(elementary_codebook(SystemConfig(1024, 100e9, r_min_override=10.0),
                                       slope_bins=16)) == 16384

    def test_elementary_spacing_uniform(self):
        cb = elementary_codebook(CFG)
        np.testing.assert_allclose(np.diff(cb.slopes), cb.slopes[1] - cb.slopes[0], rtol=1e-12)
        np.testing.assert_allclose(np.diff(cb.intercepts), 2 / CFG.n_bs, rtol=1e-12)
        assert cb.slopes[0] == 0.0 and cb.slopes[-1] == pytest.approx(CFG.k_max)
        # row-major in (k, b)
        assert cb[1].point.k == cb[0].point.k
        assert cb[CFG.n_bs].point.k == cb.slopes[1]

    def test_single_slope_is_dft(self):
        np.testing.assert_array_equal(elementary_codebook(CFG, 1).matrix, dft_codebook(CFG).matrix)

    def test_dft_orthonormal(self):
        m = dft_codebook(SystemConfig(64, 50e9)).matrix
        np.testing.assert_allclose(m.conj() @ m.T, np.eye(64), atol=1e-10)
        assert len(dft_codebook(CFG)) == 512

    @pytest.mark.parametrize("theta", [-0.731, -0.2, 0.0, 0.4449, 0.99])
    def test_dft_argmax_vs_brute_force(self, theta):
        cb = dft_codebook(CFG)
        h = np.exp(-1j * np.pi * theta * CFG.indices)
        got = int(np.argmax(np.abs(cb.matrix.conj() @ h)))
        grid = -1 + 2 * np.arange(512) / 512
        dist = np.abs(np.mod(grid - theta + 1, 2) - 1)
        assert got == int(np.argmin(dist))

    def test_distance_ring(self):
        cb = distance_ring_codebook(CFG, 16)
        assert len(cb) == 16 * 512
        np.testing.assert_allclose(np.linalg.norm(cb.matrix, axis=1), 1.0, rtol=1e-12)
        far = distance_ring_codebook(CFG, 1, r_cap=1e15)
        np.testing.assert_allclose(np.abs(np.sum(far.matrix.conj() * dft_codebook(CFG).matrix,
                                                 axis=1)), 1.0, atol=1e-6)

    def test_deterministic(self):
        np.testing.assert_array_equal(elementary_codebook(CFG).matrix,
                                      elementary_codebook(CFG).matrix)


class TestExport:
    def test_round_trip(self):
        cws, _ = top_layer_codebook(CFG)
        buf = io.StringIO()
        assert write_codebook(buf, cws) == 64
        buf.seek(0)
        rows = read_codebook(buf)
        assert len(rows) == 64
        assert rows[5]["b"] == pytest.approx(cws[5].point.b)

    def test_vectors(self):
        cb = dft_codebook(SystemConfig(8, 50e9))
        buf = io.StringIO()
        write_codebook(buf, cb, include_vectors=True)
        header = buf.getvalue().splitlines()[0].split(",")
        assert header[:4] == ["id", "layer", "k", "b"]
        assert len(header) == 4 + 16
        buf.seek(0)
        row = read_codebook(buf)[3]
        np.testing.assert_allclose(row["vector"], cb.matrix[3])
