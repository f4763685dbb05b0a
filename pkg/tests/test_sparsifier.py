import math

import numpy as np
import pytest

from geospar import quadtree, wspd
from geospar.config import RunConfig
from geospar.errors import IndexOutOfRange, OutOfRegion
from geospar.kernels import (
    cauchy_kernel,
    gaussian_kernel,
    kernel_weight,
    normalize_points,
)
from geospar.sparsifier import (
    DynamicGeoSpar,
    FullyDynamicSparsifier,
    adversarial_mode,
)


def make_dgs(n=64, d=4, seed=0, eps=0.5, kernel=None, **kw):
    rng = np.random.default_rng(seed)
    ps = normalize_points(rng.random((n, d)) * 10.0)
    return DynamicGeoSpar.initialize(
        ps, kernel or gaussian_kernel(), eps, 0.05, 3, seed,
        allow_large_eps=True, **kw), rng


def random_unit_move(rng, d=4):
    return rng.random(d) * 0.5 + 0.25


def apply_diff(edge_map, diff):
    acc = dict(edge_map)
    for i, j, dw in diff:
        cur = acc.get((i, j), 0.0) + dw
        if cur == 0.0:
            acc.pop((i, j), None)
        else:
            acc[(i, j)] = cur
    return acc


class TestInitialize:
    def test_two_points_single_edge(self):
        ps = normalize_points([[0.0, 0.0], [3.0, 4.0]])
        g = DynamicGeoSpar.initialize(ps, gaussian_kernel(), 0.5, 0.05, 1, 0,
                                      allow_large_eps=True)
        assert g.edge_count == 1
        ((edge, w),) = g.edge_map().items()
        assert edge == (0, 1)
        assert w == kernel_weight(gaussian_kernel(), ps.points[0], ps.points[1])
        (entry,) = g._store.values()
        assert entry.scale == 1.0

    def test_fold_equals_h_exactly(self):
        g, _ = make_dgs(seed=1)
        assert g.fold_store() == g.edge_map()

    def test_eps_range_enforced_by_default(self):
        rng = np.random.default_rng(2)
        ps = normalize_points(rng.random((8, 2)))
        with pytest.raises(ValueError):
            DynamicGeoSpar.initialize(ps, gaussian_kernel(), 0.5, 0.05, 1, 0)
        DynamicGeoSpar.initialize(ps, gaussian_kernel(), 0.1, 0.05, 1, 0)

    def test_members_mutually_consistent(self):
        g, _ = make_dgs(seed=3, n=48)
        # projected points: leaf centers replay the projection bit-exactly
        for pid, leaf in g.tree.point_index.items():
            expect = g._project_unit(g.pset.points[pid])
            assert tuple(float(v) for v in expect) == leaf.center
        # pair list equals a fresh WSPD of the tree
        fresh = wspd.compute_wspd(g.tree)
        assert fresh.pairs == g.pairs.pairs
        # every stored pair has a sample entry and vice versa
        assert set(g._store) == set(g.pairs.pairs)

    def test_sample_size_formula(self):
        g, _ = make_dgs(seed=4)
        for key, entry in g._store.items():
            s = g.sample_size(entry.nx, entry.ny)
            assert entry.s_target == s
            assert s == math.ceil(
                g.c_s * g.eps ** -2 * g.n ** g.gamma
                * (entry.nx + entry.ny) * math.log(entry.nx + entry.ny + 1))
            if not entry.materialized:
                assert len(entry) == s
                assert entry.scale == entry.nx * entry.ny / s
            else:
                assert len(entry) == entry.nx * entry.ny
                assert entry.scale == 1.0

    def test_edge_count_within_budget(self):
        g, _ = make_dgs(seed=5, n=128)
        assert g.edge_count <= g.sparsity_budget

    def test_budget_fixture(self, calibration):
        cal = calibration["sparsifier"]
        for n in (64, 128):
            g, _ = make_dgs(seed=6, n=n)
            proj = np.vstack([g._project_unit(p) for p in g.pset.points])
            from geospar.kernels import aspect_ratio
            log_a = max(1.0, math.log2(aspect_ratio(proj)))
            bound = (cal["budget_constant"] * g.eps ** -2
                     * n ** (1.0 + g.gamma) * math.log(n + 1) * log_a)
            assert g.sparsity_budget <= bound


class TestUpdate:
    def test_fold_and_replay_after_updates(self):
        g, rng = make_dgs(seed=7)
        base = dict(g.edge_map())
        diffs = []
        for _ in range(50):
            g.update(int(rng.integers(0, g.n)), random_unit_move(rng))
            diffs.extend(g.get_diff())
            assert g.fold_store() == g.edge_map()
        assert apply_diff(base, diffs) == g.edge_map()

    def test_spectral_after_moves(self):
        g, rng = make_dgs(seed=8, n=96)
        for _ in range(30):
            g.update(int(rng.integers(0, g.n)), random_unit_move(rng))
        assert g.spectral_check().passed

    def test_diff_cleared_and_definitional_count(self):
        g, rng = make_dgs(seed=9)
        rep = g.update(3, random_unit_move(rng))
        diff = g.get_diff()
        assert len(diff) == rep.edges_changed
        assert g.get_diff() == []

    def test_out_of_region_rejected(self):
        g, _ = make_dgs(seed=10)
        with pytest.raises(OutOfRegion):
            g.update(0, np.full(4, 1.5))

    def test_unknown_index_rejected(self):
        g, _ = make_dgs(seed=11)
        with pytest.raises(IndexOutOfRange):
            g.update(g.n + 5, np.full(4, 0.5))

    def test_wspd_oracle_after_updates(self):
        g, rng = make_dgs(seed=12, n=80)
        for _ in range(40):
            g.update(int(rng.integers(0, g.n)), random_unit_move(rng))
        proj = {i: g._project_unit(g.pset.points[i]) for i in range(g.n)}
        fresh_tree = quadtree.build(proj, g.k)
        fresh = wspd.compute_wspd(fresh_tree)
        assert (g.pairs.canonical_pairs(g.tree)
                == fresh.canonical_pairs(fresh_tree))

    def test_churn_cap_fixture(self, calibration):
        cap = calibration["sparsifier"]["churn_cap"]
        g, rng = make_dgs(seed=13, n=128)
        for _ in range(60):
            rep = g.update(int(rng.integers(0, g.n)), random_unit_move(rng))
            g.get_diff()
            assert rep.churn <= cap["128"]

    def test_move_within_own_leaf_cell_reweights_only(self):
        g, rng = make_dgs(seed=20, n=48)
        # nudge a point by far less than its leaf cell's side: the tree,
        # and hence the pair list, must not change shape
        pid = 7
        old_pairs = set(g.pairs.pairs)
        z = g.pset.points[pid] + 1e-12
        rep = g.update(pid, z)
        assert set(g.pairs.pairs) == old_pairs
        assert rep.pairs_removed == rep.pairs_added == 0
        assert rep.pairs_reweighted > 0
        assert g.fold_store() == g.edge_map()
        assert g.spectral_check().passed

    def test_get_laplacian_matches_fold(self):
        g, rng = make_dgs(seed=14, n=32)
        g.update(5, random_unit_move(rng))
        lap = g.get_laplacian()
        assert np.allclose(lap @ np.ones(g.n), 0.0, atol=1e-9)
        from geospar.kernels import laplacian_from_edges
        lap2 = laplacian_from_edges(
            g.n, [(i, j, w) for (i, j), w in g.fold_store().items()])
        assert np.array_equal(lap, lap2)


class TestResamplingInVivo:
    """Clustered instance with an L=1 kernel: the big cluster-pair biclique
    is genuinely sampled, and cross-cluster hops take the fast-resample
    route while the spectral invariant keeps holding."""

    def _clustered(self, seed=0, n=400, c_s=0.1):
        rng = np.random.default_rng(seed)
        half = n // 2
        raw = np.vstack([rng.normal(0, 0.02, (half, 4)) + 0.3,
                         rng.normal(0, 0.02, (half, 4)) + 5.0])
        ps = normalize_points(raw)
        g = DynamicGeoSpar.initialize(ps, cauchy_kernel(), 0.5, 0.05, 3, seed,
                                      allow_large_eps=True, c_s=c_s)
        return g, rng, half

    def test_big_pair_sampled_and_spectrally_sound(self):
        g, _, _ = self._clustered()
        big = max(g._store.values(), key=lambda e: e.nx * e.ny)
        assert not big.materialized
        assert len(big) == big.s_target < big.nx * big.ny
        assert g.edge_count < g.n * (g.n - 1) // 2
        assert g.spectral_check().passed

    def test_cross_cluster_hops_use_fast_resample(self):
        g, rng, half = self._clustered(seed=1)
        resamples = 0
        for _ in range(25):
            i = int(rng.integers(0, g.n))
            base = 5.0 if i < half else 0.3
            z = g.pset.transform_raw(rng.normal(0, 0.02, 4) + base)
            if np.all((z >= 0) & (z < 1)):
                rep = g.update(i, z)
                resamples += rep.pairs_resampled
                assert g.fold_store() == g.edge_map()
        assert resamples > 0
        assert g.spectral_check().passed


class TestFullyDynamicWrapper:
    def test_rebuild_schedule_and_counter(self):
        rng = np.random.default_rng(15)
        ps = normalize_points(rng.random((64, 4)) * 10)
        w = FullyDynamicSparsifier(ps, gaussian_kernel(), 0.5, 0.05, 3, 21,
                                   allow_large_eps=True)
        assert w.budget == 32
        for step in range(128):
            w.update(int(rng.integers(0, 64)), random_unit_move(rng))
        assert w.rebuild_count >= 3
        assert w.updates_since_rebuild == 128 - w.rebuild_count * w.budget
        assert w.spectral_check().passed

    def test_counter_resets_at_rebuild(self):
        rng = np.random.default_rng(16)
        ps = normalize_points(rng.random((8, 2)) * 3)
        w = FullyDynamicSparsifier(ps, gaussian_kernel(), 0.5, 0.05, 1, 5,
                                   rebuild_budget=3, allow_large_eps=True)
        for step in range(3):
            w.update(int(rng.integers(0, 8)), random_unit_move(rng, 2))
        assert w.rebuild_count == 0 and w.updates_since_rebuild == 3
        w.update(0, random_unit_move(rng, 2))
        assert w.rebuild_count == 1 and w.updates_since_rebuild == 1

    def test_rebuild_equals_fresh_initialize(self):
        rng = np.random.default_rng(17)
        ps = normalize_points(rng.random((24, 3)) * 2)
        w = FullyDynamicSparsifier(ps, gaussian_kernel(), 0.5, 0.05, 2, 99,
                                   rebuild_budget=5, allow_large_eps=True)
        for _ in range(5):
            w.update(int(rng.integers(0, 24)), random_unit_move(rng, 3))
        w.rebuild()
        fresh = DynamicGeoSpar.initialize(
            w.inner.pset.copy(), gaussian_kernel(), 0.5, 0.05, 2,
            w.seed_for(w.rebuild_count), allow_large_eps=True)
        assert fresh.edge_map() == w.inner.edge_map()

    def test_deterministic_replay(self):
        rng = np.random.default_rng(18)
        raw = rng.random((32, 3)) * 4
        moves = [(int(rng.integers(0, 32)), random_unit_move(rng, 3))
                 for _ in range(40)]

        def run():
            w = FullyDynamicSparsifier(
                normalize_points(raw), gaussian_kernel(), 0.5, 0.05, 2, 7,
                rebuild_budget=10, allow_large_eps=True)
            for i, z in moves:
                w.update(i, z)
            return w.inner.edge_map()

        assert run() == run()


class TestAdversarialMode:
    def test_k_formula(self):
        cfg = adversarial_mode(RunConfig(), 256, 8, 4.0)
        assert cfg.k == 3  # ceil(sqrt(8))

    def test_budget_check_passes_quietly(self):
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            adversarial_mode(RunConfig(), 256, 8, 4.0)  # 16 <= 32

    def test_budget_violation_warns(self):
        with pytest.warns(RuntimeWarning):
            adversarial_mode(RunConfig(), 256, 8, 1000.0)

    def test_adversarial_replay_spectral(self):
        # scripted adversary: always move the point with the worst current
        # projected-distance distortion
        rng = np.random.default_rng(19)
        raw = rng.random((48, 4)) * 6
        ps = normalize_points(raw)
        cfg = adversarial_mode(RunConfig(eps=0.5, allow_large_eps=True),
                               48, 4, 20.0)
        g = DynamicGeoSpar.initialize(ps, gaussian_kernel(), 0.5, 0.05,
                                      cfg.k, 3, allow_large_eps=True)
        for step in range(30):
            pts = g.pset.points
            proj = np.vstack([g._project_unit(p) for p in pts])
            i, j = 0, 1
            worst = 0.0
            for a in range(0, 48, 3):
                for b in range(a + 1, 48, 5):
                    dd = np.linalg.norm(pts[a] - pts[b])
                    pp = np.linalg.norm(proj[a] - proj[b])
                    if dd > 0 and pp / dd > worst:
                        worst, i = pp / dd, a
            g.update(i, random_unit_move(rng))
            if step % 10 == 9:
                assert g.spectral_check().passed
