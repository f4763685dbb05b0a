import numpy as np
import pytest

from geospar.kernels import dense_laplacian, gaussian_kernel, normalize_points
from geospar.sketches import approximation_audit, multiply_init, solve_init


def make_pset(n=48, d=4, seed=0):
    rng = np.random.default_rng(seed)
    return normalize_points(rng.random((n, d)) * 9.0), rng


def relerr(a, b):
    nb = np.linalg.norm(b)
    return np.linalg.norm(a - b) / nb if nb else np.linalg.norm(a)


class TestMultiply:
    def test_zero_vector_gives_zero_sketch(self):
        ps, _ = make_pset()
        st = multiply_init(ps, gaussian_kernel(), np.zeros(48), 0.5, 0.05,
                           3, 0, allow_large_eps=True)
        assert np.array_equal(st.query(), np.zeros(st.m))

    def test_single_edge_rank_one_identity(self):
        ps = normalize_points([[0.0, 0.0], [1.0, 2.0]])
        v = np.array([1.0, -2.0])
        st = multiply_init(ps, gaussian_kernel(), v, 0.5, 0.05, 1, 1,
                           allow_large_eps=True)
        ((_, w),) = st.dgs.edge_map().items()
        phi_d = st.phi.column(0) - st.phi.column(1)
        psi_d = st.psi.column(0) - st.psi.column(1)
        expect = w * np.outer(phi_d, psi_d)
        assert np.allclose(st.lt, expect, atol=1e-12)

    def test_init_matches_dense_path(self):
        ps, rng = make_pset(n=64, seed=2)
        v = rng.standard_normal(64)
        st = multiply_init(ps, gaussian_kernel(), v, 0.5, 0.05, 3, 2,
                           allow_large_eps=True)
        dense = (st.phi.matrix @ st.dgs.get_laplacian()
                 @ st.psi.matrix.T @ (st.psi.matrix @ v))
        assert relerr(st.query(), dense) < 1e-9

    def test_empty_diff_leaves_sketch_unchanged(self):
        ps, rng = make_pset(seed=3)
        v = rng.standard_normal(48)
        st = multiply_init(ps, gaussian_kernel(), v, 0.5, 0.05, 3, 3,
                           allow_large_eps=True)
        before = st.query()
        st.apply_graph_diff([])
        assert np.array_equal(st.query(), before)

    def test_one_update_matches_scratch(self):
        ps, rng = make_pset(seed=4)
        v = rng.standard_normal(48)
        st = multiply_init(ps, gaussian_kernel(), v, 0.5, 0.05, 3, 4,
                           allow_large_eps=True)
        st.update_g(7, rng.random(4) * 0.5 + 0.25)
        lt, _, zt = st.scratch_recompute()
        assert relerr(st.lt, lt) < 1e-9
        assert relerr(st.query(), zt) < 1e-9

    def test_update_v_unit_vector_is_column(self):
        ps, rng = make_pset(seed=5)
        st = multiply_init(ps, gaussian_kernel(), np.zeros(48), 0.5, 0.05,
                           3, 5, allow_large_eps=True)
        before = st.query()
        st.update_v([(11, 1.0)])
        expect = before + st.lt @ st.psi.column(11)
        assert np.allclose(st.query(), expect, atol=1e-12)

    def test_zero_delta_is_noop(self):
        ps, rng = make_pset(seed=6)
        st = multiply_init(ps, gaussian_kernel(), rng.standard_normal(48),
                           0.5, 0.05, 3, 6, allow_large_eps=True)
        before = st.query()
        st.update_v([])
        assert np.array_equal(st.query(), before)

    def test_interleaved_updates_match_scratch(self):
        ps, rng = make_pset(seed=7)
        v = rng.standard_normal(48)
        st = multiply_init(ps, gaussian_kernel(), v, 0.5, 0.05, 3, 7,
                           allow_large_eps=True)
        for step in range(50):
            if step % 3 == 0:
                st.update_v([(int(rng.integers(0, 48)),
                              float(rng.standard_normal()))])
            else:
                st.update_g(int(rng.integers(0, 48)),
                            rng.random(4) * 0.5 + 0.25)
            if step % 10 == 9:
                _, _, zt = st.scratch_recompute()
                assert relerr(st.query(), zt) < 1e-8

    def test_linearity_in_v(self):
        ps, rng = make_pset(seed=8)
        v1 = rng.standard_normal(48)
        v2 = rng.standard_normal(48)

        def run(v):
            return multiply_init(make_pset(seed=8)[0], gaussian_kernel(), v,
                                 0.5, 0.05, 3, 8, allow_large_eps=True).query()

        z12 = run(v1 + v2)
        z1 = run(v1)
        z2 = run(v2)
        z0 = run(np.zeros(48))
        assert np.allclose(z12, z1 + z2 - z0, atol=1e-10)


class TestSolve:
    def test_zero_rhs_gives_zero(self):
        ps, _ = make_pset(seed=9)
        st = solve_init(ps, gaussian_kernel(), np.zeros(48), 0.5, 0.05, 3, 9,
                        allow_large_eps=True)
        assert np.allclose(st.query(), 0.0)

    def test_pseudoinverse_property(self):
        ps, rng = make_pset(seed=10)
        st = solve_init(ps, gaussian_kernel(), rng.standard_normal(48),
                        0.5, 0.05, 3, 10, allow_large_eps=True)
        lhs = st.lt @ st.lt_pinv @ st.lt
        assert np.linalg.norm(lhs - st.lt) <= 1e-8 * np.linalg.norm(st.lt)

    def test_init_matches_dense_path(self):
        ps, rng = make_pset(n=64, seed=11)
        b = rng.standard_normal(64)
        st = solve_init(ps, gaussian_kernel(), b, 0.5, 0.05, 3, 11,
                        allow_large_eps=True)
        lt = st.phi.matrix @ st.dgs.get_laplacian() @ st.psi.matrix.T
        dense = np.linalg.pinv(lt, rcond=1e-10) @ (st.phi.matrix @ b)
        assert relerr(st.query(), dense) < 1e-7

    def test_update_g_matches_scratch(self):
        ps, rng = make_pset(seed=12)
        st = solve_init(ps, gaussian_kernel(), rng.standard_normal(48),
                        0.5, 0.05, 3, 12, allow_large_eps=True)
        st.update_g(3, rng.random(4) * 0.5 + 0.25)
        _, _, zt = st.scratch_recompute()
        assert relerr(st.query(), zt) < 1e-7

    def test_many_updates_match_scratch(self):
        ps, rng = make_pset(seed=13)
        st = solve_init(ps, gaussian_kernel(), rng.standard_normal(48),
                        0.5, 0.05, 3, 13, allow_large_eps=True)
        for step in range(50):
            if step % 4 == 0:
                st.update_b([(int(rng.integers(0, 48)),
                              float(rng.standard_normal()))])
            else:
                st.update_g(int(rng.integers(0, 48)),
                            rng.random(4) * 0.5 + 0.25)
            if step % 10 == 9:
                _, _, zt = st.scratch_recompute()
                assert relerr(st.query(), zt) < 1e-6

    def test_update_b_roundtrip(self):
        ps, rng = make_pset(seed=14)
        st = solve_init(ps, gaussian_kernel(), rng.standard_normal(48),
                        0.5, 0.05, 3, 14, allow_large_eps=True)
        before = st.query()
        st.update_b([(5, 2.5)])
        st.update_b([(5, -2.5)])
        assert np.allclose(st.query(), before, atol=1e-10)


class TestAudit:
    def test_exact_sparsifier_zero_errors(self):
        ps, rng = make_pset(seed=15)
        st = multiply_init(ps, gaussian_kernel(), rng.standard_normal(48),
                           0.5, 0.05, 3, 15, allow_large_eps=True)
        # at this scale every biclique is materialized, so H == G exactly
        assert np.allclose(st.dgs.get_laplacian(),
                           dense_laplacian(ps.points, gaussian_kernel()))
        rep = approximation_audit(st)
        assert rep.multiply_error < 1e-9 and rep.solve_error < 1e-7
        assert rep.multiply_ok and rep.solve_ok

    def test_scaled_graph_hits_eps_exactly(self):
        # L_H = (1 + eps) L_G -> multiply error == eps by the scaling identity
        ps, rng = make_pset(n=20, seed=16)
        st = multiply_init(ps, gaussian_kernel(), rng.standard_normal(20),
                           0.25, 0.05, 3, 16, allow_large_eps=True)
        eps = st.dgs.eps
        for (i, j), w in list(st.dgs._h.items()):
            st.dgs._h[(i, j)] = w * (1 + eps)
        rep = approximation_audit(st)
        assert rep.multiply_error == pytest.approx(eps, rel=1e-6)
