import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_map, random_tensor
from simviz import errors, simcore
from simviz.simcore import (
    ActivationTensor,
    PooledEmbedding,
    Region,
    SimilarityMap,
    avg_pool,
    class_map,
    cosine_similarity,
    decompose,
    max_pool,
    region_score,
    surrogate,
    top_k_contribution_curve,
)


def emb(values, mode="avg"):
    return PooledEmbedding(np.asarray(values, dtype=float), mode, (1, 1))


def tensor(values):
    return ActivationTensor(np.asarray(values, dtype=float))


tensor_shapes = st.tuples(st.integers(1, 9), st.integers(1, 9), st.sampled_from([1, 3, 32, 64]))


class TestPooling:
    def test_avg_all_ones(self):
        assert avg_pool(tensor(np.ones((2, 2, 1)))).components.tolist() == [1.0]

    def test_avg_single_channel(self):
        a = tensor(np.array([[[1.0], [3.0]], [[2.0], [0.0]]]))
        assert avg_pool(a).components.tolist() == [1.5]

    def test_avg_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(42)
        a = random_tensor(rng, 7, 7, 32)
        got = avg_pool(a).components
        for c in range(32):
            acc = 0.0
            for y in range(7):
                for x in range(7):
                    acc += a.values[y, x, c]
            assert got[c] == acc / 49.0

    def test_max_single_channel(self):
        a = tensor(np.array([[[1.0], [3.0]], [[2.0], [0.0]]]))
        assert max_pool(a).components.tolist() == [3.0]

    def test_max_constant(self):
        a = tensor(np.full((2, 2, 2), 5.0))
        assert max_pool(a).components.tolist() == [5.0, 5.0]

    def test_max_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(43)
        a = random_tensor(rng, 7, 7, 32)
        got = max_pool(a).components
        for c in range(32):
            best = -np.inf
            for y in range(7):
                for x in range(7):
                    best = max(best, a.values[y, x, c])
            assert got[c] == best

    def test_max_pool_nonneg_source_nonneg(self):
        rng = np.random.default_rng(44)
        a = random_tensor(rng, 3, 4, 8, nonneg=True)
        assert np.all(max_pool(a).components >= 0)


class TestCosineSimilarity:
    def test_orthogonal(self):
        assert cosine_similarity(emb([1, 0]), emb([0, 1])) == 0.0

    def test_identical_direction(self):
        assert cosine_similarity(emb([1, 1]), emb([1, 1])) == pytest.approx(1.0, abs=1e-12)

    def test_3_4_example(self):
        assert cosine_similarity(emb([3, 4]), emb([4, 3])) == pytest.approx(0.96, abs=1e-12)

    def test_zero_norm(self):
        with pytest.raises(errors.ZeroNormEmbedding):
            cosine_similarity(emb([0, 0]), emb([1, 0]))

    def test_dimension_mismatch(self):
        with pytest.raises(errors.DimensionMismatch):
            cosine_similarity(emb([1, 0]), emb([1, 0, 0]))

    @given(st.integers(0, 2**32 - 1), st.floats(1e-6, 1e6))
    @settings(max_examples=100, deadline=None)
    def test_scale_equivariance(self, seed, k):
        rng = np.random.default_rng(seed)
        a = emb(rng.standard_normal(8) + 0.1)
        b = emb(rng.standard_normal(8) + 0.1)
        assert cosine_similarity(emb(k * a.components), b) == pytest.approx(
            cosine_similarity(a, b), abs=1e-12
        )


class TestSurrogate:
    def test_unique_max(self):
        a = tensor(np.array([[[1.0], [3.0]], [[2.0], [0.0]]]))
        assert surrogate(a).values.reshape(2, 2).tolist() == [[0, 3], [0, 0]]

    def test_tie_divided_evenly(self):
        a = tensor(np.array([[[2.0], [2.0]], [[0.0], [0.0]]]))
        assert surrogate(a).values.reshape(2, 2).tolist() == [[1, 1], [0, 0]]

    def test_all_zero_channel(self):
        a = tensor(np.zeros((2, 2, 1)))
        assert surrogate(a).values.reshape(2, 2).tolist() == [[0, 0], [0, 0]]

    @given(st.integers(0, 2**32 - 1), tensor_shapes)
    @settings(max_examples=120, deadline=None)
    def test_spatial_sums_equal_max_pool(self, seed, shape):
        rng = np.random.default_rng(seed)
        a = random_tensor(rng, *shape)
        s = surrogate(a)
        sums = s.values.reshape(-1, a.channels).sum(axis=0)
        np.testing.assert_allclose(sums, max_pool(a).components, atol=1e-12, rtol=0)

    def test_engineered_ties(self):
        for n_ties in (2, 3, 4):
            values = np.zeros((2, 2, 1))
            values.reshape(-1)[:n_ties] = 7.0
            s = surrogate(tensor(values))
            occupied = s.values.reshape(-1)
            assert np.count_nonzero(occupied) == n_ties
            assert occupied.sum() == pytest.approx(7.0, abs=1e-12)

    def test_zero_off_max_cells(self):
        rng = np.random.default_rng(9)
        a = random_tensor(rng, 4, 5, 6)
        s = surrogate(a)
        maxima = a.values.reshape(-1, 6).max(axis=0)
        off_max = a.values != maxima
        assert np.all(s.values[off_max] == 0.0)


class TestDecompose:
    def test_uniform_avg(self):
        a = tensor(np.ones((2, 2, 1)))
        m = decompose(a, avg_pool(a), emb([1.0]), "avg")
        np.testing.assert_allclose(m.cells, 0.25, atol=1e-15)
        assert m.total == pytest.approx(1.0, abs=1e-12)

    def test_single_channel_max(self):
        a = tensor(np.array([[[1.0], [3.0]], [[2.0], [0.0]]]))
        m = decompose(a, max_pool(a), emb([2.0], "max"), "max")
        assert m.cells.tolist() == [[0.0, 1.0], [0.0, 0.0]]
        assert m.total == pytest.approx(1.0, abs=1e-12)

    def test_pooling_inconsistent(self):
        a = tensor(np.ones((2, 2, 1)))
        wrong = PooledEmbedding(np.array([2.0]), "avg", (2, 2))
        with pytest.raises(errors.PoolingInconsistent):
            decompose(a, wrong, emb([1.0]), "avg")

    def test_mode_mismatch_rejected(self):
        a = tensor(np.ones((2, 2, 1)))
        with pytest.raises(errors.PoolingInconsistent):
            decompose(a, max_pool(a), emb([1.0]), "avg")

    def test_zero_norm_other(self):
        a = tensor(np.ones((2, 2, 1)))
        with pytest.raises(errors.ZeroNormEmbedding):
            decompose(a, avg_pool(a), emb([0.0]), "avg")

    @given(st.integers(0, 2**32 - 1), tensor_shapes,
           st.sampled_from(["avg", "max"]), st.booleans())
    @settings(max_examples=150, deadline=None)
    def test_completeness(self, seed, shape, mode, nonneg):
        rng = np.random.default_rng(seed)
        ai = random_tensor(rng, *shape, nonneg=nonneg)
        aj = random_tensor(rng, *shape, nonneg=nonneg)
        bi = simcore.pool(ai, mode)
        bj = simcore.pool(aj, mode)
        if bi.norm() == 0.0 or bj.norm() == 0.0:
            return
        m = decompose(ai, bi, bj, mode)
        sim = cosine_similarity(bi, bj)
        total = float(m.cells.reshape(-1).sum())
        assert abs(total - sim) <= max(1e-9 * abs(sim), 1e-12)

    @given(st.integers(0, 2**32 - 1), tensor_shapes, st.sampled_from(["avg", "max"]))
    @settings(max_examples=80, deadline=None)
    def test_bidirectional_totals(self, seed, shape, mode):
        rng = np.random.default_rng(seed)
        ai = random_tensor(rng, *shape)
        aj = random_tensor(rng, *shape)
        bi, bj = simcore.pool(ai, mode), simcore.pool(aj, mode)
        if bi.norm() == 0.0 or bj.norm() == 0.0:
            return
        mij = decompose(ai, bi, bj, mode)
        mji = decompose(aj, bj, bi, mode)
        assert mij.total == pytest.approx(mji.total, rel=1e-9, abs=1e-12)

    @given(st.integers(0, 2**32 - 1), tensor_shapes, st.sampled_from(["avg", "max"]))
    @settings(max_examples=80, deadline=None)
    def test_nonnegativity_propagation(self, seed, shape, mode):
        rng = np.random.default_rng(seed)
        ai = random_tensor(rng, *shape, nonneg=True)
        aj = random_tensor(rng, *shape, nonneg=True)
        bi, bj = simcore.pool(ai, mode), simcore.pool(aj, mode)
        if bi.norm() == 0.0 or bj.norm() == 0.0:
            return
        assert np.all(decompose(ai, bi, bj, mode).cells >= 0.0)

    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 3, 32]),
           st.sampled_from(["avg", "max"]))
    @settings(max_examples=60, deadline=None)
    def test_k1_degeneracy(self, seed, channels, mode):
        rng = np.random.default_rng(seed)
        ai = random_tensor(rng, 1, 1, channels)
        aj = random_tensor(rng, 1, 1, channels)
        bi, bj = simcore.pool(ai, mode), simcore.pool(aj, mode)
        if bi.norm() == 0.0 or bj.norm() == 0.0:
            return
        m = decompose(ai, bi, bj, mode)
        assert m.cells.shape == (1, 1)
        assert m.cells[0, 0] == pytest.approx(cosine_similarity(bi, bj), rel=1e-9)


class TestTopKCurve:
    def test_single_component_carries_everything(self):
        curve = top_k_contribution_curve(emb([1, 0, 0]), emb([1, 0, 0]))
        np.testing.assert_allclose(curve, [1.0, 1.0, 1.0], atol=1e-12)

    def test_symmetric_split(self):
        curve = top_k_contribution_curve(emb([1, 1]), emb([1, 1]))
        np.testing.assert_allclose(curve, [0.5, 1.0], atol=1e-12)

    def test_zero_similarity(self):
        with pytest.raises(errors.ZeroSimilarity):
            top_k_contribution_curve(emb([1, 0]), emb([0, 1]))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_matches_prefix_sum_oracle(self, seed):
        rng = np.random.default_rng(seed)
        a = emb(np.abs(rng.standard_normal(32)) + 1e-6)
        b = emb(np.abs(rng.standard_normal(32)) + 1e-6)
        curve = top_k_contribution_curve(a, b)
        # independent oracle: per-component products, sorted, prefix-summed
        prods = sorted(
            (a.components[i] * b.components[i] for i in range(32)), reverse=True
        )
        total = sum(prods)  # normalization cancels in the fraction
        acc = 0.0
        for k, p in enumerate(prods):
            acc += p
            assert curve[k] == pytest.approx(acc / total, rel=1e-9)
        assert np.all(np.diff(curve) >= -1e-15)
        assert curve[-1] == pytest.approx(1.0, abs=1e-9)


class TestClassMap:
    def test_singleton_equals_pairwise(self):
        rng = np.random.default_rng(1)
        a = random_tensor(rng, 3, 3, 4, nonneg=True)
        b = avg_pool(a)
        cm = class_map(a, b, [b], "avg")
        pm = decompose(a, b, b, "avg")
        np.testing.assert_array_equal(cm.cells, pm.cells)

    def test_doubled_member_doubles_map(self):
        rng = np.random.default_rng(2)
        a = random_tensor(rng, 3, 3, 4, nonneg=True)
        b = avg_pool(a)
        other = emb(np.abs(rng.standard_normal(4)) + 0.1)
        twice = class_map(a, b, [other, other], "avg")
        once = decompose(a, b, other, "avg")
        np.testing.assert_allclose(twice.cells, 2 * once.cells, atol=1e-15)

    def test_five_members_equal_sum_of_pairwise(self):
        rng = np.random.default_rng(3)
        a = random_tensor(rng, 4, 4, 8)
        b = avg_pool(a)
        members = [emb(rng.standard_normal(8) + 0.2) for _ in range(5)]
        cm = class_map(a, b, members, "avg")
        cells = np.zeros((4, 4))
        for mmb in members:
            cells = cells + decompose(a, b, mmb, "avg").cells
        np.testing.assert_array_equal(cm.cells, cells)

    def test_empty_class(self):
        rng = np.random.default_rng(4)
        a = random_tensor(rng, 2, 2, 2, nonneg=True)
        with pytest.raises(errors.EmptyClass):
            class_map(a, avg_pool(a), [], "avg")


def random_partition(rng, depth=3):
    """Recursively split the unit square into disjoint rectangles."""
    rects = [(0.0, 0.0, 1.0, 1.0)]
    for _ in range(depth):
        new = []
        for (x0, y0, x1, y1) in rects:
            if rng.random() < 0.5 and x1 - x0 > 0.05:
                xm = x0 + (x1 - x0) * rng.uniform(0.2, 0.8)
                new += [(x0, y0, xm, y1), (xm, y0, x1, y1)]
            elif y1 - y0 > 0.05:
                ym = y0 + (y1 - y0) * rng.uniform(0.2, 0.8)
                new += [(x0, y0, x1, ym), (x0, ym, x1, y1)]
            else:
                new.append((x0, y0, x1, y1))
        rects = new
    return [Region(*r) for r in rects]


class TestRegionScore:
    def test_full_region_is_total(self):
        rng = np.random.default_rng(5)
        m = random_map(rng, 4, 5)
        assert region_score(m, Region(0, 0, 1, 1)) == pytest.approx(m.total, rel=1e-12)

    def test_exact_cell_cover(self):
        m = SimilarityMap(
            cells=np.array([[0.1, 0.2], [0.3, 0.4]]), total=1.0,
            direction="t", pooling_mode="avg",
        )
        assert region_score(m, Region(0, 0, 0.5, 0.5)) == pytest.approx(0.1, abs=1e-12)

    def test_centered_quarter(self):
        m = SimilarityMap(
            cells=np.array([[0.1, 0.2], [0.3, 0.4]]), total=1.0,
            direction="t", pooling_mode="avg",
        )
        got = region_score(m, Region(0.25, 0.25, 0.75, 0.75))
        assert got == pytest.approx(0.25, abs=1e-12)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 7), st.integers(1, 7))
    @settings(max_examples=100, deadline=None)
    def test_partition_additivity(self, seed, gh, gw):
        rng = np.random.default_rng(seed)
        m = random_map(rng, gh, gw)
        total = sum(region_score(m, r) for r in random_partition(rng))
        assert total == pytest.approx(m.total, rel=1e-9, abs=1e-12)
