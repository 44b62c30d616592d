import itertools

import numpy as np
import pytest

from latent_profiler import ConfigurationError, PointCloud
from latent_profiler.quantizer import (
    ADDITIVE,
    PRODUCT,
    QuantizationModel,
    assign_nearest,
    encode_and_stats,
    kmeans,
    nearest_centroid_distances,
    split_ranges,
    train,
    train_additive,
    train_product,
)


def _best_two_partition(values):
    """Exhaustive oracle: lowest within-cluster sum of squares over all 2-partitions."""
    values = np.asarray(values, dtype=np.float64)
    best = None
    for mask in itertools.product([False, True], repeat=len(values)):
        mask = np.array(mask)
        if mask.all() or not mask.any():
            continue
        a, b = values[mask], values[~mask]
        sse = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
        if best is None or sse < best[0]:
            best = (sse, sorted([a.mean(), b.mean()]))
    return best


class TestKMeans:
    def test_matches_exhaustive_partition(self):
        pts = np.array([0.0, 1.0, 10.0, 11.0])
        sse, centres = _best_two_partition(pts)
        for seed in range(10):
            result = kmeans(pts, 2, iters=10, seed=seed)
            assert sorted(result.centroids.ravel()) == pytest.approx(centres)
            assert result.objective == pytest.approx(sse)
        assert sse == 1.0 and centres == [0.5, 10.5]

    def test_k_equals_n(self, rng):
        pts = rng.standard_normal((12, 3))
        result = kmeans(pts, 12, iters=3, seed=1)
        assert result.objective == 0.0

    def test_k_one_is_mean(self, rng):
        pts = rng.standard_normal((50, 4)).astype(np.float32)
        result = kmeans(pts, 1, iters=2, seed=0)
        np.testing.assert_allclose(result.centroids[0], pts.astype(np.float64).mean(axis=0), atol=1e-12)

    def test_k_greater_than_n(self):
        with pytest.raises(ConfigurationError):
            kmeans(np.zeros((3, 2)), 4)

    def test_history_non_increasing(self, rng):
        pts = rng.standard_normal((2000, 5))
        history = kmeans(pts, 16, iters=15, seed=3).history
        assert all(b <= a * (1 + 1e-12) for a, b in zip(history, history[1:]))

    def test_deterministic(self, rng):
        pts = rng.standard_normal((500, 3))
        a = kmeans(pts, 8, seed=11)
        b = kmeans(pts, 8, seed=11)
        assert a.centroids.tobytes() == b.centroids.tobytes()

    def test_ties_go_to_lowest_index(self):
        labels, _ = assign_nearest(np.array([[0.0]]), np.array([[1.0], [-1.0]]))
        assert labels[0] == 0

    def test_unpacks_to_centroids_and_labels(self):
        centroids, labels = kmeans(np.array([0.0, 1.0, 10.0, 11.0]), 2, seed=0)
        assert centroids.shape == (2, 1) and labels.shape == (4,)


class TestProductQuantizer:
    def test_even_split(self):
        assert split_ranges(8, 4) == ((0, 2), (2, 4), (4, 6), (6, 8))

    def test_remainder_split(self):
        assert [b - a for a, b in split_ranges(10, 4)] == [3, 3, 2, 2]

    def test_d_less_than_m(self):
        with pytest.raises(ConfigurationError):
            train_product(PointCloud(np.zeros((10, 2))), m=4, k=2)

    def test_n_equals_k_perfect(self, rng):
        cloud = PointCloud(rng.standard_normal((16, 4)))
        model = train_product(cloud, m=1, k=16, seed=0)
        assignment, stats = encode_and_stats(model, cloud)
        assert assignment.recon_error_total == 0.0
        assert np.all(stats.per_point_error == 0.0)

    @pytest.mark.parametrize("k", [2, 17, 64])
    def test_encoding_is_exact_nearest(self, rng, k):
        cloud = PointCloud(rng.standard_normal((1000, 6)))
        model = train_product(cloud, m=3, k=k, iters=5, seed=k)
        assignment, _ = encode_and_stats(model, cloud)
        pts = cloud.as_float64()
        for j, (a, b) in enumerate(model.dim_ranges):
            dists = ((pts[:, None, a:b] - model.codebooks[j][None]) ** 2).sum(axis=2)
            chosen = dists[np.arange(cloud.n), assignment.codes[:, j]]
            assert np.all(chosen <= dists.min(axis=1) * (1 + 1e-9) + 1e-12)

    def test_translation_equivariance(self, rng):
        pts = rng.integers(-20, 20, size=(300, 4)).astype(np.float64)
        shift = np.array([64.0, -32.0, 16.0, 8.0])
        a = train_product(PointCloud(pts), m=2, k=8, seed=5)
        b = train_product(PointCloud(pts + shift), m=2, k=8, seed=5)
        for j, (lo, hi) in enumerate(a.dim_ranges):
            np.testing.assert_allclose(b.codebooks[j], a.codebooks[j] + shift[lo:hi], atol=1e-9)

    def test_permuted_reconstruction(self, rng):
        cloud = PointCloud(rng.standard_normal((200, 6)))
        model = train_product(cloud, m=2, k=8, seed=1, permute=True)
        assignment, _ = encode_and_stats(model, cloud)
        recon = model.reconstruct(assignment.codes)
        err = ((cloud.as_float64() - recon) ** 2).sum()
        assert err == pytest.approx(assignment.recon_error_total, rel=1e-9)


class TestAdditiveQuantizer:
    def test_m1_matches_kmeans(self, rng):
        pts = rng.standard_normal((600, 4))
        model = train_additive(PointCloud(pts), m=1, k=8, outer_iters=10, seed=4)
        ref = kmeans(PointCloud(pts), 8, iters=10, seed=4)
        assert model.train_info["train_error"] == ref.objective

    def test_constant_cloud(self):
        u = np.array([1.0, -2.0, 3.0])
        cloud = PointCloud(np.tile(u, (20, 1)))
        model = train_additive(cloud, m=2, k=1, outer_iters=2, seed=0)
        assignment, _ = encode_and_stats(model, cloud)
        assert assignment.recon_error_total == pytest.approx(0.0, abs=1e-20)
        np.testing.assert_allclose(model.codebooks[0][0] + model.codebooks[1][0], u, atol=1e-12)

    def test_error_non_increasing(self, rng):
        cloud = PointCloud(rng.standard_normal((800, 8)))
        history = train_additive(cloud, m=3, k=8, outer_iters=6, seed=1).train_info["error_history"]
        assert all(b <= a for a, b in zip(history, history[1:]))

    def test_icm_never_increases_point_error(self, rng):
        from latent_profiler.quantizer import _encode_additive, _greedy_codes, _pair_tables, _point_errors, _unary

        cloud = PointCloud(rng.standard_normal((300, 5)))
        model = train_additive(cloud, m=3, k=4, outer_iters=1, seed=2)
        x = cloud.as_float64()
        start = _greedy_codes(_unary(x, model.codebooks), _pair_tables(model.codebooks))
        after = _encode_additive(cloud.points, model.codebooks, 3, codes=start)
        before_err = _point_errors(cloud.points, model.codebooks, start)
        after_err = _point_errors(cloud.points, model.codebooks, after)
        assert np.all(after_err <= before_err + 1e-9)

    def test_reconstruction_is_sum(self, rng):
        cloud = PointCloud(rng.standard_normal((100, 4)))
        model = train_additive(cloud, m=2, k=4, outer_iters=2, seed=0)
        codes = np.array([[1, 3]])
        np.testing.assert_array_equal(model.reconstruct(codes)[0], model.codebooks[0][1] + model.codebooks[1][3])


class TestEncodeAndStats:
    def test_hand_line(self):
        model = QuantizationModel(PRODUCT, (np.array([[0.0], [10.0]]),), ((0, 1),), 1)
        assignment, stats = encode_and_stats(model, PointCloud(np.array([[1.0], [9.0]])))
        np.testing.assert_array_equal(assignment.codes[:, 0], [0, 1])
        np.testing.assert_array_equal(stats.per_point_error, [1.0, 1.0])
        assert assignment.recon_error_total == 2.0

    @pytest.mark.parametrize("kind", [PRODUCT, ADDITIVE])
    def test_counts_and_totals(self, rng, kind):
        cloud = PointCloud(rng.standard_normal((500, 6)))
        model = train(cloud, kind, m=2, k=8, iters=3, seed=0)
        assignment, stats = encode_and_stats(model, cloud)
        assert np.all(stats.counts.sum(axis=1) == cloud.n)
        recomputed = ((cloud.as_float64() - model.reconstruct(assignment.codes)) ** 2).sum()
        assert assignment.recon_error_total == pytest.approx(recomputed, rel=1e-6)
        assert stats.per_point_error.max() == 1.0

    def test_dimension_mismatch(self, rng):
        model = train_product(PointCloud(rng.standard_normal((50, 4))), m=2, k=4)
        with pytest.raises(ConfigurationError):
            encode_and_stats(model, PointCloud(rng.standard_normal((5, 3))))

    def test_nearest_centroid_exact(self):
        np.testing.assert_array_equal(nearest_centroid_distances(np.array([[0.0], [1.0], [3.0]])), [1, 1, 2])


class TestModelFile:
    @pytest.mark.parametrize("kind, permute", [(PRODUCT, False), (PRODUCT, True), (ADDITIVE, False)])
    def test_round_trip(self, tmp_path, rng, kind, permute):
        cloud = PointCloud(rng.standard_normal((200, 6)))
        model = train(cloud, kind, m=2, k=4, iters=2, seed=1, permute=permute)
        model.save(tmp_path / "m.bin")
        back = QuantizationModel.load(tmp_path / "m.bin")
        assert back.kind == model.kind and back.dim_ranges == model.dim_ranges
        assert back.icm_sweeps == model.icm_sweeps
        for a, b in zip(back.codebooks, model.codebooks):
            np.testing.assert_array_equal(a, b.astype(np.float32))
        assert back.train_info == model.train_info

    def test_corrupt(self, tmp_path):
        from latent_profiler import MatrixParseError

        (tmp_path / "m.bin").write_bytes(b"LGQM\x01")
        with pytest.raises(MatrixParseError):
            QuantizationModel.load(tmp_path / "m.bin")
