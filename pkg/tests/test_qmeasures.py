import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latent_profiler import InsufficientDataError, PointCloud, UndefinedMeasureError
from latent_profiler.qmeasures import (
    OK,
    PARTIAL,
    UNDEFINED,
    MeasureReport,
    MeasureValue,
    centroid_dist_var,
    cluster_eee,
    cluster_eee_summary,
    default_min_cluster,
    point_count_kl,
    point_count_var,
    point_patchiness,
    quantizer_measures,
    reconstruction_error,
    reconstruction_iqr,
    reconstruction_skew,
)
from latent_profiler.quantizer import PRODUCT, Assignment, QuantizationModel, encode_and_stats, train
from latent_profiler.spread import eee, eigen_spectrum


def _skew_oracle(x):
    """Adjusted Fisher-Pearson skew written out term by term."""
    x = [float(v) for v in x]
    n = len(x)
    mean = sum(x) / n
    s = math.sqrt(sum((v - mean) ** 2 for v in x) / (n - 1))
    return n / ((n - 1) * (n - 2)) * sum(((v - mean) / s) ** 3 for v in x)


class TestPatchiness:
    def test_uniform_cells(self):
        assert point_patchiness([10, 10, 10, 10]) == pytest.approx(0.9, abs=1e-12)

    def test_hand_examples(self):
        assert point_patchiness([5, 15]) == pytest.approx(1.4, abs=1e-12)
        assert point_patchiness([1, 19]) == pytest.approx(2.52, abs=1e-12)

    def test_pooled_over_codebooks(self):
        assert point_patchiness(np.array([[5, 15], [15, 5]])) == pytest.approx(
            point_patchiness([5, 15, 15, 5]), abs=0
        )

    def test_all_empty(self):
        with pytest.raises(UndefinedMeasureError):
            point_patchiness([0, 0])

    def test_single_cell(self):
        with pytest.raises(InsufficientDataError):
            point_patchiness([7])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(1, 50), min_size=3, max_size=10), st.data())
    def test_move_from_below_to_above_mean_increases(self, counts, data):
        counts = np.array(counts)
        mean = counts.mean()
        below = np.flatnonzero(counts < mean)
        above = np.flatnonzero(counts > mean)
        if below.size == 0 or above.size == 0:
            return
        i = data.draw(st.sampled_from(below.tolist()))
        j = data.draw(st.sampled_from(above.tolist()))
        moved = counts.copy()
        moved[i] -= 1
        moved[j] += 1
        assert point_patchiness(moved) > point_patchiness(counts)

    def test_permutation_of_points_irrelevant(self):
        assert point_patchiness([3, 9, 4]) == point_patchiness(np.array([3, 9, 4]))


class TestPointCountOdds:
    def test_uniform_zero(self):
        counts = np.full((3, 8), 25)
        assert point_count_var(counts) == 0.0
        assert point_count_kl(counts) == pytest.approx(0.0, abs=1e-15)

    def test_hand_k2(self):
        # O = (1/3, 3); mean 5/3; squared deviations 2 * 16/9; m (k - 1) = 1
        assert point_count_var([25, 75]) == pytest.approx(32 / 9, abs=1e-12)
        # normalised odds (0.1, 0.9) against (0.5, 0.5)
        expected = 0.1 * math.log(0.2) + 0.9 * math.log(1.8)
        assert point_count_kl([25, 75]) == pytest.approx(expected, abs=1e-12)

    def test_duplicated_codebook_same_value(self):
        one = [10, 30, 60]
        two = np.array([one, one])
        assert point_count_var(two) == pytest.approx(point_count_var(one), abs=1e-12)
        assert point_count_kl(two) == pytest.approx(point_count_kl(one), abs=1e-12)

    def test_one_cell_holds_everything(self):
        with pytest.raises(UndefinedMeasureError):
            point_count_var([0, 10, 0])
        with pytest.raises(UndefinedMeasureError):
            point_count_kl([0, 10, 0])


class TestReconstructionSkew:
    def test_symmetric(self):
        assert reconstruction_skew([0.1, 0.2, 0.3]) == pytest.approx(0.0, abs=1e-12)

    def test_hand_example(self):
        # deviations (-3, -2, 5), s^2 = 19: 3/2 * 90 / 19^1.5
        expected = 135 / 19**1.5
        assert _skew_oracle([1, 2, 9]) == pytest.approx(expected, abs=1e-12)
        assert reconstruction_skew([1, 2, 9]) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(1.6300591617, abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=3, max_size=30))
    def test_mirror_sums_to_zero(self, values):
        x = np.array(values)
        if x.std() < 1e-6:
            return
        mirrored = 2 * x.mean() - x
        assert reconstruction_skew(x) + reconstruction_skew(mirrored) == pytest.approx(0.0, abs=1e-8)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=3, max_size=30), st.floats(0.01, 100))
    def test_scale_invariant(self, values, c):
        x = np.array(values)
        if x.std() < 1e-6:
            return
        assert reconstruction_skew(c * x) == pytest.approx(reconstruction_skew(x), abs=1e-8)

    def test_matches_oracle(self, rng):
        x = rng.random(40)
        assert reconstruction_skew(x) == pytest.approx(_skew_oracle(x), abs=1e-12)

    def test_zero_spread(self):
        with pytest.raises(UndefinedMeasureError):
            reconstruction_skew([0.5, 0.5, 0.5])


class TestReconstructionError:
    def test_hand(self):
        cloud = PointCloud(np.array([[1.0, 1.0]]))
        assert reconstruction_error(cloud, Assignment(np.zeros((1, 1), int), 2.0)) == 1.0

    def test_perfect(self, rng):
        cloud = PointCloud(rng.standard_normal((8, 2)))
        model = train(cloud, "pq", m=1, k=8, seed=0)
        assignment, _ = encode_and_stats(model, cloud)
        assert reconstruction_error(cloud, assignment) == 0.0

    def test_scale_homogeneous(self, rng):
        x = rng.integers(-5, 5, size=(20, 3)).astype(float)
        x[0, 0] = 7.0
        recon_sq = 3.5
        a = reconstruction_error(PointCloud(x), Assignment(None, recon_sq))
        b = reconstruction_error(PointCloud(4 * x), Assignment(None, 16 * recon_sq))
        assert a == pytest.approx(b, rel=1e-12)

    def test_all_zero(self):
        with pytest.raises(UndefinedMeasureError):
            reconstruction_error(PointCloud(np.zeros((2, 2))), Assignment(None, 0.0))


class TestReconstructionIQR:
    def test_hand(self):
        assert reconstruction_iqr([0, 0.25, 0.5, 0.75, 1]) == pytest.approx(0.5, abs=1e-12)

    def test_all_equal(self):
        assert reconstruction_iqr([0.4] * 6) == 0.0

    def test_translation(self, rng):
        x = rng.random(50)
        assert reconstruction_iqr(x + 3.0) == pytest.approx(reconstruction_iqr(x), abs=1e-12)

    def test_perfect_reconstruction_undefined(self):
        with pytest.raises(UndefinedMeasureError):
            reconstruction_iqr([0.0] * 5)


class TestCentroidDistVar:
    def test_hand(self):
        assert centroid_dist_var(np.array([1.0, 1.0, 2.0])) == pytest.approx(1 / 12, abs=1e-12)

    def test_regular_grid(self):
        assert centroid_dist_var(np.ones(6)) == 0.0

    def test_duplicated_codebook_keeps_pooled_denominator(self):
        rho = np.array([0.5, 0.5, 1.0])
        ss = ((rho - rho.mean()) ** 2).sum()
        # pooled sample of 2k values, denominator 2k - 1
        assert centroid_dist_var(np.array([[1.0, 1.0, 2.0]] * 2)) == pytest.approx(2 * ss / 5, abs=1e-12)

    def test_coincident_centroids(self):
        with pytest.raises(UndefinedMeasureError):
            centroid_dist_var(np.zeros(4))


def _blob_model(centres, width):
    book = np.array(centres, dtype=np.float64)
    return QuantizationModel(PRODUCT, (book,), ((0, width),), width)


class TestClusterEEE:
    def test_isotropic_blobs(self, rng):
        centres = [[0.0] * 8, [50.0] * 8]
        pts = np.concatenate([rng.standard_normal((600, 8)) + c for c in centres])
        cloud = PointCloud(pts)
        model = _blob_model(centres, 8)
        assignment, _ = encode_and_stats(model, cloud)
        assert cluster_eee(model, cloud, assignment) <= 0.1

    def test_rank_one_clusters(self, rng):
        d = 4
        direction = np.array([1.0, 2.0, -1.0, 0.5])
        centres = [[0.0] * d, [100.0] * d]
        pts = np.concatenate([np.outer(rng.standard_normal(200), direction) + c for c in centres])
        model = _blob_model(centres, d)
        assignment, _ = encode_and_stats(model, PointCloud(pts))
        assert cluster_eee(model, PointCloud(pts), assignment) == pytest.approx((d - 1) / d, abs=1e-6)

    def test_single_cluster_matches_whole_cloud(self, small_cloud):
        model = _blob_model([[0.0] * small_cloud.d], small_cloud.d)
        assignment, _ = encode_and_stats(model, small_cloud)
        assert cluster_eee(model, small_cloud, assignment) == eee(eigen_spectrum(small_cloud))

    def test_small_cells_skipped(self, rng):
        pts = np.concatenate([rng.standard_normal((100, 2)), rng.standard_normal((3, 2)) + 40])
        model = _blob_model([[0.0, 0.0], [40.0, 40.0]], 2)
        assignment, _ = encode_and_stats(model, PointCloud(pts))
        summary = cluster_eee_summary(model, PointCloud(pts), assignment)
        assert (summary.included, summary.skipped, summary.status) == (1, 1, PARTIAL)

    def test_all_skipped(self, rng):
        pts = rng.standard_normal((5, 2))
        model = _blob_model([[0.0, 0.0]], 2)
        assignment, _ = encode_and_stats(model, PointCloud(pts))
        with pytest.raises(UndefinedMeasureError):
            cluster_eee(model, PointCloud(pts), assignment)

    def test_default_min_cluster(self):
        assert default_min_cluster(_blob_model([[0.0] * 3], 3)) == 8
        assert default_min_cluster(_blob_model([[0.0] * 12], 12)) == 13

    def test_additive_cells(self, rng):
        cloud = PointCloud(rng.standard_normal((3000, 6)))
        model = train(cloud, "aq", m=2, k=4, iters=2, seed=0)
        assignment, _ = encode_and_stats(model, cloud)
        summary = cluster_eee_summary(model, cloud, assignment)
        assert summary.included == 8 and 0 <= summary.value <= 1


class TestBatch:
    def test_statuses(self, rng):
        cloud = PointCloud(rng.standard_normal((8, 2)))
        model = train(cloud, "pq", m=1, k=8, seed=0)
        assignment, stats = encode_and_stats(model, cloud)
        out = quantizer_measures(model, cloud, assignment, stats)
        assert out["re"].value == 0.0 and out["re"].status == OK
        assert out["rs"].status == UNDEFINED and out["rs"].value is None
        assert out["ri"].status == UNDEFINED
        assert out["pd_eee"].status == UNDEFINED
        assert set(out) == {"pp", "pc_var", "pc_kl", "rs", "re", "ri", "cd_var", "pd_eee"}

    def test_report_json_omits_undefined_value(self):
        report = MeasureReport({"rs": MeasureValue(None, UNDEFINED, {"reason": "x"})}, {}, {})
        assert '"value"' not in report.to_json()
        assert report.any_undefined()


class TestMonotonicitySuite:
    def test_product_pp_up_rs_down(self):
        from latent_profiler.pointcloud import generate_mixture, random_mixture_spec

        pps, skews = [], []
        for scale in (2.0, 0.5, 0.1):
            cloud = generate_mixture(random_mixture_spec(3, 32, 20_000, scale, 0.2, seed=0))
            model = train(cloud, "pq", m=2, k=16, seed=0)
            _, stats = encode_and_stats(model, cloud)
            pps.append(point_patchiness(stats))
            skews.append(reconstruction_skew(stats))
        assert pps[0] < pps[1] < pps[2]
        assert skews[0] > skews[1] > skews[2]
