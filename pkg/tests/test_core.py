"""Core vector math: distances, assignment, centroids, distortion."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vqcodebook.core import (
    Assignment,
    Codebook,
    TrainingSet,
    assign_nearest,
    centroid,
    distortion,
    sq_dist,
)

finite_floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def brute_nearest(vectors, codewords):
    """Independent nearest-codeword search: plain loops over sq_dist."""
    out = []
    for v in vectors:
        dists = [sq_dist(v, c) for c in codewords]
        best = min(range(len(dists)), key=lambda j: (dists[j], j))
        out.append(best)
    return out


class TestSqDist:
    def test_identity(self):
        assert sq_dist([1, 2, 3], [1, 2, 3]) == 0.0

    def test_scalar(self):
        assert sq_dist([0.0], [3.0]) == 9.0

    def test_sixteen_dim(self):
        assert sq_dist(np.zeros(16), np.ones(16)) == 16.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            sq_dist([1, 2], [1, 2, 3])

    @given(st.lists(finite_floats, min_size=1, max_size=8))
    def test_zero_iff_equal(self, xs):
        assert sq_dist(xs, xs) == 0.0

    @settings(deadline=None)
    @given(
        st.integers(1, 6).flatmap(
            lambda d: st.tuples(
                st.lists(finite_floats, min_size=d, max_size=d),
                st.lists(finite_floats, min_size=d, max_size=d),
            )
        )
    )
    def test_symmetry(self, pair):
        a, b = pair
        assert sq_dist(a, b) == sq_dist(b, a)


class TestAssignNearest:
    def test_basic(self):
        ts = TrainingSet([[0.0], [1.0], [3.0]])
        cb = Codebook([[0.0], [3.0]])
        assert assign_nearest(ts, cb).cluster_of.tolist() == [0, 0, 1]

    def test_single_codeword(self):
        ts = TrainingSet([[0.0], [5.0], [9.0]])
        asg = assign_nearest(ts, Codebook([[4.0]]))
        assert asg.cluster_of.tolist() == [0, 0, 0]

    def test_tie_breaks_to_lowest_index(self):
        ts = TrainingSet([[1.5]])
        cb = Codebook([[0.0], [3.0]])
        assert assign_nearest(ts, cb).cluster_of.tolist() == [0]

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            assign_nearest(TrainingSet([[0.0, 1.0]]), Codebook([[0.0]]))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            vectors = rng.uniform(-10, 10, size=(30, 4))
            codewords = rng.uniform(-10, 10, size=(5, 4))
            asg = assign_nearest(TrainingSet(vectors), Codebook(codewords))
            assert asg.cluster_of.tolist() == brute_nearest(vectors, codewords)

    def test_never_beaten_by_random_assignment(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            ts = TrainingSet(rng.uniform(0, 1, size=(20, 3)))
            cb = Codebook(rng.uniform(0, 1, size=(4, 3)))
            nearest = distortion(ts, cb, assign_nearest(ts, cb)).total_sq_error
            for _ in range(50):
                other = Assignment(cluster_of=rng.integers(0, 4, size=20), m=4)
                assert nearest <= distortion(ts, cb, other).total_sq_error


class TestCentroid:
    def test_basic(self):
        assert centroid([[0.0], [1.0], [3.0]]) == pytest.approx([4.0 / 3.0])

    def test_single_member(self):
        np.testing.assert_array_equal(centroid([[2.0, 5.0]]), [2.0, 5.0])

    def test_two_dim(self):
        np.testing.assert_array_equal(centroid([[0.0, 0.0], [2.0, 4.0]]), [1.0, 2.0])

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            centroid(np.empty((0, 3)))

    def test_minimizes_total_squared_distance(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            members = rng.uniform(-5, 5, size=(rng.integers(2, 10), 3))
            c = centroid(members)
            best = sum(sq_dist(v, c) for v in members)
            for _ in range(100):
                perturbed = c + rng.normal(scale=0.1, size=3)
                assert best <= sum(sq_dist(v, perturbed) for v in members)


class TestDistortion:
    def test_basic(self):
        ts = TrainingSet([[0.0], [1.0], [3.0]])
        cb = Codebook([[0.0], [3.0]])
        report = distortion(ts, cb, assign_nearest(ts, cb))
        assert report.total_sq_error == 1.0
        assert report.mean_sq_error_per_vector == pytest.approx(1.0 / 3.0)

    def test_perfect_codebook(self):
        vectors = np.array([[0.0, 1.0], [2.0, 3.0]])
        ts, cb = TrainingSet(vectors), Codebook(vectors.copy())
        report = distortion(ts, cb, Assignment(cluster_of=[0, 1], m=2))
        assert report.total_sq_error == 0.0

    def test_single_codeword(self):
        ts = TrainingSet([[0.0], [2.0]])
        cb = Codebook([[1.0]])
        report = distortion(ts, cb, assign_nearest(ts, cb))
        assert report.total_sq_error == 2.0
        assert report.mean_sq_error_per_vector == 1.0

    def test_internal_consistency(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            ts = TrainingSet(rng.uniform(0, 255, size=(40, 6)))
            cb = Codebook(rng.uniform(0, 255, size=(7, 6)))
            report = distortion(ts, cb, assign_nearest(ts, cb))
            assert report.total_sq_error == report.per_cluster_error.sum()
            assert report.mean_sq_error_per_vector == report.total_sq_error / ts.n
            assert (report.per_cluster_error >= 0).all()


class TestValidation:
    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            TrainingSet([[np.nan]])
        with pytest.raises(ValueError):
            Codebook([[np.inf, 0.0]])

    def test_assignment_range_checked(self):
        with pytest.raises(ValueError):
            Assignment(cluster_of=[0, 3], m=2)

    def test_per_cluster_members_partition(self):
        asg = Assignment(cluster_of=[0, 1, 0, 2], m=3)
        members = asg.per_cluster_members
        assert [m.tolist() for m in members] == [[0, 2], [1], [3]]
