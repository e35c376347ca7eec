"""Seeded synthetic generators: determinism and basic shape guarantees."""

import numpy as np

from vqcodebook.imageio import extract_blocks, write_pgm
from vqcodebook.synthetic import (
    gaussian_clusters,
    piecewise_smooth_image,
    uniform_training_set,
)


class TestPiecewiseSmoothImage:
    def test_same_seed_same_bytes(self):
        a = piecewise_smooth_image(64, 64, seed=5)
        b = piecewise_smooth_image(64, 64, seed=5)
        assert write_pgm(a) == write_pgm(b)

    def test_different_seeds_differ(self):
        a = piecewise_smooth_image(64, 64, seed=5)
        b = piecewise_smooth_image(64, 64, seed=6)
        assert a != b

    def test_dimensions_and_range(self):
        img = piecewise_smooth_image(48, 32, seed=0)
        assert (img.width, img.height) == (48, 32)
        assert img.pixels.min() >= 0 and img.pixels.max() <= 255

    def test_blocks_are_distinct(self):
        # the grain exists so block-level exemplar ties stay rare, like in
        # real photographs; all 4x4 blocks should be unique
        img = piecewise_smooth_image(128, 128, seed=1)
        vectors = extract_blocks(img).vectors
        assert len(np.unique(vectors, axis=0)) == len(vectors)


class TestGaussianClusters:
    def test_labels_and_counts(self):
        ts, labels = gaussian_clusters([[0, 0], [10, 10]], 7, 0.5, seed=2)
        assert ts.n == 14
        assert labels.tolist() == [0] * 7 + [1] * 7

    def test_points_near_their_centers(self):
        centers = np.array([[0.0, 0.0], [100.0, 0.0]])
        ts, labels = gaussian_clusters(centers, 25, 1.0, seed=3)
        for k in (0, 1):
            cluster = ts.vectors[labels == k]
            assert np.abs(cluster - centers[k]).max() < 6.0  # ~6 sigma

    def test_deterministic(self):
        a, _ = gaussian_clusters([[0, 0]], 5, 1.0, seed=4)
        b, _ = gaussian_clusters([[0, 0]], 5, 1.0, seed=4)
        np.testing.assert_array_equal(a.vectors, b.vectors)


class TestUniformTrainingSet:
    def test_shape_and_bounds(self):
        ts = uniform_training_set(30, 5, seed=0, low=2.0, high=3.0)
        assert (ts.n, ts.dim) == (30, 5)
        assert ts.vectors.min() >= 2.0 and ts.vectors.max() <= 3.0
