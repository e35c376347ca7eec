"""Seeded synthetic data: piecewise-smooth test images and clustered point sets.

Everything here is driven by numpy's PCG64 generator, so a given seed
reproduces the same data on any platform.
"""

from __future__ import annotations

import numpy as np

from .core import TrainingSet
from .imageio import Image


def piecewise_smooth_image(
    width: int = 256,
    height: int = 256,
    seed: int = 0,
    n_regions: int = 14,
    texture_amp: float = 9.0,
    grain_amp: float = 4.0,
) -> Image:
    """Random piecewise-smooth grayscale image.

    Voronoi regions around random sites, each with its own base level and
    linear shading, plus a low-frequency cosine texture and a fine grain
    mimicking sensor noise.  The result has smooth interiors separated by
    hard edges -- the structure block-based VQ is designed for -- while the
    grain keeps blocks distinct the way real photographs are (exact duplicate
    blocks make exemplar ties ubiquitous and are not representative of the
    natural images this models).
    """
    rng = np.random.default_rng(seed)
    sites = rng.uniform(0, [width, height], size=(n_regions, 2))
    base = rng.uniform(25.0, 230.0, size=n_regions)
    grad = rng.uniform(-0.35, 0.35, size=(n_regions, 2))

    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)

    dx = gx[:, :, None] - sites[None, None, :, 0]
    dy = gy[:, :, None] - sites[None, None, :, 1]
    region = (dx * dx + dy * dy).argmin(axis=2)

    shade = (
        base[region]
        + grad[region, 0] * (gx - sites[region, 0])
        + grad[region, 1] * (gy - sites[region, 1])
    )

    texture = np.zeros_like(shade)
    for _ in range(3):
        fx, fy = rng.uniform(0.5, 3.0, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        texture += np.cos(2 * np.pi * (fx * gx / width + fy * gy / height) + phase)
    shade += texture_amp * texture / 3.0
    shade += rng.uniform(-grain_amp, grain_amp, size=shade.shape)

    pixels = np.clip(np.floor(shade + 0.5), 0, 255).astype(np.uint8)
    return Image(pixels=pixels)


def gaussian_clusters(
    centers, n_per_cluster: int, sigma: float, seed: int = 0
) -> tuple[TrainingSet, np.ndarray]:
    """Isotropic Gaussian blobs around the given centers.

    Returns the stacked training set and the generating label of each vector.
    """
    rng = np.random.default_rng(seed)
    centers = np.asarray(centers, dtype=np.float64)
    points = []
    labels = []
    for k, c in enumerate(centers):
        points.append(c + sigma * rng.standard_normal(size=(n_per_cluster, centers.shape[1])))
        labels.append(np.full(n_per_cluster, k))
    return TrainingSet(vectors=np.vstack(points)), np.concatenate(labels)


def uniform_training_set(
    n: int, dim: int, seed: int = 0, low: float = 0.0, high: float = 255.0
) -> TrainingSet:
    """n vectors drawn uniformly from [low, high]^dim."""
    rng = np.random.default_rng(seed)
    return TrainingSet(vectors=rng.uniform(low, high, size=(n, dim)))
