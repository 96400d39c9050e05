"""Synthetic point sets used by the examples, tests and the CLI."""
import numpy as np

from .kernel import DataMatrix


def rings(n_per_ring=200, radii=(1.0, 3.0), noise=0.05, seed=0):
    """Concentric noisy circles, one class per radius."""
    rng = np.random.default_rng([seed, 11])
    pts, labels = [], []
    for label, r in enumerate(radii):
        theta = rng.uniform(0, 2 * np.pi, n_per_ring)
        ring = r * np.column_stack([np.cos(theta), np.sin(theta)])
        pts.append(ring + noise * rng.standard_normal(ring.shape))
        labels.append(np.full(n_per_ring, label))
    return DataMatrix(np.vstack(pts), np.concatenate(labels))


def blobs(n_per_blob=50, centers=((0.0, 0.0), (10.0, 0.0), (0.0, 10.0)), spread=0.5, seed=0):
    """Isotropic Gaussian blobs, one class per centre."""
    rng = np.random.default_rng([seed, 13])
    centers = np.asarray(centers, dtype=float)
    pts = np.vstack([c + spread * rng.standard_normal((n_per_blob, centers.shape[1])) for c in centers])
    labels = np.repeat(np.arange(len(centers)), n_per_blob)
    return DataMatrix(pts, labels)


GENERATORS = {"rings": rings, "blobs": blobs}
