"""Synthetic point-cloud models used by tests, demos and the CLI."""
from __future__ import annotations

import numpy as np

from .geometry import PointCloud


def fibonacci_sphere(n: int, radius: float = 1.0) -> PointCloud:
    """Near-uniform sampling of a sphere on a golden-angle spiral."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    rho = np.sqrt(1.0 - z * z)
    phi = np.pi * (3.0 - np.sqrt(5.0)) * k
    return PointCloud(radius * np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z]))


def random_sphere(n: int, seed: int = 0) -> PointCloud:
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(n, 3))
    return PointCloud(p / np.linalg.norm(p, axis=1, keepdims=True))


def swiss_roll(n: int, seed: int = 0) -> PointCloud:
    rng = np.random.default_rng(seed)
    t = 1.5 * np.pi * (1.0 + 2.0 * rng.random(n))
    h = 10.0 * rng.random(n)
    return PointCloud(np.column_stack([t * np.cos(t), h, t * np.sin(t)]) / 10.0)


def torus(n: int, major: float = 1.0, minor: float = 0.4, seed: int = 0) -> PointCloud:
    rng = np.random.default_rng(seed)
    u = 2 * np.pi * rng.random(n)
    v = 2 * np.pi * rng.random(n)
    return PointCloud(
        np.column_stack(
            [(major + minor * np.cos(v)) * np.cos(u), (major + minor * np.cos(v)) * np.sin(u), minor * np.sin(v)]
        )
    )


def blob(n: int, seed: int = 0) -> PointCloud:
    """Bumpy closed surface: a sphere with a smooth radial perturbation."""
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(n, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    r = 1.0 + 0.25 * p[:, 0] * p[:, 1] + 0.2 * np.cos(3 * p[:, 2])
    return PointCloud(p * r[:, None] + np.array([0.3, -0.1, 0.5]))


MODELS = {
    "sphere": lambda n, seed=0: fibonacci_sphere(n),
    "random_sphere": random_sphere,
    "swiss_roll": swiss_roll,
    "torus": torus,
    "blob": blob,
}
