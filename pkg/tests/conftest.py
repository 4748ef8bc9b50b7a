import numpy as np
import pytest

from pvgen import Grid, GmmPriors, IntensityVolume, LabelVolume


def make_phantom_labels(dims, spacing=(1.0, 1.0, 1.0), n_labels=4, seed=0):
    """Geometric phantom: background plus nested ellipsoids for n_labels-1
    foreground classes, lightly perturbed per seed."""
    rng = np.random.default_rng(seed)
    nx, ny, nz = dims
    x, y, z = np.meshgrid(
        np.linspace(-1, 1, nx), np.linspace(-1, 1, ny), np.linspace(-1, 1, nz), indexing="ij"
    )
    center = rng.uniform(-0.12, 0.12, size=3)
    radii = np.sort(rng.uniform(0.3, 0.92, size=n_labels - 1))[::-1]
    r = np.sqrt((x - center[0]) ** 2 + 1.15 * (y - center[1]) ** 2 + (z - center[2]) ** 2)
    data = np.zeros(dims, dtype=np.int32)
    for k, radius in enumerate(radii):
        data[r < radius] = k + 1
    return LabelVolume(Grid(dims, spacing), data)


def make_priors(labels, channels=1, mean_spread=60.0, scale=0.0, logvar_loc=3.0, logvar_scale=0.0):
    """Well-separated class means, deterministic by default."""
    k = len(labels)
    mean_prior = np.zeros((k, channels, 2))
    logvar_prior = np.zeros((k, channels, 2))
    for i in range(k):
        for c in range(channels):
            mean_prior[i, c] = (20.0 + mean_spread * i + 7.0 * c, scale)
            logvar_prior[i, c] = (logvar_loc, logvar_scale)
    return GmmPriors(tuple(labels), channels, mean_prior, logvar_prior)


def constant_volume(dims, value, channels=1, spacing=(1.0, 1.0, 1.0)):
    data = np.full(dims + (channels,), value, dtype=np.float32)
    return IntensityVolume(Grid(dims, spacing), data)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
