"""Per-class Gaussian intensity synthesis under a multiplicative bias field.

Draws concrete class means/variances from hyperpriors, synthesizes a
two-channel image from a label map, and verifies the class statistics.
"""

import numpy as np

from pvgen import Grid, GmmPriors, LabelVolume, sample_bias_field, sample_gmm_params, synthesize_hr_image

rng = np.random.default_rng(21)
grid = Grid((40, 40, 40))

labels_data = np.zeros(grid.dims, np.int32)
labels_data[:, :, 20:] = 1
labels_data[10:30, 10:30, 5:35] = 2
labels = LabelVolume(grid, labels_data)

# hyperpriors: one row per class, one column per channel, (location, scale)
mean_prior = np.array(
    [[[30.0, 3.0], [55.0, 3.0]], [[95.0, 5.0], [70.0, 5.0]], [[160.0, 8.0], [120.0, 8.0]]]
)
logvar_prior = np.tile(np.array([np.log(25.0), 0.2]), (3, 2, 1))
priors = GmmPriors((0, 1, 2), 2, mean_prior, logvar_prior)

params = sample_gmm_params(rng, priors)
print("drawn class means:\n", np.round(params.means, 2))
print("drawn class variances:\n", np.round(params.variances, 2))

bias = sample_bias_field(rng, sigma_b=0.3, hr_grid=grid, channels=2)
print("\nbias field range:", round(float(bias.field.min()), 3), "..", round(float(bias.field.max()), 3))

image = synthesize_hr_image(labels, params, bias, rng)
print("\nsynthesized image:", image.data.shape, image.data.dtype)

print("\nper-class channel-0 statistics (bias shifts them slightly):")
for k in range(3):
    values = image.data[..., 0][labels.data == k]
    print(
        f"  class {k}: n={values.size:6d} mean {values.mean():8.2f} (drawn {params.means[k, 0]:7.2f})"
        f"  var {values.var():8.2f} (drawn {params.variances[k, 0]:6.2f})"
    )

# determinism: the same seed reproduces the image bit for bit
again = synthesize_hr_image(labels, params, bias, np.random.default_rng(99))
once = synthesize_hr_image(labels, params, bias, np.random.default_rng(99))
print("\nsame seed, same image:", bool(np.array_equal(again.data, once.data)))
