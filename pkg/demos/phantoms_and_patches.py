"""
Synthetic chest slices and 64x64 patches
========================================

Draw a phantom slice, cut the lung region into labelled patches and
balance the two classes.
"""

import numpy as np

from lungnodule.data import PhantomConfig, balance_patches, extract_patches, phantom_generate
from lungnodule.data.phantom import phantom_dataset
from lungnodule.metrics import C1

config = PhantomConfig(size=128, nodule_count=(1, 3), nodule_diameter=(4.0, 10.0), seed=3)
image, lungs, nodules, annotations = phantom_generate(config)
print("image", image.shape, image.dtype, "range", image.min(), image.max())
print(f"lung fraction {lungs.mean():.3f}, nodule pixels {nodules.sum()}")
for a in annotations:
    print("nodule at x=%.0f y=%.0f, diameter %.1f px" % (a.center[0], a.center[1], a.diameter))

records = extract_patches(image, lungs, nodules, stride=16)
print(len(records), "patches,", sum(r.label == C1 for r in records), "contain nodule pixels")

# many slices, then equal class counts
images, lung_masks, nodule_masks, _ = phantom_dataset(config, 30)
pool = []
for i, (img, lung, nod) in enumerate(zip(images, lung_masks, nodule_masks)):
    pool += extract_patches(img, lung, nod, slice_index=i)
balanced = balance_patches(pool, seed=0)
labels = np.array([r.label for r in balanced])
print(f"{len(pool)} patches before balancing, {len(balanced)} after ({np.mean(labels == C1):.2f} C1)")
