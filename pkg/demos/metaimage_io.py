"""
MetaImage volumes and nodule masks
==================================

Write a CT-like int16 volume as .mhd/.raw, read it back, window it to the
lung range and rasterize a spherical nodule slice by slice.
"""

import tempfile
from pathlib import Path

import numpy as np

from lungnodule.data import NoduleAnnotation, VolumeMeta, hu_window, read_mhd, write_mhd
from lungnodule.data.volume import volume_nodule_masks

rng = np.random.default_rng(0)
meta = VolumeMeta(dims=(64, 64, 20), spacing=(0.7, 0.7, 2.5), offset=(-22.4, -22.4, 0.0), element_type="MET_SHORT", series_uid="demo")
hu = rng.normal(-800, 60, size=(20, 64, 64)).round().astype(np.int16)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "demo.mhd"
    write_mhd(path, meta, hu)
    print(path.read_text())
    back_meta, vox = read_mhd(path)

print("identical voxels:", np.array_equal(vox, hu), " meta equal:", back_meta == meta)
window = hu_window(vox)
print(f"lung window: mean {window.mean():.3f}, min {window.min():.3f}, max {window.max():.3f}")

# a 10 mm nodule at the volume centre
ann = NoduleAnnotation("demo", center=(0.0, 0.0, 25.0), diameter=10.0)
masks = volume_nodule_masks([ann], meta)
for k in np.flatnonzero(masks.any(axis=(1, 2))):
    print(f"slice {k} (z = {k * 2.5:.1f} mm): {masks[k].sum()} pixels")
volume = masks.sum() * 0.7 * 0.7 * 2.5
print(f"rasterized volume {volume:.0f} mm^3, sphere {4 / 3 * np.pi * 5**3:.0f} mm^3")
