"""
Stage 2: nodule patches and RISE saliency
=========================================

Train the modified LeNet on balanced phantom patches, then ask RISE which
pixels drive a positive prediction.
"""

import numpy as np

from lungnodule.data.datasets import phantom_patch_set
from lungnodule.data.patches import patches_to_arrays
from lungnodule.data.phantom import PhantomConfig
from lungnodule.explain import RiseConfig, rise_saliency
from lungnodule.metrics import C1, classification_report
from lungnodule.nn import Network, build_classifier
from lungnodule.training import TrainConfig, classify, train_stage2

records = phantom_patch_set(PhantomConfig(size=128, nodule_diameter=(4.0, 10.0), seed=5), 300)
x, y = patches_to_arrays(records)
n_val = len(x) // 5
print(f"{len(x)} patches, {np.mean(y == C1):.2f} with nodules")

result = train_stage2((x[n_val:], y[n_val:]), (x[:n_val], y[:n_val]), TrainConfig(learning_rate=1e-3, epochs_stage2=8, batch_size=32))
net = Network(build_classifier(), result.weights)
report = classification_report(classify(net, x[:n_val]).argmax(axis=1), y[:n_val])
print(report.to_text())

# saliency for the first validation patch the network calls positive
probs = classify(net, x[:n_val])
i = int(np.argmax(probs[:, C1]))
sal = rise_saliency(net.predict, x[i, 0], RiseConfig(n_masks=500, seed=0, baseline="mean"))
r, c = np.unravel_index(np.argmax(sal), sal.shape)
print(f"patch {i}: P(nodule) {probs[i, C1]:.3f}, saliency peak at row {r}, col {c}")
print("brightest pixel of the patch:", tuple(int(v) for v in np.unravel_index(np.argmax(x[i, 0]), (64, 64))))
