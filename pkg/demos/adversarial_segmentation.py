"""
Stage 1: adversarial lung segmentation
======================================

Train the tiny encoder-decoder with a discriminator that tries to tell the
ground-truth mask from the prediction. Takes a minute or two on a laptop.
"""

import numpy as np

from lungnodule.data.phantom import PhantomConfig, phantom_dataset
from lungnodule.nn import Network, build_segmenter
from lungnodule.training import TrainConfig, mean_dice, train_stage1

images, lungs, _, _ = phantom_dataset(PhantomConfig(size=64, seed=1), 140)
train, val, test = (images[:100], lungs[:100]), (images[100:120], lungs[100:120]), (images[120:], lungs[120:])

config = TrainConfig(iterations=200, batch_size=8, learning_rate=1e-3, seed=0)


def show(it, total, row):
    if it % 25 == 0:
        print(f"iter {it:4d}/{total}  j_seg {row['j_seg']:.4f}  j_adv {row['j_adv']:.4f}  disc acc {row['disc_acc']:.2f}")


result = train_stage1(train, val, config, progress=show)

# the weights with the best validation Dice
net = Network(build_segmenter("tiny"), result.seg_weights)
print(f"best validation Dice {result.best_val_dice:.4f}")
print(f"held-out Dice {mean_dice(net, *test):.4f}")

# the logged objective is the segmentation loss minus alpha times the adversarial loss
row = result.history[-1]
print("j_net - (j_seg - alpha j_adv) =", row["j_net"] - (row["j_seg"] - config.alpha * row["j_adv"]))
print("first rows of the history:", [round(r["j_seg"], 4) for r in result.history[:5]], np.isnan(result.history[0]["val_dice"]))
