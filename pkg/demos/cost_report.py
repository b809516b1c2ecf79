"""
Parameters and FLOPs without running a network
==============================================
"""

from lungnodule.cost import count_flops, count_params
from lungnodule.nn import build_classifier, build_discriminator, build_segmenter, build_vgg16_convs

print(f"VGG16 conv stack: {count_params(build_vgg16_convs()):,} parameters")

report = count_flops(build_classifier())
print(report.to_text())

for spec in (build_segmenter("full"), build_discriminator("full"), build_segmenter("tiny")):
    full = count_flops(spec)
    macs = count_flops(spec, macs_only=True)
    print(f"{spec.name:20s} params {count_params(spec):>12,}  FLOPs {full.total_flops:>17,}  MACs {macs.total_flops:>17,}")

# conv cost grows with image area
spec = build_segmenter("tiny")
for side in (64, 128, 256):
    print(side, count_flops(spec, (1, side, side)).total_macs)
