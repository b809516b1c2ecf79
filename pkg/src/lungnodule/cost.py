"""Static parameter and FLOP accounting for a :class:`NetworkSpec`.

Convention: conv/linear FLOPs are 2 x MACs (one multiply plus one add);
pool, ReLU, batch-norm, sigmoid and softmax cost 1 FLOP per output element;
concat, unpool and flatten are free. ``macs_only`` reports conv/linear MACs
alone, which is the convention most published totals appear to follow.
Batch-norm running statistics are not trainable and are not counted.
"""

import csv
import io
from dataclasses import dataclass, field
from typing import List, Tuple

from .nn.spec import (
    BatchNorm2d,
    ConcatChannels,
    Conv2d,
    Flatten,
    Linear,
    MaxPool2x2,
    MaxUnpool2x2,
    NetworkSpec,
    ReLU,
    Sigmoid,
    SoftmaxOverChannels,
    infer_shapes,
)
from .nn.weights import TRAINABLE_ROLES, WeightStore

ELEMENTWISE = (MaxPool2x2, ReLU, BatchNorm2d, Sigmoid, SoftmaxOverChannels)
FREE = (ConcatChannels, MaxUnpool2x2, Flatten)


@dataclass
class CostRow:
    name: str
    kind: str
    params: int
    macs: int
    flops: int
    output_shape: Tuple[int, ...]


@dataclass
class CostReport:
    network: str
    input_shape: Tuple[int, ...]
    macs_only: bool
    rows: List[CostRow] = field(default_factory=list)

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def total_macs(self) -> int:
        return sum(r.macs for r in self.rows)

    @property
    def total_flops(self) -> int:
        return sum(r.flops for r in self.rows)

    def convention(self) -> str:
        if self.macs_only:
            return "FLOPs column = conv/linear MACs only; other layers 0"
        return "FLOPs = 2*MACs for conv/linear; 1 per output element for pool/relu/bn/sigmoid/softmax"

    def to_text(self) -> str:
        shape = "x".join(str(d) for d in self.input_shape)
        lines = [
            f"# network: {self.network}  input: {shape}",
            f"# convention: {self.convention()}",
            "# params: trainable only (batch-norm running statistics excluded)",
        ]
        header = ("layer", "kind", "params", "MACs", "FLOPs", "output")
        body = [(r.name, r.kind, f"{r.params:,}", f"{r.macs:,}", f"{r.flops:,}", "x".join(map(str, r.output_shape))) for r in self.rows]
        body.append(("TOTAL", "", f"{self.total_params:,}", f"{self.total_macs:,}", f"{self.total_flops:,}", ""))
        widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
        for row in [header] + body:
            cells = [row[0].ljust(widths[0]), row[1].ljust(widths[1])]
            cells += [row[i].rjust(widths[i]) for i in range(2, 5)]
            cells.append(row[5])
            lines.append("  ".join(cells).rstrip())
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("layer", "kind", "params", "macs", "flops", "output_shape"))
        for r in self.rows:
            w.writerow((r.name, r.kind, r.params, r.macs, r.flops, "x".join(map(str, r.output_shape))))
        w.writerow(("TOTAL", "", self.total_params, self.total_macs, self.total_flops, ""))
        return buf.getvalue()


def layer_params(layer) -> int:
    if isinstance(layer, Conv2d):
        return layer.in_ch * layer.out_ch * layer.kernel**2 + layer.out_ch
    if isinstance(layer, Linear):
        return layer.in_features * layer.out_features + layer.out_features
    if isinstance(layer, BatchNorm2d):
        return 2 * layer.ch
    return 0


def count_params(spec: NetworkSpec) -> int:
    return sum(layer_params(layer) for layer in spec.layers)


def _prod(shape) -> int:
    n = 1
    for d in shape:
        n *= int(d)
    return n


def count_flops(spec: NetworkSpec, input_shape=None, macs_only: bool = False) -> CostReport:
    """Per-layer report for one sample of ``input_shape`` (C, H, W); default is the spec's own."""
    input_shape = tuple(input_shape or spec.input_shape)
    shapes = infer_shapes(spec, input_shape)
    report = CostReport(spec.name, input_shape, macs_only)
    for name, layer, out in zip(spec.layer_names, spec.layers, shapes):
        if isinstance(layer, Conv2d):
            macs = out[1] * out[2] * layer.out_ch * layer.in_ch * layer.kernel**2
        elif isinstance(layer, Linear):
            macs = layer.in_features * layer.out_features
        else:
            macs = 0
        if macs_only:
            flops = macs
        elif macs:
            flops = 2 * macs
        elif isinstance(layer, ELEMENTWISE):
            flops = _prod(out)
        else:
            flops = 0
        report.rows.append(CostRow(name, type(layer).__name__, layer_params(layer), macs, flops, tuple(out)))
    return report


def brute_force_param_oracle(store: WeightStore) -> int:
    """Count trainable scalars one by one from materialized weights."""
    total = 0
    for _, role, tensor in store.items():
        if role not in TRAINABLE_ROLES:
            continue
        for _ in tensor.data.flat:
            total += 1
    return total
