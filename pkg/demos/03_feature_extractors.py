"""One layer of each extractor kind over the same input.

Every layer frames the sequence the same way; they differ in what runs
inside a window.  The recurrent kinds restart from zero state in each
window, so a window is a self-contained summary of its frames.
"""
import numpy as np

from crnn.framing import WindowSpec
from crnn.layers import CrnnLayerConfig, init_layer, layer_forward
from crnn.numerics import Rng, param_count

rng = Rng(42)
x = rng.split().normal(0.0, 1.0, (3, 20))

kinds = [
    CrnnLayerConfig(kind="conv", features=4, window=WindowSpec(5, 2)),
    CrnnLayerConfig(kind="clstm", features=4, window=WindowSpec(5, 2),
                    source="cell", reduction="last"),
    CrnnLayerConfig(kind="extended_clstm", features=4, window=WindowSpec(5, 2),
                    source="hidden", reduction="max"),
    CrnnLayerConfig(kind="cblstm", features=4, window=WindowSpec(5, 2),
                    source="hidden", reduction="max"),
]

print(f"input 3x{x.shape[1]}\n")
for config in kinds:
    params = init_layer(config, input_dim=3, rng=rng.split())
    out, _ = layer_forward(config, params, x)
    tag = config.kind
    if config.kind != "conv":
        tag += f" ({config.source}/{config.reduction})"
    print(f"{tag:28s} out {out.shape}  params {param_count(params)}")

# Window width costs parameters only where weights are per-position:
# conv flattens the window, the extended kind has per-frame input weights,
# and the plain recurrent kinds reuse one set of weights every frame.
print("\nparameters vs window width:")
for width in (1, 5, 10):
    row = []
    for kind in ("conv", "clstm", "extended_clstm", "cblstm"):
        source = "hidden" if kind == "cblstm" else "cell"
        config = CrnnLayerConfig(kind=kind, features=4,
                                 window=WindowSpec(width, 1), source=source)
        row.append(f"{kind} {param_count(init_layer(config, 3, Rng(0))):5d}")
    print(f"width {width:2d}:  " + "   ".join(row))

# Pooling after the extractor halves the output columns here.
pooled = CrnnLayerConfig(kind="clstm", features=4, window=WindowSpec(5, 2),
                         pool=WindowSpec(2, 2), source="cell", reduction="last")
params = init_layer(pooled, 3, rng.split())
out, _ = layer_forward(pooled, params, x)
print(f"\nwith max pool 2/2: out {out.shape}")
