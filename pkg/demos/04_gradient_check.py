"""Finite-difference verification of the hand-written backward passes.

Every parameter coordinate is nudged by +/- 1e-5 and the centered
difference of the cross-entropy loss is compared against the analytic
gradient, coordinate by coordinate.
"""
from crnn.framing import WindowSpec
from crnn.layers import CrnnLayerConfig
from crnn.model import ModelConfig, min_sequence_length
from crnn.training import grad_check

layer = CrnnLayerConfig(kind="clstm", features=3, window=WindowSpec(3, 2),
                        pool=WindowSpec(2, 1), source="cell", reduction="max")
config = ModelConfig(input_dim=2, num_classes=2, layers=(layer,),
                     classifier="lstm", classifier_dim=3, dense_dim=4,
                     aggregation="last", aggregation_steps=2)

length = min_sequence_length(config) + 4
report = grad_check(config, seed=0, length=length, threshold=1e-5)

print(f"sequence length {length}, step {report.step:g}\n")
width = max(len(name) for name in report.per_param)
for name in sorted(report.per_param):
    print(f"{name:<{width}}  max rel err {report.per_param[name]:.3e}")
print(f"\nworst coordinate overall: {report.max_rel_error:.3e}")
print(f"failures above threshold: {len(report.failures)}")
