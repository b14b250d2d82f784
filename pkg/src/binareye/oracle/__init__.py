"""Independent dense reference for the network semantics."""

from binareye.oracle.model import DenseLayer, DenseNet
from binareye.oracle.reference import (
    ref_conv_layer,
    ref_fc,
    ref_first_layer,
    ref_layer_outputs,
    ref_network,
    ref_pool,
)

__all__ = [
    "DenseLayer",
    "DenseNet",
    "ref_conv_layer",
    "ref_fc",
    "ref_first_layer",
    "ref_layer_outputs",
    "ref_network",
    "ref_pool",
]
