"""Bit-exact simulator, ISA toolchain and energy model for a 64-neuron binary CNN processor."""

__version__ = "0.1.0"
