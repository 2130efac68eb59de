"""Quantized-ANN to spiking-network conversion (C++ core)."""

from ._qsnn import (
    QsnnError,
    QuantAct,
    QuantNet,
    SnnNet,
    __version__,
    blobs,
    convert,
    quant_grad_s,
    quant_grad_v,
    quant_state,
    selftest,
    simulate,
    unevenness_demo,
)

__all__ = [
    "QsnnError",
    "QuantAct",
    "QuantNet",
    "SnnNet",
    "__version__",
    "blobs",
    "convert",
    "quant_grad_s",
    "quant_grad_v",
    "quant_state",
    "selftest",
    "simulate",
    "unevenness_demo",
]
