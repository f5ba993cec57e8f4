"""Temporal pose heatmap refinement (C++ core)."""

from ._core import (
    InvalidArgument,
    IoError,
    Model,
    NumericError,
    conv2d,
    decode_argmax,
    encode_gaussian,
    evaluate,
    generate,
    read_dch1,
    run,
    temporal_weights,
    write_dch1,
)

__all__ = [
    "InvalidArgument",
    "IoError",
    "Model",
    "NumericError",
    "conv2d",
    "decode_argmax",
    "encode_gaussian",
    "evaluate",
    "generate",
    "read_dch1",
    "run",
    "temporal_weights",
    "write_dch1",
]
