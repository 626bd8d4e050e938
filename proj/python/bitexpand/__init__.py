"""Bit-depth expansion toolkit (Python bindings)."""

from ._bitexpand import (
    ArgumentError,
    BitNetConfig,
    BitNetModel,
    ComputationError,
    ConfigError,
    DomainError,
    LoadError,
    expand,
    psnr,
    quantize,
    read_png,
    ssim,
    synthetic_image,
    train,
    write_png,
)

__all__ = [
    "ArgumentError",
    "BitNetConfig",
    "BitNetModel",
    "ComputationError",
    "ConfigError",
    "DomainError",
    "LoadError",
    "expand",
    "psnr",
    "quantize",
    "read_png",
    "ssim",
    "synthetic_image",
    "train",
    "write_png",
]
