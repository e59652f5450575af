"""Generative image and video compression with a frozen adversarially trained decoder."""

from .channel import ChannelModel, corrupt, robustness_sweep
from .container import (
    ContainerError,
    McBitstream,
    NcBitstream,
    decode_mc,
    decode_nc,
    encode_mc,
    encode_nc,
)
from .latent_codec import QuantizedLatent, QuantSpec, dequantize, pack, quantize, unpack
from .metrics import QualityReport, classifier_probe, psnr, rate, ssim
from .models import EncoderConfig, GanConfig, LossConfig, ModelBundle
from .pipeline import McodeConfig, eval_run, mcode_decode, mcode_encode, ncode_decode, ncode_encode

__all__ = [
    "ChannelModel",
    "ContainerError",
    "EncoderConfig",
    "GanConfig",
    "LossConfig",
    "McBitstream",
    "McodeConfig",
    "ModelBundle",
    "NcBitstream",
    "QualityReport",
    "QuantSpec",
    "QuantizedLatent",
    "classifier_probe",
    "corrupt",
    "decode_mc",
    "decode_nc",
    "dequantize",
    "encode_mc",
    "encode_nc",
    "eval_run",
    "mcode_decode",
    "mcode_encode",
    "ncode_decode",
    "ncode_encode",
    "pack",
    "psnr",
    "quantize",
    "rate",
    "robustness_sweep",
    "ssim",
    "unpack",
]
