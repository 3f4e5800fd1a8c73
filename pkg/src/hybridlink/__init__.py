"""Hybrid semantic/digital OFDM downlink: library and link-level simulator.

Semantic payloads travel as power-normalized analog constellation points,
digital payloads as framed Gray-QAM bits; both coexist on one resource grid,
described by an extended control record with a resource-type field.
"""
from .channel import ChannelSpec
from .codec import CodecSpec, ImageFrame, measure_cbr, ms_ssim, psnr
from .dci import Dci, decode_dci, encode_dci
from .digipath import Modulation
from .grid import GridConfig, RbAllocation, ResourceGrid, ResourceType
from .modem import PssConfig, SampleStream
from .pipeline import (LinkReport, ServiceRequest, classify, receive,
                       run_simulation, transmit)
from .sempath import SemanticVector

__version__ = "0.1.0"

__all__ = [
    "ChannelSpec", "CodecSpec", "Dci", "GridConfig", "ImageFrame",
    "LinkReport", "Modulation", "PssConfig", "RbAllocation", "ResourceGrid",
    "ResourceType", "SampleStream", "SemanticVector", "ServiceRequest",
    "classify", "decode_dci", "encode_dci", "measure_cbr", "ms_ssim", "psnr",
    "receive", "run_simulation", "transmit", "__version__",
]
