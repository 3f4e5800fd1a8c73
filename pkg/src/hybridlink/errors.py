"""Exception types shared across the link simulator."""


class LinkError(Exception):
    """Base class for all hybridlink errors."""


class InvalidRequest(LinkError):
    """A scheduling request is degenerate (zero symbols, too many payloads)."""


class CapacityExceeded(LinkError):
    """Requested allocations do not fit into the configured resource blocks."""


class PayloadOverflow(LinkError):
    """More symbols than the allocation's data region can hold."""


class FieldRangeError(LinkError):
    """A control-record field is outside its bit-width range."""


class CrcMismatch(LinkError):
    """Checksum failure on a control codeword; the payload must be dropped."""


class TooManyDcis(LinkError):
    """Control region holds at most four candidate codewords."""


class SyncNotFound(LinkError):
    """Correlation peak below the detection threshold."""


class TruncatedStream(LinkError):
    """Sample stream too short for the requested demodulation span."""


class ZeroChannel(LinkError):
    """Channel estimate is exactly zero; equalization undefined."""


class InvalidGain(LinkError):
    """Semantic gain must be strictly positive (quantized field nonzero)."""


class BadDimensions(LinkError):
    """Image has zero-sized dimensions."""


class LengthMismatch(LinkError):
    """Semantic vector length disagrees with the codec budget."""


class FrameCorrupt(LinkError):
    """Text frame failed its CRC-32 integrity check."""


class ImageTooSmall(LinkError):
    """Image below the minimum size for even a single similarity scale."""


class PluginError(LinkError):
    """Base class for external-codec failures (fallback to builtin unless strict)."""


class PluginTimeout(PluginError):
    """External codec did not answer within the deadline."""


class ProtocolViolation(PluginError):
    """External codec broke the wire protocol (framing, lengths, magic)."""


class PluginCrash(PluginError):
    """External codec process died or closed its pipes mid-exchange."""
