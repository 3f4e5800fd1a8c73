"""End-to-end orchestration: classify, schedule, transmit, receive, score.

The transmit side encodes every payload (semantic codec or text framing plus
QAM), grants RB allocations, emits one control codeword per payload into
every slot's control region (redundant copies, first valid one wins at the
receiver), inserts sync and pilots and modulates the burst. The receive side
works from the sample stream and session configuration alone: correlate for
timing, demodulate, equalize, blind-decode control, then demap and parse
each payload independently so one corrupted allocation never drags down
another.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import channel as _channel
from . import codec as _codec
from . import dci as _dci
from . import modem as _modem
from . import plugin as _plugin
from . import sempath as _sempath
from .channel import ChannelSpec
from .codec import CodecSpec, ImageFrame
from .dci import Dci
from .digipath import (BITS_PER_SYMBOL, FRAME_OVERHEAD, Modulation,
                       frame_num_symbols, frame_text, qam_demodulate,
                       qam_modulate, unframe_text)
from .errors import (FrameCorrupt, InvalidGain, InvalidRequest, LinkError,
                     PayloadOverflow, SyncNotFound, TruncatedStream)
from .grid import (CONTROL_SYMBOL, RB_SUBCARRIERS, AllocationRequest,
                   GridConfig, RbAllocation, ResourceGrid, ResourceType,
                   allocate, allocation_capacity, demap_payload, map_payload)
from .modem import PssConfig, SampleStream

DEFAULT_PILOT_SEED = 0xACE1
SCHEMA_VERSION = 1

STATUS_OK = "ok"
STATUS_FRAME_CORRUPT = "frame_corrupt"
STATUS_DROPPED = "dropped"


@dataclass
class ServiceRequest:
    """One payload to deliver: a video frame or a text blob."""

    image: ImageFrame | None = None
    text: bytes | None = None
    hint: ResourceType | None = None

    @classmethod
    def video(cls, image: ImageFrame, hint: ResourceType | None = None):
        return cls(image=image, hint=hint)

    @classmethod
    def text_message(cls, text: bytes, hint: ResourceType | None = None):
        return cls(text=text, hint=hint)

    def __post_init__(self):
        if (self.image is None) == (self.text is None):
            raise InvalidRequest("request must carry exactly one of image/text")


def classify(req: ServiceRequest) -> ResourceType:
    """Video maps to the semantic path, text to the digital one; hints win."""
    if req.hint is not None:
        return req.hint
    return ResourceType.SEMANTIC if req.image is not None else ResourceType.NON_SEMANTIC


@dataclass
class TxPayloadRecord:
    resource_type: ResourceType
    dci: Dci | None
    n_symbols: int
    image: ImageFrame | None = None
    values: np.ndarray | None = None
    gain: float = 0.0
    text: bytes | None = None
    frame_bits: np.ndarray | None = None


@dataclass
class TxRecord:
    """Ground truth kept aside for scoring; never consumed by the receiver."""

    payloads: list[TxPayloadRecord]
    n_slots: int
    grid_config: GridConfig
    pilot_seed: int
    notes: list[str] = field(default_factory=list)


@dataclass
class RxPayload:
    position: int
    resource_type: ResourceType
    status: str
    image: ImageFrame | None = None
    text: bytes | None = None
    bits: np.ndarray | None = None
    values: np.ndarray | None = None
    detail: str = ""


@dataclass
class RxResult:
    sync_ok: bool
    sync_offset: int = -1
    n_slots: int = 0
    dcis: list[tuple[int, Dci]] = field(default_factory=list)
    payloads: list[RxPayload] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def _encode_payloads(requests, codec_spec, plugin_client):
    """Per-payload channel symbols plus the DCI fields describing them."""
    encoded = []
    notes = []
    for req in requests:
        rtype = classify(req)
        if rtype == ResourceType.SEMANTIC:
            img = req.image
            if img is None:
                raise InvalidRequest("semantic hint on a text payload is unsupported")
            if (img.width, img.height) != (codec_spec.frame_width, codec_spec.frame_height):
                raise InvalidRequest(
                    f"frame {img.width}x{img.height} differs from session "
                    f"{codec_spec.frame_width}x{codec_spec.frame_height}")
            vec, enc_notes = _plugin.encode_image(img, codec_spec, plugin_client)
            notes.extend(enc_notes)
            symbols, gain = _sempath.pack_and_normalize(vec.values)
            encoded.append({
                "rtype": rtype, "symbols": symbols,
                "record": TxPayloadRecord(rtype, None, len(symbols), image=img,
                                          values=vec.values, gain=gain),
                "gain_q": _dci.quantize_gain(gain),
                "payload_len": len(symbols), "modulation": Modulation.QPSK,
            })
        else:
            if req.text is None:
                raise InvalidRequest("digital path carries bytes, not frames")
            bits = frame_text(req.text)
            encoded.append({
                "rtype": rtype, "bits": bits,
                "record": TxPayloadRecord(rtype, None, 0, text=req.text,
                                          frame_bits=bits),
                "gain_q": 0, "payload_len": len(req.text),
            })
    return encoded, notes


def transmit(requests: list[ServiceRequest], grid_cfg: GridConfig,
             codec_spec: CodecSpec, modulation: Modulation = Modulation.QPSK,
             pilot_seed: int = DEFAULT_PILOT_SEED,
             pss_cfg: PssConfig = PssConfig(),
             plugin_client: "_plugin.PluginClient | None" = None,
             ) -> tuple[SampleStream, TxRecord]:
    """Build and modulate one downlink burst carrying every request."""
    encoded, notes = _encode_payloads(requests, codec_spec, plugin_client)
    for e in encoded:
        if e["rtype"] == ResourceType.NON_SEMANTIC:
            e["modulation"] = modulation
            e["symbols"] = qam_modulate(e["bits"], modulation)
            e["record"].n_symbols = len(e["symbols"])

    plan = allocate(
        [AllocationRequest(e["rtype"], len(e["symbols"])) for e in encoded],
        grid_cfg)

    dcis = []
    for e, alloc in zip(encoded, plan.allocations):
        dci = Dci(e["rtype"], alloc.rb_start, alloc.rb_count, e["modulation"],
                  e["payload_len"], e["gain_q"])
        e["record"].dci = dci
        dcis.append(dci)

    grid = ResourceGrid(grid_cfg, plan.n_slots)
    _modem.insert_pss(grid, pss_cfg)
    _modem.insert_pilots(grid, pilot_seed)
    region_bits = 2 * grid_cfg.used_subcarriers  # control row is QPSK
    control = qam_modulate(_dci.pack_control_region(dcis, region_bits),
                           Modulation.QPSK)
    for slot in range(plan.n_slots):
        grid.slot_symbol(slot, CONTROL_SYMBOL)[:] = control
    for e, alloc in zip(encoded, plan.allocations):
        map_payload(grid, alloc, e["symbols"])

    record = TxRecord([e["record"] for e in encoded], plan.n_slots, grid_cfg,
                      pilot_seed, notes)
    return _modem.ofdm_modulate(grid), record


def _slots_needed(dci: Dci, grid_cfg: GridConfig) -> int:
    if dci.resource_type == ResourceType.SEMANTIC:
        n_symbols = dci.payload_len
    else:
        n_symbols = frame_num_symbols(dci.payload_len, dci.modulation)
    per_slot = grid_cfg.data_symbols_per_slot * dci.rb_count * RB_SUBCARRIERS
    return max(1, math.ceil(n_symbols / per_slot))


def _scan_control(stream, offset, grid_cfg, pilot_seed, max_slots):
    """Blind-decode control regions slot by slot until the burst horizon.

    Every slot repeats the same codewords, so the first CRC-valid copy at
    each candidate position wins; the burst length is the largest span any
    recovered record needs.
    """
    found: dict[int, Dci] = {}
    horizon = 1
    slot = 0
    # keep scanning while the burst horizon says so, or until the first
    # valid codeword shows up (slot 0's copies may all be corrupted)
    while slot < max_slots and (not found or slot < horizon):
        start = offset + slot * grid_cfg.slot_samples
        sub = _modem.ofdm_demodulate(stream, start, 1, grid_cfg)
        sub = _modem.equalize(sub, pilot_seed, first_slot=slot)
        bits = qam_demodulate(sub.slot_symbol(0, CONTROL_SYMBOL), Modulation.QPSK)
        for pos, dci in _dci.unpack_control_region_positions(bits):
            if pos not in found:
                found[pos] = dci
        if found:
            horizon = max(_slots_needed(d, grid_cfg) for d in found.values())
        slot += 1
    return found, horizon


def receive(stream: SampleStream, grid_cfg: GridConfig, codec_spec: CodecSpec,
            pilot_seed: int = DEFAULT_PILOT_SEED,
            pss_cfg: PssConfig = PssConfig(),
            plugin_client: "_plugin.PluginClient | None" = None) -> RxResult:
    """Recover every payload the control channel describes.

    Uses only the stream and session configuration. Sync failure aborts the
    whole burst; anything after that degrades per payload.
    """
    try:
        offset = _modem.detect_pss(stream, grid_cfg, pss_cfg)
    except (SyncNotFound, TruncatedStream) as e:
        return RxResult(sync_ok=False, notes=[f"sync failed: {e}"])

    result = RxResult(sync_ok=True, sync_offset=offset)
    max_slots = (len(stream.samples) - offset) // grid_cfg.slot_samples
    if max_slots < 1:
        result.notes.append("stream ends before one full slot")
        return result

    found, horizon = _scan_control(stream, offset, grid_cfg, pilot_seed, max_slots)
    result.dcis = sorted(found.items())
    if not found:
        result.notes.append("no valid control codeword recovered")
        return result
    n_slots = min(horizon, max_slots)
    if horizon > max_slots:
        result.notes.append(f"stream truncated: need {horizon} slots, have {max_slots}")
    result.n_slots = n_slots

    grid = _modem.equalize(
        _modem.ofdm_demodulate(stream, offset, n_slots, grid_cfg), pilot_seed)

    for pos, dci in result.dcis:
        rx = RxPayload(pos, dci.resource_type, STATUS_DROPPED)
        result.payloads.append(rx)
        if not (1 <= dci.rb_count and dci.rb_start + dci.rb_count <= grid_cfg.n_rbs):
            rx.detail = "allocation outside the configured grid"
            continue
        alloc = RbAllocation(dci.rb_start, dci.rb_count, dci.resource_type, pos)
        try:
            if dci.resource_type == ResourceType.SEMANTIC:
                _receive_semantic(rx, grid, alloc, dci, codec_spec, plugin_client,
                                  result.notes)
            else:
                _receive_text(rx, grid, alloc, dci)
        except (LinkError, ValueError) as e:
            rx.status = STATUS_DROPPED
            rx.detail = str(e)
    return result


def _receive_semantic(rx, grid, alloc, dci, codec_spec, plugin_client, notes):
    cap = allocation_capacity(grid.config, alloc, grid.n_slots)
    if dci.payload_len > cap:
        raise PayloadOverflow(f"payload needs {dci.payload_len} REs, region has {cap}")
    symbols = demap_payload(grid, alloc, dci.payload_len)
    if dci.gain_q == 0:
        raise InvalidGain("semantic record carries no gain")
    values = _sempath.denormalize_and_unpack(
        symbols, _dci.dequantize_gain(dci.gain_q), 2 * dci.payload_len)
    image, dec_notes = _plugin.decode_image(
        values, codec_spec.frame_width, codec_spec.frame_height, codec_spec,
        plugin_client)
    notes.extend(dec_notes)
    rx.values = values
    rx.image = image
    rx.status = STATUS_OK


def _receive_text(rx, grid, alloc, dci):
    n_symbols = frame_num_symbols(dci.payload_len, dci.modulation)
    cap = allocation_capacity(grid.config, alloc, grid.n_slots)
    if n_symbols > cap:
        raise PayloadOverflow(f"frame needs {n_symbols} REs, region has {cap}")
    symbols = demap_payload(grid, alloc, n_symbols)
    bits = qam_demodulate(symbols, dci.modulation)
    n_bits = 8 * (dci.payload_len + FRAME_OVERHEAD)
    rx.bits = bits[:n_bits]
    try:
        rx.text = unframe_text(rx.bits)
        rx.status = STATUS_OK
    except FrameCorrupt as e:
        rx.status = STATUS_FRAME_CORRUPT
        rx.detail = str(e)


# ---------------------------------------------------------------------------
# scoring / reporting


@dataclass
class LinkReport:
    """Per-run metrics bundle, JSON-serializable and deterministic."""

    schema_version: int = SCHEMA_VERSION
    sync_ok: bool = False
    sync_offset_found: int = -1
    sync_offset_true: int = -1
    dcis_sent: int = 0
    dcis_recovered: int = 0
    snr_db: float | None = None
    seeds: dict = field(default_factory=dict)
    payloads: list[dict] = field(default_factory=list)
    cbr: float | None = None
    psnr_db: float | None = None
    ms_ssim: float | None = None
    ms_ssim_scales: int | None = None
    ber: float | None = None
    notes: list[str] = field(default_factory=list)
    timings_s: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> dict:
        def clean(x):
            if isinstance(x, float) and math.isinf(x):
                return "inf"
            if isinstance(x, float) and math.isnan(x):
                return "nan"
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, list):
                return [clean(v) for v in x]
            return x

        out = {k: clean(v) for k, v in self.__dict__.items() if k != "timings_s"}
        if include_timings:
            out["timings_s"] = clean(self.timings_s)
        return out

    def to_json(self, include_timings: bool = False) -> str:
        # timings are wall-clock and stay out of the normative report so
        # identical (config, seed) runs serialize byte-identically
        return json.dumps(self.to_dict(include_timings), sort_keys=True, indent=2)

    @property
    def any_payload_ok(self) -> bool:
        return any(p["status"] == STATUS_OK for p in self.payloads)


def build_report(tx: TxRecord, rx: RxResult, chan: ChannelSpec | None = None,
                 compute_ms_ssim: bool = True) -> LinkReport:
    """Score a received burst against its transmit-side ground truth."""
    report = LinkReport(sync_ok=rx.sync_ok, sync_offset_found=rx.sync_offset,
                        dcis_sent=len(tx.payloads), dcis_recovered=len(rx.dcis),
                        notes=list(tx.notes) + list(rx.notes))
    if chan is not None:
        report.sync_offset_true = chan.delay_samples
        report.snr_db = None if math.isinf(chan.snr_db) else chan.snr_db
        report.seeds = {"channel": chan.seed, "pilot": tx.pilot_seed}
    rx_by_pos = {p.position: p for p in rx.payloads}

    psnrs, ssims, cbrs = [], [], []
    bit_errors = 0
    bits_total = 0
    for i, tx_payload in enumerate(tx.payloads):
        rxp = rx_by_pos.get(i)
        entry = {"payload": i,
                 "resource_type": int(tx_payload.resource_type),
                 "status": STATUS_DROPPED if rxp is None else rxp.status}
        if rxp is None:
            entry["detail"] = "control codeword lost"
        elif rxp.detail:
            entry["detail"] = rxp.detail
        if tx_payload.resource_type == ResourceType.SEMANTIC:
            img = tx_payload.image
            cbr = _codec.measure_cbr(tx_payload.n_symbols, img.width, img.height)
            cbrs.append(cbr)
            entry["cbr"] = cbr
            if rxp is not None and rxp.image is not None:
                entry["psnr_db"] = _codec.psnr(img, rxp.image)
                psnrs.append(entry["psnr_db"])
                if compute_ms_ssim:
                    entry["ms_ssim"] = _codec.ms_ssim(img, rxp.image)
                    entry["ms_ssim_scales"] = _codec.ms_ssim_scales(img.width,
                                                                    img.height)
                    ssims.append(entry["ms_ssim"])
                    report.ms_ssim_scales = entry["ms_ssim_scales"]
        else:
            if rxp is not None and rxp.bits is not None:
                ref = tx_payload.frame_bits
                n = min(len(ref), len(rxp.bits))
                errors = int(np.sum(ref[:n] != rxp.bits[:n]))
                bit_errors += errors + abs(len(ref) - len(rxp.bits))
                bits_total += max(len(ref), len(rxp.bits))
                entry["bit_errors"] = errors
                entry["text_ok"] = rxp.status == STATUS_OK
            else:
                bits_total += len(tx_payload.frame_bits)
                bit_errors += len(tx_payload.frame_bits)
                entry["text_ok"] = False
        report.payloads.append(entry)

    if cbrs:
        report.cbr = float(np.mean(cbrs))
    if psnrs:
        report.psnr_db = math.inf if all(math.isinf(p) for p in psnrs) \
            else float(np.mean([p for p in psnrs if not math.isinf(p)]))
    if ssims:
        report.ms_ssim = float(np.mean(ssims))
    if bits_total:
        report.ber = bit_errors / bits_total
    return report


@dataclass
class SimulationOutcome:
    stream_tx: SampleStream
    stream_rx: SampleStream
    tx_record: TxRecord
    rx_result: RxResult
    report: LinkReport


def run_simulation(requests: list[ServiceRequest], grid_cfg: GridConfig,
                   codec_spec: CodecSpec, chan_spec: ChannelSpec,
                   modulation: Modulation = Modulation.QPSK,
                   pilot_seed: int = DEFAULT_PILOT_SEED,
                   pss_cfg: PssConfig = PssConfig(),
                   compute_ms_ssim: bool = True,
                   plugin_client: "_plugin.PluginClient | None" = None,
                   ) -> SimulationOutcome:
    """Transmit, impair, receive and score one burst."""
    t0 = time.perf_counter()
    stream_tx, tx_record = transmit(requests, grid_cfg, codec_spec, modulation,
                                    pilot_seed, pss_cfg, plugin_client)
    t1 = time.perf_counter()
    stream_rx = _channel.apply(stream_tx, chan_spec)
    t2 = time.perf_counter()
    rx_result = receive(stream_rx, grid_cfg, codec_spec, pilot_seed, pss_cfg,
                        plugin_client)
    t3 = time.perf_counter()
    report = build_report(tx_record, rx_result, chan_spec, compute_ms_ssim)
    report.timings_s = {"transmit": t1 - t0, "channel": t2 - t1,
                        "receive": t3 - t2, "total": t3 - t0}
    return SimulationOutcome(stream_tx, stream_rx, tx_record, rx_result, report)
