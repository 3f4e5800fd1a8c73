"""Command-line front end: end-to-end runs, BER calibration, SNR sweeps.

Option precedence is flag > config file > built-in default. Reports are JSON
with a stable schema; sweep and BER results are CSV on stdout.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import images as _images
from .channel import ChannelSpec
from .codec import CodecSpec, ImageFrame
from .digipath import (BITS_PER_SYMBOL, Modulation, qam_demodulate,
                       qam_modulate, qpsk_ber_theory)
from .grid import GridConfig
from .pipeline import DEFAULT_PILOT_SEED, ServiceRequest, run_simulation

_MODULATION_NAMES = {"qpsk": Modulation.QPSK, "16qam": Modulation.QAM16,
                     "64qam": Modulation.QAM64}


@dataclass
class RunConfig:
    """Fully resolved settings for one simulate/sweep invocation."""

    images: list[str] = field(default_factory=list)
    text: str = "hello semantic world"
    snr_db: float = 30.0
    fading: str = "none"
    delay_samples: int = 0
    seed: int = 0
    fft_size: int = 256
    used_subcarriers: int = 240
    cp_len: int = 32
    symbols_per_slot: int = 14
    codec: str = "builtin"
    plugin_cmd: str = ""
    strict_plugin: bool = False
    target_cbr: float = 0.0417
    modulation: str = "qpsk"
    frame_width: int = 256
    frame_height: int = 256
    pilot_seed: int = DEFAULT_PILOT_SEED
    out_dir: str = "out"
    save_iq: bool = False

    def grid_config(self) -> GridConfig:
        return GridConfig(self.fft_size, self.used_subcarriers, self.cp_len,
                          self.symbols_per_slot)

    def codec_spec(self, width: int, height: int) -> CodecSpec:
        cmd = self.plugin_cmd.split() if isinstance(self.plugin_cmd, str) \
            else list(self.plugin_cmd)
        return CodecSpec(kind=self.codec, target_cbr=self.target_cbr,
                         frame_width=width, frame_height=height,
                         plugin_cmd=cmd or None,
                         strict_plugin=self.strict_plugin)

    def channel_spec(self, seed: int | None = None) -> ChannelSpec:
        return ChannelSpec(snr_db=self.snr_db, fading=self.fading,
                           delay_samples=self.delay_samples,
                           seed=self.seed if seed is None else seed)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, optional JSON config file and explicit flags."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        file_values = json.loads(Path(args.config).read_text())
        unknown = set(file_values) - {f.name for f in fields(RunConfig)}
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
        for k, v in file_values.items():
            setattr(cfg, k, v)
    for f in fields(RunConfig):
        if hasattr(args, f.name):  # flags use SUPPRESS, so present = given
            setattr(cfg, f.name, getattr(args, f.name))
    return cfg


def _load_frames(cfg: RunConfig) -> list[ImageFrame]:
    if cfg.images:
        return [_images.read_image(p) for p in cfg.images]
    return [_images.synthetic_image(seed=1, width=cfg.frame_width,
                                    height=cfg.frame_height)]


def _make_client(spec: CodecSpec):
    """One persistent plugin process per command, shared by tx and rx."""
    if spec.kind != "plugin" or not spec.plugin_cmd:
        return None
    from .plugin import PluginClient
    return PluginClient(spec.plugin_cmd, spec.plugin_timeout)


def _run_once(cfg: RunConfig, frames: list[ImageFrame], seed: int,
              compute_ms_ssim: bool = True, plugin_client=None):
    requests = [ServiceRequest.video(f) for f in frames]
    if cfg.text:
        requests.append(ServiceRequest.text_message(cfg.text.encode()))
    w, h = frames[0].width, frames[0].height
    return run_simulation(requests, cfg.grid_config(), cfg.codec_spec(w, h),
                          cfg.channel_spec(seed),
                          modulation=_MODULATION_NAMES[cfg.modulation],
                          pilot_seed=cfg.pilot_seed,
                          compute_ms_ssim=compute_ms_ssim,
                          plugin_client=plugin_client)


def cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    frames = _load_frames(cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    client = _make_client(cfg.codec_spec(frames[0].width, frames[0].height))
    try:
        outcome = _run_once(cfg, frames, cfg.seed, plugin_client=client)
    finally:
        if client is not None:
            client.close()
    report = outcome.report
    report.seeds["run"] = cfg.seed
    report_dict = report.to_dict()
    report_dict["config"] = cfg.to_dict()
    (out_dir / "report.json").write_text(
        json.dumps(report_dict, sort_keys=True, indent=2) + "\n")

    for p in outcome.rx_result.payloads:
        if p.image is not None:
            _images.write_ppm(p.image, out_dir / f"frame_{p.position}.ppm")
            if _images.HAVE_PIL:
                _images.write_png(p.image, out_dir / f"frame_{p.position}.png")
        if p.text is not None:
            (out_dir / f"text_{p.position}.txt").write_bytes(p.text)
    if cfg.save_iq:
        from .modem import save_iq
        save_iq(outcome.stream_rx, out_dir / "burst.iq")

    statuses = ", ".join(f"p{e['payload']}:{e['status']}" for e in report.payloads)
    psnr_txt = "n/a" if report.psnr_db is None else f"{report.psnr_db:.2f} dB"
    print(f"sync={'ok' if report.sync_ok else 'FAILED'} "
          f"dcis={report.dcis_recovered}/{report.dcis_sent} psnr={psnr_txt} "
          f"[{statuses}] report={out_dir / 'report.json'} "
          f"({report.timings_s.get('total', 0.0):.2f}s)")
    return 0 if report.sync_ok and report.any_payload_ok else 1


def _parse_snr_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip() != ""]


def cmd_ber(args) -> int:
    modulation = _MODULATION_NAMES[args.modulation]
    bps = BITS_PER_SYMBOL[modulation]
    rng = np.random.default_rng(args.seed)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["snr_db", "ber", "n_bits", "theory_ber"])
    for ebn0_db in _parse_snr_list(args.snr_db):
        n_bits = args.n_bits - args.n_bits % bps
        bits = rng.integers(0, 2, n_bits, dtype=np.uint8)
        symbols = qam_modulate(bits, modulation)
        # per-bit SNR: unit-power symbols carry bps bits each
        sigma2 = 1.0 / (bps * 10.0 ** (ebn0_db / 10.0))
        noise = (rng.standard_normal(len(symbols))
                 + 1j * rng.standard_normal(len(symbols)))
        rx_bits = qam_demodulate(symbols + noise * math.sqrt(sigma2 / 2.0),
                                 modulation)
        ber = float(np.mean(bits != rx_bits))
        theory = (f"{qpsk_ber_theory(ebn0_db):.8g}"
                  if modulation == Modulation.QPSK else "")
        writer.writerow([f"{ebn0_db:g}", f"{ber:.8g}", n_bits, theory])
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    frames = _load_frames(cfg)
    base_seed = cfg.seed
    client = _make_client(cfg.codec_spec(frames[0].width, frames[0].height))
    rows = []
    try:
        for snr_db in _parse_snr_list(args.snr_list):
            psnrs, ssims, text_ok = [], [], []
            for trial in range(args.trials):
                cfg.snr_db = snr_db
                outcome = _run_once(cfg, frames, seed=base_seed + trial,
                                    plugin_client=client)
                r = outcome.report
                if r.psnr_db is not None and not math.isinf(r.psnr_db):
                    psnrs.append(r.psnr_db)
                if r.ms_ssim is not None:
                    ssims.append(r.ms_ssim)
                text_entries = [e for e in r.payloads if "text_ok" in e]
                if text_entries:
                    text_ok.append(all(e["text_ok"] for e in text_entries))
            rows.append([f"{snr_db:g}",
                         f"{np.mean(psnrs):.4f}" if psnrs else "inf",
                         f"{np.mean(ssims):.6f}" if ssims else "",
                         f"{np.mean(text_ok):.4f}" if text_ok else ""])
    finally:
        if client is not None:
            client.close()
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["snr_db", "psnr_db", "ms_ssim", "text_ok_rate"])
    writer.writerows(rows)
    return 0


def _add_run_flags(p: argparse.ArgumentParser):
    # SUPPRESS keeps unset flags out of the namespace entirely, so the
    # config file can fill them and explicit flags still win
    S = argparse.SUPPRESS
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--image", dest="images", action="append", default=S,
                   help="input frame (PPM/PNG); repeatable; default synthetic")
    p.add_argument("--text", default=S)
    p.add_argument("--snr-db", dest="snr_db", type=float, default=S)
    p.add_argument("--fading", choices=["none", "flat_rayleigh"], default=S)
    p.add_argument("--delay-samples", dest="delay_samples", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--fft-size", dest="fft_size", type=int, default=S)
    p.add_argument("--used-subcarriers", dest="used_subcarriers", type=int,
                   default=S)
    p.add_argument("--cp-len", dest="cp_len", type=int, default=S)
    p.add_argument("--codec", choices=["builtin", "plugin"], default=S)
    p.add_argument("--plugin-cmd", dest="plugin_cmd", default=S,
                   help="external codec command line (whitespace separated)")
    p.add_argument("--strict-plugin", dest="strict_plugin", action="store_true",
                   default=S)
    p.add_argument("--target-cbr", dest="target_cbr", type=float, default=S)
    p.add_argument("--modulation", choices=sorted(_MODULATION_NAMES), default=S)
    p.add_argument("--frame-width", dest="frame_width", type=int, default=S)
    p.add_argument("--frame-height", dest="frame_height", type=int, default=S)
    p.add_argument("--pilot-seed", dest="pilot_seed", type=int, default=S)
    p.add_argument("--out", dest="out_dir", default=S)
    p.add_argument("--save-iq", dest="save_iq", action="store_true", default=S)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hybridlink",
        description="hybrid semantic/digital OFDM downlink simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="one end-to-end burst")
    _add_run_flags(p_sim)

    p_ber = sub.add_parser("ber", help="QAM BER calibration over AWGN")
    p_ber.add_argument("--modulation", choices=sorted(_MODULATION_NAMES),
                       default="qpsk")
    p_ber.add_argument("--snr-db", dest="snr_db", default="0,4,8",
                       help="comma-separated Eb/N0 points in dB")
    p_ber.add_argument("--n-bits", dest="n_bits", type=int, default=100_000)
    p_ber.add_argument("--seed", type=int, default=0)

    p_sweep = sub.add_parser("sweep", help="metric averages across SNR points")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--snr-list", dest="snr_list", default="0,5,10,20")
    p_sweep.add_argument("--trials", type=int, default=3)

    args = parser.parse_args(argv)
    if args.command == "simulate":
        return cmd_simulate(args)
    if args.command == "ber":
        return cmd_ber(args)
    return cmd_sweep(args)


if __name__ == "__main__":
    sys.exit(main())
