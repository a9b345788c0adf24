"""Command-line front end.

Subcommands: modulate, demodulate, channel-gen, sweep, capture, airtime.
Every subcommand accepts --config pointing at a TOML file; explicit flags
override file values.  Exit codes: 0 success, 1 validation/parse error,
2 runtime or I/O error.
"""

import argparse
import json
import sys

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, analysis, backend, channel, harness, sigfile
from .core import ComplexSignal, CssParams, modulate, modulate_superbin
from .demod import RunningMeanState, demodulate_symbol
from .errors import ConfigurationError, CssplcError, ParameterError, ParseError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ParseError("config file not found", path=path)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"invalid TOML: {exc}", path=path)


def _setting(args, file_section, flag, key, default):
    value = getattr(args, flag, None)
    if value is not None:
        return value
    return file_section.get(key, default)


def _params_from(args, cfg):
    section = cfg.get("params", {})
    sf = _setting(args, section, "sf", "sf", None)
    if sf is None:
        raise ConfigurationError("spreading factor is required (--sf or [params].sf)")
    return CssParams(
        sf=int(sf),
        bandwidth_hz=float(_setting(args, section, "bw", "bandwidth_hz", 125e3)),
        superbin_size_p=int(_setting(args, section, "p", "p", 1)),
        averaging_depth_q=int(_setting(args, section, "q", "q", 1)),
        symbol_energy_es=float(_setting(args, section, "es", "es", 1.0)),
    )


def _channel_from(args, cfg):
    section = cfg.get("channel", {})
    kind = _setting(args, section, "channel", "kind", "identity")
    return harness.ChannelSpec(
        kind=kind,
        name=_setting(args, section, "preset", "name", "fourtap"),
        rms_delay_samples=float(_setting(args, section, "rms", "rms_delay_samples", 0.0)),
        num_taps=int(_setting(args, section, "taps", "num_taps", 0)),
        path=_setting(args, section, "channel_file", "path", ""),
    )


def _parse_symbols(args):
    if args.symbol is not None and args.symbols is not None:
        raise ConfigurationError("use --symbol or --symbols, not both")
    if args.symbol is not None:
        return [args.symbol]
    if args.symbols is None:
        raise ConfigurationError("a symbol sequence is required (--symbol or --symbols)")
    text = args.symbols
    if ".." in text:
        lo, _, hi = text.partition("..")
        try:
            return list(range(int(lo), int(hi) + 1))
        except ValueError:
            raise ConfigurationError(f"bad symbol range {text!r}")
    try:
        return [int(tok) for tok in text.split(",") if tok]
    except ValueError:
        raise ConfigurationError(f"bad symbol list {text!r}")


def _cmd_modulate(args):
    cfg = _load_config(args.config)
    params = _params_from(args, cfg)
    symbols = _parse_symbols(args)
    make = modulate if params.superbin_size_p == 1 else modulate_superbin
    chunks = [make(params, s).samples for s in symbols]
    signal = ComplexSignal(np.concatenate(chunks), params.bandwidth_hz)
    sigfile.write_signal(args.output, signal, sf=params.sf, es=params.symbol_energy_es)
    print(f"wrote {len(signal)} samples ({len(symbols)} symbols) to {args.output}")
    return 0


def _cmd_demodulate(args):
    cfg = _load_config(args.config)
    signal, info = sigfile.read_signal(args.input)
    section = cfg.get("params", {})
    params = CssParams(
        sf=int(_setting(args, section, "sf", "sf", info["sf"])),
        bandwidth_hz=float(signal.sample_rate_hz),
        superbin_size_p=int(_setting(args, section, "p", "p", 1)),
        averaging_depth_q=int(_setting(args, section, "q", "q", 1)),
        symbol_energy_es=float(_setting(args, section, "es", "es", info["es"])),
    )
    m = params.m
    if len(signal) % m:
        raise ConfigurationError(f"{len(signal)} samples do not frame into {m}-sample symbols")
    state = RunningMeanState(params.g_count, params.averaging_depth_q)
    decisions = []
    for start in range(0, len(signal), m):
        frame = ComplexSignal(signal.samples[start : start + m], signal.sample_rate_hz)
        result = demodulate_symbol(params, frame, state)
        decisions.append(
            result.decision_enhanced if params.averaging_depth_q > 1 else result.decision_mod
        )
    doc = {
        "tool_version": __version__,
        "sf": params.sf,
        "p": params.superbin_size_p,
        "q": params.averaging_depth_q,
        "symbols": decisions,
    }
    text = json.dumps(doc, sort_keys=True)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def _cmd_channel_gen(args):
    if args.preset_name:
        h = channel.get_preset(args.preset_name)
        origin = f"preset={args.preset_name}"
    else:
        if args.rms is None:
            raise ConfigurationError("channel-gen needs --preset-name or --rms")
        h = channel.rayleigh_channel(args.rms, args.taps or None, seed=args.seed)
        origin = f"rayleigh rms={args.rms} taps={h.delays.size} seed={args.seed}"
    channel.save_impulse_response(args.output, h, comment=f"tool={__version__} {origin}")
    print(
        f"wrote {h.delays.size} taps (rms delay spread "
        f"{h.rms_delay_spread:.3f} samples) to {args.output}"
    )
    return 0


def _sweep_config(args):
    cfg = _load_config(args.config)
    params = _params_from(args, cfg)
    section = cfg.get("sweep", {})
    snr = args.snr
    if snr is not None:
        grid = tuple(float(tok) for tok in snr.split(",") if tok)
    else:
        grid = tuple(float(s) for s in section.get("snr_grid_db", ()))
    return harness.ExperimentConfig(
        params=params,
        channel=_channel_from(args, cfg),
        snr_grid_db=grid,
        trials=int(_setting(args, section, "trials", "trials", 1000)),
        master_seed=int(_setting(args, section, "seed", "master_seed", 0)),
        mode=_setting(args, section, "mode", "mode", "mod"),
        timing_offset=int(_setting(args, section, "offset", "timing_offset", 0)),
        channel_regeneration=_setting(
            args, section, "regen", "channel_regeneration", "per-trial"
        ),
        workers=int(_setting(args, section, "workers", "workers", 1)),
    )


def _cmd_sweep(args):
    config = _sweep_config(args)
    results = harness.run_ser_sweep(config)
    harness.emit_results(results, args.format, args.output, config)
    print(f"# backend={backend.backend_name()} seed={config.master_seed}")
    print(f"{'snr_db':>8} {'mode':>9} {'errors':>7} {'trials':>7} {'ser':>9} {'wilson95':>19}")
    for r in results:
        lo, hi = r.wilson_ci_95
        print(
            f"{r.snr_db:8.2f} {r.mode:>9} {r.errors:7d} {r.trials:7d} "
            f"{r.ser:9.4f} [{lo:8.4f},{hi:8.4f}]"
        )
    print(f"wrote {args.output}")
    return 0


def _cmd_capture(args):
    cfg = _load_config(args.config)
    params = _params_from(args, cfg)
    section = cfg.get("capture", {})
    q_values = args.q_values
    if q_values is not None:
        q_tuple = tuple(int(tok) for tok in q_values.split(",") if tok)
    else:
        q_tuple = tuple(int(q) for q in section.get("q_values", ()))
    config = harness.CaptureConfig(
        params=params,
        channel=_channel_from(args, cfg),
        snr_db=float(_setting(args, section, "snr_point", "snr_db", 0.0)),
        frames=int(_setting(args, section, "frames", "frames", 10000)),
        master_seed=int(_setting(args, section, "seed", "master_seed", 0)),
        symbol_g=int(_setting(args, section, "symbol", "symbol_g", 0)),
        include_signal=not args.noise_only,
        q_values=q_tuple,
        channel_regeneration=_setting(
            args, section, "regen", "channel_regeneration", "per-trial"
        ),
    )
    cap = harness.run_distribution_capture(config)

    def summary(x):
        stats = analysis.histogram_stats(x.ravel())
        return {
            "mean": stats.mean,
            "variance": stats.variance,
            "quantiles": {str(q): v for q, v in stats.quantiles},
        }

    doc = {
        "tool_version": __version__,
        "master_seed": config.master_seed,
        "config": {
            "sf": params.sf,
            "p": params.superbin_size_p,
            "snr_db": config.snr_db,
            "frames": config.frames,
            "symbol_g": config.symbol_g,
            "include_signal": config.include_signal,
            "q_values": list(config.q_values),
        },
        "normalized_to_mean_noise_superbin": cap.normalized,
        "mean_s_noise": cap.mean_s_noise,
        "s_signal": summary(cap.s_signal),
        "s_noise": summary(cap.s_noise),
        "m_noise": summary(cap.m_noise),
        "h_signal": {str(q): summary(v) for q, v in cap.h_signal.items()},
        "h_noise": {str(q): summary(v) for q, v in cap.h_noise.items()},
    }
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if args.raw:
        np.savez(
            args.raw,
            s_signal=cap.s_signal,
            s_noise=cap.s_noise,
            m_noise=cap.m_noise,
            **{f"h_signal_q{q}": v for q, v in cap.h_signal.items()},
            **{f"h_noise_q{q}": v for q, v in cap.h_noise.items()},
        )
    print(f"wrote {args.output}")
    return 0


def _cmd_airtime(args):
    sf_list = [int(tok) for tok in args.sf_list.split(",") if tok]
    q_list = [int(tok) for tok in args.q_list.split(",") if tok]
    report = harness.airtime_table(sf_list, args.bw_hz, q_list)
    if args.as_json:
        doc = {
            "tool_version": __version__,
            "entries": [
                {"sf": e.sf, "bandwidth_hz": e.bandwidth_hz, "q": e.q, "time_on_air_s": e.time_on_air_s}
                for e in report.entries
            ],
        }
        print(json.dumps(doc, sort_keys=True, indent=2))
    else:
        print(f"{'sf':>4} {'bandwidth_hz':>14} {'q':>6} {'time_on_air_s':>15}")
        for e in report.entries:
            print(f"{e.sf:4d} {e.bandwidth_hz:14.1f} {e.q:6d} {e.time_on_air_s:15.6g}")
    return 0


def build_parser():
    parser = _Parser(prog="cssplc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"cssplc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="TOML config file; flags override its values")
        p.add_argument("--sf", type=int, help="spreading factor (7..14)")
        p.add_argument("--bw", type=float, help="bandwidth in Hz")
        p.add_argument("--p", type=int, help="superbin size P (power of two)")
        p.add_argument("--q", type=int, help="running-mean depth Q")
        p.add_argument("--es", type=float, help="symbol energy")

    def add_channel(p):
        p.add_argument("--channel", choices=["identity", "preset", "rayleigh", "file"])
        p.add_argument("--preset", dest="preset", help="preset name for --channel preset")
        p.add_argument("--rms", type=float, help="rayleigh RMS delay spread in samples")
        p.add_argument("--taps", type=int, help="rayleigh tap count (0 = automatic)")
        p.add_argument("--channel-file", dest="channel_file", help="impulse-response CSV path")

    p = sub.add_parser("modulate", help="write a symbol sequence as a baseband signal file")
    add_common(p)
    p.add_argument("--symbol", type=int, help="single symbol to send")
    p.add_argument("--symbols", help="comma list or inclusive range like 0..127")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_modulate)

    p = sub.add_parser("demodulate", help="decide the symbols in a signal file")
    add_common(p)
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", help="write JSON here instead of stdout")
    p.set_defaults(func=_cmd_demodulate)

    p = sub.add_parser("channel-gen", help="generate an impulse-response CSV")
    p.add_argument("--preset-name", help="dump a built-in preset")
    p.add_argument("--rms", type=float, help="rayleigh RMS delay spread in samples")
    p.add_argument("--taps", type=int, default=0, help="tap count (0 = automatic)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_channel_gen)

    p = sub.add_parser("sweep", help="run a symbol-error-rate sweep")
    add_common(p)
    add_channel(p)
    p.add_argument("--snr", help="comma-separated SNR grid in dB")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["mod", "enhanced", "both"])
    p.add_argument("--offset", type=int, help="receiver timing offset in samples")
    p.add_argument("--regen", choices=["per-trial", "fixed"])
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("capture", help="capture decision-statistic distributions")
    add_common(p)
    add_channel(p)
    p.add_argument("--snr-point", dest="snr_point", type=float, help="SNR in dB")
    p.add_argument("--frames", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--symbol", type=int, help="transmitted superbin symbol g")
    p.add_argument("--q-values", dest="q_values", help="comma list of averaging depths")
    p.add_argument("--noise-only", action="store_true", help="capture with no signal present")
    p.add_argument("--regen", choices=["per-trial", "fixed"])
    p.add_argument("--raw", help="also dump raw sample arrays to this .npz path")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_capture)

    p = sub.add_parser("airtime", help="time-on-air table")
    p.add_argument("--sf", dest="sf_list", required=True, help="comma list of spreading factors")
    p.add_argument("--bw", dest="bw_hz", type=float, required=True)
    p.add_argument("--q", dest="q_list", required=True, help="comma list of averaging depths")
    p.add_argument("--json", dest="as_json", action="store_true")
    p.set_defaults(func=_cmd_airtime)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ParameterError, ConfigurationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CssplcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
