"""Seeded Monte Carlo experiment engine.

Sweeps SNR x parameters x channel, tallies symbol errors with Wilson
confidence intervals, and captures raw decision-statistic distributions.

Reproducibility contract: every decision draws from its own generator
seeded as SeedSequence(master_seed, spawn_key=(point_idx, mode_idx,
decision_idx)), and error tallies commute, so results are byte-identical
for a given (config, master_seed) regardless of execution order, chunking
or worker count.  Emitted files never include wall-clock times for the
same reason (wall time lives only on the in-memory result objects).

Per decision the draw order is fixed: symbol, then channel gains (when the
channel regenerates per trial), then noise.  Noise variance follows the
per-sample SNR convention of `channel.noise_variance`, referenced to the
clean multipath output of that decision.

Averaged ("enhanced") decisions model a repeated-symbol stream: the same
symbol is synthesized for Q consecutive frames through a channel held fixed
across the window, the frame energies are averaged, and one decision is
made per non-overlapping window (warm-up frames never enter the tally).
Stream frames see the steady state of the repeated symbol, so the multipath
tail of each frame wraps into the next identical frame; single-frame
("mod") decisions are isolated symbols whose tail is truncated.
"""

import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__, backend
from .channel import (
    default_num_taps,
    draw_rayleigh_gains,
    get_preset,
    load_impulse_response,
    noise_variance,
    rayleigh_weights,
)
from .core import CssParams, base_chirp
from .errors import ConfigurationError, ParameterError

RESULTS_CSV_MAGIC = "# cssplc-ser v1"
RESULTS_JSON_SCHEMA = "cssplc-ser/1"

_FIXED_CHANNEL_KEY = (1,)
_CAPTURE_KEY = (0,)

MODES = ("mod", "enhanced")


@dataclass(frozen=True)
class ChannelSpec:
    """Declarative channel choice for an experiment.

    kind: "identity", "preset" (with name), "rayleigh" (with
    rms_delay_samples and optionally num_taps) or "file" (with path).
    """

    kind: str = "identity"
    name: str = "fourtap"
    rms_delay_samples: float = 0.0
    num_taps: int = 0
    path: str = ""

    def __post_init__(self):
        if self.kind not in ("identity", "preset", "rayleigh", "file"):
            raise ConfigurationError(f"unknown channel kind {self.kind!r}")
        if self.kind == "rayleigh":
            if not self.rms_delay_samples > 0:
                raise ConfigurationError("rayleigh channel needs rms_delay_samples > 0")
            if self.num_taps < 0:
                raise ConfigurationError("num_taps must be >= 0 (0 means automatic)")
        if self.kind == "file" and not self.path:
            raise ConfigurationError("file channel needs a path")


@dataclass(frozen=True)
class ExperimentConfig:
    params: CssParams
    channel: ChannelSpec = ChannelSpec()
    snr_grid_db: tuple = (0.0,)
    trials: int = 1000
    master_seed: int = 0
    mode: str = "mod"
    timing_offset: int = 0
    channel_regeneration: str = "per-trial"
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        grid = tuple(float(s) for s in self.snr_grid_db)
        if not grid:
            raise ConfigurationError("snr_grid_db must not be empty")
        if any(math.isnan(s) for s in grid):
            raise ConfigurationError("snr_grid_db must not contain NaN")
        object.__setattr__(self, "snr_grid_db", grid)
        if self.mode not in ("mod", "enhanced", "both"):
            raise ConfigurationError(f"mode must be mod, enhanced or both, got {self.mode!r}")
        if self.channel_regeneration not in ("per-trial", "fixed"):
            raise ConfigurationError("channel_regeneration must be 'per-trial' or 'fixed'")
        if abs(self.timing_offset) >= self.params.m:
            raise ConfigurationError(
                f"timing_offset {self.timing_offset} must be smaller than one symbol ({self.params.m})"
            )
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    @property
    def modes(self):
        return MODES if self.mode == "both" else (self.mode,)

    def to_dict(self):
        d = asdict(self)
        d["workers"] = 1  # worker count never changes results; keep files identical
        return d


@dataclass(frozen=True)
class SerResult:
    snr_db: float
    mode: str
    errors: int
    trials: int
    ser: float
    wilson_ci_95: tuple
    wall_time_s: float


@dataclass(frozen=True)
class AirtimeEntry:
    sf: int
    bandwidth_hz: float
    q: int
    time_on_air_s: float


@dataclass(frozen=True)
class AirtimeReport:
    entries: tuple


def wilson_interval(errors, trials, z=1.96):
    """95% Wilson score interval for an error proportion."""
    if trials < 1 or not 0 <= errors <= trials:
        raise ParameterError("need 0 <= errors <= trials with trials >= 1")
    phat = errors / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def _rng(master_seed, key):
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def _shift_matrix(u, delays):
    """Rows of the base chirp cyclically shifted by each tap delay."""
    idx = np.arange(u.size)
    return u[(idx[None, :] - np.asarray(delays)[:, None]) % u.size]


class _ChannelFactory:
    """Resolves a ChannelSpec into per-decision (delays, gains) draws."""

    def __init__(self, spec, regeneration, master_seed):
        self.spec = spec
        self.per_trial = spec.kind == "rayleigh" and regeneration == "per-trial"
        if spec.kind == "identity":
            self.delays = np.array([0])
            self.fixed_gains = np.array([1.0 + 0.0j])
        elif spec.kind == "preset":
            h = get_preset(spec.name)
            self.delays, self.fixed_gains = h.delays, h.gains
        elif spec.kind == "file":
            h = load_impulse_response(spec.path)
            self.delays, self.fixed_gains = h.delays, h.gains
        else:
            num_taps = spec.num_taps or default_num_taps(spec.rms_delay_samples)
            self.weights = rayleigh_weights(spec.rms_delay_samples, num_taps)
            self.delays = np.arange(num_taps, dtype=np.int64)
            if self.per_trial:
                self.fixed_gains = None
            else:
                rng = _rng(master_seed, _FIXED_CHANNEL_KEY)
                self.fixed_gains = draw_rayleigh_gains(self.weights, rng)

    def gains(self, rng):
        if self.per_trial:
            return draw_rayleigh_gains(self.weights, rng)
        return self.fixed_gains


def _clean_frame(params, u, delays, gains, k, truncate):
    """Clean multipath output for one symbol of shift k.

    Cyclic composition models the steady state of a repeated-symbol stream;
    with truncate=True the wrapped-in head of each delayed tap is removed,
    which is exactly the truncated linear convolution of an isolated symbol.
    """
    m = params.m
    amp = math.sqrt(params.symbol_energy_es / m)
    idx = np.arange(m)
    rc = np.zeros(m, dtype=np.complex128)
    for d, g in zip(delays, gains):
        rc += g * u[(idx - (k + d)) % m]
    rc *= amp
    if truncate:
        for d, g in zip(delays, gains):
            if d:
                head = np.arange(d)
                rc[:d] -= amp * g * u[(head - (k + d)) % m]
    return rc


def _offset_frame(rc, offset, cyclic):
    if offset == 0:
        return rc
    if cyclic:
        return np.roll(rc, offset)
    out = np.zeros_like(rc)
    if offset > 0:
        out[offset:] = rc[:-offset]
    else:
        out[: offset] = rc[-offset:]
    return out


def _run_decision_block(params, factory, snr_db, mode, timing_offset, master_seed,
                        point_idx, mode_idx, decisions):
    """Run a block of independently seeded decisions; returns the error count."""
    m = params.m
    p = params.superbin_size_p
    q = params.averaging_depth_q if mode == "enhanced" else 1
    u = base_chirp(params)
    amp = math.sqrt(params.symbol_energy_es / m)
    ref = np.ascontiguousarray(amp * np.conj(u))
    errors = 0
    for decision_idx in decisions:
        rng = _rng(master_seed, (point_idx, mode_idx, decision_idx))
        g = int(rng.integers(0, params.g_count))
        gains = factory.gains(rng)
        rc = _clean_frame(params, u, factory.delays, gains, g * p, truncate=(mode == "mod"))
        signal_power = float(np.mean(np.abs(rc) ** 2))
        rc = _offset_frame(rc, timing_offset, cyclic=(mode == "enhanced"))
        sigma2 = noise_variance(signal_power, snr_db)
        frames = np.broadcast_to(rc, (q, m)).copy()
        if sigma2 > 0:
            scale = math.sqrt(sigma2 / 2.0)
            frames += scale * (
                rng.standard_normal((q, m)) + 1j * rng.standard_normal((q, m))
            )
        spectra = np.fft.fft(backend.dechirp_frames(frames, ref), axis=1)
        s = backend.superbin_energies_frames(np.ascontiguousarray(spectra), p)
        stat = s.mean(axis=0) if mode == "enhanced" else s[0]
        if int(np.argmax(stat)) != g:
            errors += 1
    return errors


def run_ser_sweep(config):
    """Symbol-error-rate sweep over the config's SNR grid and mode(s)."""
    factory = _ChannelFactory(config.channel, config.channel_regeneration, config.master_seed)
    if factory.delays[-1] >= config.params.m:
        raise ConfigurationError("channel taps extend past one symbol")
    results = []
    block = 64
    blocks = [range(start, min(start + block, config.trials))
              for start in range(0, config.trials, block)]
    for point_idx, snr_db in enumerate(config.snr_grid_db):
        for mode_idx, mode in enumerate(MODES):
            if mode not in config.modes:
                continue
            start_t = time.perf_counter()
            run = lambda dec: _run_decision_block(
                config.params, factory, snr_db, mode, config.timing_offset,
                config.master_seed, point_idx, mode_idx, dec,
            )
            if config.workers == 1 or len(blocks) == 1:
                errors = sum(run(dec) for dec in blocks)
            else:
                with ThreadPoolExecutor(max_workers=config.workers) as pool:
                    errors = sum(pool.map(run, blocks))
            wall = time.perf_counter() - start_t
            results.append(
                SerResult(
                    snr_db=snr_db,
                    mode=mode,
                    errors=errors,
                    trials=config.trials,
                    ser=errors / config.trials,
                    wilson_ci_95=wilson_interval(errors, config.trials),
                    wall_time_s=wall,
                )
            )
    return results


@dataclass(frozen=True)
class CaptureConfig:
    """Distribution capture: repeated known symbol, per-frame statistics."""

    params: CssParams
    channel: ChannelSpec = ChannelSpec()
    snr_db: float = 0.0
    frames: int = 10000
    master_seed: int = 0
    symbol_g: int = 0
    include_signal: bool = True
    q_values: tuple = ()
    normalize: bool = True
    channel_regeneration: str = "per-trial"

    def __post_init__(self):
        if self.frames < 1:
            raise ConfigurationError("frames must be >= 1")
        if not 0 <= self.symbol_g < self.params.g_count:
            raise ConfigurationError(
                f"symbol_g={self.symbol_g} outside [0, {self.params.g_count})"
            )
        object.__setattr__(self, "q_values", tuple(int(q) for q in self.q_values))
        if any(q < 1 for q in self.q_values):
            raise ConfigurationError("q_values must be >= 1")
        if self.channel_regeneration not in ("per-trial", "fixed"):
            raise ConfigurationError("channel_regeneration must be 'per-trial' or 'fixed'")


@dataclass(frozen=True)
class CaptureResult:
    """Raw per-frame decision statistics, normalized to the mean noise
    superbin energy unless the config said otherwise.

    s_signal: energy of the transmitted superbin per frame
    s_noise:  energies of the other G-1 superbins per frame (frames, G-1)
    m_noise:  per-frame maximum of s_noise
    h_signal/h_noise: non-overlapping window means for each requested Q
    mean_s_noise: the normalization constant (pre-normalization units)
    """

    s_signal: np.ndarray
    s_noise: np.ndarray
    m_noise: np.ndarray
    h_signal: dict
    h_noise: dict
    mean_s_noise: float
    normalized: bool


def run_distribution_capture(config):
    params = config.params
    m, p, g0 = params.m, params.superbin_size_p, config.symbol_g
    factory = _ChannelFactory(config.channel, config.channel_regeneration, config.master_seed)
    if factory.delays[-1] >= m:
        raise ConfigurationError("channel taps extend past one symbol")
    u = base_chirp(params)
    amp = math.sqrt(params.symbol_energy_es / m)
    ref = np.ascontiguousarray(amp * np.conj(u))
    rng = _rng(config.master_seed, _CAPTURE_KEY)

    all_gains = fixed_clean = None
    if config.include_signal:
        shift_rows = _shift_matrix(u, factory.delays)
        if factory.per_trial:
            all_gains = np.sqrt(factory.weights / 2.0) * (
                rng.standard_normal((config.frames, factory.delays.size))
                + 1j * rng.standard_normal((config.frames, factory.delays.size))
            )
            all_gains /= np.sqrt(np.sum(np.abs(all_gains) ** 2, axis=1))[:, None]
        else:
            fixed_clean = np.roll(amp * (factory.fixed_gains @ shift_rows), g0 * p)

    sigma2_ref = None
    s_rows = np.empty((config.frames, params.g_count))
    block = max(1, (1 << 22) // m)
    for start in range(0, config.frames, block):
        stop = min(start + block, config.frames)
        n = stop - start
        if all_gains is not None:
            clean = np.roll(amp * (all_gains[start:stop] @ shift_rows), g0 * p, axis=1)
        elif fixed_clean is not None:
            clean = np.broadcast_to(fixed_clean, (n, m))
        else:
            clean = np.zeros((n, m), dtype=np.complex128)
        if sigma2_ref is None:
            # one noise level for the whole capture, from the nominal clean power
            power = params.symbol_energy_es / m
            sigma2_ref = noise_variance(power, config.snr_db)
        frames = clean
        if sigma2_ref > 0:
            scale = math.sqrt(sigma2_ref / 2.0)
            frames = frames + scale * (
                rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
            )
        spectra = np.fft.fft(backend.dechirp_frames(np.ascontiguousarray(frames), ref), axis=1)
        s_rows[start:stop] = backend.superbin_energies_frames(np.ascontiguousarray(spectra), p)

    noise_cols = [g for g in range(params.g_count) if g != g0]
    s_signal = s_rows[:, g0].copy()
    s_noise = s_rows[:, noise_cols].copy()
    mean_s_noise = float(s_noise.mean())

    def window_means(x, q):
        nwin = x.shape[0] // q
        trimmed = x[: nwin * q]
        return trimmed.reshape(nwin, q, *x.shape[1:]).mean(axis=1)

    h_signal = {q: window_means(s_signal, q) for q in config.q_values}
    h_noise = {q: window_means(s_noise, q) for q in config.q_values}

    if config.normalize:
        scale = 1.0 / mean_s_noise
        s_signal *= scale
        s_noise *= scale
        for q in config.q_values:
            h_signal[q] = h_signal[q] * scale
            h_noise[q] = h_noise[q] * scale

    return CaptureResult(
        s_signal=s_signal,
        s_noise=s_noise,
        m_noise=s_noise.max(axis=1),
        h_signal=h_signal,
        h_noise=h_noise,
        mean_s_noise=mean_s_noise,
        normalized=config.normalize,
    )


def airtime_table(sf_list, bandwidth_hz, q_list):
    """Time on air q * 2**sf / bandwidth for every (sf, q) combination."""
    if not bandwidth_hz > 0:
        raise ParameterError(f"bandwidth_hz must be positive, got {bandwidth_hz!r}")
    entries = []
    for sf in sf_list:
        if not 1 <= int(sf) <= 32:
            raise ParameterError(f"sf={sf} is not a usable spreading factor")
        for q in q_list:
            if int(q) < 1:
                raise ParameterError(f"q={q} must be >= 1")
            entries.append(
                AirtimeEntry(
                    sf=int(sf),
                    bandwidth_hz=float(bandwidth_hz),
                    q=int(q),
                    time_on_air_s=int(q) * (1 << int(sf)) / float(bandwidth_hz),
                )
            )
    return AirtimeReport(entries=tuple(entries))


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".cssplc-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _config_json(config):
    d = config.to_dict()
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def emit_results(results, fmt, path, config):
    """Write sweep results with embedded provenance, atomically.

    Identical (config, master_seed) runs produce byte-identical files:
    wall-clock times are deliberately not serialized.
    """
    if not results:
        raise ParameterError("no results to emit")
    if fmt == "csv":
        lines = [
            RESULTS_CSV_MAGIC,
            f"# tool_version: {__version__}",
            f"# master_seed: {config.master_seed}",
            f"# config: {_config_json(config)}",
            "snr_db,mode,errors,trials,ser,wilson_lo,wilson_hi",
        ]
        for r in results:
            lo, hi = r.wilson_ci_95
            lines.append(
                f"{r.snr_db!r},{r.mode},{r.errors},{r.trials},{r.ser!r},{lo!r},{hi!r}"
            )
        _atomic_write(path, "\n".join(lines) + "\n")
    elif fmt == "json":
        doc = {
            "schema": RESULTS_JSON_SCHEMA,
            "tool_version": __version__,
            "master_seed": config.master_seed,
            "config": config.to_dict(),
            "results": [
                {
                    "snr_db": r.snr_db,
                    "mode": r.mode,
                    "errors": r.errors,
                    "trials": r.trials,
                    "ser": r.ser,
                    "wilson_lo": r.wilson_ci_95[0],
                    "wilson_hi": r.wilson_ci_95[1],
                }
                for r in results
            ],
        }
        _atomic_write(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")
    else:
        raise ParameterError(f"format must be csv or json, got {fmt!r}")


def read_results(path):
    """Parse a results file written by `emit_results` (either format).

    Returns (meta, rows) where rows are dicts with the CSV column names.
    """
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        fh.seek(0)
        if first.startswith("{"):
            doc = json.load(fh)
            if doc.get("schema") != RESULTS_JSON_SCHEMA:
                raise ParameterError(f"unexpected schema {doc.get('schema')!r}")
            meta = {k: doc[k] for k in ("schema", "tool_version", "master_seed", "config")}
            return meta, doc["results"]
        lines = fh.read().splitlines()
    if not lines or lines[0] != RESULTS_CSV_MAGIC:
        raise ParameterError(f"{path}: not a cssplc results CSV")
    meta = {"schema": RESULTS_CSV_MAGIC}
    rows = []
    header_seen = False
    for line in lines[1:]:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = json.loads(value) if key == "config" else value
            continue
        if not header_seen:
            header_seen = True  # column header row
            continue
        snr, mode, errors, trials, ser, lo, hi = line.split(",")
        rows.append(
            {
                "snr_db": float(snr),
                "mode": mode,
                "errors": int(errors),
                "trials": int(trials),
                "ser": float(ser),
                "wilson_lo": float(lo),
                "wilson_hi": float(hi),
            }
        )
    return meta, rows
