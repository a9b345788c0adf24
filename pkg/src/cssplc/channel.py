"""Channel models: AWGN, tap-delay-line multipath, timing offset, and
ingestion of externally measured impulse responses.

Conventions:

* SNR is defined per complex baseband sample at the critical sampling rate
  (sample rate == bandwidth): snr_db = 10*log10(signal_power / noise_var)
  where signal_power is the mean |sample|^2 of the clean signal handed to
  `apply_awgn` and noise_var is the total variance E|n|^2 of the circularly
  symmetric complex noise.
* Every ImpulseResponse is energy-normalized to sum(|gain|^2) == 1 at
  construction; the pre-normalization energy is kept in `normalization`.
* `apply_multipath` is a truncated linear convolution over the whole buffer
  it is given, so on multi-symbol buffers tap tails spill into the following
  symbol (inter-symbol interference), while a single-symbol buffer simply
  loses the tail.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import ComplexSignal
from .errors import ConfigurationError, ParameterError, ParseError

IR_CSV_VERSION = "cssplc-ir v1"


@dataclass(frozen=True, eq=False)
class ImpulseResponse:
    """Tap-delay line: integer sample delays with complex gains."""

    delays: np.ndarray
    gains: np.ndarray
    normalization: float = field(init=False)

    def __post_init__(self):
        delays = np.asarray(self.delays, dtype=np.int64)
        gains = np.asarray(self.gains, dtype=np.complex128)
        if delays.ndim != 1 or gains.shape != delays.shape or delays.size == 0:
            raise ParameterError("impulse response needs matching, nonempty delay and gain vectors")
        if delays[0] < 0:
            raise ParameterError("tap delays must be non-negative")
        if delays.size > 1 and not np.all(np.diff(delays) > 0):
            raise ParameterError("tap delays must be strictly increasing")
        if not np.all(np.isfinite(gains.view(np.float64))):
            raise ParameterError("tap gains must be finite")
        energy = float(np.sum(np.abs(gains) ** 2))
        if energy <= 0:
            raise ParameterError("impulse response has zero energy")
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "gains", gains / math.sqrt(energy))
        object.__setattr__(self, "normalization", energy)

    @property
    def max_delay(self):
        return int(self.delays[-1])

    @property
    def rms_delay_spread(self):
        return rms_delay_spread(self)


@dataclass(frozen=True)
class NoiseSpec:
    """AWGN level and the seed that fully determines the noise stream."""

    snr_db: float
    seed: int = 0

    def __post_init__(self):
        if math.isnan(self.snr_db):
            raise ParameterError("snr_db must not be NaN")


def noise_variance(signal_power, snr_db):
    """Total complex noise variance for a given signal power and SNR."""
    if snr_db == math.inf:
        return 0.0
    return signal_power / (10.0 ** (snr_db / 10.0))


def apply_awgn(signal, spec):
    """Add circularly symmetric complex white Gaussian noise.

    Deterministic given spec.seed; snr_db=inf returns the input unchanged.
    """
    if len(signal) == 0:
        raise ParameterError("cannot add noise to an empty signal")
    if spec.snr_db == math.inf:
        return signal
    x = signal.samples
    sigma2 = noise_variance(float(np.mean(np.abs(x) ** 2)), spec.snr_db)
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    scale = math.sqrt(sigma2 / 2.0)
    noise = scale * (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size))
    return ComplexSignal(x + noise, signal.sample_rate_hz)


def apply_multipath(signal, h):
    """Linear convolution with the tap-delay line, truncated to input length."""
    x = signal.samples
    if h.max_delay >= x.size:
        raise ConfigurationError(
            f"tap delay {h.max_delay} does not fit a {x.size}-sample signal"
        )
    out = np.zeros_like(x)
    for d, g in zip(h.delays, h.gains):
        if d == 0:
            out += g * x
        else:
            out[d:] += g * x[:-d]
    return ComplexSignal(out, signal.sample_rate_hz)


def apply_timing_offset(signal, offset_samples):
    """Shift the receiver's symbol framing, zero-filling the exposed edge.

    Positive offset: the demodulation window opens early, so the symbol
    appears delayed within it; negative: the window opens late.
    """
    x = signal.samples
    o = int(offset_samples)
    if abs(o) >= x.size:
        raise ConfigurationError(f"timing offset {o} must be smaller than the {x.size}-sample frame")
    out = np.zeros_like(x)
    if o >= 0:
        out[o:] = x[: x.size - o] if o else x
    else:
        out[: x.size + o] = x[-o:]
    return ComplexSignal(out, signal.sample_rate_hz)


def rms_delay_spread(h):
    """Power-weighted second central moment of the delay profile, in samples."""
    p = np.abs(h.gains) ** 2
    d = h.delays.astype(np.float64)
    total = p.sum()
    mean = float((p * d).sum() / total)
    return float(np.sqrt((p * (d - mean) ** 2).sum() / total))


def _profile_rms(weights, delays):
    total = weights.sum()
    mean = (weights * delays).sum() / total
    return math.sqrt(float((weights * (delays - mean) ** 2).sum() / total))


def default_num_taps(rms_delay_samples):
    """One tap per sample out to five times the RMS spread."""
    return int(math.ceil(5.0 * rms_delay_samples)) + 1


@lru_cache(maxsize=64)
def _calibrated_weights(rms_delay_samples, num_taps):
    """Exponential power-delay profile over delays 0..num_taps-1 whose
    nominal RMS delay spread equals the target (decay found by bisection)."""
    if num_taps == 1:
        return np.ones(1)
    d = np.arange(num_taps, dtype=np.float64)
    rms_cap = _profile_rms(np.ones(num_taps), d)
    if rms_delay_samples >= rms_cap:
        raise ConfigurationError(
            f"rms_delay_samples={rms_delay_samples} is unreachable with "
            f"{num_taps} taps (flat-profile limit {rms_cap:.3f})"
        )
    lo, hi = 1e-6, 1e9
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if _profile_rms(np.exp(-d / mid), d) < rms_delay_samples:
            lo = mid
        else:
            hi = mid
    w = np.exp(-d / math.sqrt(lo * hi))
    w.setflags(write=False)
    return w


def rayleigh_weights(rms_delay_samples, num_taps=None):
    """Nominal tap power profile used by `rayleigh_channel`."""
    if not rms_delay_samples > 0:
        raise ConfigurationError(f"rms_delay_samples must be positive, got {rms_delay_samples!r}")
    if num_taps is None:
        num_taps = default_num_taps(rms_delay_samples)
    if num_taps < 1:
        raise ConfigurationError(f"num_taps must be >= 1, got {num_taps}")
    return _calibrated_weights(float(rms_delay_samples), int(num_taps))


def draw_rayleigh_gains(weights, rng):
    """One energy-normalized complex Gaussian gain vector for a profile."""
    g = np.sqrt(weights / 2.0) * (
        rng.standard_normal(weights.size) + 1j * rng.standard_normal(weights.size)
    )
    return g / np.sqrt(np.sum(np.abs(g) ** 2))


def rayleigh_channel(rms_delay_samples, num_taps=None, seed=0):
    """Random tap-delay line with an exponential power-delay profile.

    Taps sit at every integer delay 0..num_taps-1 with complex Gaussian
    gains whose expected powers decay as exp(-d/tau); tau is calibrated so
    the profile's nominal RMS delay spread equals the target.  Deterministic
    given seed; per-realization energy is normalized to 1.
    """
    weights = rayleigh_weights(rms_delay_samples, num_taps)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    delays = np.arange(weights.size, dtype=np.int64)
    return ImpulseResponse(delays, draw_rayleigh_gains(weights, rng))


PRESETS = {
    "identity": (np.array([0]), np.array([1.0 + 0.0j])),
    # four equal-power taps four samples apart (shift-register channel
    # emulator used for the hardware validation runs)
    "fourtap": (np.array([0, 4, 8, 12]), np.full(4, 0.5 + 0.0j)),
}


def get_preset(name):
    try:
        delays, gains = PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown channel preset {name!r}; choices: {sorted(PRESETS)}")
    return ImpulseResponse(delays, gains)


def load_impulse_response(path):
    """Parse a tap-delay CSV: one `delay_samples,real_gain,imag_gain` per line.

    Lines starting with '#' and blank lines are ignored.  Delays must be
    non-negative integers in strictly increasing order.
    """
    delays, gains = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise ParseError(f"expected 3 fields, got {len(parts)}", path=path, line=lineno)
            try:
                delay = int(parts[0])
                gain = complex(float(parts[1]), float(parts[2]))
            except ValueError:
                raise ParseError(f"could not parse tap {line!r}", path=path, line=lineno)
            if delay < 0:
                raise ParseError(f"negative tap delay {delay}", path=path, line=lineno)
            if delays and delay <= delays[-1]:
                raise ParseError(
                    f"tap delay {delay} not greater than previous {delays[-1]}",
                    path=path,
                    line=lineno,
                )
            delays.append(delay)
            gains.append(gain)
    if not delays:
        raise ParseError("no taps found", path=path)
    return ImpulseResponse(np.array(delays), np.array(gains))


def save_impulse_response(path, h, comment=None):
    """Write taps in the CSV format `load_impulse_response` reads."""
    lines = [f"# {IR_CSV_VERSION}"]
    if comment:
        lines.append(f"# {comment}")
    for d, g in zip(h.delays, h.gains):
        lines.append(f"{int(d)},{float(g.real)!r},{float(g.imag)!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
