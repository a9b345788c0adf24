"""Chirp-spread-spectrum parameterization, symbol alphabet and demodulation
front-ends.

A symbol is one of M = 2**sf cyclic shifts of a quadratic-phase base chirp
sampled at the bandwidth (critical sampling, one sample per chip):

    w_k(n) = sqrt(Es / M) * u((n - k) mod M),   u(m) = exp(j*pi*m*(M - m)/M)

``u`` sweeps the full band downward (+B/2 .. -B/2) and is seamlessly
M-periodic, so a cyclic shift is also a frequency shift.  Dechirping with
conj(u) turns symbol k into a pure tone in DFT bin k, and an integer sample
delay of d moves that tone to bin (k + d) mod M -- exactly one bin per sample
of delay, upward.  Multipath energy therefore fills the bins at and above the
transmitted shift, which is what lets superbin grouping (see `demod`) contain
it when shifts are restricted to multiples of the superbin size.

Scale conventions (decisions are scale-invariant; these make tests exact):

* ``demodulate_fft`` is the unnormalized forward DFT of ``dechirp(r)`` where
  the dechirp reference is conj(modulate(params, 0)) including its amplitude;
  a clean symbol peaks at |y[k]| = Es.
* ``demodulate_correlation`` correlates against unit-modulus templates; a
  clean symbol peaks at |y[k]| = sqrt(Es * M).  Bin for bin,
  |demodulate_fft| = sqrt(Es / M) * |demodulate_correlation| (phases differ
  by a fixed per-bin unit factor that argmax never sees).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import FramingError, ParameterError

SF_MIN = 7
SF_MAX = 14


@dataclass(frozen=True)
class CssParams:
    """Static parameters shared by every stage of the pipeline.

    sf               spreading factor, 7..14; M = 2**sf samples per symbol
    bandwidth_hz     chirp bandwidth == baseband sample rate
    superbin_size_p  bins summed per decision variable; power of two <= M
    averaging_depth_q  running-mean depth in symbols
    symbol_energy_es total energy of one transmitted symbol
    """

    sf: int
    bandwidth_hz: float
    superbin_size_p: int = 1
    averaging_depth_q: int = 1
    symbol_energy_es: float = 1.0

    def __post_init__(self):
        if not isinstance(self.sf, int) or not SF_MIN <= self.sf <= SF_MAX:
            raise ParameterError(f"sf must be an integer in [{SF_MIN}, {SF_MAX}], got {self.sf!r}")
        if not self.bandwidth_hz > 0:
            raise ParameterError(f"bandwidth_hz must be positive, got {self.bandwidth_hz!r}")
        p = self.superbin_size_p
        if not isinstance(p, int) or p < 1 or (p & (p - 1)) != 0:
            raise ParameterError(f"superbin_size_p must be a power of two >= 1, got {p!r}")
        if p > self.m:
            raise ParameterError(f"superbin_size_p={p} exceeds 2**sf={self.m}")
        if not isinstance(self.averaging_depth_q, int) or self.averaging_depth_q < 1:
            raise ParameterError(f"averaging_depth_q must be an integer >= 1, got {self.averaging_depth_q!r}")
        if not self.symbol_energy_es > 0:
            raise ParameterError(f"symbol_energy_es must be positive, got {self.symbol_energy_es!r}")

    @property
    def m(self):
        """Samples (and DFT bins) per symbol."""
        return 1 << self.sf

    @property
    def g_count(self):
        """Number of superbin symbols G = M / P."""
        return self.m // self.superbin_size_p

    @property
    def bits_per_symbol(self):
        return self.sf - self.superbin_size_p.bit_length() + 1

    @property
    def symbol_duration_s(self):
        return self.m / self.bandwidth_hz

    @property
    def sample_interval_s(self):
        return 1.0 / self.bandwidth_hz


@dataclass(frozen=True)
class ComplexSignal:
    """Complex baseband samples plus the rate they were taken at.

    Instances are value objects: the sample array is never mutated after
    construction and may be shared freely across workers.
    """

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1:
            raise ParameterError(f"signal must be one-dimensional, got shape {samples.shape}")
        if samples.size and not np.all(np.isfinite(samples.view(np.float64))):
            raise ParameterError("signal contains NaN or Inf samples")
        if not self.sample_rate_hz > 0:
            raise ParameterError(f"sample_rate_hz must be positive, got {self.sample_rate_hz!r}")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size


@lru_cache(maxsize=8)
def _unit_base_chirp(m):
    """Unit-modulus base chirp u for M samples; cached and write-locked."""
    n = np.arange(m, dtype=np.int64)
    # exact phase reduction: pi * (n*(M-n) mod 2M) / M keeps exp() args small
    phase = (n * (m - n)) % (2 * m)
    u = np.exp(1j * np.pi * (phase.astype(np.float64) / m))
    u.setflags(write=False)
    return u


def base_chirp(params):
    """The unit-modulus reference chirp u (M samples)."""
    return _unit_base_chirp(params.m)


def validate_shift(params, k):
    if not 0 <= int(k) < params.m:
        raise ParameterError(f"symbol shift k={k} outside [0, {params.m})")
    return int(k)


def validate_superbin_symbol(params, g):
    if not 0 <= int(g) < params.g_count:
        raise ParameterError(f"superbin symbol g={g} outside [0, {params.g_count})")
    return int(g)


def superbin_to_shift(params, g):
    """Map superbin symbol g to its raw chirp shift k = g * P."""
    return validate_superbin_symbol(params, g) * params.superbin_size_p


def modulate(params, k):
    """One symbol of M samples carrying shift k, total energy Es."""
    k = validate_shift(params, k)
    u = _unit_base_chirp(params.m)
    amp = np.sqrt(params.symbol_energy_es / params.m)
    return ComplexSignal(amp * np.roll(u, k), params.bandwidth_hz)


def modulate_superbin(params, g):
    """Symbol for the restricted superbin alphabet; equals modulate(g * P)."""
    return modulate(params, superbin_to_shift(params, g))


def _frame_samples(params, r):
    samples = r.samples if isinstance(r, ComplexSignal) else np.asarray(r, dtype=np.complex128)
    if samples.shape[-1] != params.m:
        raise FramingError(f"expected {params.m} samples per symbol, got {samples.shape[-1]}")
    return samples


def dechirp(params, r):
    """Elementwise product of one received symbol with conj(modulate(0))."""
    samples = _frame_samples(params, r)
    amp = np.sqrt(params.symbol_energy_es / params.m)
    out = samples * (amp * np.conj(_unit_base_chirp(params.m)))
    return ComplexSignal(out, params.bandwidth_hz)


def demodulate_fft(params, r):
    """Spectrum of the dechirped symbol; clean shift k peaks in bin k.

    Unnormalized forward DFT; see module docstring for the scale constant
    relating this to ``demodulate_correlation``.
    """
    return np.fft.fft(dechirp(params, r).samples)


def demodulate_correlation(params, r, chunk=256):
    """Correlation against all M unit-modulus templates (reference oracle).

    O(M**2); intended for testing and cross-validation, not production.
    """
    samples = _frame_samples(params, r)
    m = params.m
    u = _unit_base_chirp(m)
    idx = np.arange(m)
    y = np.empty(m, dtype=np.complex128)
    for start in range(0, m, chunk):
        shifts = np.arange(start, min(start + chunk, m))
        templates = u[(idx[None, :] - shifts[:, None]) % m]
        y[shifts] = templates.conj() @ samples
    return y


def argmax_bin(y):
    """Index of the largest-magnitude bin; lowest index wins ties."""
    return int(np.argmax(np.abs(y)))
