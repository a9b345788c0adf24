"""Decision stages: superbin energy detection and running-mean detection.

The spectrum of a dechirped symbol is partitioned into G = M / P half-open
superbins [g*P, (g+1)*P); each superbin's decision variable is the sum of
|y|^2 over its bins, so the G energies always add up to the total spectrum
energy.  The single-frame decision is the argmax of those energies.  The
averaged decision keeps a per-superbin running mean over the last Q frames
of a repeated symbol and takes the argmax of the means; the caller resets
the state whenever the transmitted symbol changes.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .core import demodulate_fft
from .errors import FramingError, ParameterError


def superbin_energies(params, y):
    """Superbin energies s[g] = sum of |y[n]|^2 over n in [g*P, (g+1)*P)."""
    y = np.asarray(y, dtype=np.complex128)
    if y.ndim != 1 or y.size != params.m:
        raise FramingError(f"expected a spectrum of {params.m} bins, got shape {y.shape}")
    return backend.superbin_energies_frames(
        np.ascontiguousarray(y[None, :]), params.superbin_size_p
    )[0]


def decide_mod(s):
    """Argmax of the superbin energies; lowest index wins ties."""
    s = np.asarray(s)
    if s.size == 0:
        raise ParameterError("cannot decide on an empty energy vector")
    return int(np.argmax(s))


def decide_enhanced(h):
    """Argmax of the running-mean energies; lowest index wins ties."""
    return decide_mod(h)


class RunningMeanState:
    """Per-superbin circular buffer of depth Q with incremental sums.

    The mean over the last min(Q, frames_seen) frames is maintained as a
    running sum so each update costs O(G) regardless of Q.  `recompute_mean`
    rebuilds the mean from the raw buffer and exists to let tests guard the
    incremental bookkeeping.
    """

    def __init__(self, g_count, depth_q):
        if g_count < 1 or depth_q < 1:
            raise ParameterError("g_count and depth_q must be >= 1")
        self.g_count = int(g_count)
        self.depth_q = int(depth_q)
        self.reset()

    def reset(self):
        """Forget all history (call on a commanded symbol change)."""
        self._buffer = np.zeros((self.depth_q, self.g_count))
        self._sums = np.zeros(self.g_count)
        self._cursor = 0
        self.frames_seen = 0

    def update(self, s):
        """Push one frame's superbin energies; returns the current means."""
        s = np.asarray(s, dtype=np.float64)
        if s.shape != (self.g_count,):
            raise ParameterError(f"expected {self.g_count} energies, got shape {s.shape}")
        self._sums += s - self._buffer[self._cursor]
        self._buffer[self._cursor] = s
        self._cursor = (self._cursor + 1) % self.depth_q
        if self.frames_seen < self.depth_q:
            self.frames_seen += 1
        return self._sums / self.frames_seen

    @property
    def mean(self):
        if self.frames_seen == 0:
            raise ParameterError("no frames seen yet")
        return self._sums / self.frames_seen

    def recompute_mean(self):
        """Mean rebuilt from the buffer contents (cross-check path)."""
        if self.frames_seen == 0:
            raise ParameterError("no frames seen yet")
        return self._buffer[: self.frames_seen].sum(axis=0) / self.frames_seen if (
            self.frames_seen < self.depth_q
        ) else self._buffer.sum(axis=0) / self.depth_q


def update_enhanced(state, s):
    """Advance the running-mean state by one frame; returns the means h."""
    return state.update(s)


@dataclass(frozen=True)
class DemodFrame:
    """Everything observable about one demodulated symbol."""

    y: np.ndarray
    s: np.ndarray
    h: np.ndarray
    decision_mod: int
    decision_enhanced: int
    frame_index: int


def demodulate_symbol(params, r, state=None):
    """Full pipeline for one received symbol: dechirp, DFT, superbin
    energies, then both decisions.

    With no state the averaged decision degenerates to the single-frame one.
    """
    y = demodulate_fft(params, r)
    s = superbin_energies(params, y)
    if state is None:
        h = s.copy()
        frame_index = 0
    else:
        h = update_enhanced(state, s)
        frame_index = state.frames_seen - 1
    return DemodFrame(
        y=y,
        s=s,
        h=h,
        decision_mod=decide_mod(s),
        decision_enhanced=decide_enhanced(h),
        frame_index=frame_index,
    )
