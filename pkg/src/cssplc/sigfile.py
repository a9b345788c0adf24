"""Baseband signal files: float32 little-endian interleaved I/Q with a
two-line self-describing text header.

    cssplc-sig v1
    sf=<int> bandwidth_hz=<float> es=<float> count=<samples> tool=<version>
    <count * 2 little-endian float32 values, I then Q per sample>

The header keeps enough context (sf, rate, energy scale) for any SDR-style
tool to consume the payload, and the payload alone is an ordinary .cfile.
"""

import numpy as np

from . import __version__
from .core import ComplexSignal
from .errors import ParseError

SIG_MAGIC = "cssplc-sig v1"


def write_signal(path, signal, sf, es=1.0):
    x = signal.samples.astype(np.complex64)
    interleaved = np.empty(2 * x.size, dtype="<f4")
    interleaved[0::2] = x.real
    interleaved[1::2] = x.imag
    header = (
        f"{SIG_MAGIC}\n"
        f"sf={int(sf)} bandwidth_hz={float(signal.sample_rate_hz)!r} "
        f"es={float(es)!r} count={x.size} tool={__version__}\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(interleaved.tobytes())


def read_signal(path):
    """Returns (ComplexSignal, meta dict with sf/es/count/tool)."""
    with open(path, "rb") as fh:
        magic = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        if magic != SIG_MAGIC:
            raise ParseError(f"bad magic {magic!r}, expected {SIG_MAGIC!r}", path=path, line=1)
        fields = fh.readline().decode("ascii", errors="replace").split()
        meta = {}
        for item in fields:
            key, _, value = item.partition("=")
            if not value:
                raise ParseError(f"malformed header field {item!r}", path=path, line=2)
            meta[key] = value
        try:
            sf = int(meta["sf"])
            bandwidth_hz = float(meta["bandwidth_hz"])
            es = float(meta["es"])
            count = int(meta["count"])
        except (KeyError, ValueError) as exc:
            raise ParseError(f"incomplete header: {exc}", path=path, line=2)
        payload = fh.read()
    expected = 8 * count
    if len(payload) != expected:
        raise ParseError(
            f"payload is {len(payload)} bytes, expected {expected} for {count} samples",
            path=path,
        )
    raw = np.frombuffer(payload, dtype="<f4")
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    info = {"sf": sf, "es": es, "count": count, "tool": meta.get("tool", "")}
    return ComplexSignal(samples, bandwidth_hz), info
