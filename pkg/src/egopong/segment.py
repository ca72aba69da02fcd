"""Audio segmentation of rallies from impact sounds.

Each channel is high-passed (zero-phase Butterworth) and its envelope
``|y|`` is searched for peaks strictly above a fraction of the channel
maximum. Channels vote on peak times. A rally cycle starts at a strong
(user-hit) peak; the weakest peak inside the cycle is taken as the
opponent's hit and becomes a segment start.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal
from scipy.io import wavfile

from . import defaults as D
from .core import ConfigError, DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AudioTrack:
    samples: np.ndarray  # (n, channels) float
    sample_rate: float

    def __post_init__(self) -> None:
        s = np.asarray(self.samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2:
            raise DataError("samples must be 1-D or (n, channels)")
        if not self.sample_rate > 0:
            raise DataError("sample rate must be positive")
        if not np.all(np.isfinite(s)):
            raise DataError("samples must be finite")
        object.__setattr__(self, "samples", s)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def shifted(self, n: int) -> AudioTrack:
        """Delay by ``n`` samples (zero padded at the start)."""
        pad = np.zeros((n, self.n_channels))
        return AudioTrack(np.vstack([pad, self.samples]), self.sample_rate)


@dataclass(frozen=True)
class Peak:
    t: float  # seconds
    index: int  # sample index
    amplitude: float
    votes: int = 1


def read_wav(path) -> AudioTrack:
    """Read PCM WAV; integer formats are scaled to ``[-1, 1)``."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing input file: {path}")
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    if data.dtype == np.uint8:
        x = (data.astype(float) - 128.0) / 128.0
    elif data.dtype.kind == "i":
        x = data.astype(float) / float(2 ** (8 * data.dtype.itemsize - 1))
    else:
        x = data.astype(float)
    if x.size == 0:
        raise DataError(f"{path}: empty audio")
    return AudioTrack(x, float(rate))


def write_wav(path, track: AudioTrack, pcm16: bool = True) -> None:
    x = track.samples[:, 0] if track.n_channels == 1 else track.samples
    if pcm16:
        x = np.clip(np.round(x * 32767.0), -32768, 32767).astype(np.int16)
    else:
        x = x.astype(np.float32)
    wavfile.write(path, int(round(track.sample_rate)), x)


def highpass_filter(track: AudioTrack, cutoff: float = D.AUDIO_CUTOFF_HZ, order: int = D.AUDIO_ORDER) -> AudioTrack:
    """Zero-phase Butterworth high-pass (forward-backward second-order sections).

    Raises:
        ConfigError: cutoff outside ``(0, fs/2)`` or order below 1.
    """
    if not 0.0 < cutoff < track.sample_rate / 2.0:
        raise ConfigError(f"cutoff must lie in (0, {track.sample_rate / 2.0}) Hz")
    if order < 1:
        raise ConfigError("filter order must be at least 1")
    sos = signal.butter(order, cutoff, btype="highpass", fs=track.sample_rate, output="sos")
    n = len(track.samples)
    padlen = min(3 * (2 * len(sos) + 1), n - 1) if n > 1 else 0
    y = signal.sosfiltfilt(sos, track.samples, axis=0, padlen=padlen)
    return AudioTrack(y, track.sample_rate)


def channel_peaks(x: np.ndarray, sample_rate: float, min_separation: float = D.AUDIO_MIN_SEPARATION,
                  fraction: float = D.AUDIO_PEAK_FRACTION) -> list[Peak]:
    """Peaks of ``|x|`` strictly above ``fraction * max|x|``, ``min_separation`` apart."""
    env = np.abs(np.asarray(x, dtype=float))
    if env.size == 0:
        return []
    top = float(env.max())
    if top <= 0:
        return []
    thr = fraction * top
    distance = max(1, int(math.ceil(min_separation * sample_rate)))
    # scipy's height test is inclusive; nudge it to make the threshold strict
    idx, props = signal.find_peaks(env, height=np.nextafter(thr, np.inf), distance=distance)
    return [Peak(i / sample_rate, int(i), float(h)) for i, h in zip(idx, props["peak_heights"])]


def find_peaks(track: AudioTrack, min_separation: float = D.AUDIO_MIN_SEPARATION,
               fraction: float = D.AUDIO_PEAK_FRACTION) -> list[Peak]:
    """Sorted peak list; multi-channel peaks are merged by majority vote.

    Channel peaks closer than ``min_separation / 2`` are one candidate; a
    candidate is kept when more than half of the channels report it. The
    strongest member gives the time and amplitude.
    """
    per = [channel_peaks(track.samples[:, c], track.sample_rate, min_separation, fraction)
           for c in range(track.n_channels)]
    if track.n_channels == 1:
        return per[0]
    flat = sorted(((p, c) for c, ps in enumerate(per) for p in ps), key=lambda pc: (pc[0].index, pc[1]))
    tol = 0.5 * min_separation
    groups: list[list[tuple[Peak, int]]] = []
    for p, c in flat:
        if groups and p.t - groups[-1][0][0].t <= tol:
            groups[-1].append((p, c))
        else:
            groups.append([(p, c)])
    out = []
    need = track.n_channels // 2 + 1
    for g in groups:
        votes = len({c for _, c in g})
        if votes < need:
            continue
        best = max(g, key=lambda pc: (pc[0].amplitude, -pc[0].index))[0]
        out.append(Peak(best.t, best.index, best.amplitude, votes))
    return out


@dataclass(frozen=True)
class Segment:
    t: float  # opponent-hit time (absolute, s)
    t_rel: float  # relative to the reference peak (or to t = 0)
    amplitude: float
    cycle: int


def segment_rallies(peaks: Sequence[Peak], hit_ratio: float = D.AUDIO_HIT_RATIO, cycle_len: int = 4,
                    reference_peak: bool = False) -> list[Segment]:
    """Opponent-hit peaks, one per complete rally cycle.

    A cycle runs from one user hit (amplitude at least ``hit_ratio`` times the
    strongest peak) to the next. A complete cycle holds ``cycle_len`` peaks;
    its weakest peak is the opponent's hit. Cycles with a different peak
    count are skipped with a warning. With ``reference_peak`` the first peak
    is the session's reference bounce: it is excluded from the cycles and
    times are reported relative to it.
    """
    peaks = sorted(peaks, key=lambda p: p.index)
    t_ref = 0.0
    if reference_peak:
        if not peaks:
            return []
        t_ref = peaks[0].t
        peaks = peaks[1:]
    if len(peaks) < cycle_len:
        return []
    top = max(p.amplitude for p in peaks)
    starts = [i for i, p in enumerate(peaks) if p.amplitude >= hit_ratio * top]
    out = []
    for k, s in enumerate(starts):
        end = starts[k + 1] if k + 1 < len(starts) else len(peaks)
        cyc = peaks[s:end]
        if len(cyc) != cycle_len:
            if end < len(peaks) or len(cyc) > cycle_len:
                log.warning("cycle %d at t=%.3f s has %d peaks, expected %d; skipped", k, cyc[0].t, len(cyc),
                            cycle_len)
            elif len(cyc) > 1:
                log.warning("trailing cycle at t=%.3f s is incomplete; skipped", cyc[0].t)
            continue
        opp = min(cyc[1:], key=lambda p: (p.amplitude, p.index))
        out.append(Segment(opp.t, opp.t - t_ref, opp.amplitude, k))
    return out


def synth_rally_audio(cycles: int = 5, sample_rate: float = 16000.0, period: float = 1.2,
                      pattern: Sequence[float] = (1.0, 0.7, 0.6, 0.35), offsets: Sequence[float] = (0.0, 0.3, 0.6, 0.9),
                      lead: float = 0.5, noise: float = 0.002, channels: int = 1, seed: int = 0,
                      skip: Sequence[tuple[int, int]] = ()) -> tuple[AudioTrack, list[float]]:
    """Constructed rally recording: decaying 4 kHz clicks on low-frequency hum.

    Returns the track and the true opponent-hit times. ``skip`` lists
    ``(cycle, slot)`` impacts to leave out.
    """
    rng = np.random.default_rng(seed)
    n = int(round((lead + cycles * period + 0.5) * sample_rate))
    t = np.arange(n) / sample_rate
    y = 0.2 * np.sin(2 * np.pi * 50.0 * t) + noise * rng.normal(size=n)
    click_t = np.arange(int(0.004 * sample_rate)) / sample_rate
    click = np.sin(2 * np.pi * 4000.0 * click_t) * np.exp(-click_t / 0.0008)
    opp = []
    skip = set(skip)
    for c in range(cycles):
        for slot, (amp, off) in enumerate(zip(pattern, offsets)):
            if (c, slot) in skip:
                continue
            t0 = lead + c * period + off
            i = int(round(t0 * sample_rate))
            y[i:i + len(click)] += amp * click
            if slot == int(np.argmin(pattern)):
                opp.append(i / sample_rate)
    Y = np.column_stack([y * (1.0 - 0.1 * ch) for ch in range(channels)])
    return AudioTrack(Y, sample_rate), opp
