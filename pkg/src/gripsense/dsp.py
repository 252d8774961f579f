"""Audio preprocessing: cropping, 1-second segmentation, augmentation, MFCCs.

The MFCC chain is the standard speech recipe: periodic Hann window,
magnitude-squared spectrum, HTK-mel triangular filterbank, log with an
additive floor, orthonormal DCT-II keeping the first n_coeffs terms.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass, field

import numpy as np

SEGMENT_S = 1.0  # clip length for classification


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class AudioSegment:
    """Exactly one second of audio cut from a trial recording."""

    samples: np.ndarray
    source_trial: str
    offset_s: float
    label: str | None = None
    sample_rate: int = 16000

    def __post_init__(self):
        want = round(self.sample_rate * SEGMENT_S)
        if len(self.samples) != want:
            raise ValueError(f"segment must hold {want} samples, got {len(self.samples)}")


@dataclass(frozen=True)
class MfccConfig:
    frame_len: int = 400   # 25 ms @ 16 kHz
    hop: int = 160         # 10 ms
    n_fft: int = 512
    n_mels: int = 40
    n_coeffs: int = 13
    fmin: float = 20.0
    fmax: float = 7600.0
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.n_coeffs > self.n_mels:
            raise ValueError("n_coeffs must not exceed n_mels")
        if self.frame_len > self.n_fft:
            raise ValueError("frame_len must not exceed n_fft")
        if not 0 <= self.fmin < self.fmax:
            raise ValueError("need 0 <= fmin < fmax")
        if min(self.frame_len, self.hop, self.n_mels, self.n_coeffs) <= 0:
            raise ValueError("sizes must be positive")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")


@dataclass(frozen=True)
class MfccMatrix:
    frames: np.ndarray  # (n_frames, n_coeffs)
    config: MfccConfig

    def __post_init__(self):
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("MFCC matrix contains non-finite values")


def crop_to_motion(w: Waveform, start_s: float, end_s: float) -> Waveform:
    """Cut out [start_s, end_s) of the recording."""
    if not 0.0 <= start_s < end_s <= w.duration + 1e-12:
        raise ValueError(f"window [{start_s}, {end_s}) outside waveform of {w.duration} s")
    lo = round(start_s * w.sample_rate)
    hi = round(end_s * w.sample_rate)
    return Waveform(w.samples[lo:hi].copy(), w.sample_rate)


def segment(w: Waveform, hop_s: float, source_trial: str = "",
            label: str | None = None) -> list[AudioSegment]:
    """Cut 1-second clips at offsets 0, hop_s, 2*hop_s, ...; partial tail dropped."""
    if hop_s <= 0:
        raise ValueError(f"hop_s must be positive, got {hop_s}")
    seg_len = round(SEGMENT_S * w.sample_rate)
    if len(w.samples) < seg_len:
        raise ValueError("waveform shorter than one segment")
    out = []
    k = 0
    while True:
        start = round(k * hop_s * w.sample_rate)
        if start + seg_len > len(w.samples):
            break
        out.append(AudioSegment(w.samples[start:start + seg_len].copy(),
                                source_trial, k * hop_s, label, w.sample_rate))
        k += 1
    return out


def pitch_shift(seg: AudioSegment, semitones: float) -> AudioSegment:
    """Shift pitch by resampling; length is restored by looping the resampled
    signal (wrap-around padding), which keeps the content periodic instead of
    appending silence."""
    if abs(semitones) > 12:
        raise ValueError(f"|semitones| must be <= 12, got {semitones}")
    n = len(seg.samples)
    rate = 2.0 ** (semitones / 12.0)
    pos = (np.arange(n) * rate) % n
    lo = np.floor(pos).astype(np.int64)
    frac = pos - lo
    hi = (lo + 1) % n
    out = (1.0 - frac) * seg.samples[lo] + frac * seg.samples[hi]
    return AudioSegment(out, seg.source_trial, seg.offset_s, seg.label, seg.sample_rate)


def add_noise(seg: AudioSegment, snr_db: float, seed: int) -> AudioSegment:
    """Add seeded white Gaussian noise scaled to hit the requested SNR."""
    power = float(np.mean(seg.samples ** 2))
    if power <= 0.0:
        raise ValueError("zero-energy segment: SNR undefined")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(len(seg.samples))
    w_power = float(np.mean(w ** 2))
    target = power / (10.0 ** (snr_db / 10.0))
    noise = w * np.sqrt(target / w_power)
    return AudioSegment(seg.samples + noise, seg.source_trial, seg.offset_s,
                        seg.label, seg.sample_rate)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(cfg: MfccConfig, sample_rate: int) -> np.ndarray:
    """Triangular filters on the HTK mel scale, (n_mels, n_fft//2 + 1)."""
    mel_pts = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    bin_hz = np.arange(cfg.n_fft // 2 + 1) * sample_rate / cfg.n_fft
    bank = np.zeros((cfg.n_mels, len(bin_hz)))
    for m in range(cfg.n_mels):
        left, center, right = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (bin_hz - left) / (center - left)
        down = (right - bin_hz) / (right - center)
        bank[m] = np.maximum(0.0, np.minimum(up, down))
    return bank


def dct_matrix(n_coeffs: int, n_mels: int) -> np.ndarray:
    """Orthonormal DCT-II rows, (n_coeffs, n_mels)."""
    m = np.arange(n_mels)
    k = np.arange(n_coeffs)[:, None]
    d = np.cos(np.pi * k * (2 * m + 1) / (2 * n_mels)) * np.sqrt(2.0 / n_mels)
    d[0] /= np.sqrt(2.0)
    return d


def frame_count(n_samples: int, cfg: MfccConfig) -> int:
    return 1 + (n_samples - cfg.frame_len) // cfg.hop


def mfcc(seg: AudioSegment, cfg: MfccConfig = MfccConfig()) -> MfccMatrix:
    x = np.asarray(seg.samples, dtype=float)
    if len(x) < cfg.frame_len:
        raise ValueError("segment shorter than one analysis frame")
    if cfg.fmax > seg.sample_rate / 2:
        raise ValueError("fmax exceeds Nyquist")
    n_frames = frame_count(len(x), cfg)
    idx = np.arange(cfg.frame_len)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(cfg.frame_len) / cfg.frame_len)
    frames = x[idx] * window
    spectrum = np.abs(np.fft.rfft(frames, cfg.n_fft, axis=1)) ** 2
    bank = mel_filterbank(cfg, seg.sample_rate)
    logmel = np.log(spectrum @ bank.T + cfg.log_floor)
    coeffs = logmel @ dct_matrix(cfg.n_coeffs, cfg.n_mels).T
    return MfccMatrix(coeffs, cfg)


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono PCM 16-bit little-endian WAV."""
    pcm = np.round(np.clip(samples, -1.0, 1.0) * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(sample_rate)
        f.writeframes(pcm.tobytes())


def read_wav(path) -> Waveform:
    with wave.open(str(path), "rb") as f:
        if f.getnchannels() != 1 or f.getsampwidth() != 2:
            raise ValueError("expected mono 16-bit PCM WAV")
        sr = f.getframerate()
        raw = f.readframes(f.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(float) / 32767.0, sr)
