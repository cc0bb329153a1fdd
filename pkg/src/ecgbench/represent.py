"""2D encodings of 1D segments: STFT spectrogram, Gramian angular fields,
recurrence plots. No 2D model ships; these feed tests, dumps, and external
image pipelines."""

from dataclasses import dataclass

import numpy as np

from .errors import ConstantSignal, WindowTooLong


@dataclass(frozen=True)
class Image2D:
    data: np.ndarray
    encoding: str
    row_axis: np.ndarray  # frequency bins (Hz) or sample indices
    col_axis: np.ndarray  # frame times (s) or sample indices


def stft_spectrogram(x, fs: float, win_len: int, hop: int) -> Image2D:
    """Magnitude spectrogram with a periodic Hann window.

    rows = win_len//2 + 1 frequency bins, cols = floor((len-win)/hop) + 1
    frames.
    """
    x = np.asarray(x, dtype=float)
    if win_len > len(x):
        raise WindowTooLong(f"window {win_len} longer than signal {len(x)}")
    if hop < 1:
        raise ValueError("hop must be >= 1")
    window = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(win_len) / win_len))
    n_frames = (len(x) - win_len) // hop + 1
    starts = np.arange(n_frames) * hop
    frames = np.stack([x[s: s + win_len] * window for s in starts])
    mag = np.abs(np.fft.rfft(frames, axis=1)).T
    return Image2D(
        data=mag,
        encoding="stft",
        row_axis=np.fft.rfftfreq(win_len, d=1.0 / fs),
        col_axis=(starts + win_len / 2.0) / fs,
    )


def _rescale_unit(x: np.ndarray) -> np.ndarray:
    span = np.ptp(x)
    if span == 0.0:
        raise ConstantSignal("GAF rescaling needs a non-constant signal")
    return 2.0 * (x - x.min()) / span - 1.0


def gaf(x, mode: str = "summation") -> Image2D:
    """Gramian angular field: min-max rescale to [-1, 1], phi = arccos, then
    cos(phi_i + phi_j) (summation) or sin(phi_i - phi_j) (difference)."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        raise ValueError("gaf needs at least 2 samples")
    scaled = np.clip(_rescale_unit(x), -1.0, 1.0)
    sines = np.sqrt(1.0 - scaled**2)
    if mode == "summation":
        data = np.outer(scaled, scaled) - np.outer(sines, sines)
    elif mode == "difference":
        data = np.outer(sines, scaled) - np.outer(scaled, sines)
    else:
        raise ValueError(f"mode must be summation or difference, got {mode!r}")
    idx = np.arange(len(x))
    return Image2D(data=np.clip(data, -1.0, 1.0), encoding=f"gaf_{mode}",
                   row_axis=idx, col_axis=idx)


def recurrence_plot(x, epsilon: float) -> Image2D:
    """R[i, j] = 1 iff |x_i - x_j| <= epsilon (scalar state, no embedding)."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    x = np.asarray(x, dtype=float)
    data = (np.abs(x[:, None] - x[None, :]) <= epsilon).astype(float)
    idx = np.arange(len(x))
    return Image2D(data=data, encoding="recurrence", row_axis=idx, col_axis=idx)


def write_pgm(image: Image2D, path: str):
    """8-bit P5 dump after per-image min-max scaling, for visual inspection."""
    data = np.asarray(image.data, dtype=float)
    span = np.ptp(data)
    scaled = np.zeros_like(data) if span == 0 else (data - data.min()) / span
    pixels = np.round(255.0 * scaled).astype(np.uint8)
    rows, cols = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
