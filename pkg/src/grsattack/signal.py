"""Synthetic I/Q modulation frames, a flat AWGN channel, and the AMCD dataset file.

Frames are baseband complex signals stored as two real rows (I, Q). Symbols are
held for ``samples_per_symbol`` samples (rectangular pulse). SNR is defined per
complex sample against the measured power of the clean frame.

Random streams are numpy ``PCG64`` generators. Within a dataset, frame ``i``
uses the frame seed ``seed ^ i``; symbols are drawn from the stream
``default_rng([frame_seed, 0])`` and channel randomness from
``default_rng([frame_seed, 1])``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SEED_MASK = (1 << 64) - 1
SYMBOL_STREAM = 0
CHANNEL_STREAM = 1

DEFAULT_SPS = 8
DEFAULT_FRAME_LEN = 128
DEFAULT_SCHEMES = ("BPSK", "QPSK", "8PSK", "16QAM")


@dataclass(frozen=True)
class ModulationScheme:
    name: str
    constellation: np.ndarray
    samples_per_symbol: int = DEFAULT_SPS
    # "hold" repeats each symbol; "tone" integrates symbols as frequency steps
    kind: str = "hold"

    def __post_init__(self):
        if self.samples_per_symbol <= 0:
            raise ValueError("samples_per_symbol must be positive")
        if len(np.unique(self.constellation)) < 2:
            raise ValueError(f"{self.name}: constellation needs at least 2 distinct points")


@dataclass
class IQFrame:
    i: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.i = np.asarray(self.i, dtype=np.float64)
        self.q = np.asarray(self.q, dtype=np.float64)
        if self.i.ndim != 1 or self.i.shape != self.q.shape or self.i.size == 0:
            raise ValueError("I and Q must be non-empty vectors of equal length")
        if not (np.all(np.isfinite(self.i)) and np.all(np.isfinite(self.q))):
            raise ValueError("frame contains non-finite samples")

    @property
    def N(self) -> int:
        return self.i.size

    @classmethod
    def from_complex(cls, z: np.ndarray) -> "IQFrame":
        return cls(z.real.copy(), z.imag.copy())

    @classmethod
    def from_flat(cls, x: np.ndarray) -> "IQFrame":
        n = x.size // 2
        return cls(x[:n], x[n:])

    def to_complex(self) -> np.ndarray:
        return self.i + 1j * self.q

    def flat(self) -> np.ndarray:
        """Model input layout: all I samples followed by all Q samples."""
        return np.concatenate([self.i, self.q])

    def power(self) -> float:
        return float(np.mean(self.i**2 + self.q**2))


@dataclass
class ChannelConfig:
    snr_db: float = math.inf
    cfo_norm: float = 0.0
    phase_rad: float | str = 0.0
    seed: int = 0

    def __post_init__(self):
        if not abs(self.cfo_norm) < 0.5:
            raise ValueError("cfo_norm must lie in (-0.5, 0.5) cycles/sample")
        if isinstance(self.phase_rad, str) and self.phase_rad != "random":
            raise ValueError("phase_rad must be a number or 'random'")


def _normalize(points) -> np.ndarray:
    points = np.asarray(points, dtype=np.complex128)
    return points / np.sqrt(np.mean(np.abs(points) ** 2))


def _qam(m: int) -> np.ndarray:
    side = int(round(math.sqrt(m)))
    levels = np.arange(-side + 1, side, 2, dtype=np.float64)
    return _normalize([a + 1j * b for a in levels for b in levels])


def _psk(m: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(m) / m)


_CONSTELLATIONS = {
    "OOK": lambda: _normalize([0.0, 1.0]),
    "4ASK": lambda: _normalize([-3.0, -1.0, 1.0, 3.0]),
    "BPSK": lambda: _psk(2).real.astype(np.complex128),
    "QPSK": lambda: _normalize([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]),
    "8PSK": lambda: _psk(8),
    "16QAM": lambda: _qam(16),
    "64QAM": lambda: _qam(64),
    # binary frequency alphabet; see gen_clean_frame for the tone synthesis
    "FM-like-tone": lambda: np.array([-1.0 + 0j, 1.0 + 0j]),
}

SCHEME_NAMES = tuple(_CONSTELLATIONS)


def constellation(scheme_name: str, samples_per_symbol: int = DEFAULT_SPS) -> ModulationScheme:
    try:
        points = _CONSTELLATIONS[scheme_name]()
    except KeyError:
        raise ValueError(
            f"unknown modulation scheme {scheme_name!r}; choose from {', '.join(SCHEME_NAMES)}"
        ) from None
    kind = "tone" if scheme_name == "FM-like-tone" else "hold"
    return ModulationScheme(scheme_name, points, samples_per_symbol, kind)


def gen_clean_frame(scheme: ModulationScheme, N: int, rng_seed: int) -> IQFrame:
    """Draw ``N / sps`` uniform symbols and hold each for ``sps`` samples.

    ``tone`` schemes are continuous-phase FSK: each symbol sets the
    instantaneous frequency to ``symbol / (2 * sps)`` cycles/sample.
    """
    sps = scheme.samples_per_symbol
    if N <= 0 or N % sps:
        raise ValueError(f"frame length {N} is not a positive multiple of samples_per_symbol={sps}")
    rng = np.random.default_rng([rng_seed & SEED_MASK, SYMBOL_STREAM])
    symbols = rng.choice(scheme.constellation, size=N // sps)
    held = np.repeat(symbols, sps)
    if scheme.kind == "tone":
        freq = held.real / (2 * sps)
        phase = 2 * np.pi * np.concatenate([[0.0], np.cumsum(freq[:-1])])
        return IQFrame.from_complex(np.exp(1j * phase))
    return IQFrame.from_complex(held)


def apply_channel(frame: IQFrame, cfg: ChannelConfig) -> IQFrame:
    """Rotate by CFO/phase and add complex AWGN at ``cfg.snr_db`` (``inf`` = noise-free)."""
    rng = np.random.default_rng([cfg.seed & SEED_MASK, CHANNEL_STREAM])
    s = frame.to_complex()
    if cfg.phase_rad == "random":
        phase = rng.uniform(0.0, 2 * np.pi)
    else:
        phase = float(cfg.phase_rad)
    if cfg.cfo_norm != 0.0 or phase != 0.0:
        t = np.arange(frame.N)
        s = s * np.exp(1j * (2 * np.pi * cfg.cfo_norm * t + phase))
    if math.isinf(cfg.snr_db) and cfg.snr_db > 0:
        return IQFrame.from_complex(s)
    n0 = frame.power() / 10 ** (cfg.snr_db / 10)
    noise = rng.standard_normal((2, frame.N)) * math.sqrt(n0 / 2)
    return IQFrame(s.real + noise[0], s.imag + noise[1])


@dataclass
class Dataset:
    """Labeled, SNR-tagged frames with a stratified train/test split.

    ``iq`` has shape ``(num_examples, 2, frame_len)``.
    """

    iq: np.ndarray
    labels: np.ndarray
    snr_db: np.ndarray
    num_classes: int
    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int = 0
    schemes: tuple = field(default=())

    def __post_init__(self):
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")
        both = np.concatenate([self.train_indices, self.test_indices])
        if both.size != len(self) or np.unique(both).size != len(self):
            raise ValueError("train/test indices must partition the examples")

    def __len__(self) -> int:
        return self.labels.size

    @property
    def frame_len(self) -> int:
        return self.iq.shape[2]

    @property
    def X(self) -> np.ndarray:
        """Flattened model inputs, shape ``(num_examples, 2 * frame_len)``."""
        return self.iq.reshape(len(self), -1)

    def frame(self, idx: int) -> IQFrame:
        return IQFrame(self.iq[idx, 0], self.iq[idx, 1])

    def examples(self):
        for idx in range(len(self)):
            yield self.frame(idx), int(self.labels[idx]), float(self.snr_db[idx])

    def split(self, which: str, snr: float | None = None) -> np.ndarray:
        idx = {"train": self.train_indices, "test": self.test_indices}[which]
        if snr is not None:
            idx = idx[self.snr_db[idx] == snr]
        return idx


def build_dataset(
    schemes,
    snr_list,
    frames_per_cell: int,
    N: int = DEFAULT_FRAME_LEN,
    seed: int = 0,
    *,
    samples_per_symbol: int = DEFAULT_SPS,
    cfo_norm: float = 0.0,
    phase_rad: float | str = 0.0,
    train_fraction: float = 0.75,
) -> Dataset:
    """One frame per (scheme, SNR, repetition), split 75/25 within each cell."""
    schemes = list(schemes)
    snr_list = [float(s) for s in snr_list]
    if not schemes or not snr_list:
        raise ValueError("schemes and snr_list must be non-empty")
    if frames_per_cell < 4:
        raise ValueError("frames_per_cell must be at least 4")
    mods = [s if isinstance(s, ModulationScheme) else constellation(s, samples_per_symbol) for s in schemes]

    total = len(mods) * len(snr_list) * frames_per_cell
    iq = np.empty((total, 2, N))
    labels = np.empty(total, dtype=np.int64)
    snrs = np.empty(total)
    split_rng = np.random.default_rng([seed & SEED_MASK, 2])
    train = []
    idx = 0
    for label, mod in enumerate(mods):
        for snr in snr_list:
            cell = np.arange(idx, idx + frames_per_cell)
            for _ in range(frames_per_cell):
                frame_seed = seed ^ idx
                clean = gen_clean_frame(mod, N, frame_seed)
                rx = apply_channel(clean, ChannelConfig(snr, cfo_norm, phase_rad, frame_seed))
                iq[idx, 0], iq[idx, 1] = rx.i, rx.q
                labels[idx] = label
                snrs[idx] = snr
                idx += 1
            n_train = int(round(train_fraction * frames_per_cell))
            train.append(split_rng.permutation(cell)[:n_train])
    train_idx = np.sort(np.concatenate(train))
    test_idx = np.setdiff1d(np.arange(total), train_idx)
    return Dataset(iq, labels, snrs, len(mods), train_idx, test_idx, seed, tuple(m.name for m in mods))


# --- AMCD file format -------------------------------------------------------

DATASET_MAGIC = b"AMCD"
DATASET_VERSION = 1
_HEADER = struct.Struct("<4s5I")


def _example_dtype(N: int) -> np.dtype:
    return np.dtype([("label", "<u4"), ("snr", "<f8"), ("i", "<f8", (N,)), ("q", "<f8", (N,))])


def dataset_to_bytes(ds: Dataset) -> bytes:
    header = _HEADER.pack(
        DATASET_MAGIC, DATASET_VERSION, len(ds), ds.frame_len, ds.num_classes, ds.train_indices.size
    )
    rec = np.empty(len(ds), dtype=_example_dtype(ds.frame_len))
    rec["label"] = ds.labels
    rec["snr"] = ds.snr_db
    rec["i"] = ds.iq[:, 0]
    rec["q"] = ds.iq[:, 1]
    return header + ds.train_indices.astype("<u4").tobytes() + rec.tobytes()


def dataset_from_bytes(buf: bytes) -> Dataset:
    if len(buf) < _HEADER.size:
        raise ValueError("truncated dataset file")
    magic, version, n, N, C, n_train = _HEADER.unpack_from(buf)
    if magic != DATASET_MAGIC:
        raise ValueError(f"bad dataset magic {magic!r}")
    if version != DATASET_VERSION:
        raise ValueError(f"unsupported dataset version {version}")
    off = _HEADER.size
    dtype = _example_dtype(N)
    expected = off + 4 * n_train + n * dtype.itemsize
    if len(buf) != expected:
        raise ValueError(f"dataset file size {len(buf)} does not match header ({expected})")
    train_idx = np.frombuffer(buf, "<u4", n_train, off).astype(np.int64)
    rec = np.frombuffer(buf, dtype, n, off + 4 * n_train)
    iq = np.stack([rec["i"], rec["q"]], axis=1).astype(np.float64)
    test_idx = np.setdiff1d(np.arange(n), train_idx)
    return Dataset(iq, rec["label"].astype(np.int64), rec["snr"].astype(np.float64), C, train_idx, test_idx)


def save_dataset(ds: Dataset, path) -> None:
    Path(path).write_bytes(dataset_to_bytes(ds))


def load_dataset(path) -> Dataset:
    return dataset_from_bytes(Path(path).read_bytes())
