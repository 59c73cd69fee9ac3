import hashlib
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grsattack import signal
from grsattack.signal import ChannelConfig, IQFrame


@given(st.sampled_from(signal.SCHEME_NAMES))
def test_constellation_unit_power(name):
    c = signal.constellation(name).constellation
    assert abs(np.mean(np.abs(c) ** 2) - 1.0) < 1e-12
    assert len(np.unique(c)) >= 2


def test_bpsk_points():
    assert sorted(signal.constellation("BPSK").constellation.real) == [-1.0, 1.0]
    assert np.all(signal.constellation("BPSK").constellation.imag == 0)


def test_qpsk_points():
    c = signal.constellation("QPSK").constellation
    expected = {complex(a, b) / math.sqrt(2) for a in (-1, 1) for b in (-1, 1)}
    assert len(c) == 4
    for p in c:
        assert min(abs(p - e) for e in expected) < 1e-15


def test_16qam_grid_and_power():
    # independent enumeration of the {+-1, +-3}^2 grid
    grid = [complex(a, b) for a in (-3, -1, 1, 3) for b in (-3, -1, 1, 3)]
    mean_sq = sum(abs(p) ** 2 for p in grid) / len(grid)
    assert mean_sq == 10.0
    c = signal.constellation("16QAM").constellation
    assert sorted((round(p.real * math.sqrt(10), 9), round(p.imag * math.sqrt(10), 9)) for p in c) == sorted(
        (p.real, p.imag) for p in grid
    )


def test_unknown_scheme():
    with pytest.raises(ValueError, match="unknown modulation"):
        signal.constellation("256QAM")


def test_bpsk_frame_is_held_real():
    scheme = signal.constellation("BPSK", samples_per_symbol=4)
    f = signal.gen_clean_frame(scheme, 8, 123)
    assert f.N == 8
    assert np.all(f.q == 0)
    assert set(np.abs(f.i)) == {1.0}
    assert np.all(f.i[:4] == f.i[0]) and np.all(f.i[4:] == f.i[4])


def test_qpsk_frame_power():
    scheme = signal.constellation("QPSK")
    for seed in range(20):
        assert 0.8 <= signal.gen_clean_frame(scheme, 128, seed).power() <= 1.2


def test_tone_frame_constant_envelope():
    f = signal.gen_clean_frame(signal.constellation("FM-like-tone"), 128, 5)
    assert np.allclose(f.i**2 + f.q**2, 1.0)


def test_frame_determinism():
    scheme = signal.constellation("16QAM")
    a = signal.gen_clean_frame(scheme, 128, 42)
    b = signal.gen_clean_frame(scheme, 128, 42)
    assert np.array_equal(a.i, b.i) and np.array_equal(a.q, b.q)


def test_frame_length_must_divide():
    with pytest.raises(ValueError):
        signal.gen_clean_frame(signal.constellation("QPSK"), 100, 0)


def test_iqframe_invariants():
    with pytest.raises(ValueError):
        IQFrame([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        IQFrame([np.nan], [0.0])
    f = IQFrame.from_flat(np.arange(6.0))
    assert np.array_equal(f.flat(), np.arange(6.0))


def test_channel_cfo_bound():
    with pytest.raises(ValueError):
        ChannelConfig(cfo_norm=0.5)


def test_identity_channel():
    f = signal.gen_clean_frame(signal.constellation("8PSK"), 128, 9)
    out = signal.apply_channel(f, ChannelConfig(snr_db=math.inf))
    assert np.array_equal(out.i, f.i) and np.array_equal(out.q, f.q)


def test_phase_rotation_preserves_power():
    f = signal.gen_clean_frame(signal.constellation("16QAM"), 128, 3)
    out = signal.apply_channel(f, ChannelConfig(snr_db=math.inf, cfo_norm=0.01, phase_rad="random", seed=4))
    assert np.allclose(out.i**2 + out.q**2, f.i**2 + f.q**2)


def test_noise_variance_at_0db():
    # unit-power frame at 0 dB: per-complex-sample noise variance is 1
    f = IQFrame(np.ones(4096), np.zeros(4096))
    out = signal.apply_channel(f, ChannelConfig(snr_db=0.0, seed=1))
    noise = (out.i - f.i) ** 2 + (out.q - f.q) ** 2
    assert abs(noise.mean() - 1.0) < 0.06


@pytest.mark.parametrize("snr", [0.0, 10.0, 20.0])
def test_empirical_snr(snr):
    scheme = signal.constellation("QPSK")
    ratios = []
    for k in range(200):
        clean = signal.gen_clean_frame(scheme, 128, k)
        rx = signal.apply_channel(clean, ChannelConfig(snr_db=snr, seed=k))
        p_noise = np.mean((rx.i - clean.i) ** 2 + (rx.q - clean.q) ** 2)
        ratios.append(clean.power() / p_noise)
    est = 10 * math.log10(np.mean(ratios))
    assert abs(est - snr) <= 0.5


def test_build_dataset_counts():
    ds = signal.build_dataset(["BPSK", "QPSK", "8PSK", "16QAM"], [0, 10, 20], 100, 128, seed=5)
    assert len(ds) == 1200
    assert ds.train_indices.size == 900 and ds.test_indices.size == 300
    assert set(ds.labels[: 300]) == {0}


def test_build_dataset_split_per_cell():
    ds = signal.build_dataset(["OOK", "BPSK"], [0, 5], 10, 64, seed=2)
    train = set(ds.train_indices.tolist())
    assert train.isdisjoint(ds.test_indices.tolist())
    for label in range(2):
        for snr in (0.0, 5.0):
            cell = np.flatnonzero((ds.labels == label) & (ds.snr_db == snr))
            n_train = sum(int(i) in train for i in cell)
            assert abs(n_train - 0.75 * cell.size) <= 1


def test_build_dataset_errors():
    with pytest.raises(ValueError):
        signal.build_dataset([], [0], 10)
    with pytest.raises(ValueError):
        signal.build_dataset(["BPSK"], [], 10)
    with pytest.raises(ValueError):
        signal.build_dataset(["BPSK"], [0], 3)
    with pytest.raises(ValueError):
        signal.build_dataset(["XPSK"], [0], 10)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**63 - 1), st.integers(4, 12))
def test_dataset_bytes_deterministic(seed, frames):
    a = signal.dataset_to_bytes(signal.build_dataset(["BPSK", "QPSK"], [0, 20], frames, 16, seed))
    b = signal.dataset_to_bytes(signal.build_dataset(["BPSK", "QPSK"], [0, 20], frames, 16, seed))
    assert hashlib.sha256(a).digest() == hashlib.sha256(b).digest()


def test_dataset_roundtrip(tmp_path):
    ds = signal.build_dataset(["OOK", "4ASK", "QPSK"], [-5, 15], 8, 32, seed=11)
    path = tmp_path / "d.amcd"
    signal.save_dataset(ds, path)
    back = signal.load_dataset(path)
    assert np.array_equal(back.iq, ds.iq)
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.snr_db, ds.snr_db)
    assert np.array_equal(back.train_indices, ds.train_indices)
    assert back.num_classes == 3 and back.frame_len == 32
    assert signal.dataset_to_bytes(back) == path.read_bytes()


def test_dataset_file_layout():
    ds = signal.build_dataset(["BPSK", "QPSK"], [10], 4, 8, seed=0)
    buf = signal.dataset_to_bytes(ds)
    assert buf[:4] == b"AMCD"
    version, n, N, C, n_train = np.frombuffer(buf[4:24], "<u4")
    assert (version, n, N, C, n_train) == (1, 8, 8, 2, 6)
    assert len(buf) == 24 + 4 * 6 + 8 * (4 + 8 + 16 * 8)
    first = 24 + 4 * 6
    assert np.frombuffer(buf[first : first + 4], "<u4")[0] == ds.labels[0]
    assert np.frombuffer(buf[first + 4 : first + 12], "<f8")[0] == 10.0
    assert np.array_equal(np.frombuffer(buf[first + 12 : first + 12 + 64], "<f8"), ds.iq[0, 0])


def test_dataset_bad_magic():
    with pytest.raises(ValueError, match="magic"):
        signal.dataset_from_bytes(b"XXXX" + bytes(20))
