import numpy as np
import pytest

from ecgbench.errors import ConstantSignal, WindowTooLong
from ecgbench.represent import Image2D, gaf, recurrence_plot, stft_spectrogram, write_pgm


def test_stft_pure_tone_bin():
    fs, f = 100.0, 10.0
    t = np.arange(400) / fs
    img = stft_spectrogram(np.sin(2 * np.pi * f * t), fs, win_len=100, hop=50)
    assert img.data.shape == (51, 7)
    for col in range(img.data.shape[1]):
        assert int(np.argmax(img.data[:, col])) == 10
    assert img.row_axis[10] == pytest.approx(10.0)


def test_stft_zero_input():
    img = stft_spectrogram(np.zeros(300), 100.0, 100, 50)
    assert np.allclose(img.data, 0.0)


def test_stft_constant_input_concentrates_low_bins():
    # A periodic Hann window has exactly three nonzero DFT bins (0 and +/-1),
    # so a constant input puts bin1 at half of bin0 and nothing beyond.
    img = stft_spectrogram(np.full(300, 2.0), 100.0, 100, 50)
    col = img.data[:, 0]
    assert col[1] == pytest.approx(col[0] / 2.0, rel=1e-9)
    assert np.all(col[2:] < 1e-6 * col[0])


def test_stft_window_too_long():
    with pytest.raises(WindowTooLong):
        stft_spectrogram(np.zeros(50), 100.0, 100, 10)


def test_stft_magnitude_homogeneity(rng):
    x = rng.normal(size=500)
    a = stft_spectrogram(x, 100.0, 64, 16).data
    b = stft_spectrogram(-3.0 * x, 100.0, 64, 16).data
    assert np.max(np.abs(b - 3.0 * a)) < 1e-9


def test_gaf_summation_known_matrix():
    img = gaf(np.array([1.0, 0.0, -1.0]), "summation")
    expected = np.array([[1.0, 0.0, -1.0], [0.0, -1.0, 0.0], [-1.0, 0.0, 1.0]])
    assert np.allclose(img.data, expected, atol=1e-12)


def test_gaf_difference_diagonal_zero(rng):
    img = gaf(rng.normal(size=40), "difference")
    assert np.max(np.abs(np.diag(img.data))) < 1e-12


def test_gaf_summation_diagonal_double_angle(rng):
    x = rng.normal(size=30)
    img = gaf(x, "summation")
    scaled = 2.0 * (x - x.min()) / np.ptp(x) - 1.0
    assert np.allclose(np.diag(img.data), 2.0 * scaled**2 - 1.0, atol=1e-9)


def test_gaf_summation_symmetric_bounded(rng):
    img = gaf(rng.normal(size=25), "summation")
    assert np.allclose(img.data, img.data.T)
    assert np.all(img.data >= -1.0) and np.all(img.data <= 1.0)


def test_gaf_constant_rejected():
    with pytest.raises(ConstantSignal):
        gaf(np.ones(10))


def test_recurrence_diagonal_and_symmetry(rng):
    x = rng.normal(size=30)
    img = recurrence_plot(x, 0.5)
    assert np.all(np.diag(img.data) == 1.0)
    assert np.array_equal(img.data, img.data.T)
    assert set(np.unique(img.data)) <= {0.0, 1.0}


def test_recurrence_thresholding():
    img = recurrence_plot(np.array([0.0, 1.0, 0.05]), 0.1)
    assert img.data[0, 2] == 1.0 and img.data[2, 0] == 1.0
    assert img.data[0, 1] == 0.0


def test_recurrence_shift_invariance(rng):
    x = rng.normal(size=20)
    a = recurrence_plot(x, 0.3).data
    b = recurrence_plot(x + 100.0, 0.3).data
    assert np.array_equal(a, b)


def test_write_pgm(tmp_path):
    img = Image2D(data=np.arange(12, dtype=float).reshape(3, 4), encoding="t",
                  row_axis=np.arange(3), col_axis=np.arange(4))
    path = tmp_path / "img.pgm"
    write_pgm(img, str(path))
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n4 3\n255\n")
    assert len(raw) == len(b"P5\n4 3\n255\n") + 12
    assert raw[-1] == 255
