import math

import numpy as np
import pytest

import bci_engine as bci


def test_version_and_classes():
    assert bci.__version__
    assert bci.class_names() == ["none", "left", "right", "both"]


def test_on_bin_cosine():
    n = 256
    x = np.cos(2 * np.pi * 10 * np.arange(n) / n)
    m = bci.fft_magnitude(x, window="rectangular")
    assert m.shape == (128,)
    assert int(np.argmax(m)) == 10
    assert m[10] == pytest.approx(128.0)
    ref = np.abs(np.fft.rfft(x))[:128]
    assert np.allclose(m, ref, atol=1e-9)


def test_filter_notch_and_passband():
    assert abs(bci.filter_response(50.0)) < 10 ** (-30 / 20)
    assert abs(bci.filter_response(10.0)) == pytest.approx(1.0, abs=0.3)
    t = np.arange(2500) / 250.0
    x = np.vstack([np.sin(2 * np.pi * 50 * t), np.sin(2 * np.pi * 10 * t)])
    y = bci.filter_signal(x)
    assert y.shape == x.shape
    assert np.abs(y[0, 1500:]).max() < 0.05
    assert np.abs(y[1, 1500:]).max() > 0.7


def test_bands_alpha_only():
    mags = np.zeros(128)
    mags[10] = 2.0  # 10 * 250 / 256 = 9.77 Hz
    bands = bci.extract_bands(mags, 250.0)
    assert bands == pytest.approx([0.0, 0.0, 4.0, 0.0])


def test_balance_and_split():
    labels = [0] * 7 + [1] * 3 + [2] * 5
    idx = bci.balance_indices(labels, seed=3)
    assert sorted(np.bincount([labels[i] for i in idx])) == [3, 3, 3]
    train, test = bci.split_indices(list(range(20)), 0.7, "temporal", 0)
    assert len(train) == 14 and len(test) == 6
    assert max(train) < min(test)


def test_knn_and_lda():
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(-3, 1, (50, 2)), rng.normal(3, 1, (50, 2))])
    y = [1] * 50 + [2] * 50
    q = np.array([[-3.0, -3.0], [3.0, 3.0]])
    assert bci.knn_predict(x, y, q, k=5) == [1, 2]
    assert bci.lda_predict(x, y, q) == [1, 2]
    with pytest.raises(bci.BciError, match="KTooLarge"):
        bci.knn_predict(x, y, q, k=101)


def test_cnn_shapes():
    assert bci.cnn_shapes(1, 100)["flatten_len"] == 3100
    assert bci.cnn_shapes(4, 100)["flatten_len"] == 250


def test_simulate_train_roundtrip(tmp_path):
    s = bci.simulate_session(30.0, seed=4)
    mags, labels = s["mags"], s["labels"]
    assert mags.shape[1:] == (8, 128)
    assert mags.shape[0] == len(labels) == len(s["times"])
    assert set(labels) <= {0, 1, 2, 3}
    model = bci.train_model("knn", mags, labels, seed=1)
    assert model.kind == "knn"
    acc = model.accuracy(mags, labels)
    assert 0.0 <= acc <= 1.0
    path = str(tmp_path / "m.bcim")
    model.save(path)
    back = bci.load_model(path)
    assert back.predict(mags[:20]) == model.predict(mags[:20])
    assert not math.isnan(back.training_accuracy)
