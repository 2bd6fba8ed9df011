import numpy as np
import pytest

import svft


def test_svd_reconstructs():
    w = np.random.default_rng(0).normal(size=(5, 3))
    u, s, v = svft.svd(w)
    assert u.shape == (5, 5) and v.shape == (3, 3)
    assert np.allclose(u[:, :3] * s @ v.T, w, atol=1e-12)
    assert np.allclose(s, np.linalg.svd(w, compute_uv=False), atol=1e-12)


def test_adapter_forward_and_fuse():
    rng = np.random.default_rng(1)
    w0 = rng.normal(size=(6, 6))
    a = svft.Adapter(w0, "banded:1")
    assert a.num_trainable == svft.banded_count(6, 1) == 16
    x = rng.normal(size=(6, 4))
    assert np.allclose(a.forward(x), w0 @ x, atol=1e-12)
    a.values = list(rng.normal(size=16))
    assert np.allclose(a.fuse() @ x, a.forward(x), atol=1e-12)
    assert svft.numerical_rank(a.delta_w()) <= 6


def test_expressivity():
    rng = np.random.default_rng(2)
    w0, p = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    m = svft.solve_expressivity(w0, p)
    u, _, v = svft.svd(w0)
    assert np.allclose(w0 + u @ m @ v.T, p, atol=1e-12)


def test_round_trip_and_checksum(tmp_path):
    rng = np.random.default_rng(3)
    w0 = rng.normal(size=(5, 5))
    a = svft.Adapter(w0, "random:9:4")
    a.values = list(rng.normal(size=9))
    path = str(tmp_path / "a.svft")
    svft.save_adapter(path, a, w0)
    b = svft.load_adapter(path, w0)
    assert b.values == a.values and b.indices == a.indices
    with pytest.raises(svft.ChecksumError):
        svft.load_adapter(path, w0 + 1e-9)


def test_counts_and_errors():
    assert svft.param_count("lora", 1, 4, 1) == 8
    assert svft.param_count("svft-b", 1, 6, 2) == 24
    with pytest.raises(svft.Error):
        svft.param_count("boft", 1, 4, 1)
    with pytest.raises(svft.Error):
        svft.pattern("topk:2", np.ones((3, 2)))


def test_train_and_verify():
    r = svft.train("svft-b:1", d=8, planted=4, noise=0.0, epochs=400, seed=1)
    assert r["final_loss"] <= 1e-10
    assert r["trainable_params"] == svft.banded_count(8, 1)
    assert all(svft.verify(["rank", "count"]).values())
