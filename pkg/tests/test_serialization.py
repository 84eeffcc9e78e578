import numpy as np
import pytest

from uavcsi.errors import FormatError, ShapeError
from uavcsi.nnet import make_aidnet, make_recnet, make_sennet
from uavcsi.serialization import (MAGIC, ModelParams, load_model,
                                  read_container, save_model, write_container)
from uavcsi.transmit import draw_compression_matrix


def sample_tensors():
    rng = np.random.default_rng(0)
    return {
        "cplict": rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4)),
        "floats": rng.standard_normal(7),
        "ints": np.array([1, -2, 3], dtype=np.int64),
    }


def test_container_roundtrip_bit_exact(tmp_path):
    path = tmp_path / "t.uavc"
    tensors = sample_tensors()
    write_container(path, "dataset", {"note": "x", "k": 3}, tensors)
    meta, loaded = read_container(path, expect_kind="dataset")
    assert meta == {"note": "x", "k": 3}
    for k, v in tensors.items():
        assert loaded[k].dtype == v.dtype or k == "ints"
        assert np.array_equal(loaded[k], v)


def test_container_bad_magic(tmp_path):
    path = tmp_path / "t.uavc"
    write_container(path, "dataset", {}, sample_tensors())
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        read_container(path)


def test_container_truncated(tmp_path):
    path = tmp_path / "t.uavc"
    write_container(path, "dataset", {}, sample_tensors())
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 9])
    with pytest.raises(FormatError):
        read_container(path)


def test_container_trailing_garbage(tmp_path):
    path = tmp_path / "t.uavc"
    write_container(path, "dataset", {}, sample_tensors())
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(FormatError):
        read_container(path)


def test_container_wrong_kind_and_version(tmp_path):
    path = tmp_path / "t.uavc"
    write_container(path, "model", {}, sample_tensors())
    with pytest.raises(FormatError):
        read_container(path, expect_kind="dataset")
    raw = path.read_bytes()
    doctored = raw.replace(b'"schema_version": 1', b'"schema_version": 9')
    path.write_bytes(doctored)
    with pytest.raises(FormatError):
        read_container(path)


def make_model(n=8, la=3, m=32, with_all=True):
    rng = np.random.default_rng(1)
    mp = ModelParams(
        n=n, la=la, m=m,
        phi=draw_compression_matrix(la * n, n, seed=7),
        q_seed=3,
        recnet=make_recnet(la, n).init_params(rng),
        norms={"sennet_norm": "per_sample"},
    )
    if with_all:
        mp.sennet = make_sennet(la, n).init_params(rng)
        mp.aidnet = make_aidnet(n).init_params(rng)
        mp.finals = {"recnet": make_recnet(la, n).init_params(rng)}
    return mp


def test_model_roundtrip_bit_exact(tmp_path):
    path = tmp_path / "model.uavc"
    mp = make_model()
    save_model(path, mp, extra_meta={"seed": 11})
    back = load_model(path)
    assert (back.n, back.la, back.m) == (mp.n, mp.la, mp.m)
    assert back.phi.seed == mp.phi.seed
    assert np.array_equal(back.phi.phi, mp.phi.phi)
    assert back.q_seed == mp.q_seed
    assert back.norms == mp.norms
    for net in ("sennet", "aidnet", "recnet"):
        a, b = getattr(mp, net), getattr(back, net)
        assert set(a) == set(b)
        for k in a:
            assert np.array_equal(a[k], b[k])
    for k in mp.finals["recnet"]:
        assert np.array_equal(back.finals["recnet"][k], mp.finals["recnet"][k])


def test_model_without_sensing_nets(tmp_path):
    path = tmp_path / "model.uavc"
    save_model(path, make_model(with_all=False))
    back = load_model(path)
    assert back.sennet is None and back.aidnet is None
    assert back.recnet is not None


def test_model_config_mismatch_rejected(tmp_path):
    path = tmp_path / "model.uavc"
    save_model(path, make_model(n=8, la=3))
    with pytest.raises(ShapeError):
        load_model(path, expect_n=16)
    with pytest.raises(ShapeError):
        load_model(path, expect_la=5)


def test_model_tensor_shape_mismatch_rejected(tmp_path):
    path = tmp_path / "model.uavc"
    mp = make_model()
    mp.aidnet["fc1.w"] = np.zeros((3, 3))  # wrong shape for n=8
    save_model(path, mp)
    with pytest.raises(ShapeError):
        load_model(path)


def test_magic_constant_stable():
    assert MAGIC == b"UAVCSIC1"
