import numpy as np
import pytest

from conftest import random_net
from toponet.data import BallShell, generate
from toponet.io import (
    FormatError,
    read_dataset,
    read_network,
    read_points,
    read_trace,
    write_dataset,
    write_network,
    write_trace,
)
from toponet.network import trace_activations


class TestPoints:
    def test_dataset_roundtrip_exact(self, tmp_path):
        d = generate(BallShell(points_per_class=50))
        write_dataset(tmp_path / "d.csv", d)
        back = read_dataset(tmp_path / "d.csv")
        assert np.array_equal(back.points, d.points) and np.array_equal(back.labels, d.labels)
        assert back.shape_tag == d.shape_tag and back.num_classes == 2

    @pytest.mark.parametrize("text, msg", [
        ("", "no header"),
        ("a,b,c\n", "header"),
        ("2,2\n", "three fields"),
        ("2,2,1\n0.0,1.0\n", "expected 3 fields"),
        ("2,2,2\n0.0,1.0,0\n", "announces 2 rows"),
    ])
    def test_malformed(self, tmp_path, text, msg):
        p = tmp_path / "bad.csv"
        p.write_text(text)
        with pytest.raises(FormatError, match=msg):
            read_points(p)

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_points(tmp_path / "nope.csv")


class TestNetwork:
    def test_roundtrip_bitwise(self, tmp_path):
        net = random_net([3, 5, 2, 2], seed=3)
        net.seed, net.epochs = 3, 17
        write_network(tmp_path / "n.txt", net)
        back = read_network(tmp_path / "n.txt")
        assert back.seed == 3 and back.epochs == 17
        for a, b in zip(net.layers, back.layers):
            assert np.array_equal(a.W, b.W) and np.array_equal(a.b, b.b)
            assert a.activation is b.activation

    @pytest.mark.parametrize("text", [
        "other 1\n",
        "toponet-network 2\nseed 0\nepochs 0\nlayers 0\n",
        "toponet-network 1\nseed 0\nepochs 0\nlayers 1\nlayer 1 2 1 softmax\n1.0\n0.0\n",
        "toponet-network 1\nseed 0\nepochs 0\nlayers 1\nlayer 2 2 1 softmax\n1.0 2.0\n0.0\n",
        "toponet-network 1\nseed 0\n",
    ])
    def test_malformed(self, tmp_path, text):
        p = tmp_path / "n.txt"
        p.write_text(text)
        with pytest.raises(FormatError):
            read_network(p)


class TestTrace:
    def test_roundtrip(self, tmp_path):
        net = random_net([3, 4, 2])
        d = generate(BallShell(points_per_class=20))
        tr = trace_activations(net, d)
        write_trace(tmp_path / "t", tr, 2)
        back, n = read_trace(tmp_path / "t")
        assert n == 2 and np.array_equal(back.labels, tr.labels)
        for a, b in zip(tr.clouds, back.clouds):
            assert np.array_equal(a, b)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_trace(tmp_path)
