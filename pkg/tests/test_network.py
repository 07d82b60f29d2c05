import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_net
from toponet.data import Annulus2D, LabeledPointSet, generate
from toponet.network import (
    Activation,
    DivergenceError,
    Hyperparams,
    LayerSpec,
    NetworkSpec,
    accuracy,
    cross_entropy,
    forward,
    gradients,
    head,
    init_network,
    log_softmax,
    softmax,
    trace_activations,
    train,
)

finite = st.floats(-50, 50, allow_nan=False)


def numeric_gradients(net, X, y, h=1e-5):
    """Central differences of the mean cross-entropy, one parameter at a time."""
    out = []
    for layer in net.layers:
        gs = []
        for P in (layer.W, layer.b):
            G = np.zeros_like(P)
            for idx in np.ndindex(P.shape):
                old = P[idx]
                P[idx] = old + h
                up = cross_entropy(net, X, y)
                P[idx] = old - h
                down = cross_entropy(net, X, y)
                P[idx] = old
                G[idx] = (up - down) / (2 * h)
            gs.append(G)
        out.append(tuple(gs))
    return out


def max_relative_error(ga, gn):
    num = max(np.abs(a - n).max() for pa, pn in zip(ga, gn) for a, n in zip(pa, pn))
    den = max(max(np.abs(a).max(), np.abs(n).max()) for pa, pn in zip(ga, gn) for a, n in zip(pa, pn))
    return num / max(den, 1e-12)


class TestSpec:
    def test_from_dims(self):
        spec = NetworkSpec.from_dims([2, 5, 3])
        assert spec.dims == [2, 5, 3]
        assert [l.activation for l in spec.layers] == [Activation.RELU, Activation.SOFTMAX]

    def test_chain_mismatch(self):
        with pytest.raises(ValueError):
            NetworkSpec((LayerSpec(2, 3, Activation.RELU), LayerSpec(4, 2, Activation.SOFTMAX)))

    def test_softmax_only_last(self):
        with pytest.raises(ValueError):
            NetworkSpec((LayerSpec(2, 3, Activation.SOFTMAX), LayerSpec(3, 2, Activation.SOFTMAX)))


class TestSoftmax:
    @given(arrays(float, st.tuples(st.integers(1, 5), st.integers(2, 6)), elements=finite))
    def test_on_simplex(self, z):
        p = softmax(z)
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)

    @given(arrays(float, 4, elements=finite), st.floats(-100, 100))
    def test_shift_invariant(self, z, c):
        np.testing.assert_allclose(softmax(z + c), softmax(z), atol=1e-12)

    def test_log_softmax_large_logits(self):
        z = np.array([1000.0, 0.0, -1000.0])
        lp = log_softmax(z)
        assert np.all(np.isfinite(lp))
        assert lp[0] == pytest.approx(0.0) and lp[1] == pytest.approx(-1000.0)


class TestForward:
    def test_head_zero_is_identity(self):
        net = random_net([3, 4, 2])
        x = np.array([0.1, -2.0, 3.0])
        assert np.array_equal(head(net, 0, x), x)

    def test_head_telescopes(self, rng):
        net = random_net([3, 4, 4, 2])
        X = rng.standard_normal((20, 3))
        for i in range(net.depth):
            assert np.array_equal(head(net, i + 1, X), net.layers[i](head(net, i, X)))
        assert np.array_equal(head(net, net.depth, X), forward(net, X))

    def test_single_matches_batch(self, rng):
        net = random_net([3, 4, 2])
        X = rng.standard_normal((5, 3))
        np.testing.assert_allclose(np.stack([forward(net, x) for x in X]), forward(net, X), atol=1e-15)

    def test_oracle(self):
        net = random_net([2, 3, 2])
        x = np.array([0.5, -1.0])
        l1, l2 = net.layers
        h = np.maximum(l1.W @ x + l1.b, 0)
        z = l2.W @ h + l2.b
        np.testing.assert_allclose(forward(net, x), np.exp(z) / np.exp(z).sum(), atol=1e-15)

    @pytest.mark.parametrize("x", [np.zeros(4), np.array([1.0, np.nan, 0.0])])
    def test_rejects(self, x):
        with pytest.raises(ValueError):
            forward(random_net([3, 2]), x)

    def test_head_index_range(self):
        with pytest.raises(IndexError):
            head(random_net([3, 2]), 2, np.zeros(3))

    def test_trace_matches_heads(self, rng):
        net = random_net([2, 5, 2, 2])
        data = LabeledPointSet(rng.standard_normal((30, 2)), np.arange(30) % 2, 2)
        tr = trace_activations(net, data)
        assert tr.depth == 3 and len(tr.pre) == 3
        for i, c in enumerate(tr.clouds):
            np.testing.assert_array_equal(c, head(net, i, data.points))


class TestGradients:
    @pytest.mark.parametrize("seed", range(5))
    def test_central_differences(self, seed):
        g = np.random.Generator(np.random.PCG64(seed))
        net = random_net([3, 4, 3, 3], seed=seed, scale=0.8)
        X = g.standard_normal((7, 3))
        y = g.integers(0, 3, 7)
        _, ga = gradients(net, X, y)
        assert max_relative_error(ga, numeric_gradients(net, X, y)) <= 1e-4

    def test_loss_matches_cross_entropy(self, rng):
        net = random_net([2, 3, 2])
        X, y = rng.standard_normal((9, 2)), rng.integers(0, 2, 9)
        loss, _ = gradients(net, X, y)
        p = forward(net, X)
        assert loss == pytest.approx(-np.mean(np.log(p[np.arange(9), y])), rel=1e-12)


class TestInit:
    def test_median_bias_balances_units(self):
        data = generate(Annulus2D(points_per_class=200))
        net = init_network(NetworkSpec.from_dims([2, 5, 5, 2]), 0, data.points)
        H = data.points
        for layer in net.layers[:-1]:
            Z = layer.affine(H)
            np.testing.assert_allclose(np.mean(Z > 0, axis=0), 0.5, atol=0.01)
            H = layer(H)

    def test_seeded(self):
        spec = NetworkSpec.from_dims([2, 4, 2])
        a, b = init_network(spec, 3), init_network(spec, 3)
        assert all(np.array_equal(x.W, y.W) for x, y in zip(a.layers, b.layers))


@pytest.fixture(scope="module")
def blobs():
    g = np.random.Generator(np.random.PCG64(0))
    X = np.concatenate([g.normal(-2, 0.5, (50, 2)), g.normal(2, 0.5, (50, 2))])
    return LabeledPointSet(X, np.repeat([0, 1], 50), 2)


class TestTrain:
    def test_learns_blobs(self, blobs):
        net, hist = train(NetworkSpec.from_dims([2, 4, 2]), blobs, Hyperparams(epochs=300, lr=0.01))
        assert len(hist) == 300 and hist[-1] < hist[0]
        assert accuracy(net, blobs) == 1.0
        assert net.epochs == 300 and net.seed == 0

    def test_deterministic(self, blobs):
        hp = Hyperparams(seed=4, epochs=30, lr=0.01, batch_size=16)
        a, ha = train(NetworkSpec.from_dims([2, 4, 2]), blobs, hp)
        b, hb = train(NetworkSpec.from_dims([2, 4, 2]), blobs, hp)
        assert ha == hb
        assert all(np.array_equal(x.W, y.W) for x, y in zip(a.layers, b.layers))

    def test_warm_start_does_not_mutate(self, blobs):
        spec = NetworkSpec.from_dims([2, 4, 2])
        net0 = init_network(spec, 0)
        W0 = net0.layers[0].W.copy()
        train(spec, blobs, Hyperparams(epochs=5), net=net0)
        assert np.array_equal(net0.layers[0].W, W0)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence(self, blobs):
        with pytest.raises(DivergenceError):
            train(NetworkSpec.from_dims([2, 4, 2]), blobs, Hyperparams(epochs=20, lr=1e308))

    @pytest.mark.parametrize("dims", [[3, 2], [2, 3], [2, 2]])
    def test_shape_mismatch(self, blobs, dims):
        spec = NetworkSpec.from_dims(dims, last=Activation.SOFTMAX if dims != [2, 2] else Activation.RELU)
        with pytest.raises(ValueError):
            train(spec, blobs, Hyperparams(epochs=1))


class TestProperties:
    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10**6), width=st.integers(1, 5), n=st.integers(2, 4))
    def test_output_on_simplex(self, seed, width, n):
        net = random_net([3, width, n], seed=seed)
        g = np.random.Generator(np.random.PCG64(seed))
        P = forward(net, g.standard_normal((10, 3)))
        assert np.all(P >= 0)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10**6))
    def test_hidden_activations_nonnegative(self, seed):
        net = random_net([2, 4, 4, 2], seed=seed)
        g = np.random.Generator(np.random.PCG64(seed))
        data = LabeledPointSet(g.standard_normal((12, 2)), np.arange(12) % 2, 2)
        tr = trace_activations(net, data)
        assert all(np.all(c >= 0) for c in tr.clouds[1:-1])
