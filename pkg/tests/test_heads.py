import numpy as np
import pytest

from tabppo import heads as H
from tabppo import numcore as nc
from tabppo.encoder import EncoderConfig
from tabppo.seeding import substream
from test_encoder import make_batch, make_schema


def make_net(seed=0, **cfg_kw):
    cfg_kw.setdefault("embed_dim", 8)
    cfg_kw.setdefault("n_heads", 2)
    schema = make_schema()
    cfg = EncoderConfig(**cfg_kw)
    return H.PolicyValueNet.create(schema, cfg, substream(seed, "init")), schema


class TestForward:
    def test_probs_are_distributions(self, rng):
        net, schema = make_net()
        probs, value = net.forward(make_batch(rng, schema, b=7))
        assert probs.shape == (7, 3)
        assert value.shape == (7,)
        np.testing.assert_allclose(probs.data.sum(axis=1), 1.0, atol=1e-9)
        assert (probs.data > 0).all()

    def test_uniform_probs_when_policy_head_zeroed(self, rng):
        net, schema = make_net()
        net.params["policy_w"].data[:] = 0.0
        net.params["policy_b"].data[:] = 0.0
        probs, _ = net.forward(make_batch(rng, schema))
        np.testing.assert_allclose(probs.data, 1 / 3, atol=1e-12)

    def test_forward_deterministic(self, rng):
        net, schema = make_net()
        batch = make_batch(rng, schema)
        a, _ = net.forward(batch)
        b, _ = net.forward(batch)
        np.testing.assert_array_equal(a.data, b.data)

    def test_predict_matches_argmax(self, rng):
        net, schema = make_net()
        batch = make_batch(rng, schema)
        probs, _ = net.forward(batch)
        np.testing.assert_array_equal(
            net.predict(batch), np.argmax(probs.data, axis=1))


class TestStateDict:
    def test_round_trip(self, rng):
        net, schema = make_net(seed=0)
        other, _ = make_net(seed=1)
        batch = make_batch(rng, schema)
        other.load_state_dict(net.state_dict())
        np.testing.assert_array_equal(
            net.forward(batch)[0].data, other.forward(batch)[0].data)

    def test_missing_key_rejected(self):
        net, _ = make_net()
        state = net.state_dict()
        state.pop("policy_w")
        with pytest.raises(ValueError, match="policy_w"):
            net.load_state_dict(state)

    def test_shape_mismatch_rejected(self):
        net, _ = make_net()
        state = net.state_dict()
        state["policy_b"] = np.zeros(99)
        with pytest.raises(ValueError, match="policy_b"):
            net.load_state_dict(state)


class TestSampleAction:
    def test_frequencies_match_probabilities(self):
        p = np.array([0.5, 0.3, 0.15, 0.05])
        batch = np.tile(p, (100_000, 1))
        actions, log_probs = H.sample_action(batch, np.random.default_rng(0))
        freq = np.bincount(actions, minlength=4) / 100_000
        np.testing.assert_allclose(freq, p, atol=0.01)
        np.testing.assert_allclose(log_probs, np.log(p)[actions], atol=1e-12)

    def test_single_distribution_returns_scalars(self):
        rng = np.random.default_rng(3)
        action, log_prob = H.sample_action(np.array([0.2, 0.8]), rng)
        assert isinstance(action, int)
        assert log_prob == pytest.approx(np.log([0.2, 0.8][action]))

    def test_deterministic_given_rng_state(self):
        p = np.random.default_rng(5).dirichlet(np.ones(4), size=50)
        a1, _ = H.sample_action(p, np.random.default_rng(7))
        a2, _ = H.sample_action(p, np.random.default_rng(7))
        np.testing.assert_array_equal(a1, a2)

    def test_degenerate_distribution(self):
        rng = np.random.default_rng(0)
        batch = np.tile([0.0, 1.0, 0.0], (100, 1))
        actions, log_probs = H.sample_action(batch, rng)
        assert (actions == 1).all()
        np.testing.assert_allclose(log_probs, 0.0, atol=1e-12)

    def test_never_out_of_range(self):
        rng = np.random.default_rng(11)
        p = rng.dirichlet(np.ones(3), size=10_000)
        actions, _ = H.sample_action(p, rng)
        assert actions.min() >= 0 and actions.max() <= 2


class TestPredictRule:
    def test_tie_goes_to_lowest_index(self):
        assert H.predict(np.array([0.4, 0.4, 0.2])) == 0
        np.testing.assert_array_equal(
            H.predict(np.array([[0.5, 0.5], [0.1, 0.9]])), [0, 1])


def test_gradients_flow_to_both_heads(rng):
    net, schema = make_net()
    probs, value = net.forward(make_batch(rng, schema))
    (nc.total(nc.log(probs)) + nc.total(value)).backward()
    for name in ("policy_w", "policy_b", "value_w", "value_b", "embed_0"):
        assert np.abs(net.params[name].grad).max() > 0, name
